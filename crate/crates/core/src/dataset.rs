//! Paired uplink/downlink channel samples and their on-disk format.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic      4 bytes  "MEXD"
//! version    u32
//! N          u32
//! samples    u64
//! f_uplink   f64
//! f_downlink f64
//! then per sample: 2N f64 uplink (re, im interleaved), 2N f64 downlink
//! ```
//!
//! A JSON sidecar next to the binary file records how the samples were made.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MEXD";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Generation index; seeds this sample's path draw and any noise on it.
    pub index: u64,
    pub uplink: Vec<Complex64>,
    pub downlink: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_antennas: usize,
    pub f_uplink: f64,
    pub f_downlink: f64,
    pub samples: Vec<Sample>,
}

/// Provenance record written next to a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSidecar {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub num_samples: u64,
    pub split_ratio: f64,
    /// The first `num_train` samples in the file form the training split.
    pub num_train: u64,
    pub num_test: u64,
    pub scenario: ScenarioConfig,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Dataset {
    pub fn write(&self, path: &Path) -> Result<()> {
        let n = u32::try_from(self.n_antennas).map_err(|_| Error::invalid("too many antennas"))?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        w.write_all(&self.f_uplink.to_le_bytes())?;
        w.write_all(&self.f_downlink.to_le_bytes())?;
        for s in &self.samples {
            if s.uplink.len() != self.n_antennas || s.downlink.len() != self.n_antennas {
                return Err(Error::invalid("sample length does not match dataset N"));
            }
            for c in s.uplink.iter().chain(&s.downlink) {
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
        if header[..4] != MAGIC {
            return Err(Error::Format(format!("{}: bad magic", path.display())));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let n = u32_at(8) as usize;
        let count = u64_at(12);
        let f_uplink = f64_at(20);
        let f_downlink = f64_at(28);
        if n == 0 {
            return Err(Error::Format("dataset has zero antennas".into()));
        }

        let mut buf = vec![0u8; 4 * n * 8];
        let mut samples = Vec::with_capacity(count.min(1 << 20) as usize);
        for index in 0..count {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format(format!("{}: truncated at sample {index}", path.display())))?;
            let vals: Vec<f64> = buf
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let complex = |v: &[f64]| v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
            samples.push(Sample {
                index,
                uplink: complex(&vals[..2 * n]),
                downlink: complex(&vals[2 * n..]),
            });
        }
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(Error::Format(format!("{}: trailing bytes", path.display())));
        }
        Ok(Dataset {
            n_antennas: n,
            f_uplink,
            f_downlink,
            samples,
        })
    }
}

impl DatasetSidecar {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}
