//! Geometric multipath channel model.
//!
//! A channel is a superposition of plane waves impinging on a linear array.
//! Each path carries a complex gain, a propagation delay and a direction of
//! arrival; uplink and downlink share the same paths and differ only in the
//! carrier frequency at which they are evaluated.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Base NULA spacing pattern in units of the uplink wavelength: fifteen
/// irregular gaps, each scaled by 0.2, tiled along the array.
pub const NULA_BASE_SPACINGS: [f64; 15] = [
    0.2 * (2.0 / 3.0),
    0.2 * (6.0 / 5.0),
    0.2 * (11.0 / 7.0),
    0.2 * (1.0 / 8.0),
    0.2 * (4.0 / 9.0),
    0.2 * (10.0 / 11.0),
    0.2 * (5.0 / 12.0),
    0.2 * (3.0 / 13.0),
    0.2 * (17.0 / 15.0),
    0.2 * (3.0 / 16.0),
    0.2 * (1.0 / 18.0),
    0.2 * (7.0 / 20.0),
    0.2 * (5.0 / 21.0),
    0.2 * (1.0 / 22.0),
    0.2 * (4.0 / 25.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Ula,
    Nula,
}

impl GeometryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeometryKind::Ula => "ula",
            GeometryKind::Nula => "nula",
        }
    }
}

impl std::fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ula" => Ok(GeometryKind::Ula),
            "nula" => Ok(GeometryKind::Nula),
            other => Err(Error::invalid(format!("unknown geometry {other:?}"))),
        }
    }
}

/// Antenna positions along the array axis, in meters from the first element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
    carrier_wavelength_uplink: f64,
    kind: GeometryKind,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<f64>, carrier_wavelength_uplink: f64, kind: GeometryKind) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid("array needs at least two antennas"));
        }
        if positions[0] != 0.0 {
            return Err(Error::invalid("first antenna must sit at the origin"));
        }
        if positions.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::invalid("antenna positions must be strictly increasing"));
        }
        if !(carrier_wavelength_uplink > 0.0) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        Ok(ArrayGeometry {
            positions,
            carrier_wavelength_uplink,
            kind,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn carrier_wavelength_uplink(&self) -> f64 {
        self.carrier_wavelength_uplink
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }
}

/// Uniform linear array with `spacing_wavelengths` between neighbours.
pub fn ula_positions(n: usize, spacing_wavelengths: f64, wavelength: f64) -> Result<ArrayGeometry> {
    if n < 2 {
        return Err(Error::invalid(format!("ULA needs n >= 2, got {n}")));
    }
    if !(spacing_wavelengths > 0.0) || !(wavelength > 0.0) {
        return Err(Error::invalid("ULA spacing and wavelength must be positive"));
    }
    let step = spacing_wavelengths * wavelength;
    let positions = (0..n).map(|k| k as f64 * step).collect();
    ArrayGeometry::new(positions, wavelength, GeometryKind::Ula)
}

/// Non-uniform linear array: `base_spacings` (in wavelengths) is tiled
/// cyclically until `n - 1` gaps exist, then prefix-summed.
pub fn nula_positions(n: usize, base_spacings: &[f64], wavelength: f64) -> Result<ArrayGeometry> {
    if n < 2 {
        return Err(Error::invalid(format!("NULA needs n >= 2, got {n}")));
    }
    if base_spacings.is_empty() {
        return Err(Error::invalid("NULA base spacing pattern is empty"));
    }
    if base_spacings.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid("NULA spacings must be strictly positive"));
    }
    if !(wavelength > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    let mut positions = Vec::with_capacity(n);
    let mut acc = 0.0;
    positions.push(0.0);
    for gap in base_spacings.iter().cycle().take(n - 1) {
        acc += gap * wavelength;
        positions.push(acc);
    }
    ArrayGeometry::new(positions, wavelength, GeometryKind::Nula)
}

/// Per-antenna phase response to a plane wave from `angle` at `frequency`.
pub fn steering_vector(geometry: &ArrayGeometry, angle: f64, frequency: f64) -> Vec<Complex64> {
    debug_assert!(angle.abs() <= FRAC_PI_2);
    let k = -TAU * frequency * angle.sin() / SPEED_OF_LIGHT;
    geometry
        .positions
        .iter()
        .map(|&d| Complex64::from_polar(1.0, k * d))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Linear amplitude.
    pub gain: f64,
    /// Radians in `[0, 2pi)`.
    pub phase: f64,
    /// Seconds.
    pub delay: f64,
    /// Direction of arrival, radians in `(-pi/2, pi/2)`.
    pub angle: f64,
}

impl Path {
    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() || self.gain < 0.0 {
            return Err(Error::invalid("path gain must be finite and non-negative"));
        }
        if !(self.delay >= 0.0) || !self.delay.is_finite() {
            return Err(Error::invalid("path delay must be non-negative"));
        }
        if !(self.angle.abs() < FRAC_PI_2) {
            return Err(Error::invalid("path angle must lie in (-pi/2, pi/2)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("a path set needs at least one path"));
        }
        for p in &paths {
            p.validate()?;
        }
        Ok(PathSet { paths })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Channel coefficients across the array at one carrier frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub entries: Vec<Complex64>,
    pub frequency: f64,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.entries.iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Sum of the paths' plane waves evaluated at `frequency`. Path gains are
/// frequency-flat.
pub fn synthesize_channel(paths: &PathSet, geometry: &ArrayGeometry, frequency: f64) -> ChannelVector {
    let mut entries = vec![Complex64::new(0.0, 0.0); geometry.len()];
    for p in &paths.paths {
        let coeff = Complex64::from_polar(p.gain, p.phase - TAU * frequency * p.delay);
        let k = -TAU * frequency * p.angle.sin() / SPEED_OF_LIGHT;
        for (h, &d) in entries.iter_mut().zip(&geometry.positions) {
            *h += coeff * Complex64::from_polar(1.0, k * d);
        }
    }
    ChannelVector { entries, frequency }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainDistribution {
    /// Rayleigh amplitudes (moduli of unit complex Gaussians).
    Rayleigh,
    /// All paths equally strong.
    Equal,
}

/// Parameters of the synthetic propagation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_antennas: usize,
    pub n_paths: usize,
    /// Hz.
    pub f_uplink: f64,
    /// Hz.
    pub f_downlink: f64,
    pub geometry: GeometryKind,
    /// ULA neighbour spacing in uplink wavelengths.
    pub ula_spacing: f64,
    /// NULA gap pattern in uplink wavelengths.
    pub nula_spacings: Vec<f64>,
    /// Angles are drawn uniformly on `(-angle_spread, angle_spread)` radians.
    pub angle_spread: f64,
    /// Delays are drawn uniformly on `[0, delay_spread]` seconds.
    pub delay_spread: f64,
    pub gain_distribution: GainDistribution,
    pub rng_seed: u64,
}

/// Default excess-delay spread (seconds).
pub const DEFAULT_DELAY_SPREAD: f64 = 3e-9;

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_antennas: 64,
            n_paths: 5,
            f_uplink: 2.4e9,
            f_downlink: 2.5e9,
            geometry: GeometryKind::Nula,
            ula_spacing: 0.5,
            nula_spacings: NULA_BASE_SPACINGS.to_vec(),
            angle_spread: PI / 3.0,
            delay_spread: DEFAULT_DELAY_SPREAD,
            gain_distribution: GainDistribution::Rayleigh,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas < 2 {
            return Err(Error::config("n_antennas must be at least 2"));
        }
        if self.n_paths == 0 {
            return Err(Error::config("n_paths must be at least 1"));
        }
        if !(self.f_uplink > 0.0) || !(self.f_downlink > 0.0) {
            return Err(Error::config("carrier frequencies must be positive"));
        }
        if !(self.angle_spread >= 0.0) || self.angle_spread >= FRAC_PI_2 {
            return Err(Error::config("angle_spread must lie in [0, pi/2)"));
        }
        if !(self.delay_spread >= 0.0) || !self.delay_spread.is_finite() {
            return Err(Error::config("delay_spread must be non-negative"));
        }
        Ok(())
    }

    pub fn wavelength_uplink(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_uplink
    }

    pub fn array_geometry(&self) -> Result<ArrayGeometry> {
        let lambda = self.wavelength_uplink();
        match self.geometry {
            GeometryKind::Ula => ula_positions(self.n_antennas, self.ula_spacing, lambda),
            GeometryKind::Nula => nula_positions(self.n_antennas, &self.nula_spacings, lambda),
        }
    }
}

/// Draws one set of propagation paths, with total power `sum gain^2 = 1`.
pub fn sample_scenario<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<PathSet> {
    config.validate()?;
    let mut paths = Vec::with_capacity(config.n_paths);
    for _ in 0..config.n_paths {
        let angle = if config.angle_spread > 0.0 {
            rng.random_range(-config.angle_spread..config.angle_spread)
        } else {
            0.0
        };
        let delay = if config.delay_spread > 0.0 {
            rng.random_range(0.0..=config.delay_spread)
        } else {
            0.0
        };
        let phase = rng.random_range(0.0..TAU);
        let gain = match config.gain_distribution {
            GainDistribution::Rayleigh => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                (0.5 * (re * re + im * im)).sqrt()
            }
            GainDistribution::Equal => 1.0,
        };
        paths.push(Path {
            gain,
            phase,
            delay,
            angle,
        });
    }
    let power: f64 = paths.iter().map(|p| p.gain * p.gain).sum();
    if power > 0.0 {
        let scale = power.sqrt().recip();
        for p in &mut paths {
            p.gain *= scale;
        }
    } else {
        // All draws underflowed; fall back to equal power.
        let g = (config.n_paths as f64).sqrt().recip();
        for p in &mut paths {
            p.gain = g;
        }
    }
    PathSet::new(paths)
}

/// Adds circularly-symmetric complex Gaussian noise of per-entry variance
/// `noise_variance` (half in each quadrature component).
///
/// Noise is drawn as unit normals scaled by the standard deviation, so a
/// fixed seed yields the same noise shape at every variance.
pub fn add_awgn<R: Rng + ?Sized>(h: &ChannelVector, noise_variance: f64, rng: &mut R) -> Result<ChannelVector> {
    if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
        return Err(Error::invalid(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    let sigma = (0.5 * noise_variance).sqrt();
    let entries = h
        .entries
        .iter()
        .map(|&x| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            x + Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    Ok(ChannelVector {
        entries,
        frequency: h.frequency,
    })
}
