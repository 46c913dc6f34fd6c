//! Dataset generation and the experiment sweeps.
//!
//! A sweep varies one quantity (compression ratio, downlink subcarrier or
//! uplink estimation noise), trains the learned-selection model and a
//! uniform-selection baseline at every point, and reports test MSE per
//! `(value, method, geometry)` cell.
//!
//! All cells of a sweep share the master seed, so they see the same path
//! draws, network initialization, batch order and noise shapes. Differences
//! between cells therefore come from the swept quantity alone.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, GeometryKind, ScenarioConfig};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::mlp;
use crate::seed::{rng_for, stream};
use crate::selection::to_one_based;
use crate::trainer::{self, Profile, SelectionMode, TrainConfig};

pub const DEFAULT_NUM_SAMPLES: usize = 20_000;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;
pub const OFDM_BANDWIDTH: f64 = 20e6;
pub const OFDM_SUBCARRIERS: usize = 64;

/// Ratios swept for the compression experiment.
pub const DEFAULT_RATIOS: [f64; 4] = [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0];
/// Downlink subcarriers (1-based) swept for the frequency-gap experiment.
pub const DEFAULT_GAP_SUBCARRIERS: [usize; 4] = [17, 33, 49, 62];
/// Uplink estimation noise variances swept for the noise experiment.
pub const DEFAULT_NOISE_VARIANCES: [f64; 4] = [1e-2, 1e-1, 1.0, 10.0];

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Frequency of 1-based OFDM subcarrier `k` above `carrier`.
pub fn subcarrier_frequency(carrier: f64, k: usize) -> f64 {
    carrier + (k.saturating_sub(1)) as f64 * (OFDM_BANDWIDTH / OFDM_SUBCARRIERS as f64)
}

/// Synthesizes one paired sample from its own path draw.
pub fn generate_sample(scenario: &ScenarioConfig, geometry: &channel::ArrayGeometry, index: u64) -> Result<Sample> {
    let paths = channel::sample_scenario(scenario, &mut rng_for(scenario.rng_seed, stream::SCENARIO, index))?;
    Ok(Sample {
        index,
        uplink: channel::synthesize_channel(&paths, geometry, scenario.f_uplink).entries,
        downlink: channel::synthesize_channel(&paths, geometry, scenario.f_downlink).entries,
    })
}

/// Draws `num_samples` pairs and splits them by a seeded shuffle.
pub fn generate_dataset(scenario: &ScenarioConfig, num_samples: usize, split_ratio: f64) -> Result<Split> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::config(format!("split ratio must lie in (0, 1), got {split_ratio}")));
    }
    if num_samples < 5 {
        return Err(Error::config("need at least 5 samples"));
    }
    scenario.validate()?;
    let geometry = scenario.array_geometry().map_err(|e| Error::Config(e.to_string()))?;
    let mut samples = (0..num_samples as u64)
        .into_par_iter()
        .map(|i| generate_sample(scenario, &geometry, i))
        .collect::<Result<Vec<_>>>()?;
    samples.shuffle(&mut rng_for(scenario.rng_seed, stream::SPLIT, 0));
    let n_train = ((num_samples as f64) * split_ratio).round() as usize;
    if n_train == 0 || n_train == num_samples {
        return Err(Error::config("split leaves one side empty"));
    }
    let test = samples.split_off(n_train);
    Ok(Split { train: samples, test })
}

/// Equally spaced antennas `round(k n / m)`, `k = 1..=m`, 0-based.
pub fn uniform_baseline_indices(m: usize, n: usize) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!("cannot pick {m} of {n} antennas")));
    }
    Ok((1..=m)
        .map(|k| {
            let one_based = ((k * n) as f64 / m as f64).round() as usize;
            one_based.clamp(1, n) - 1
        })
        .collect())
}

/// Corrupts every uplink with AWGN; noise for sample `i` is seeded by
/// `(seed, tag, i)`.
pub fn corrupt_uplinks(samples: &[Sample], variance: f64, seed: u64, tag: u64) -> Result<Vec<Sample>> {
    samples
        .iter()
        .map(|s| {
            let h = channel::ChannelVector {
                entries: s.uplink.clone(),
                frequency: 0.0,
            };
            let noisy = channel::add_awgn(&h, variance, &mut rng_for(seed, tag, s.index))?;
            Ok(Sample {
                index: s.index,
                uplink: noisy.entries,
                downlink: s.downlink.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    CompressionRatio,
    FrequencyGap,
    UplinkNoise,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::CompressionRatio => "compression_ratio",
            SweepKind::FrequencyGap => "frequency_gap",
            SweepKind::UplinkNoise => "uplink_noise",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compression_ratio" | "r" => Ok(SweepKind::CompressionRatio),
            "frequency_gap" | "gap" => Ok(SweepKind::FrequencyGap),
            "uplink_noise" | "noise" => Ok(SweepKind::UplinkNoise),
            other => Err(Error::invalid(format!("unknown sweep kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Uniform,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "uniform" => Ok(Method::Uniform),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Ratios, downlink frequencies in Hz, or noise variances.
    pub values: Vec<f64>,
    pub geometries: Vec<GeometryKind>,
    pub methods: Vec<Method>,
    /// Compression ratio for the gap and noise sweeps.
    pub ratio: f64,
    pub hidden: Vec<usize>,
    pub num_samples: usize,
    pub split_ratio: f64,
    /// Seeds data generation, training and noise.
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
}

impl SweepSpec {
    /// Default spec for `kind` at the given profile.
    pub fn new(kind: SweepKind, profile: Profile) -> Self {
        let scenario = ScenarioConfig::default();
        let (values, geometries) = match kind {
            SweepKind::CompressionRatio => (DEFAULT_RATIOS.to_vec(), vec![GeometryKind::Nula, GeometryKind::Ula]),
            SweepKind::FrequencyGap => (
                DEFAULT_GAP_SUBCARRIERS
                    .iter()
                    .map(|&k| subcarrier_frequency(scenario.f_downlink, k))
                    .collect(),
                vec![GeometryKind::Nula, GeometryKind::Ula],
            ),
            SweepKind::UplinkNoise => (DEFAULT_NOISE_VARIANCES.to_vec(), vec![GeometryKind::Ula]),
        };
        SweepSpec {
            kind,
            values,
            geometries,
            methods: vec![Method::Proposed, Method::Uniform],
            ratio: 1.0 / 8.0,
            hidden: profile.hidden(),
            num_samples: DEFAULT_NUM_SAMPLES,
            split_ratio: DEFAULT_SPLIT_RATIO,
            seed: 0,
            scenario,
            train: profile.train_config(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep has no values"));
        }
        if self.geometries.is_empty() || self.methods.is_empty() {
            return Err(Error::config("sweep needs at least one geometry and one method"));
        }
        let n = self.scenario.n_antennas;
        let ratios: Vec<f64> = match self.kind {
            SweepKind::CompressionRatio => self.values.clone(),
            _ => vec![self.ratio],
        };
        for r in ratios {
            antennas_for_ratio(r, n)?;
        }
        match self.kind {
            SweepKind::FrequencyGap if self.values.iter().any(|f| !(*f > 0.0)) => {
                Err(Error::config("downlink frequencies must be positive"))
            }
            SweepKind::UplinkNoise if self.values.iter().any(|v| !(*v >= 0.0)) => {
                Err(Error::config("noise variances must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    fn ratio_for(&self, value: f64) -> f64 {
        match self.kind {
            SweepKind::CompressionRatio => value,
            _ => self.ratio,
        }
    }
}

/// `M = r N`, which must be an integer in `1..N`.
pub fn antennas_for_ratio(r: f64, n: usize) -> Result<usize> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::config(format!("compression ratio must lie in (0, 1), got {r}")));
    }
    let m = r * n as f64;
    if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
        return Err(Error::config(format!("r = {r} does not give an integer number of antennas for N = {n}")));
    }
    Ok(m.round() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_kind: SweepKind,
    pub sweep_value: f64,
    pub method: Method,
    pub geometry: GeometryKind,
    /// `None` marks a failed cell.
    pub test_mse: Option<f64>,
    /// 1-based.
    pub selected_indices: Vec<usize>,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn find(&self, value: f64, method: Method, geometry: GeometryKind) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == value && r.method == method && r.geometry == geometry)
    }
}

struct Cell {
    geometry: GeometryKind,
    value: f64,
    method: Method,
    data: usize,
}

/// Runs every cell of the sweep on the current thread pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<ExperimentResult> {
    spec.validate()?;

    // Datasets depend on (geometry, value) only for gap sweeps.
    let mut datasets: Vec<(GeometryKind, Option<f64>, Split)> = Vec::new();
    let mut cells = Vec::new();
    for &geometry in &spec.geometries {
        for &value in &spec.values {
            let key = (spec.kind == SweepKind::FrequencyGap).then_some(value);
            let data = match datasets.iter().position(|(g, k, _)| *g == geometry && *k == key) {
                Some(i) => i,
                None => {
                    let mut scenario = spec.scenario.clone();
                    scenario.geometry = geometry;
                    scenario.rng_seed = spec.seed;
                    if let Some(f) = key {
                        scenario.f_downlink = f;
                    }
                    datasets.push((geometry, key, generate_dataset(&scenario, spec.num_samples, spec.split_ratio)?));
                    datasets.len() - 1
                }
            };
            for &method in &spec.methods {
                cells.push(Cell {
                    geometry,
                    value,
                    method,
                    data,
                });
            }
        }
    }

    let rows = cells
        .par_iter()
        .map(|cell| {
            let started = Instant::now();
            let outcome = run_cell(spec, cell, &datasets[cell.data].2);
            let seconds = started.elapsed().as_secs_f64();
            let (test_mse, selected_indices) = match outcome {
                Ok((mse, idx)) => (Some(mse), to_one_based(&idx)),
                Err(e) => {
                    log::warn!(
                        "{} {} {} = {}: cell failed: {e}",
                        cell.geometry,
                        cell.method.as_str(),
                        spec.kind.as_str(),
                        cell.value
                    );
                    (None, Vec::new())
                }
            };
            ResultRow {
                sweep_kind: spec.kind,
                sweep_value: cell.value,
                method: cell.method,
                geometry: cell.geometry,
                test_mse,
                selected_indices,
                seed: spec.seed,
                seconds,
            }
        })
        .collect();
    Ok(ExperimentResult { rows })
}

/// Same as [`run_sweep`] on a dedicated pool of `jobs` threads.
pub fn run_sweep_with_jobs(spec: &SweepSpec, jobs: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(spec))
}

fn run_cell(spec: &SweepSpec, cell: &Cell, data: &Split) -> Result<(f64, Vec<usize>)> {
    let n = spec.scenario.n_antennas;
    let m = antennas_for_ratio(spec.ratio_for(cell.value), n)?;
    let noisy;
    let (train, test) = if spec.kind == SweepKind::UplinkNoise {
        noisy = (
            corrupt_uplinks(&data.train, cell.value, spec.seed, stream::NOISE_TRAIN)?,
            corrupt_uplinks(&data.test, cell.value, spec.seed, stream::NOISE_TEST)?,
        );
        (&noisy.0[..], &noisy.1[..])
    } else {
        (&data.train[..], &data.test[..])
    };
    let specs = mlp::layer_specs(2 * m, &spec.hidden, 2 * n);
    let config = TrainConfig {
        seed: spec.seed,
        eval_every: 0,
        ..spec.train.clone()
    };
    let mode = match cell.method {
        Method::Proposed => SelectionMode::Learned,
        Method::Uniform => SelectionMode::Fixed(uniform_baseline_indices(m, n)?),
    };
    let outcome = trainer::train(train, test, &config, &specs, &mode)?;
    let mse = outcome
        .model
        .final_mse
        .ok_or_else(|| Error::InvalidState("training finished without an evaluation".into()))?;
    Ok((mse, outcome.model.selected_indices))
}

const CSV_HEADER: [&str; 8] = [
    "sweep_kind",
    "sweep_value",
    "method",
    "geometry",
    "test_mse",
    "selected_indices",
    "seed",
    "seconds",
];

pub fn export_results(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in &result.rows {
        let indices: Vec<String> = r.selected_indices.iter().map(usize::to_string).collect();
        w.write_record([
            r.sweep_kind.as_str().to_string(),
            r.sweep_value.to_string(),
            r.method.as_str().to_string(),
            r.geometry.as_str().to_string(),
            r.test_mse.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
            indices.join(";"),
            r.seed.to_string(),
            r.seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<ExperimentResult> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Format(format!("{}: unexpected header", path.display())));
    }
    let bad = |what: &str, v: &str| Error::Format(format!("bad {what} {v:?}"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Format("wrong number of columns".into()));
        }
        let float = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what, &rec[i]));
        rows.push(ResultRow {
            sweep_kind: rec[0].parse().map_err(|_| bad("sweep_kind", &rec[0]))?,
            sweep_value: float(1, "sweep_value")?,
            method: rec[2].parse().map_err(|_| bad("method", &rec[2]))?,
            geometry: rec[3].parse().map_err(|_| bad("geometry", &rec[3]))?,
            test_mse: if &rec[4] == "NA" { None } else { Some(float(4, "test_mse")?) },
            selected_indices: if rec[5].is_empty() {
                Vec::new()
            } else {
                rec[5]
                    .split(';')
                    .map(|s| s.parse().map_err(|_| bad("index", s)))
                    .collect::<Result<_>>()?
            },
            seed: rec[6].parse().map_err(|_| bad("seed", &rec[6]))?,
            seconds: float(7, "seconds")?,
        });
    }
    Ok(ExperimentResult { rows })
}

/// Writes the spec as pretty JSON next to `csv_path`.
pub fn write_spec_echo(spec: &SweepSpec, csv_path: &Path) -> Result<std::path::PathBuf> {
    let path = crate::dataset::sidecar_path(csv_path);
    let mut text = serde_json::to_string_pretty(spec)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Median of the finite values; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_examples() {
        let one = |m, n| to_one_based(&uniform_baseline_indices(m, n).unwrap());
        assert_eq!(one(4, 64), vec![16, 32, 48, 64]);
        assert_eq!(one(8, 64), vec![8, 16, 24, 32, 40, 48, 56, 64]);
        assert_eq!(one(6, 6), vec![1, 2, 3, 4, 5, 6]);
        assert!(uniform_baseline_indices(65, 64).is_err());
        assert!(uniform_baseline_indices(0, 64).is_err());
    }

    proptest! {
        #[test]
        fn uniform_indices_are_distinct_and_in_range(n in 1usize..200, m_seed in any::<usize>()) {
            let m = 1 + m_seed % n;
            let idx = uniform_baseline_indices(m, n).unwrap();
            prop_assert_eq!(idx.len(), m);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(idx.iter().all(|&k| k < n));
        }
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let scenario = ScenarioConfig {
            n_antennas: 8,
            rng_seed: 4,
            ..Default::default()
        };
        let split = generate_dataset(&scenario, 1000, 0.8).unwrap();
        assert_eq!(split.train.len(), 800);
        assert_eq!(split.test.len(), 200);
        let mut seen = vec![false; 1000];
        for s in split.train.iter().chain(&split.test) {
            assert!(!std::mem::replace(&mut seen[s.index as usize], true));
        }
        assert!(seen.iter().all(|&s| s));
        assert!(generate_dataset(&scenario, 1000, 1.0).is_err());
        assert!(generate_dataset(&scenario, 1000, 0.0).is_err());
        assert!(generate_dataset(&scenario, 4, 0.5).is_err());
    }

    #[test]
    fn samples_share_their_path_draw() {
        let scenario = ScenarioConfig {
            n_antennas: 16,
            rng_seed: 8,
            ..Default::default()
        };
        let geometry = scenario.array_geometry().unwrap();
        let split = generate_dataset(&scenario, 50, 0.8).unwrap();
        for s in split.train.iter().chain(&split.test) {
            let paths = channel::sample_scenario(&scenario, &mut rng_for(8, stream::SCENARIO, s.index)).unwrap();
            assert_eq!(channel::synthesize_channel(&paths, &geometry, scenario.f_downlink).entries, s.downlink);
            assert_eq!(channel::synthesize_channel(&paths, &geometry, scenario.f_uplink).entries, s.uplink);
        }
    }

    #[test]
    fn subcarrier_grid() {
        assert_eq!(subcarrier_frequency(2.5e9, 1), 2.5e9);
        assert_eq!(subcarrier_frequency(2.5e9, 17), 2.5e9 + 16.0 * 312_500.0);
        assert_eq!(subcarrier_frequency(2.5e9, 62), 2.5e9 + 61.0 * 312_500.0);
    }

    #[test]
    fn ratio_to_antennas() {
        assert_eq!(antennas_for_ratio(0.125, 64).unwrap(), 8);
        assert_eq!(antennas_for_ratio(1.0 / 16.0, 64).unwrap(), 4);
        assert!(antennas_for_ratio(0.1, 64).is_err());
        assert!(antennas_for_ratio(1.0, 64).is_err());
        assert!(antennas_for_ratio(0.0, 64).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    fn tiny_spec(kind: SweepKind) -> SweepSpec {
        let mut spec = SweepSpec::new(kind, Profile::Desk);
        spec.scenario.n_antennas = 16;
        spec.hidden = vec![8];
        spec.num_samples = 60;
        spec.train.n_iter = 10;
        spec.train.batch_size = 4;
        spec.geometries = vec![GeometryKind::Nula];
        spec.seed = 3;
        spec
    }

    #[test]
    fn compression_sweep_has_one_row_per_cell() {
        let spec = tiny_spec(SweepKind::CompressionRatio);
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.rows.len(), 8);
        for r in &res.rows {
            assert!(r.test_mse.is_some());
            let m = (r.sweep_value * 16.0).round() as usize;
            assert_eq!(r.selected_indices.len(), m);
            let mut idx = r.selected_indices.clone();
            idx.sort();
            idx.dedup();
            assert_eq!(idx.len(), m);
            assert!(idx.iter().all(|&k| (1..=16).contains(&k)));
        }
        let uni = res.find(0.25, Method::Uniform, GeometryKind::Nula).unwrap();
        assert_eq!(uni.selected_indices, vec![4, 8, 12, 16]);
    }

    #[test]
    fn sweeps_are_deterministic_apart_from_timing() {
        let spec = tiny_spec(SweepKind::FrequencyGap);
        let strip = |mut r: ExperimentResult| {
            r.rows.iter_mut().for_each(|row| row.seconds = 0.0);
            r
        };
        let a = strip(run_sweep(&spec).unwrap());
        let b = strip(run_sweep_with_jobs(&spec, 2).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_matches_clean_training() {
        let mut spec = tiny_spec(SweepKind::UplinkNoise);
        spec.values = vec![0.0];
        spec.methods = vec![Method::Proposed];
        let noisy = run_sweep(&spec).unwrap();

        let mut clean = spec.clone();
        clean.kind = SweepKind::FrequencyGap;
        clean.values = vec![clean.scenario.f_downlink];
        let clean = run_sweep(&clean).unwrap();
        assert_eq!(noisy.rows[0].test_mse, clean.rows[0].test_mse);
        assert_eq!(noisy.rows[0].selected_indices, clean.rows[0].selected_indices);
    }

    #[test]
    fn failed_cells_are_recorded() {
        let mut spec = tiny_spec(SweepKind::UplinkNoise);
        spec.values = vec![0.0];
        spec.methods = vec![Method::Proposed];
        spec.train.rho = f64::INFINITY;
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.rows[0].test_mse, None);
    }

    #[test]
    fn csv_round_trip_and_layout() {
        let result = ExperimentResult {
            rows: vec![
                ResultRow {
                    sweep_kind: SweepKind::CompressionRatio,
                    sweep_value: 1.0 / 16.0,
                    method: Method::Uniform,
                    geometry: GeometryKind::Nula,
                    test_mse: Some(0.123_456_789_012_345_67),
                    selected_indices: to_one_based(&uniform_baseline_indices(4, 64).unwrap()),
                    seed: 42,
                    seconds: 1.5,
                },
                ResultRow {
                    sweep_kind: SweepKind::UplinkNoise,
                    sweep_value: 0.1,
                    method: Method::Proposed,
                    geometry: GeometryKind::Ula,
                    test_mse: None,
                    selected_indices: vec![],
                    seed: 42,
                    seconds: 0.0,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        export_results(&result, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sweep_kind,sweep_value,method,geometry,test_mse,selected_indices,seed,seconds");
        assert_eq!(lines[1], "compression_ratio,0.0625,uniform,nula,0.12345678901234566,16;32;48;64,42,1.5");
        assert_eq!(lines[2], "uplink_noise,0.1,proposed,ula,NA,,42,0");
        assert_eq!(read_results(&p).unwrap(), result);
    }

    #[test]
    fn single_row_export_has_two_lines() {
        let result = ExperimentResult {
            rows: vec![ResultRow {
                sweep_kind: SweepKind::FrequencyGap,
                sweep_value: 2.505e9,
                method: Method::Proposed,
                geometry: GeometryKind::Ula,
                test_mse: Some(0.5),
                selected_indices: vec![3, 1],
                seed: 1,
                seconds: 2.25,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        export_results(&result, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 2);
    }
}
