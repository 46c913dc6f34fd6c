use std::path::{Path, PathBuf};

use mext_core::dataset::{self, Dataset, DatasetSidecar, Sample};
use mext_core::harness::{self, SweepKind, SweepSpec};
use mext_core::selection::to_one_based;
use mext_core::trainer::{self, SelectionMode};
use mext_core::{mlp, TrainedModel};

use crate::config::CliConfig;
use crate::CliError;

/// Which part of a dataset file to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Test,
    All,
}

pub fn cmd_gen_data(cfg: &CliConfig, out: &Path) -> Result<(), CliError> {
    let split = harness::generate_dataset(&cfg.scenario, cfg.num_samples, cfg.split_ratio)?;
    let (num_train, num_test) = (split.train.len() as u64, split.test.len() as u64);
    let data = Dataset {
        n_antennas: cfg.scenario.n_antennas,
        f_uplink: cfg.scenario.f_uplink,
        f_downlink: cfg.scenario.f_downlink,
        samples: split.train.into_iter().chain(split.test).collect(),
    };
    data.write(out)?;
    DatasetSidecar {
        format: "MEXD".into(),
        version: dataset::FORMAT_VERSION,
        seed: cfg.seed,
        num_samples: num_train + num_test,
        split_ratio: cfg.split_ratio,
        num_train,
        num_test,
        scenario: cfg.scenario.clone(),
    }
    .write(&dataset::sidecar_path(out))?;
    log::info!("wrote {} samples ({num_train} train, {num_test} test) to {}", num_train + num_test, out.display());
    Ok(())
}

/// Loads a dataset and its sidecar and returns `(train, test)`.
pub fn load_split(path: &Path) -> Result<(Vec<Sample>, Vec<Sample>, DatasetSidecar), CliError> {
    let data = Dataset::read(path)?;
    let sidecar = DatasetSidecar::read(&dataset::sidecar_path(path))?;
    let n_train = sidecar.num_train as usize;
    if sidecar.num_samples as usize != data.samples.len() || n_train > data.samples.len() {
        return Err(CliError::config(format!(
            "{}: sidecar describes {} samples, file holds {}",
            path.display(),
            sidecar.num_samples,
            data.samples.len()
        )));
    }
    if sidecar.scenario.n_antennas != data.n_antennas {
        return Err(CliError::config("sidecar and dataset disagree on N"));
    }
    let mut train = data.samples;
    let test = train.split_off(n_train);
    Ok((train, test, sidecar))
}

pub fn trace_path(model_out: &Path) -> PathBuf {
    model_out.with_extension("trace.csv")
}

pub fn cmd_train(cfg: &CliConfig, data_path: &Path, out: &Path) -> Result<TrainedModel, CliError> {
    let (train, test, _) = load_split(data_path)?;
    let n = train
        .first()
        .map(|s| s.uplink.len())
        .ok_or_else(|| CliError::config("dataset has no training samples"))?;
    if n != cfg.scenario.n_antennas {
        return Err(CliError::config(format!(
            "dataset has N = {n} antennas but the configuration says {}",
            cfg.scenario.n_antennas
        )));
    }
    let m = harness::antennas_for_ratio(cfg.ratio, n)?;
    let specs = mlp::layer_specs(2 * m, &cfg.hidden, 2 * n);
    let outcome = trainer::train(&train, &test, &cfg.train, &specs, &SelectionMode::Learned)?;
    trainer::save_model(&outcome.model, out)?;
    trainer::write_trace(&outcome.trace, &trace_path(out))?;

    if let Some(mse) = outcome.model.final_mse {
        println!("final test MSE: {mse}");
    }
    let idx: Vec<String> = to_one_based(&outcome.model.selected_indices)
        .iter()
        .map(usize::to_string)
        .collect();
    println!("selected antennas (M = {m}): {}", idx.join(";"));
    Ok(outcome.model)
}

pub fn cmd_eval(model_path: &Path, data_path: &Path, split: Split, csv_out: Option<&Path>) -> Result<f64, CliError> {
    let model = trainer::load_model(model_path)?;
    let (train, test, _) = load_split(data_path)?;
    let samples: Vec<Sample> = match split {
        Split::Train => train,
        Split::Test => test,
        Split::All => train.into_iter().chain(test).collect(),
    };
    if samples.is_empty() {
        return Err(CliError::config("selected split is empty"));
    }
    if samples[0].uplink.len() != model.n() {
        return Err(CliError::config(format!(
            "model expects N = {} antennas, dataset has {}",
            model.n(),
            samples[0].uplink.len()
        )));
    }
    let mse = trainer::evaluate(&model, &samples)?;
    println!("{mse}");
    if let Some(p) = csv_out {
        let text = format!("split,num_samples,test_mse\n{split:?},{},{mse}\n", samples.len()).to_lowercase();
        std::fs::write(p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
    }
    Ok(mse)
}

pub fn sweep_spec(cfg: &CliConfig, kind: SweepKind) -> SweepSpec {
    let mut spec = SweepSpec::new(kind, cfg.profile);
    if let Some(v) = &cfg.sweep.values {
        spec.values = v.clone();
    }
    if let Some(g) = &cfg.sweep.geometries {
        spec.geometries = g.clone();
    }
    spec.methods = cfg.sweep.methods.clone();
    spec.ratio = cfg.ratio;
    spec.hidden = cfg.hidden.clone();
    spec.num_samples = cfg.num_samples;
    spec.split_ratio = cfg.split_ratio;
    spec.seed = cfg.seed;
    spec.scenario = cfg.scenario.clone();
    spec.train = cfg.train.clone();
    spec
}

pub fn cmd_sweep(cfg: &CliConfig, kind: SweepKind, out: &Path) -> Result<harness::ExperimentResult, CliError> {
    let spec = sweep_spec(cfg, kind);
    let result = harness::run_sweep_with_jobs(&spec, cfg.jobs)?;
    harness::export_results(&result, out)?;
    harness::write_spec_echo(&spec, out)?;
    for row in &result.rows {
        let mse = row.test_mse.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
        log::info!(
            "{} {} {} = {}: {mse}",
            row.geometry,
            row.method.as_str(),
            kind.as_str(),
            row.sweep_value
        );
    }
    Ok(result)
}
