//! Configuration resolution: built-in defaults, then the JSON config file,
//! then command-line flags.

use std::path::Path;

use mext_core::harness::{self, Method};
use mext_core::{GeometryKind, Profile, ScenarioConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub profile: Profile,
    /// Master seed; copied into `scenario.rng_seed` and `train.seed`.
    pub seed: u64,
    pub num_samples: usize,
    pub split_ratio: f64,
    /// Compression ratio `M / N`.
    pub ratio: f64,
    pub hidden: Vec<usize>,
    pub jobs: usize,
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub sweep: SweepOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    /// Overrides the sweep's default grid when set.
    pub values: Option<Vec<f64>>,
    /// Overrides the sweep's default geometries when set.
    pub geometries: Option<Vec<GeometryKind>>,
    pub methods: Vec<Method>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            values: None,
            geometries: None,
            methods: vec![Method::Proposed, Method::Uniform],
        }
    }
}

impl CliConfig {
    pub fn defaults(profile: Profile) -> Self {
        let mut train = profile.train_config();
        train.log_every = 1000;
        CliConfig {
            profile,
            seed: 0,
            num_samples: harness::DEFAULT_NUM_SAMPLES,
            split_ratio: harness::DEFAULT_SPLIT_RATIO,
            ratio: 1.0 / 8.0,
            hidden: profile.hidden(),
            jobs: 1,
            scenario: ScenarioConfig::default(),
            train,
            sweep: SweepOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario.validate()?;
        self.train.validate()?;
        if self.jobs == 0 {
            return Err(CliError::config("jobs must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(CliError::config("hidden layer sizes must be positive"));
        }
        Ok(())
    }
}

/// Overrides taken from the command line; `None` leaves the lower layers
/// in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub num_samples: Option<usize>,
    pub ratio: Option<f64>,
    pub geometry: Option<GeometryKind>,
    pub jobs: Option<usize>,
}

pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<CliConfig, CliError> {
    let file_value = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            if !v.is_object() {
                return Err(CliError::config(format!("{}: expected a JSON object", path.display())));
            }
            Some(v)
        }
        None => None,
    };

    // The profile picks the defaults everything else is layered on.
    let profile = match (flags.profile, file_value.as_ref().and_then(|v| v.get("profile"))) {
        (Some(p), _) => p,
        (None, Some(p)) => serde_json::from_value(p.clone()).map_err(|e| CliError::config(format!("profile: {e}")))?,
        (None, None) => Profile::Desk,
    };
    let mut merged = serde_json::to_value(CliConfig::defaults(profile)).expect("config serializes");
    if let Some(v) = file_value {
        merge(&mut merged, v);
    }
    let mut cfg: CliConfig = serde_json::from_value(merged).map_err(|e| CliError::config(format!("config: {e}")))?;
    cfg.profile = profile;

    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(n) = flags.num_samples {
        cfg.num_samples = n;
    }
    if let Some(r) = flags.ratio {
        cfg.ratio = r;
    }
    if let Some(g) = flags.geometry {
        cfg.scenario.geometry = g;
        cfg.sweep.geometries = Some(vec![g]);
    }
    if let Some(j) = flags.jobs {
        cfg.jobs = j;
    }
    cfg.scenario.rng_seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Text appended to `--help`: the resolved defaults for each profile.
pub fn defaults_help() -> String {
    let mut out = String::from("Configuration file (--config) keys and their defaults:\n\n");
    for p in [Profile::Desk, Profile::Paper] {
        let cfg = CliConfig::defaults(p);
        out.push_str(&format!("profile \"{}\":\n", if p == Profile::Desk { "desk" } else { "paper" }));
        out.push_str(&serde_json::to_string_pretty(&cfg).expect("config serializes"));
        out.push_str("\n\n");
    }
    out.push_str("Precedence: defaults < config file < flags. MEXT_SEED sets the seed when --seed is absent.\n");
    out.push_str("The top-level seed replaces scenario.rng_seed and train.seed.\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
        let p = dir.path().join("c.json");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn precedence_defaults_file_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, r#"{"seed": 5, "ratio": 0.25, "train": {"n_iter": 40}, "scenario": {"n_antennas": 16}}"#);
        let cfg = resolve(Some(&p), &Overrides::default()).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.ratio, 0.25);
        assert_eq!(cfg.train.n_iter, 40);
        // Untouched keys keep the profile defaults.
        assert_eq!(cfg.train.eta_zeta, Profile::Desk.train_config().eta_zeta);
        assert_eq!(cfg.scenario.n_paths, ScenarioConfig::default().n_paths);

        let flags = Overrides {
            seed: Some(9),
            ratio: Some(0.5),
            ..Default::default()
        };
        let cfg = resolve(Some(&p), &flags).unwrap();
        assert_eq!((cfg.seed, cfg.ratio, cfg.train.seed, cfg.scenario.rng_seed), (9, 0.5, 9, 9));
    }

    #[test]
    fn profile_from_file_selects_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, r#"{"profile": "paper"}"#);
        let cfg = resolve(Some(&p), &Overrides::default()).unwrap();
        assert_eq!(cfg.hidden, Profile::Paper.hidden());
        assert_eq!(cfg.train.n_iter, 50_000);
        let flags = Overrides {
            profile: Some(Profile::Desk),
            ..Default::default()
        };
        assert_eq!(resolve(Some(&p), &flags).unwrap().train.n_iter, 5_000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for text in [r#"{"sede": 1}"#, r#"{"train": {"n_iters": 3}}"#, r#"{"scenario": {"paths": 3}}"#, "[1]"] {
            let p = write(&dir, text);
            let err = resolve(Some(&p), &Overrides::default()).unwrap_err();
            assert_eq!(err.code, crate::EXIT_CONFIG, "{text}");
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = resolve(Some(Path::new("/nonexistent/c.json")), &Overrides::default()).unwrap_err();
        assert_eq!(err.code, crate::EXIT_IO);
    }

    #[test]
    fn help_lists_every_default() {
        let help = defaults_help();
        for key in ["n_iter", "eta_zeta", "delay_spread", "num_samples", "hidden", "methods"] {
            assert!(help.contains(key), "{key}");
        }
    }
}
