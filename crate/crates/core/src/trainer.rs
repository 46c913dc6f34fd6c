//! Joint training of the selection logits and the extrapolation network.
//!
//! Each iteration draws a mini-batch, samples a hard selection per example
//! (Gumbel-Max with exclusion), runs the network on the real-ified observed
//! entries and minimizes `mse + rho * entropy`. The network is updated with
//! Adam at `eta_omega`; the logits receive the straight-through gradient and
//! their own Adam state at `eta_zeta`. The softmax temperature of the
//! relaxation anneals linearly from `tau_start` to `tau_end`.

use std::path::Path;

use num_complex::Complex64;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mlp::{self, Activation, Layer, LayerSpec, NetworkParams};
use crate::seed::{rng_for, stream};
use crate::selection::{self, SelectionLogits, SelectionMatrix};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_iter: usize,
    pub batch_size: usize,
    pub eta_zeta: f64,
    pub eta_omega: f64,
    pub rho: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Quadratic coefficient of the logit initialization.
    pub init_beta: f64,
    /// Standard deviation of the logit initialization jitter.
    pub init_gamma_std: f64,
    /// Iterations between evaluations on the monitor set; 0 disables.
    pub eval_every: usize,
    /// Iterations between progress log lines; 0 disables.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_iter: 50_000,
            batch_size: 32,
            eta_zeta: 5e-4,
            eta_omega: 1e-4,
            rho: 1e-8,
            tau_start: 5.0,
            tau_end: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            init_beta: selection::DEFAULT_BETA,
            init_gamma_std: selection::DEFAULT_GAMMA_STD,
            eval_every: 500,
            log_every: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter < 2 {
            return Err(Error::config("n_iter must be at least 2"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.tau_end > 0.0) || !(self.tau_end <= self.tau_start) || !self.tau_start.is_finite() {
            return Err(Error::config("need 0 < tau_end <= tau_start"));
        }
        // Zero rates are allowed: they freeze one side of the model.
        if !(self.eta_zeta >= 0.0) || !(self.eta_omega >= 0.0) {
            return Err(Error::config("learning rates must be non-negative"));
        }
        if !(self.rho >= 0.0) {
            return Err(Error::config("rho must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::config("invalid Adam hyper-parameters"));
        }
        if !(self.init_gamma_std >= 0.0) {
            return Err(Error::config("init_gamma_std must be non-negative"));
        }
        if self.eta_zeta < self.eta_omega {
            log::warn!(
                "eta_zeta ({}) below eta_omega ({}); selection will adapt slower than the network",
                self.eta_zeta,
                self.eta_omega
            );
        }
        Ok(())
    }
}

/// Sharper logit initialization for the short desk budget: each row starts
/// concentrated near its evenly spaced antenna.
pub const DESK_BETA: f64 = -1.0;

/// Preset network size and training budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full-size hidden layers and iteration budget.
    Paper,
    /// Small hidden layers, short budget and a sharper logit initialization.
    Desk,
}

impl Profile {
    pub fn hidden(self) -> Vec<usize> {
        match self {
            Profile::Paper => mlp::PAPER_HIDDEN.to_vec(),
            Profile::Desk => mlp::DESK_HIDDEN.to_vec(),
        }
    }

    pub fn train_config(self) -> TrainConfig {
        match self {
            Profile::Paper => TrainConfig::default(),
            Profile::Desk => TrainConfig {
                n_iter: 5_000,
                eta_zeta: 5e-3,
                eta_omega: 5e-4,
                init_beta: DESK_BETA,
                ..TrainConfig::default()
            },
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::invalid(format!("unknown profile {other:?}"))),
        }
    }
}

/// Linear annealing: `tau_start` at iteration 1, `tau_end` at `n_iter`.
pub fn temperature_at(i: usize, config: &TrainConfig) -> Result<f64> {
    if i == 0 || i > config.n_iter || config.n_iter < 2 {
        return Err(Error::invalid(format!("iteration {i} outside 1..={}", config.n_iter)));
    }
    let frac = (i - 1) as f64 / (config.n_iter - 1) as f64;
    Ok(config.tau_start - (config.tau_start - config.tau_end) * frac)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl From<&TrainConfig> for AdamHyper {
    fn from(c: &TrainConfig) -> Self {
        AdamHyper {
            beta1: c.adam_beta1,
            beta2: c.adam_beta2,
            eps: c.adam_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    fn update<'a>(&mut self, pairs: impl Iterator<Item = (&'a mut f64, f64)>, eta: f64, h: AdamHyper) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - h.beta1.powi(t);
        let c2 = 1.0 - h.beta2.powi(t);
        for ((theta, g), (m, v)) in pairs.zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = h.beta1 * *m + (1.0 - h.beta1) * g;
            *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
            if eta != 0.0 {
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *theta -= eta * m_hat / (v_hat.sqrt() + h.eps);
            }
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], eta: f64, hyper: AdamHyper) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid("Adam state, parameter and gradient lengths differ"));
    }
    state.update(params.iter_mut().zip(grads.iter().copied()), eta, hyper);
    Ok(())
}

fn adam_step_network(state: &mut AdamState, params: &mut NetworkParams, grads: &NetworkParams, eta: f64, hyper: AdamHyper) {
    let pairs = params.layers.iter_mut().zip(&grads.layers).flat_map(|(p, g)| {
        p.weights
            .as_mut_slice()
            .iter_mut()
            .zip(g.weights.as_slice().iter().copied())
            .chain(p.biases.iter_mut().zip(g.biases.iter().copied()))
    });
    state.update(pairs, eta, hyper);
}

/// How the observed antennas are chosen during training.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionMode {
    /// Learn the pattern jointly with the network.
    Learned,
    /// Keep a fixed set of antennas (0-based).
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub logits: SelectionLogits,
    pub network: NetworkParams,
    /// 0-based antennas used at evaluation time.
    pub selected_indices: Vec<usize>,
    pub config: TrainConfig,
    pub final_mse: Option<f64>,
}

impl TrainedModel {
    pub fn n(&self) -> usize {
        self.logits.n()
    }

    pub fn m(&self) -> usize {
        self.logits.m()
    }

    pub fn selection(&self) -> SelectionMatrix {
        SelectionMatrix::from_indices(self.selected_indices.clone(), self.n()).expect("validated at construction")
    }

    /// Extrapolated downlink for one uplink observation vector (length N).
    pub fn predict(&self, uplink: &[Complex64]) -> Result<Vec<Complex64>> {
        let observed = selection::subsample(&self.selection(), uplink)?;
        let (y, _) = mlp::forward(&self.network, &mlp::complex_to_real(&observed))?;
        mlp::real_to_complex(&y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub temperature: f64,
    pub loss: f64,
    pub mse: f64,
    pub entropy: f64,
    pub eval_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub trace: Vec<TraceRow>,
}

struct Example {
    selection: SelectionMatrix,
    noise: Option<selection::GumbelNoise>,
    cache: mlp::ForwardCache,
}

/// Runs the joint optimization.
///
/// `monitor` is evaluated every `eval_every` iterations and after the last
/// one; its final value becomes `final_mse`. It may be empty.
pub fn train(
    train_set: &[Sample],
    monitor: &[Sample],
    config: &TrainConfig,
    specs: &[LayerSpec],
    mode: &SelectionMode,
) -> Result<TrainOutcome> {
    config.validate()?;
    mlp::validate_specs(specs).map_err(|e| Error::Config(e.to_string()))?;
    if train_set.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let n = train_set[0].uplink.len();
    if train_set.iter().chain(monitor).any(|s| s.uplink.len() != n || s.downlink.len() != n) {
        return Err(Error::config("samples disagree on the number of antennas"));
    }
    let in_dim = specs[0].in_dim;
    if in_dim % 2 != 0 {
        return Err(Error::config("network input must be twice the number of observed antennas"));
    }
    let m = in_dim / 2;
    if m == 0 || m >= n {
        return Err(Error::config(format!("need 0 < M < N, got M={m}, N={n}")));
    }
    if specs[specs.len() - 1].out_dim != 2 * n {
        return Err(Error::config(format!("network must output 2N = {} values", 2 * n)));
    }

    let seed = config.seed;
    let mut logits = match mode {
        SelectionMode::Learned => selection::init_logits(
            m,
            n,
            config.init_beta,
            config.init_gamma_std,
            &mut rng_for(seed, stream::LOGITS, 0),
        )?,
        SelectionMode::Fixed(idx) => {
            if idx.len() != m {
                return Err(Error::config(format!("fixed selection has {} antennas, network expects {m}", idx.len())));
            }
            SelectionLogits::pinned(idx, n).map_err(|e| Error::Config(e.to_string()))?
        }
    };
    let learn_selection = matches!(mode, SelectionMode::Learned);
    let mut network = mlp::init_network(specs, &mut rng_for(seed, stream::NETWORK, 0))?;
    let mut batch_rng = rng_for(seed, stream::BATCH, 0);
    let mut gumbel_rng = rng_for(seed, stream::GUMBEL, 0);
    let hyper = AdamHyper::from(config);
    let mut adam_omega = AdamState::new(network.num_params());
    let mut adam_zeta = AdamState::new(m * n);
    let batch = config.batch_size.min(train_set.len());
    let fixed = match mode {
        SelectionMode::Fixed(idx) => Some(SelectionMatrix::from_indices(idx.clone(), n)?),
        SelectionMode::Learned => None,
    };

    let mut trace = Vec::with_capacity(config.n_iter);
    let mut final_mse = None;
    let mut examples: Vec<Example> = Vec::with_capacity(batch);
    let mut predictions = Vec::with_capacity(batch);
    let mut targets = Vec::with_capacity(batch);

    for it in 1..=config.n_iter {
        let tau = temperature_at(it, config)?;
        let picks = index::sample(&mut batch_rng, train_set.len(), batch).into_vec();

        examples.clear();
        predictions.clear();
        targets.clear();
        for &b in &picks {
            let sample = &train_set[b];
            let (sel, noise) = match &fixed {
                Some(sel) => (sel.clone(), None),
                None => {
                    let g = selection::sample_gumbel(m, n, &mut gumbel_rng);
                    (selection::hard_select(&logits, &g)?, Some(g))
                }
            };
            let x = mlp::complex_to_real(&selection::subsample(&sel, &sample.uplink)?);
            let (y, cache) = mlp::forward(&network, &x)?;
            predictions.push(mlp::real_to_complex(&y)?);
            targets.push(sample.downlink.clone());
            examples.push(Example {
                selection: sel,
                noise,
                cache,
            });
        }

        let (mse, out_grads) = mlp::mse_loss(&predictions, &targets)?;
        let (entropy, entropy_grad) = selection::entropy_with_grad(&logits);
        let loss = mse + config.rho * entropy;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "iteration {it}: tau={tau}, batch={picks:?}, mse={mse}, entropy={entropy}, rho={}, loss={loss}",
                config.rho
            )));
        }

        let mut net_grads = network.zeros_like();
        let mut zeta_grad = Matrix::zeros(m, n);
        let mut grad_soft = Matrix::zeros(m, n);
        for ((ex, g_out), &b) in examples.iter().zip(&out_grads).zip(&picks) {
            let grad_y = mlp::complex_to_real(g_out);
            let grad_x = mlp::backward_acc(&network, &ex.cache, &grad_y, &mut net_grads)?;
            if learn_selection {
                // x = [Re(S h); Im(S h)], so dL/dS[m][k] = gx_re[m] Re h[k] + gx_im[m] Im h[k].
                let h = &train_set[b].uplink;
                for row in 0..m {
                    let (gr, gi) = (grad_x[row], grad_x[m + row]);
                    for (dst, hk) in grad_soft.row_mut(row).iter_mut().zip(h) {
                        *dst = gr * hk.re + gi * hk.im;
                    }
                }
                let noise = ex.noise.as_ref().expect("learned mode draws noise");
                let soft = selection::soft_select(&logits, noise, tau, &ex.selection.exclusion_mask())?;
                selection::accumulate_selection_grad(&grad_soft, &soft, &mut zeta_grad);
            }
        }

        adam_step_network(&mut adam_omega, &mut network, &net_grads, config.eta_omega, hyper);
        if learn_selection {
            for (g, e) in zeta_grad.as_mut_slice().iter_mut().zip(entropy_grad.as_slice()) {
                *g += config.rho * e;
            }
            adam_step(
                &mut adam_zeta,
                logits.values_mut().as_mut_slice(),
                zeta_grad.as_slice(),
                config.eta_zeta,
                hyper,
            )?;
        }

        let last = it == config.n_iter;
        let eval_mse = if !monitor.is_empty() && (last || (config.eval_every > 0 && it % config.eval_every == 0)) {
            let idx = selection::deterministic_indices(&logits);
            Some(evaluate_with(&network, &idx, monitor)?)
        } else {
            None
        };
        if last {
            final_mse = eval_mse;
        }
        if config.log_every > 0 && (it % config.log_every == 0 || last) {
            log::info!("iter {it:>6} tau {tau:.3} loss {loss:.6e} mse {mse:.6e} entropy {entropy:.4}");
        }
        trace.push(TraceRow {
            iteration: it,
            temperature: tau,
            loss,
            mse,
            entropy,
            eval_mse,
        });
    }

    let selected_indices = selection::deterministic_indices(&logits);
    Ok(TrainOutcome {
        model: TrainedModel {
            logits,
            network,
            selected_indices,
            config: config.clone(),
            final_mse,
        },
        trace,
    })
}

fn evaluate_with(network: &NetworkParams, indices: &[usize], test_set: &[Sample]) -> Result<f64> {
    if test_set.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let mut total = 0.0;
    for s in test_set {
        let observed: Vec<Complex64> = indices
            .iter()
            .map(|&k| s.uplink.get(k).copied())
            .collect::<Option<_>>()
            .ok_or_else(|| Error::invalid("test sample shorter than selected antenna index"))?;
        let (y, _) = mlp::forward(network, &mlp::complex_to_real(&observed))?;
        let pred = mlp::real_to_complex(&y)?;
        if pred.len() != s.downlink.len() {
            return Err(Error::invalid("network output does not match target length"));
        }
        let err: f64 = pred.iter().zip(&s.downlink).map(|(a, b)| (a - b).norm_sqr()).sum();
        total += err / s.downlink.len() as f64;
    }
    Ok(total / test_set.len() as f64)
}

/// Mean per-antenna squared error over `test_set`, using the model's
/// noise-free selection.
pub fn evaluate(model: &TrainedModel, test_set: &[Sample]) -> Result<f64> {
    evaluate_with(&model.network, &model.selected_indices, test_set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    /// Row-major `out_dim x in_dim`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// JSON model file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub r: f64,
    pub layer_specs: Vec<LayerSpec>,
    /// Row-major `M x N`.
    pub logits: Vec<f64>,
    layers: Vec<LayerRecord>,
    /// 1-based.
    pub selected_indices: Vec<usize>,
    pub train_config: TrainConfig,
    pub final_mse: Option<f64>,
    pub seed: u64,
}

impl From<&TrainedModel> for ModelFile {
    fn from(model: &TrainedModel) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            n: model.n(),
            m: model.m(),
            r: model.m() as f64 / model.n() as f64,
            layer_specs: model.network.specs(),
            logits: model.logits.values().as_slice().to_vec(),
            layers: model
                .network
                .layers
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.weights.cols(),
                    out_dim: l.weights.rows(),
                    activation: l.activation,
                    weights: l.weights.as_slice().to_vec(),
                    biases: l.biases.clone(),
                })
                .collect(),
            selected_indices: selection::to_one_based(&model.selected_indices),
            train_config: model.config.clone(),
            final_mse: model.final_mse,
            seed: model.config.seed,
        }
    }
}

impl TryFrom<ModelFile> for TrainedModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let bad = |msg: String| Error::Format(msg);
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(bad(format!("unsupported model format version {}", f.format_version)));
        }
        let logits = Matrix::from_vec(f.m, f.n, f.logits).map_err(|e| bad(e.to_string()))?;
        let logits = SelectionLogits::new(logits).map_err(|e| bad(e.to_string()))?;
        let layers = f
            .layers
            .into_iter()
            .map(|l| {
                Ok(Layer {
                    weights: Matrix::from_vec(l.out_dim, l.in_dim, l.weights)?,
                    biases: l.biases,
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| bad(e.to_string()))?;
        let network = NetworkParams::from_layers(layers).map_err(|e| bad(e.to_string()))?;
        if network.specs() != f.layer_specs {
            return Err(bad("layer_specs disagree with stored layers".into()));
        }
        if network.in_dim() != 2 * f.m || network.out_dim() != 2 * f.n {
            return Err(bad("network dimensions disagree with M and N".into()));
        }
        if f.selected_indices.len() != f.m || f.selected_indices.iter().any(|&k| k == 0) {
            return Err(bad("selected_indices must hold M 1-based entries".into()));
        }
        let selected_indices: Vec<usize> = f.selected_indices.iter().map(|k| k - 1).collect();
        SelectionMatrix::from_indices(selected_indices.clone(), f.n).map_err(|e| bad(e.to_string()))?;
        Ok(TrainedModel {
            logits,
            network,
            selected_indices,
            config: f.train_config,
            final_mse: f.final_mse,
        })
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string(&ModelFile::from(model))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    TrainedModel::try_from(file)
}

pub fn write_trace(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "temperature", "loss", "mse", "entropy", "eval_mse"])?;
    for row in trace {
        w.write_record([
            row.iteration.to_string(),
            row.temperature.to_string(),
            row.loss.to_string(),
            row.mse.to_string(),
            row.entropy.to_string(),
            row.eval_mse.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
