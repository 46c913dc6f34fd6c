//! Trainable probabilistic antenna selection.
//!
//! Each of the `M` observation slots owns a row of unnormalized
//! log-probabilities over the `N` antennas. The forward pass draws a hard
//! one-hot pattern with the Gumbel-Max trick, excluding antennas already taken
//! by earlier rows; the backward pass differentiates the temperature-softened
//! softmax of the same perturbed logits (straight-through estimator).
//!
//! Antenna indices are 0-based throughout this module. Reports and files use
//! 1-based indices; see [`to_one_based`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Quadratic coefficient of the order-preserving logit initialization.
pub const DEFAULT_BETA: f64 = -2.73e-3;
/// Standard deviation of the Gaussian jitter added at initialization.
pub const DEFAULT_GAMMA_STD: f64 = 0.1;

const UNIFORM_GUARD: f64 = 1e-12;

/// `M x N` matrix of unnormalized log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct SelectionLogits {
    values: Matrix,
}

impl SelectionLogits {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::invalid("selection logits must be non-empty"));
        }
        if values.rows() > values.cols() {
            return Err(Error::invalid(format!(
                "cannot select {} of {} antennas",
                values.rows(),
                values.cols()
            )));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("selection logits must be finite"));
        }
        Ok(SelectionLogits { values })
    }

    /// Logits that deterministically reproduce a fixed selection: 0 at the
    /// chosen antenna of each row, a large negative value elsewhere.
    pub fn pinned(indices: &[usize], n: usize) -> Result<Self> {
        check_distinct(indices, n)?;
        let values = Matrix::from_fn(indices.len(), n, |m, k| if indices[m] == k { 0.0 } else { -1e3 });
        Self::new(values)
    }

    pub fn m(&self) -> usize {
        self.values.rows()
    }

    pub fn n(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Matrix {
        &mut self.values
    }
}

impl TryFrom<Matrix> for SelectionLogits {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        SelectionLogits::new(m)
    }
}

impl From<SelectionLogits> for Matrix {
    fn from(l: SelectionLogits) -> Matrix {
        l.values
    }
}

/// `M x N` i.i.d. Gumbel(0, 1) draws.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise {
    pub values: Matrix,
}

impl GumbelNoise {
    pub fn zeros(m: usize, n: usize) -> Self {
        GumbelNoise {
            values: Matrix::zeros(m, n),
        }
    }
}

/// Hard selection: one antenna per row, pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMatrix {
    indices: Vec<usize>,
    n: usize,
}

impl SelectionMatrix {
    pub fn from_indices(indices: Vec<usize>, n: usize) -> Result<Self> {
        check_distinct(&indices, n)?;
        Ok(SelectionMatrix { indices, n })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dense one-hot rows.
    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.m(), self.n, |m, k| if self.indices[m] == k { 1.0 } else { 0.0 })
    }

    /// Row `m` excludes the antennas chosen by rows `0..m`.
    pub fn exclusion_mask(&self) -> ExclusionMask {
        let mut mask = ExclusionMask::none(self.m(), self.n);
        for m in 1..self.m() {
            for &k in &self.indices[..m] {
                mask.set(m, k);
            }
        }
        mask
    }
}

fn check_distinct(indices: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &k in indices {
        if k >= n {
            return Err(Error::invalid(format!("antenna index {k} out of range for {n} antennas")));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::invalid(format!("antenna {k} selected twice")));
        }
    }
    Ok(())
}

/// `true` marks an antenna unavailable to a row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionMask {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl ExclusionMask {
    pub fn none(rows: usize, cols: usize) -> Self {
        ExclusionMask {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_excluded(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize) {
        self.data[r * self.cols + c] = true;
    }

    fn row(&self, r: usize) -> &[bool] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Relaxed selection rows at a given temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSelection {
    pub rows: Matrix,
    pub temperature: f64,
}

/// `zeta[m][n] = beta * (n - (N/M) m)^2 + gamma`, with 1-based `m`, `n` and
/// `gamma ~ Normal(0, gamma_std^2)`.
pub fn init_logits<R: Rng + ?Sized>(m: usize, n: usize, beta: f64, gamma_std: f64, rng: &mut R) -> Result<SelectionLogits> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!("need 1 <= M <= N, got M={m}, N={n}")));
    }
    if !(gamma_std >= 0.0) {
        return Err(Error::invalid("gamma_std must be non-negative"));
    }
    let stride = n as f64 / m as f64;
    let values = Matrix::from_fn(m, n, |row, col| {
        let centre = stride * (row + 1) as f64;
        let d = (col + 1) as f64 - centre;
        let jitter: f64 = if gamma_std > 0.0 {
            gamma_std * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        beta * d * d + jitter
    });
    SelectionLogits::new(values)
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Row-wise softmax of the logits.
pub fn class_probabilities(logits: &SelectionLogits) -> Matrix {
    let v = logits.values();
    let mut out = Matrix::zeros(v.rows(), v.cols());
    for m in 0..v.rows() {
        softmax_into(v.row(m), out.row_mut(m));
    }
    out
}

fn softmax_into(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = (xi - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Maps a uniform draw to Gumbel(0, 1), guarding the endpoints.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(UNIFORM_GUARD, 1.0 - UNIFORM_GUARD);
    -(-u.ln()).ln()
}

pub fn sample_gumbel<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> GumbelNoise {
    GumbelNoise {
        values: Matrix::from_fn(m, n, |_, _| gumbel_from_uniform(rng.random::<f64>())),
    }
}

fn check_noise(logits: &SelectionLogits, noise: &GumbelNoise) -> Result<()> {
    if !logits.values().same_shape(&noise.values) {
        return Err(Error::invalid(format!(
            "noise is {}x{}, logits are {}x{}",
            noise.values.rows(),
            noise.values.cols(),
            logits.m(),
            logits.n()
        )));
    }
    Ok(())
}

fn check_mask(logits: &SelectionLogits, mask: &ExclusionMask) -> Result<()> {
    if mask.rows() != logits.m() || mask.cols() != logits.n() {
        return Err(Error::invalid("exclusion mask shape does not match logits"));
    }
    Ok(())
}

/// Gumbel-Max selection, row by row, skipping antennas taken by earlier rows.
pub fn hard_select(logits: &SelectionLogits, noise: &GumbelNoise) -> Result<SelectionMatrix> {
    check_noise(logits, noise)?;
    let (m_rows, n) = (logits.m(), logits.n());
    if m_rows > n {
        return Err(Error::invalid(format!("cannot select {m_rows} of {n} antennas")));
    }
    let mut taken = vec![false; n];
    let mut indices = Vec::with_capacity(m_rows);
    for m in 0..m_rows {
        let z = logits.values().row(m);
        let g = noise.values.row(m);
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for k in 0..n {
            if taken[k] {
                continue;
            }
            let score = z[k] + g[k];
            if best.is_none() || score > best_score {
                best = Some(k);
                best_score = score;
            }
        }
        let k = best.expect("at least one antenna remains");
        taken[k] = true;
        indices.push(k);
    }
    Ok(SelectionMatrix { indices, n })
}

/// Noise-free hard selection used for evaluation and reporting.
pub fn deterministic_indices(logits: &SelectionLogits) -> Vec<usize> {
    hard_select(logits, &GumbelNoise::zeros(logits.m(), logits.n()))
        .expect("logits are M <= N by construction")
        .indices
}

/// `softmax((zeta_m + g_m) / tau)` over the antennas not excluded for row m.
pub fn soft_select(logits: &SelectionLogits, noise: &GumbelNoise, temperature: f64, mask: &ExclusionMask) -> Result<SoftSelection> {
    check_noise(logits, noise)?;
    check_mask(logits, mask)?;
    if !(temperature > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    let mut rows = Matrix::zeros(logits.m(), logits.n());
    for m in 0..logits.m() {
        masked_softmax(
            logits.values().row(m),
            noise.values.row(m),
            temperature,
            mask.row(m),
            rows.row_mut(m),
        );
    }
    Ok(SoftSelection { rows, temperature })
}

fn masked_softmax(z: &[f64], g: &[f64], tau: f64, excluded: &[bool], out: &mut [f64]) {
    let inv_tau = tau.recip();
    let mut max = f64::NEG_INFINITY;
    for k in 0..z.len() {
        if !excluded[k] {
            max = max.max((z[k] + g[k]) * inv_tau);
        }
    }
    let mut sum = 0.0;
    for k in 0..z.len() {
        out[k] = if excluded[k] {
            0.0
        } else {
            ((z[k] + g[k]) * inv_tau - max).exp()
        };
        sum += out[k];
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `S h`: gathers the selected entries.
pub fn subsample(selection: &SelectionMatrix, h: &[Complex64]) -> Result<Vec<Complex64>> {
    if h.len() != selection.n {
        return Err(Error::invalid(format!(
            "channel has {} entries, selection expects {}",
            h.len(),
            selection.n
        )));
    }
    Ok(selection.indices.iter().map(|&k| h[k]).collect())
}

/// Straight-through gradient with respect to the logits.
///
/// Row `m` of the hard selection is treated as `p = softmax_tau(zeta_m + g_m)`
/// (masked), so the returned row is `(1/tau) (diag(p) - p p^T) grad_m`.
pub fn selection_backward(
    grad_soft: &Matrix,
    logits: &SelectionLogits,
    noise: &GumbelNoise,
    temperature: f64,
    mask: &ExclusionMask,
) -> Result<Matrix> {
    if !grad_soft.same_shape(logits.values()) {
        return Err(Error::invalid("upstream gradient shape does not match logits"));
    }
    let soft = soft_select(logits, noise, temperature, mask)?;
    let mut grad = Matrix::zeros(logits.m(), logits.n());
    accumulate_selection_grad(grad_soft, &soft, &mut grad);
    Ok(grad)
}

/// `acc += jvp` for every row; shared with the trainer to avoid a temporary.
pub(crate) fn accumulate_selection_grad(grad_soft: &Matrix, soft: &SoftSelection, acc: &mut Matrix) {
    let inv_tau = soft.temperature.recip();
    for m in 0..grad_soft.rows() {
        let p = soft.rows.row(m);
        let g = grad_soft.row(m);
        let pg: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for ((a, &pk), &gk) in acc.row_mut(m).iter_mut().zip(p).zip(g) {
            *a += inv_tau * pk * (gk - pg);
        }
    }
}

/// Summed Shannon entropy (nats) of the rows, with `0 log 0 = 0`.
pub fn entropy_penalty(probabilities: &Matrix) -> f64 {
    probabilities
        .as_slice()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Entropy of the logits' class probabilities and its gradient,
/// `dH/dzeta_k = -pi_k (ln pi_k + H_row)`.
pub fn entropy_with_grad(logits: &SelectionLogits) -> (f64, Matrix) {
    let v = logits.values();
    let mut grad = Matrix::zeros(v.rows(), v.cols());
    let mut total = 0.0;
    let mut log_p = vec![0.0; v.cols()];
    for m in 0..v.rows() {
        let z = v.row(m);
        let lse = log_sum_exp(z.iter().copied());
        let mut h = 0.0;
        for (lp, &zk) in log_p.iter_mut().zip(z) {
            *lp = zk - lse;
            let p = lp.exp();
            if p > 0.0 {
                h -= p * *lp;
            }
        }
        for (gk, &lp) in grad.row_mut(m).iter_mut().zip(&log_p) {
            let p = lp.exp();
            *gk = -p * (lp + h);
        }
        total += h;
    }
    (total, grad)
}

pub fn to_one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|k| k + 1).collect()
}
