//! Fully-connected extrapolation network with hand-written backpropagation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Hidden widths used at full scale.
pub const PAPER_HIDDEN: [usize; 5] = [1024, 1024, 2048, 1024, 512];
/// Scaled-down hidden widths for desk-scale runs.
pub const DESK_HIDDEN: [usize; 5] = [64, 64, 128, 64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// ReLU hidden layers followed by a linear output layer.
pub fn layer_specs(in_dim: usize, hidden: &[usize], out_dim: usize) -> Vec<LayerSpec> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(in_dim);
    dims.extend_from_slice(hidden);
    dims.push(out_dim);
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            in_dim: w[0],
            out_dim: w[1],
            activation: if i + 2 == dims.len() {
                Activation::Linear
            } else {
                Activation::Relu
            },
        })
        .collect()
}

pub fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::invalid("network needs at least one layer"));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::invalid(format!("layer {i} has a zero dimension")));
        }
    }
    for (i, w) in specs.windows(2).enumerate() {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::invalid(format!(
                "layer {i} outputs {} but layer {} expects {}",
                w[0].out_dim,
                i + 1,
                w[1].in_dim
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out_dim x in_dim`.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            in_dim: self.weights.cols(),
            out_dim: self.weights.rows(),
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
}

impl NetworkParams {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if l.biases.len() != l.weights.rows() {
                return Err(Error::invalid(format!("layer {i} bias length mismatch")));
            }
        }
        let specs: Vec<_> = layers.iter().map(Layer::spec).collect();
        validate_specs(&specs)?;
        Ok(NetworkParams { layers })
    }

    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        validate_specs(specs)?;
        Ok(NetworkParams {
            layers: specs
                .iter()
                .map(|s| Layer {
                    weights: Matrix::zeros(s.out_dim, s.in_dim),
                    biases: vec![0.0; s.out_dim],
                    activation: s.activation,
                })
                .collect(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    biases: vec![0.0; l.biases.len()],
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.rows()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.biases.len()).sum()
    }

    /// Every parameter, weights before biases, layer by layer.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            l.weights.as_mut_slice().iter_mut().for_each(&mut f);
            l.biases.iter_mut().for_each(&mut f);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params());
        let mut it = values.iter();
        self.for_each_param_mut(|p| *p = *it.next().unwrap());
    }
}

/// He-normal weights, zero biases.
pub fn init_network<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<NetworkParams> {
    let mut params = NetworkParams::zeros(specs)?;
    for l in &mut params.layers {
        let std = (2.0 / l.weights.cols() as f64).sqrt();
        for w in l.weights.as_mut_slice() {
            *w = std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(params)
}

/// Activations retained by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("non-empty network")
    }

    fn layer_input(&self, l: usize) -> &[f64] {
        if l == 0 {
            &self.input
        } else {
            &self.post[l - 1]
        }
    }
}

pub fn forward(params: &NetworkParams, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if x.len() != params.in_dim() {
        return Err(Error::invalid(format!(
            "network expects {} inputs, got {}",
            params.in_dim(),
            x.len()
        )));
    }
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let input = post.last().map(Vec::as_slice).unwrap_or(x);
        let mut z = vec![0.0; layer.weights.rows()];
        layer.weights.mul_vec_into(input, &mut z);
        for (zi, b) in z.iter_mut().zip(&layer.biases) {
            *zi += b;
        }
        let a = match layer.activation {
            Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
            Activation::Linear => z.clone(),
        };
        pre.push(z);
        post.push(a);
    }
    let y = post.last().unwrap().clone();
    Ok((
        y,
        ForwardCache {
            input: x.to_vec(),
            pre,
            post,
        },
    ))
}

fn check_cache(params: &NetworkParams, cache: &ForwardCache) -> Result<()> {
    let consistent = cache.pre.len() == params.layers.len()
        && cache.input.len() == params.in_dim()
        && params
            .layers
            .iter()
            .zip(&cache.pre)
            .all(|(l, z)| z.len() == l.weights.rows());
    if consistent {
        Ok(())
    } else {
        Err(Error::InvalidState("forward cache does not belong to this network".into()))
    }
}

/// Backpropagates `grad_y`, adding parameter gradients into `grads` and
/// returning the gradient with respect to the input.
pub fn backward_acc(params: &NetworkParams, cache: &ForwardCache, grad_y: &[f64], grads: &mut NetworkParams) -> Result<Vec<f64>> {
    check_cache(params, cache)?;
    if grad_y.len() != params.out_dim() {
        return Err(Error::invalid(format!(
            "output gradient has {} entries, network outputs {}",
            grad_y.len(),
            params.out_dim()
        )));
    }
    if grads.specs() != params.specs() {
        return Err(Error::invalid("gradient accumulator shape does not match network"));
    }
    let mut delta = grad_y.to_vec();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        if layer.activation == Activation::Relu {
            for (d, &z) in delta.iter_mut().zip(&cache.pre[l]) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let g = &mut grads.layers[l];
        g.weights.rank1_acc(1.0, &delta, cache.layer_input(l));
        for (gb, d) in g.biases.iter_mut().zip(&delta) {
            *gb += d;
        }
        let mut next = vec![0.0; layer.weights.cols()];
        layer.weights.mul_transpose_vec_acc(&delta, &mut next);
        delta = next;
    }
    Ok(delta)
}

pub fn backward(params: &NetworkParams, cache: &ForwardCache, grad_y: &[f64]) -> Result<(NetworkParams, Vec<f64>)> {
    let mut grads = params.zeros_like();
    let grad_x = backward_acc(params, cache, grad_y, &mut grads)?;
    Ok((grads, grad_x))
}

/// `[Re(h); Im(h)]`.
pub fn complex_to_real(h: &[Complex64]) -> Vec<f64> {
    h.iter().map(|c| c.re).chain(h.iter().map(|c| c.im)).collect()
}

pub fn real_to_complex(x: &[f64]) -> Result<Vec<Complex64>> {
    if x.len() % 2 != 0 {
        return Err(Error::invalid(format!("expected an even-length vector, got {}", x.len())));
    }
    let n = x.len() / 2;
    Ok((0..n).map(|k| Complex64::new(x[k], x[n + k])).collect())
}

/// Mean squared error over a batch, normalized by antennas and batch size,
/// with its gradient `2 (pred - target) / (N B)` w.r.t. the predictions.
pub fn mse_loss(predicted: &[Vec<Complex64>], target: &[Vec<Complex64>]) -> Result<(f64, Vec<Vec<Complex64>>)> {
    if predicted.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if predicted.len() != target.len() {
        return Err(Error::invalid("prediction and target batch sizes differ"));
    }
    let n = predicted[0].len();
    if n == 0 || predicted.iter().chain(target).any(|v| v.len() != n) {
        return Err(Error::invalid("prediction and target vector lengths differ"));
    }
    let scale = 1.0 / (n * predicted.len()) as f64;
    let mut loss = 0.0;
    let grads = predicted
        .iter()
        .zip(target)
        .map(|(p, t)| {
            p.iter()
                .zip(t)
                .map(|(a, b)| {
                    let d = a - b;
                    loss += d.norm_sqr();
                    2.0 * scale * d
                })
                .collect()
        })
        .collect();
    Ok((loss * scale, grads))
}
