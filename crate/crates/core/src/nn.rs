//! Dense feed-forward networks with hand-written backpropagation and
//! first-order optimizers.
//!
//! Parameters live in one flat vector in layer-major order; within a layer the
//! weight matrix (`out x in`, row-major) precedes the bias vector. Gradients use
//! the same layout, so optimizers can treat both as plain slices.

use std::fmt;
use std::str::FromStr;

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

impl Activation {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
            Activation::Softmax => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            2 => Some(Activation::Softmax),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl LayerShape {
    fn weight_count(&self) -> usize {
        self.input * self.output
    }

    fn param_count(&self) -> usize {
        self.weight_count() + self.output
    }
}

/// ReLU bias at init. A zero bias lets a layer that is silent on a row stay
/// silent forever, since nothing upstream then receives gradient.
pub const RELU_BIAS_INIT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    layers: Vec<LayerShape>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Layer outputs from a forward pass; `outputs[0]` is the input batch.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub outputs: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("cache holds at least the input")
    }
}

impl DenseNet {
    /// Builds a net with zeroed parameters. `widths` lists every layer width,
    /// input first; `activations` has one entry per layer transition.
    pub fn zeros(widths: &[usize], activations: &[Activation]) -> Result<Self> {
        if widths.len() < 2 || activations.len() != widths.len() - 1 {
            return Err(Error::invalid(format!(
                "{} widths need {} activations, got {}",
                widths.len(),
                widths.len().saturating_sub(1),
                activations.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let layers: Vec<LayerShape> = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| LayerShape {
                input: w[0],
                output: w[1],
                activation,
            })
            .collect();
        Self::from_layers(layers, None)
    }

    pub(crate) fn from_layers(layers: Vec<LayerShape>, params: Option<Vec<f64>>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].output != pair[1].input {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].output,
                    got: pair[1].input,
                });
            }
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        let params = match params {
            Some(p) if p.len() == total => p,
            Some(p) => {
                return Err(Error::DimensionMismatch {
                    expected: total,
                    got: p.len(),
                })
            }
            None => vec![0.0; total],
        };
        Ok(Self {
            layers,
            params,
            offsets,
        })
    }

    /// Fan-in/fan-out scaled uniform weights in `±sqrt(6 / (in + out))`.
    /// ReLU biases start at [`RELU_BIAS_INIT`], others at zero.
    pub fn init(widths: &[usize], activations: &[Activation], rng: RngStream) -> Result<Self> {
        let mut net = Self::zeros(widths, activations)?;
        let mut r = rng.rng();
        for (l, &off) in net.layers.clone().iter().zip(&net.offsets.clone()) {
            let limit = (6.0 / (l.input + l.output) as f64).sqrt();
            for w in &mut net.params[off..off + l.weight_count()] {
                *w = (2.0 * r.unit() - 1.0) * limit;
            }
            if l.activation == Activation::Relu {
                net.params[off + l.weight_count()..off + l.param_count()].fill(RELU_BIAS_INIT);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn weights(&self, l: usize) -> &[f64] {
        let off = self.offsets[l];
        &self.params[off..off + self.layers[l].weight_count()]
    }

    fn bias(&self, l: usize) -> &[f64] {
        let off = self.offsets[l] + self.layers[l].weight_count();
        &self.params[off..off + self.layers[l].output]
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardCache> {
        if batch.cols() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                got: batch.cols(),
            });
        }
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(batch.clone());
        for (l, shape) in self.layers.iter().enumerate() {
            let input = &outputs[l];
            let (w, b) = (self.weights(l), self.bias(l));
            let mut out = Matrix::zeros(input.rows(), shape.output);
            for i in 0..input.rows() {
                let a = input.row(i);
                let o = out.row_mut(i);
                for (k, ok) in o.iter_mut().enumerate() {
                    let wk = &w[k * shape.input..(k + 1) * shape.input];
                    *ok = b[k] + wk.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
                }
                activate(shape.activation, o);
            }
            outputs.push(out);
        }
        Ok(ForwardCache { outputs })
    }

    pub fn forward_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, row.len(), row.to_vec())?;
        Ok(self.forward(&m)?.output().row(0).to_vec())
    }

    /// Backpropagates `upstream = dL/d(output)` through a cached forward pass.
    /// Returns parameter gradients (flat layout) and `dL/d(input)`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        if cache.outputs.len() != self.layers.len() + 1 {
            return Err(Error::invalid("forward cache does not belong to this network"));
        }
        let out = cache.output();
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(Error::DimensionMismatch {
                expected: out.rows() * out.cols(),
                got: upstream.rows() * upstream.cols(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = upstream.clone();
        for l in (0..self.layers.len()).rev() {
            let shape = self.layers[l];
            let y = &cache.outputs[l + 1];
            let a = &cache.outputs[l];
            // through the activation: delta becomes dL/d(pre-activation)
            for i in 0..delta.rows() {
                activation_backward(shape.activation, y.row(i), delta.row_mut(i));
            }
            let off = self.offsets[l];
            let (gw, gb) = grads[off..off + shape.param_count()].split_at_mut(shape.weight_count());
            for i in 0..delta.rows() {
                let dz = delta.row(i);
                let ai = a.row(i);
                for k in 0..shape.output {
                    if dz[k] == 0.0 {
                        continue;
                    }
                    gb[k] += dz[k];
                    for (g, x) in gw[k * shape.input..(k + 1) * shape.input].iter_mut().zip(ai) {
                        *g += dz[k] * x;
                    }
                }
            }
            let w = self.weights(l);
            let mut prev = Matrix::zeros(delta.rows(), shape.input);
            for i in 0..delta.rows() {
                let dz = delta.row(i);
                let p = prev.row_mut(i);
                for k in 0..shape.output {
                    if dz[k] == 0.0 {
                        continue;
                    }
                    for (pj, wkj) in p.iter_mut().zip(&w[k * shape.input..(k + 1) * shape.input]) {
                        *pj += dz[k] * wkj;
                    }
                }
            }
            delta = prev;
        }
        Ok((grads, delta))
    }
}

fn activate(act: Activation, v: &mut [f64]) {
    match act {
        Activation::Linear => {}
        Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        Activation::Softmax => {
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in v.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            v.iter_mut().for_each(|x| *x /= total);
        }
    }
}

/// Converts `dL/dy` (in place) into `dL/dz` given the activation output `y`.
fn activation_backward(act: Activation, y: &[f64], g: &mut [f64]) {
    match act {
        Activation::Linear => {}
        Activation::Relu => {
            for (gi, yi) in g.iter_mut().zip(y) {
                if *yi <= 0.0 {
                    *gi = 0.0;
                }
            }
        }
        Activation::Softmax => {
            let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
            for (gi, yi) in g.iter_mut().zip(y) {
                *gi = yi * (*gi - dot);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::invalid(format!(
                "unknown optimizer `{other}` (expected sgd or adam)"
            ))),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let moments = if kind == OptimizerKind::Adam { n_params } else { 0 };
        Ok(Self {
            kind,
            learning_rate,
            first: vec![0.0; moments],
            second: vec![0.0; moments],
            steps: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Applies one update. Non-finite gradients abort before anything is written.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                got: grads.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient entry {i} is {} at step {}",
                grads[i], self.steps
            )));
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                if self.first.len() != params.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.first.len(),
                        got: params.len(),
                    });
                }
                let t = self.steps as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.first[i] = ADAM_BETA1 * self.first[i] + (1.0 - ADAM_BETA1) * g;
                    self.second[i] = ADAM_BETA2 * self.second[i] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = self.first[i] / c1;
                    let v_hat = self.second[i] / c2;
                    params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(seed: u64, rows: usize, cols: usize) -> Matrix {
        let mut r = RngStream::new(seed, 0).rng();
        let v = (0..rows * cols).map(|_| r.normal()).collect();
        Matrix::from_vec(rows, cols, v).unwrap()
    }

    #[test]
    fn identity_linear_net() {
        let mut net = DenseNet::zeros(&[3, 3], &[Activation::Linear]).unwrap();
        for k in 0..3 {
            net.params_mut()[k * 3 + k] = 1.0;
        }
        let x = random_batch(1, 4, 3);
        assert_eq!(net.forward(&x).unwrap().output(), &x);
    }

    #[test]
    fn relu_zeroes_negatives() {
        let mut net = DenseNet::zeros(&[2, 2], &[Activation::Relu]).unwrap();
        net.params_mut()[..4].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let out = net.forward_row(&[-1.0, -2.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let net = DenseNet::init(
            &[3, 5, 4],
            &[Activation::Relu, Activation::Softmax],
            RngStream::new(2, 0),
        )
        .unwrap();
        let cache = net.forward(&random_batch(3, 6, 3)).unwrap();
        for r in cache.output().iter_rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_hand_matrix_arithmetic() {
        let net = DenseNet::init(
            &[3, 4, 2],
            &[Activation::Relu, Activation::Linear],
            RngStream::new(5, 0),
        )
        .unwrap();
        let x = random_batch(6, 5, 3);
        let out = net.forward(&x).unwrap();
        let p = net.params();
        // layer 1: 4x3 weights at 0..12, bias 12..16; layer 2: 2x4 at 16..24, bias 24..26
        for i in 0..5 {
            let h: Vec<f64> = (0..4)
                .map(|k| (p[12 + k] + (0..3).map(|j| p[k * 3 + j] * x.get(i, j)).sum::<f64>()).max(0.0))
                .collect();
            for k in 0..2 {
                let y = p[24 + k] + (0..4).map(|j| p[16 + k * 4 + j] * h[j]).sum::<f64>();
                assert!((y - out.output().get(i, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let net = DenseNet::init(
            &[3, 4, 2],
            &[Activation::Relu, Activation::Linear],
            RngStream::new(5, 0),
        )
        .unwrap();
        let cache = net.forward(&random_batch(1, 3, 3)).unwrap();
        let (g, gin) = net.backward(&cache, &Matrix::zeros(3, 2)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(gin.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_closed_form() {
        // L = 1/2 |Wx - t|^2  =>  dL/dW = (Wx - t) x^T, dL/db = Wx - t
        let net = DenseNet::init(&[3, 2], &[Activation::Linear], RngStream::new(8, 0)).unwrap();
        let x = [0.5, -1.0, 2.0];
        let t = [1.0, -0.5];
        let cache = net.forward(&Matrix::from_vec(1, 3, x.to_vec()).unwrap()).unwrap();
        let y = cache.output().row(0).to_vec();
        let resid: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a - b).collect();
        let (g, _) = net
            .backward(&cache, &Matrix::from_vec(1, 2, resid.clone()).unwrap())
            .unwrap();
        for k in 0..2 {
            for j in 0..3 {
                assert!((g[k * 3 + j] - resid[k] * x[j]).abs() < 1e-14);
            }
            assert!((g[6 + k] - resid[k]).abs() < 1e-14);
        }
    }

    /// Central-difference check of a scalar loss `sum(c * output)` with a fixed
    /// random weighting `c`.
    fn finite_difference_check(widths: &[usize], acts: &[Activation], seed: u64) {
        let net = DenseNet::init(widths, acts, RngStream::new(seed, 0)).unwrap();
        let x = random_batch(seed + 1, 4, widths[0]);
        let c = random_batch(seed + 2, 4, *widths.last().unwrap());
        let loss = |n: &DenseNet, x: &Matrix| -> f64 {
            let o = n.forward(x).unwrap();
            o.output().as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum()
        };
        let cache = net.forward(&x).unwrap();
        let (g, gin) = net.backward(&cache, &c).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for p in 0..net.param_count() {
            let mut plus = net.clone();
            plus.params_mut()[p] += h;
            let mut minus = net.clone();
            minus.params_mut()[p] -= h;
            let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
            let rel = (fd - g[p]).abs() / fd.abs().max(g[p].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        for e in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[e] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[e] -= h;
            let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            let a = gin.as_slice()[e];
            worst = worst.max((fd - a).abs() / fd.abs().max(a.abs()).max(1e-6));
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        finite_difference_check(
            &[5, 8, 4, 3],
            &[Activation::Relu, Activation::Relu, Activation::Linear],
            10,
        );
        finite_difference_check(&[3, 6, 4], &[Activation::Relu, Activation::Softmax], 20);
        finite_difference_check(
            &[2, 4, 8, 16, 7],
            &[Activation::Relu, Activation::Relu, Activation::Relu, Activation::Linear],
            30,
        );
    }

    #[test]
    fn sgd_arithmetic() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, 1).unwrap();
        let mut p = [1.0];
        opt.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_fixpoint() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut opt = Optimizer::new(kind, 0.01, 3).unwrap();
            let mut p = [1.0, -2.0, 3.0];
            opt.step(&mut p, &[0.0; 3]).unwrap();
            assert_eq!(p, [1.0, -2.0, 3.0]);
        }
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        // bias correction makes the first step exactly lr * g / (|g| + eps)
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 1).unwrap();
        let mut p = [0.0];
        opt.step(&mut p, &[4.0]).unwrap();
        assert!((p[0] + 0.01 * 4.0 / (4.0 + ADAM_EPS)).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl_descends() {
        let target = [3.0, -1.0, 0.5];
        let loss = |p: &[f64]| p.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.05, 3).unwrap();
        let mut p = [0.0; 3];
        let mut prev = loss(&p);
        for _ in 0..100 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            opt.step(&mut p, &g).unwrap();
            let l = loss(&p);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 2).unwrap();
        let mut p = [1.0, 1.0];
        assert!(matches!(opt.step(&mut p, &[0.5, f64::NAN]), Err(Error::NonFinite(_))));
        assert_eq!(p, [1.0, 1.0]);
        assert!(Optimizer::new(OptimizerKind::Sgd, 0.0, 1).is_err());
    }

    #[test]
    fn dimension_errors() {
        let net = DenseNet::zeros(&[3, 2], &[Activation::Linear]).unwrap();
        assert!(net.forward(&Matrix::zeros(1, 4)).is_err());
        assert!(DenseNet::zeros(&[3, 2], &[]).is_err());
        let cache = ForwardCache {
            outputs: vec![Matrix::zeros(1, 3)],
        };
        assert!(net.backward(&cache, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn forward_is_bit_identical() {
        let net = DenseNet::init(
            &[4, 8, 2],
            &[Activation::Relu, Activation::Linear],
            RngStream::new(1, 1),
        )
        .unwrap();
        let x = random_batch(2, 3, 4);
        assert_eq!(net.forward(&x).unwrap().output(), net.forward(&x).unwrap().output());
    }
}
