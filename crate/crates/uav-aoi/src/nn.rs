//! Minimal fully-connected network with reverse-mode gradients and Adam.
//!
//! Dense layers over flat `f64` buffers, sized for the small actor and critic
//! heads this crate trains. No convolutions, no recurrence, no general
//! autodiff; the tape stores exactly what the backward pass of an
//! affine+activation chain needs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: row-major `out_dim x in_dim` weights plus biases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Feedforward network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Cached intermediates from one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Layer inputs `a_0 .. a_{L-1}` (the input plus each hidden output).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations `z_1 .. z_L`.
    preacts: Vec<Vec<f64>>,
    /// Shape fingerprint of the network that produced this tape.
    shape: Vec<usize>,
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(other.weights.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(other.biases.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in layer.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|layer| layer.iter().all(|x| x.is_finite()))
    }
}

impl Mlp {
    /// Builds a network with the given layer widths and one activation per
    /// layer. Weights are uniform in `+-sqrt(6 / (fan_in + fan_out))`,
    /// biases zero.
    pub fn new(dims: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Mlp {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert_eq!(activations.len(), dims.len() - 1);
        let layers = dims
            .windows(2)
            .zip(activations.iter())
            .map(|(pair, &activation)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.gen_range(-limit..=limit))
                        .collect(),
                    biases: vec![0.0; fan_out],
                    in_dim: fan_in,
                    out_dim: fan_out,
                    activation,
                }
            })
            .collect();
        Mlp { layers }
    }

    /// Standard policy/value trunk: two tanh hidden layers of `hidden` units
    /// and an identity output head.
    pub fn with_head(input: usize, hidden: usize, output: usize, rng: &mut ChaCha8Rng) -> Mlp {
        Mlp::new(
            &[input, hidden, hidden, output],
            &[Activation::Tanh, Activation::Tanh, Activation::Identity],
            rng,
        )
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    fn shape(&self) -> Vec<usize> {
        let mut shape = vec![self.input_dim()];
        shape.extend(self.layers.iter().map(|l| l.out_dim));
        shape
    }

    /// Deterministic affine + activation composition. The returned tape is
    /// sufficient for one backward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape), NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::Shape(format!(
                "input length {} != declared width {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut activation = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.biases.clone();
            for (row, z_row) in z.iter_mut().enumerate() {
                let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                let mut acc = 0.0;
                for (wi, ai) in w.iter().zip(activation.iter()) {
                    acc += wi * ai;
                }
                *z_row += acc;
            }
            inputs.push(activation);
            activation = z.iter().map(|&v| layer.activation.apply(v)).collect();
            preacts.push(z);
        }
        Ok((
            activation,
            Tape {
                inputs,
                preacts,
                shape: self.shape(),
            },
        ))
    }

    /// Plain inference without tape allocation.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let (out, _) = self.forward(input)?;
        Ok(out)
    }

    /// Exact reverse-mode gradients of the scalar loss whose gradient with
    /// respect to the network output is `output_grad`.
    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<Gradients, NnError> {
        if tape.shape != self.shape() {
            return Err(NnError::Shape(
                "tape does not match this network (stale tape?)".into(),
            ));
        }
        if output_grad.len() != self.output_dim() {
            return Err(NnError::Shape(format!(
                "output_grad length {} != output width {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta: Vec<f64> = output_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &tape.preacts[l];
            for (d, &zv) in delta.iter_mut().zip(z.iter()) {
                *d *= layer.activation.derivative(zv);
            }
            let a_prev = &tape.inputs[l];
            for row in 0..layer.out_dim {
                let gw = &mut grads.weights[l][row * layer.in_dim..(row + 1) * layer.in_dim];
                for (g, &a) in gw.iter_mut().zip(a_prev.iter()) {
                    *g += delta[row] * a;
                }
                grads.biases[l][row] += delta[row];
            }
            if l > 0 {
                let mut next = vec![0.0; layer.in_dim];
                for row in 0..layer.out_dim {
                    let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                    for (n, &wv) in next.iter_mut().zip(w.iter()) {
                        *n += delta[row] * wv;
                    }
                }
                delta = next;
            }
        }
        Ok(grads)
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|x| x.is_finite()))
    }

    /// Order-sensitive digest of all parameters; used to assert that
    /// evaluation never mutates a network.
    pub fn checksum(&self) -> u64 {
        let mut acc: u64 = 0xcbf2_9ce4_8422_2325;
        for layer in &self.layers {
            for &x in layer.weights.iter().chain(layer.biases.iter()) {
                acc ^= x.to_bits();
                acc = acc.wrapping_mul(0x1000_0000_01b3);
            }
        }
        acc
    }
}

/// Adam accumulator state paired with one network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m_weights: Vec<Vec<f64>>,
    pub v_weights: Vec<Vec<f64>>,
    pub m_biases: Vec<Vec<f64>>,
    pub v_biases: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(net: &Mlp, learning_rate: f64) -> OptimizerState {
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients outright;
/// a NaN here is a training bug, not something to average away.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, opt: &mut OptimizerState) -> Result<(), NnError> {
    if !grads.is_finite() {
        return Err(NnError::NonFinite("gradients".into()));
    }
    if grads.weights.len() != net.layers.len() {
        return Err(NnError::Shape("gradient layer count mismatch".into()));
    }
    opt.step += 1;
    let bc1 = 1.0 - opt.beta1.powi(opt.step as i32);
    let bc2 = 1.0 - opt.beta2.powi(opt.step as i32);
    for (l, layer) in net.layers.iter_mut().enumerate() {
        if grads.weights[l].len() != layer.weights.len()
            || grads.biases[l].len() != layer.biases.len()
        {
            return Err(NnError::Shape(format!("gradient shape mismatch in layer {l}")));
        }
        let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = opt.beta1 * *m + (1.0 - opt.beta1) * g;
            *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *param -= opt.learning_rate * m_hat / (v_hat.sqrt() + opt.epsilon);
        };
        for (i, param) in layer.weights.iter_mut().enumerate() {
            update(param, grads.weights[l][i], &mut opt.m_weights[l][i], &mut opt.v_weights[l][i]);
        }
        for (i, param) in layer.biases.iter_mut().enumerate() {
            update(param, grads.biases[l][i], &mut opt.m_biases[l][i], &mut opt.v_biases[l][i]);
        }
    }
    if !net.params_finite() {
        return Err(NnError::NonFinite("parameters after update".into()));
    }
    Ok(())
}

/// Network plus optimizer state as stored under `checkpoints/`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub net: Mlp,
    pub opt: OptimizerState,
}

impl Checkpoint {
    pub fn save(&self, path: &std::path::Path) -> Result<(), NnError> {
        let text = serde_json::to_string(self).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Checkpoint, NnError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(e.to_string()))
    }
}

/// Central finite-difference gradient of `loss(net)` with respect to every
/// parameter. Test-side oracle for the analytic backward pass.
pub fn finite_difference_grads(
    net: &Mlp,
    h: f64,
    mut loss: impl FnMut(&Mlp) -> f64,
) -> Gradients {
    let mut grads = Gradients::zeros_like(net);
    let mut probe = net.clone();
    for l in 0..net.layers.len() {
        for i in 0..net.layers[l].weights.len() {
            let orig = probe.layers[l].weights[i];
            probe.layers[l].weights[i] = orig + h;
            let plus = loss(&probe);
            probe.layers[l].weights[i] = orig - h;
            let minus = loss(&probe);
            probe.layers[l].weights[i] = orig;
            grads.weights[l][i] = (plus - minus) / (2.0 * h);
        }
        for i in 0..net.layers[l].biases.len() {
            let orig = probe.layers[l].biases[i];
            probe.layers[l].biases[i] = orig + h;
            let plus = loss(&probe);
            probe.layers[l].biases[i] = orig - h;
            let minus = loss(&probe);
            probe.layers[l].biases[i] = orig;
            grads.biases[l][i] = (plus - minus) / (2.0 * h);
        }
    }
    grads
}

/// Largest relative disagreement between two gradient sets.
pub fn max_relative_error(a: &Gradients, b: &Gradients) -> f64 {
    let mut worst: f64 = 0.0;
    for (la, lb) in a.weights.iter().zip(b.weights.iter()) {
        for (&x, &y) in la.iter().zip(lb.iter()) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-4));
        }
    }
    for (la, lb) in a.biases.iter().zip(b.biases.iter()) {
        for (&x, &y) in la.iter().zip(lb.iter()) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-4));
        }
    }
    worst
}
