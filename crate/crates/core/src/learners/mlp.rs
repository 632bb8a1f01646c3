//! Feed-forward network with a two-unit softmax output.
//!
//! Trained on mean cross-entropy plus an L2 penalty `alpha / (2n) |W|^2`
//! with mini-batch Adam. Training stops after `epochs` passes, or earlier
//! once the epoch loss has failed to improve by `tol` for
//! `n_iter_no_change` consecutive epochs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, LearnerError, Matrix, ProbabilisticClassifier};
use crate::model::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    #[default]
    Relu,
    Logistic,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Tanh, Activation::Relu, Activation::Logistic];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Logistic => "logistic",
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "logistic" => Ok(Activation::Logistic),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub tol: f64,
    pub n_iter_no_change: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![50],
            activation: Activation::Relu,
            epochs: 200,
            lr: 1e-3,
            batch_size: 200,
            alpha: 1e-4,
            tol: 1e-4,
            n_iter_no_change: 10,
            seed: 0,
        }
    }
}

/// One dense layer; `w` is `inputs x outputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    inputs: usize,
    outputs: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    activation: Activation,
    layers: Vec<Layer>,
    loss_curve: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform initialization of weights and biases.
    pub fn init(n_inputs: usize, hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let factor = if activation == Activation::Logistic { 2.0 } else { 6.0 };
                let bound = (factor / (fan_in + fan_out) as f64).sqrt();
                let mut draw = |k: usize| -> Vec<f64> {
                    (0..k).map(|_| rng.random_range(-bound..bound)).collect()
                };
                Layer {
                    inputs: fan_in,
                    outputs: fan_out,
                    w: draw(fan_in * fan_out),
                    b: draw(fan_out),
                }
            })
            .collect();
        Self {
            activation,
            layers,
            loss_curve: Vec::new(),
        }
    }

    pub fn loss_curve(&self) -> &[f64] {
        &self.loss_curve
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.w.len(), l.b.len());
            l.w.copy_from_slice(&flat[off..off + nw]);
            l.b.copy_from_slice(&flat[off + nw..off + nw + nb]);
            off += nw + nb;
        }
    }

    /// Activations of every layer; the last entry holds softmax probabilities.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let input = &acts[li];
            let mut z = l.b.clone();
            for (i, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &l.w[i * l.outputs..(i + 1) * l.outputs];
                for (zo, w) in z.iter_mut().zip(row) {
                    *zo += a * w;
                }
            }
            if li == last {
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                z = e.into_iter().map(|v| v / s).collect();
            } else {
                for v in &mut z {
                    *v = self.activation.apply(*v);
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Regularized mean cross-entropy and its gradient over `rows`, in
    /// the layout of [`Mlp::params`].
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[Label], rows: &[usize], alpha: f64) -> (f64, Vec<f64>) {
        let n = rows.len() as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
            .collect();
        let mut loss = 0.0;
        for &r in rows {
            let acts = self.forward(x.row(r));
            let out = acts.last().expect("output layer");
            let target = y[r].as_index();
            loss -= out[target].max(1e-300).ln();
            // softmax + cross-entropy: dL/dz = p - onehot
            let mut delta: Vec<f64> = out.clone();
            delta[target] -= 1.0;
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for (i, &a) in input.iter().enumerate() {
                    let row = &mut gw[i * l.outputs..(i + 1) * l.outputs];
                    for (g, d) in row.iter_mut().zip(&delta) {
                        *g += a * d;
                    }
                }
                for (g, d) in gb.iter_mut().zip(&delta) {
                    *g += d;
                }
                if li > 0 {
                    let prev: Vec<f64> = (0..l.inputs)
                        .map(|i| {
                            let row = &l.w[i * l.outputs..(i + 1) * l.outputs];
                            let s: f64 = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                            s * self.activation.derivative(input[i])
                        })
                        .collect();
                    delta = prev;
                }
            }
        }
        let mut l2 = 0.0;
        let mut flat = Vec::with_capacity(self.n_params());
        for (l, (gw, gb)) in self.layers.iter().zip(grads) {
            for (g, w) in gw.iter().zip(&l.w) {
                l2 += w * w;
                flat.push(g / n + alpha * w / n);
            }
            flat.extend(gb.iter().map(|g| g / n));
        }
        (loss / n + 0.5 * alpha * l2 / n, flat)
    }
}

impl ProbabilisticClassifier for Mlp {
    fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let out = self.forward(x).pop().expect("output layer");
        [out[0], out[1]]
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let lr = self.lr * (1.0 - Self::B2.powi(self.t)).sqrt() / (1.0 - Self::B1.powi(self.t));
        for k in 0..params.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            params[k] -= lr * self.m[k] / (self.v[k].sqrt() + Self::EPS);
        }
    }
}

pub fn train_mlp(x: &Matrix, y: &[Label], params: &MlpParams) -> Result<Mlp, LearnerError> {
    check_training(x, y)?;
    if params.hidden.contains(&0) {
        return Err(LearnerError::InvalidParameter("hidden layer widths must be positive".into()));
    }
    if params.lr.is_nan() || params.lr <= 0.0 {
        return Err(LearnerError::InvalidParameter(format!("lr must be positive, got {}", params.lr)));
    }
    let mut model = Mlp::init(x.cols(), &params.hidden, params.activation, params.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
    let n = x.rows();
    let batch = params.batch_size.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut flat = model.params();
    let mut adam = Adam::new(flat.len(), params.lr);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let (loss, grad) = model.loss_and_gradient(x, y, chunk, params.alpha);
            if !loss.is_finite() {
                return Err(LearnerError::Diverged);
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut flat, &grad);
            model.set_params(&flat);
        }
        epoch_loss /= n as f64;
        model.loss_curve.push(epoch_loss);
        if epoch_loss > best - params.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(epoch_loss);
        if params.n_iter_no_change > 0 && stale >= params.n_iter_no_change {
            break;
        }
    }
    Ok(model)
}
