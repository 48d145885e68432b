//! Dense feed-forward networks and the Adam optimizer, all `f64`.
//!
//! Hidden layers use leaky ReLU (slope 0.01); the output layer is linear.
//! Weights start orthogonal (Box-Muller gaussians, then Gram-Schmidt) with
//! gain sqrt(2) on hidden layers and a caller-chosen gain on the head;
//! biases start at zero. Float transcendentals go through `libm` so the
//! same seed yields bit-identical parameters everywhere.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionMask, ACTION_COUNT};

/// Leaky ReLU negative slope.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Gain for orthogonal init on hidden layers (sqrt 2).
pub const HIDDEN_GAIN: f64 = core::f64::consts::SQRT_2;

/// A multilayer perceptron. `sizes` lists layer widths input-first;
/// `weights[l]` is row-major `sizes[l + 1] x sizes[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Layer widths, input first, output last.
    pub sizes: Vec<usize>,
    /// Per-layer weight matrices, row-major `(out, in)`.
    pub weights: Vec<Vec<f64>>,
    /// Per-layer bias vectors.
    pub biases: Vec<Vec<f64>>,
}

/// Box-Muller standard normal sampler; caches the second draw of each pair.
struct Gaussian {
    spare: Option<f64>,
}

impl Gaussian {
    fn new() -> Gaussian {
        Gaussian { spare: None }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = rng.random::<f64>();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

/// Orthogonal `(out, in)` matrix scaled by `gain`, row-major.
///
/// Gram-Schmidt runs over the smaller dimension: rows when `out <= in`,
/// columns otherwise, matching the usual convention for tall matrices.
fn orthogonal(out_dim: usize, in_dim: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (small, big) = (out_dim.min(in_dim), out_dim.max(in_dim));
    let mut gauss = Gaussian::new();
    // `small` vectors of dimension `big`, drawn row-major.
    let mut m = vec![0.0; small * big];
    for v in m.iter_mut() {
        *v = gauss.next(rng);
    }
    for r in 0..small {
        for prev in 0..r {
            let dot: f64 = (0..big).map(|c| m[r * big + c] * m[prev * big + c]).sum();
            for c in 0..big {
                m[r * big + c] -= dot * m[prev * big + c];
            }
        }
        let norm = libm::sqrt((0..big).map(|c| m[r * big + c] * m[r * big + c]).sum::<f64>());
        if norm > 1e-12 {
            for c in 0..big {
                m[r * big + c] /= norm;
            }
        } else {
            // Degenerate draw; fall back to a unit basis vector.
            for c in 0..big {
                m[r * big + c] = if c == r { 1.0 } else { 0.0 };
            }
        }
    }
    let mut w = vec![0.0; out_dim * in_dim];
    for o in 0..out_dim {
        for i in 0..in_dim {
            let v = if out_dim <= in_dim { m[o * big + i] } else { m[i * big + o] };
            w[o * in_dim + i] = gain * v;
        }
    }
    w
}

/// Forward-pass activations: `acts[0]` is the input, `acts[l + 1]` the
/// output of layer `l` (post leaky ReLU on hidden layers, raw on the head).
pub struct ForwardCache {
    /// Layer activations, input first.
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Builds an orthogonally initialized network. `head_gain` scales the
    /// final layer (small for policy heads, 1 for value heads).
    pub fn init(sizes: &[usize], head_gain: f64, rng: &mut ChaCha8Rng) -> Mlp {
        assert!(sizes.len() >= 2, "need at least input and output layers");
        let last = sizes.len() - 2;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let gain = if l == last { head_gain } else { HIDDEN_GAIN };
            weights.push(orthogonal(sizes[l + 1], sizes[l], gain, rng));
            biases.push(vec![0.0; sizes[l + 1]]);
        }
        Mlp { sizes: sizes.to_vec(), weights, biases }
    }

    /// Number of layers (weight matrices).
    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    /// Output for one input, discarding intermediate activations.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).acts.pop().expect("network has layers")
    }

    /// Output plus every intermediate activation, for backprop.
    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        assert_eq!(input.len(), self.sizes[0], "input width mismatch");
        let layers = self.layer_count();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        for l in 0..layers {
            let x = &acts[l];
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut y = self.biases[l].clone();
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut acc = 0.0;
                for i in 0..n_in {
                    acc += row[i] * x[i];
                }
                y[o] += acc;
            }
            if l + 1 < layers {
                for v in y.iter_mut() {
                    if *v < 0.0 {
                        *v *= LEAKY_SLOPE;
                    }
                }
            }
            acts.push(y);
        }
        ForwardCache { acts }
    }

    /// Accumulates parameter gradients for one sample into `grads`, given
    /// the loss gradient `dout` at the network output.
    pub fn backward(&self, cache: &ForwardCache, dout: &[f64], grads: &mut MlpGrads) {
        let layers = self.layer_count();
        assert_eq!(dout.len(), self.sizes[layers], "output grad width mismatch");
        let mut dy = dout.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            // Gradient through the activation: identity on the head,
            // leaky ReLU slope on hidden layers. The post-activation sign
            // matches the pre-activation sign because the slope is positive.
            if l + 1 < layers {
                let out_act = &cache.acts[l + 1];
                for (o, d) in dy.iter_mut().enumerate() {
                    if out_act[o] < 0.0 {
                        *d *= LEAKY_SLOPE;
                    }
                }
            }
            let x = &cache.acts[l];
            for o in 0..n_out {
                let d = dy[o];
                if d != 0.0 {
                    let wrow = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        wrow[i] += d * x[i];
                    }
                }
                grads.biases[l][o] += d;
            }
            if l > 0 {
                let mut dx = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = dy[o];
                    if d != 0.0 {
                        let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                        for i in 0..n_in {
                            dx[i] += row[i] * d;
                        }
                    }
                }
                dy = dx;
            }
        }
    }

    /// Total parameter count (weights and biases).
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Reads the flattened parameter at `index` (per layer: weights
    /// row-major, then biases).
    pub fn get_param(&self, index: usize) -> f64 {
        let mut idx = index;
        for l in 0..self.layer_count() {
            if idx < self.weights[l].len() {
                return self.weights[l][idx];
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return self.biases[l][idx];
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Writes the flattened parameter at `index`.
    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut idx = index;
        for l in 0..self.layer_count() {
            if idx < self.weights[l].len() {
                self.weights[l][idx] = value;
                return;
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                self.biases[l][idx] = value;
                return;
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index {index} out of range");
    }

    /// True when every parameter is finite.
    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.biases.iter()).all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Gradient (or moment) accumulator shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    /// Per-layer weight gradients, same layout as [`Mlp::weights`].
    pub weights: Vec<Vec<f64>>,
    /// Per-layer bias gradients.
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    /// Zero gradients shaped like `net`.
    pub fn zeros_like(net: &Mlp) -> MlpGrads {
        MlpGrads {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Multiplies every gradient by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for g in v.iter_mut() {
                *g *= factor;
            }
        }
    }

    /// Resets every gradient to zero.
    pub fn clear(&mut self) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for g in v.iter_mut() {
                *g = 0.0;
            }
        }
    }

    /// True when every gradient is finite.
    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.biases.iter()).all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    /// Step size.
    pub learning_rate: f64,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Denominator fuzz.
    pub epsilon: f64,
    m: MlpGrads,
    v: MlpGrads,
    t: u64,
}

impl Adam {
    /// Fresh optimizer state shaped like `net`.
    pub fn new(net: &Mlp, learning_rate: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: MlpGrads::zeros_like(net),
            v: MlpGrads::zeros_like(net),
            t: 0,
        }
    }

    /// Applies one Adam update of `grads` to `net`.
    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for l in 0..net.layer_count() {
            Adam::step_slice(
                &mut net.weights[l],
                &grads.weights[l],
                &mut self.m.weights[l],
                &mut self.v.weights[l],
                (self.learning_rate, self.beta1, self.beta2, self.epsilon, bc1, bc2),
            );
            Adam::step_slice(
                &mut net.biases[l],
                &grads.biases[l],
                &mut self.m.biases[l],
                &mut self.v.biases[l],
                (self.learning_rate, self.beta1, self.beta2, self.epsilon, bc1, bc2),
            );
        }
    }

    fn step_slice(
        params: &mut [f64],
        grads: &[f64],
        m: &mut [f64],
        v: &mut [f64],
        (lr, beta1, beta2, eps, bc1, bc2): (f64, f64, f64, f64, f64, f64),
    ) {
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            params[i] -= lr * mhat / (libm::sqrt(vhat) + eps);
        }
    }
}

/// Log-probabilities of a masked softmax over the action logits. Masked
/// entries come back as negative infinity.
pub fn masked_log_probs(logits: &[f64; ACTION_COUNT], mask: &ActionMask) -> [f64; ACTION_COUNT] {
    debug_assert!(mask.iter().any(|&m| m), "mask allows no action");
    let mut max = f64::NEG_INFINITY;
    for a in 0..ACTION_COUNT {
        if mask[a] && logits[a] > max {
            max = logits[a];
        }
    }
    let mut sum = 0.0;
    for a in 0..ACTION_COUNT {
        if mask[a] {
            sum += libm::exp(logits[a] - max);
        }
    }
    let lse = max + libm::log(sum);
    let mut out = [f64::NEG_INFINITY; ACTION_COUNT];
    for a in 0..ACTION_COUNT {
        if mask[a] {
            out[a] = logits[a] - lse;
        }
    }
    out
}

/// Probabilities of the masked softmax; masked entries are exactly zero.
pub fn masked_probs(logits: &[f64; ACTION_COUNT], mask: &ActionMask) -> [f64; ACTION_COUNT] {
    let lp = masked_log_probs(logits, mask);
    let mut p = [0.0; ACTION_COUNT];
    for a in 0..ACTION_COUNT {
        if mask[a] {
            p[a] = libm::exp(lp[a]);
        }
    }
    p
}

/// Entropy of a masked distribution given its log-probabilities.
pub fn masked_entropy(log_probs: &[f64; ACTION_COUNT]) -> f64 {
    let mut h = 0.0;
    for &lp in log_probs {
        if lp > f64::NEG_INFINITY {
            h -= libm::exp(lp) * lp;
        }
    }
    h
}

/// Samples an action index from masked probabilities.
pub fn sample_action(probs: &[f64; ACTION_COUNT], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (a, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = a;
            cum += p;
            if u < cum {
                return a;
            }
        }
    }
    // Rounding left a sliver above the final cumulative sum.
    last_positive
}

/// Highest-logit legal action; ties break toward the lower index.
pub fn argmax_action(logits: &[f64; ACTION_COUNT], mask: &ActionMask) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for a in 0..ACTION_COUNT {
        if !mask[a] {
            continue;
        }
        match best {
            Some((bv, _)) if bv >= logits[a] => {}
            _ => best = Some((logits[a], a)),
        }
    }
    best.expect("mask allows no action").1
}
