//! Minimal feed-forward network with analytic gradients and Adam.
//!
//! One network type serves as both Q-network and policy network: affine
//! layers with rectifier activations on the hidden layers and an identity
//! output. Parameters expose a flat-vector view used for aggregation,
//! checkpointing, and transport.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shape descriptor binding flat-vector positions to layer slots.
///
/// Flattening order: for each layer, the weight matrix row-major
/// (fan_out x fan_in) followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    dims: Vec<usize>,
}

impl Layout {
    pub fn new(dims: &[usize]) -> Layout {
        assert!(dims.len() >= 2, "a network needs input and output dims");
        Layout {
            dims: dims.to_vec(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Stable 64-bit FNV-1a hash of the layer dimensions; used to reject
    /// mismatched or corrupted weight uploads.
    pub fn hash(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for &d in &self.dims {
            for byte in (d as u64).to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }
}

/// Flat view of all parameters of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    layout: Layout,
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<WeightVector> {
        if values.len() != layout.param_count() {
            return Err(Error::usage(
                "WeightVector::new",
                format!(
                    "expected {} values, got {}",
                    layout.param_count(),
                    values.len()
                ),
            ));
        }
        Ok(WeightVector { layout, values })
    }

    pub fn zeros(layout: Layout) -> WeightVector {
        let n = layout.param_count();
        WeightVector {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Wire format: little-endian layout hash, then the values as
    /// little-endian 64-bit floats.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.values.len());
        out.extend_from_slice(&self.layout.hash().to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the wire format, rejecting hash or length mismatches.
    pub fn from_bytes(bytes: &[u8], expected: &Layout) -> Result<WeightVector> {
        if bytes.len() < 8 {
            return Err(Error::usage("WeightVector::from_bytes", "truncated input"));
        }
        let got = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        if got != expected.hash() {
            return Err(Error::LayoutMismatch {
                expected: expected.hash(),
                got,
            });
        }
        let body = &bytes[8..];
        if body.len() != 8 * expected.param_count() {
            return Err(Error::usage(
                "WeightVector::from_bytes",
                format!(
                    "expected {} parameter bytes, got {}",
                    8 * expected.param_count(),
                    body.len()
                ),
            ));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(WeightVector {
            layout: expected.clone(),
            values,
        })
    }
}

/// Feed-forward network: rectifier hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    /// weights[l] is fan_out x fan_in, row-major.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// He-uniform initialization (bound sqrt(6/fan_in)), zero biases.
    pub fn init(dims: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        let layout = Layout::new(dims);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for w in layout.dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            dims: layout.dims,
            weights,
            biases,
        }
    }

    pub fn zeros(dims: &[usize]) -> Mlp {
        let layout = Layout::new(dims);
        let weights = layout
            .dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layout.dims.windows(2).map(|w| vec![0.0; w[1]]).collect();
        Mlp {
            dims: layout.dims,
            weights,
            biases,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout {
            dims: self.dims.clone(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Raw logits for input `x` (Q-values or pre-softmax policy scores).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.1)
    }

    /// Forward pass retaining per-layer activations for backpropagation.
    /// Returns (activations per layer incl. input, output logits).
    fn forward_trace(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if x.len() != self.input_dim() {
            return Err(Error::usage(
                "Mlp::forward",
                format!("input dim {} != expected {}", x.len(), self.input_dim()),
            ));
        }
        let n_layers = self.n_layers();
        let mut activations = Vec::with_capacity(n_layers);
        activations.push(x.to_vec());
        let mut current = x.to_vec();
        for l in 0..n_layers {
            let fan_in = self.dims[l];
            let mut z = self.biases[l].clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                *zo += row.iter().zip(&current).map(|(w, a)| w * a).sum::<f64>();
            }
            if l + 1 < n_layers {
                for v in &mut z {
                    *v = v.max(0.0);
                }
                activations.push(z.clone());
                current = z;
            } else {
                return Ok((activations, z));
            }
        }
        unreachable!("Layout::new guarantees at least one layer");
    }

    /// Backpropagates a gradient w.r.t. the output logits into a flat
    /// parameter gradient.
    fn backprop(&self, activations: &[Vec<f64>], dlogits: &[f64]) -> WeightVector {
        let n_layers = self.n_layers();
        let mut grad = WeightVector::zeros(self.layout());
        let mut delta = dlogits.to_vec();
        // Walk slices back-to-front.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut pos = 0;
        for l in 0..n_layers {
            offsets.push(pos);
            pos += (self.dims[l] + 1) * self.dims[l + 1];
        }
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let base = offsets[l];
            let input = &activations[l];
            {
                let g = grad.values_mut();
                for o in 0..fan_out {
                    let row = &mut g[base + o * fan_in..base + (o + 1) * fan_in];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += delta[o] * a;
                    }
                    g[base + fan_in * fan_out + o] += delta[o];
                }
            }
            if l > 0 {
                let mut next = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += delta[o] * w;
                    }
                }
                // Rectifier mask: activations[l] holds post-ReLU values.
                for (n, a) in next.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        grad
    }

    /// Flat copy of all parameters.
    pub fn flatten(&self) -> WeightVector {
        let layout = self.layout();
        let mut values = Vec::with_capacity(layout.param_count());
        for l in 0..self.n_layers() {
            values.extend_from_slice(&self.weights[l]);
            values.extend_from_slice(&self.biases[l]);
        }
        WeightVector { layout, values }
    }

    /// Rebuilds a network from a flat vector.
    pub fn restore(v: &WeightVector) -> Result<Mlp> {
        let mut net = Mlp::zeros(v.layout().dims());
        net.set_from(v)?;
        Ok(net)
    }

    /// Overwrites all parameters from a flat vector of the same layout.
    pub fn set_from(&mut self, v: &WeightVector) -> Result<()> {
        let expected = self.layout();
        if v.layout() != &expected {
            return Err(Error::LayoutMismatch {
                expected: expected.hash(),
                got: v.layout().hash(),
            });
        }
        let mut pos = 0;
        for l in 0..self.n_layers() {
            let nw = self.weights[l].len();
            self.weights[l].copy_from_slice(&v.values[pos..pos + nw]);
            pos += nw;
            let nb = self.biases[l].len();
            self.biases[l].copy_from_slice(&v.values[pos..pos + nb]);
            pos += nb;
        }
        Ok(())
    }
}

/// Max-subtracted softmax; entries in (0, 1], summing to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Log-probabilities of the softmax distribution over `logits`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - max - log_sum).collect()
}

/// Squared TD loss and its gradient: loss = (target - Q(s,a))^2 with the
/// target held constant. The gradient flows only through output `a`.
pub fn grad_td_loss(
    net: &Mlp,
    state: &[f64],
    action: usize,
    target: f64,
) -> Result<(WeightVector, f64)> {
    if !target.is_finite() {
        return Err(Error::NonFinite { op: "grad_td_loss" });
    }
    if action >= net.output_dim() {
        return Err(Error::usage(
            "grad_td_loss",
            format!("action {action} out of range"),
        ));
    }
    let (activations, logits) = net.forward_trace(state)?;
    let error = target - logits[action];
    let mut dlogits = vec![0.0; net.output_dim()];
    dlogits[action] = -2.0 * error;
    Ok((net.backprop(&activations, &dlogits), error * error))
}

/// Gradient of log pi(a|s) where pi = softmax(forward(s)), plus the
/// log-probability itself. At the logit level the gradient is
/// onehot(a) - softmax(logits).
pub fn grad_log_policy(net: &Mlp, state: &[f64], action: usize) -> Result<(WeightVector, f64)> {
    if action >= net.output_dim() {
        return Err(Error::usage(
            "grad_log_policy",
            format!("action {action} out of range"),
        ));
    }
    let (activations, logits) = net.forward_trace(state)?;
    let probs = softmax(&logits);
    let log_prob = log_softmax(&logits)[action];
    let mut dlogits: Vec<f64> = probs.iter().map(|p| -p).collect();
    dlogits[action] += 1.0;
    Ok((net.backprop(&activations, &dlogits), log_prob))
}

/// Adam optimizer state (bias-corrected, minimization direction).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> AdamState {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One descent step in place. Callers negate the gradient for ascent
    /// objectives.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::usage(
                "AdamState::step",
                format!(
                    "length mismatch: state {}, params {}, grad {}",
                    self.m.len(),
                    params.len(),
                    grad.len()
                ),
            ));
        }
        self.t += 1;
        let b1c = 1.0 - self.beta1.powi(self.t as i32);
        let b2c = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / b1c;
            let v_hat = self.v[i] / b2c;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
