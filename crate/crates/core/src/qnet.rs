//! Feedforward double Q-network with a Boltzmann policy and causal-entropy
//! regularization.
//!
//! The network maps a flattened causal state (3p inputs) to one Q-value per
//! stream. Actions are stream subsets of size m; the scalar Q of a subset is
//! the mean of its per-stream outputs. The TD target decouples selection
//! (online argmax) from evaluation (target network) and adds the causal
//! entropy of the current policy; the loss subtracts the entropy again,
//! scaled by `alpha_ent`, and the analytic gradient carries the softmax
//! Jacobian of the masked entropy.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Mat;
use crate::{Error, Result};

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in` weights, row-major.
    pub w: Mat,
    pub b: Vec<f64>,
}

/// Network parameters: rectifier hidden layers, linear output of width p.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub layers: Vec<Layer>,
}

impl NetParams {
    /// Uniform fan-in initialization over the given layout
    /// `[input, hidden..., output]`.
    pub fn init(layout: &[usize], seed: u64) -> Self {
        assert!(layout.len() >= 2, "layout needs input and output widths");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layout.len() - 1);
        for win in layout.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut w = Mat::zeros(fan_out, fan_in);
            for i in 0..fan_out {
                for j in 0..fan_in {
                    w.set(i, j, rng.random_range(-bound..bound));
                }
            }
            layers.push(Layer { w, b: vec![0.0; fan_out] });
        }
        NetParams { layers }
    }

    /// All-zero parameters with the same shapes.
    pub fn zeros_like(&self) -> Self {
        NetParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer { w: Mat::zeros(l.w.rows, l.w.cols), b: vec![0.0; l.b.len()] })
                .collect(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.cols
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().w.rows
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.is_finite() && l.b.iter().all(|v| v.is_finite()))
    }
}

/// Boltzmann policy over the candidate streams.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    pub probs: Vec<f64>,
    pub tau: f64,
}

/// One replay tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Flattened causal state (3p values).
    pub state: Vec<f64>,
    /// Selected stream indices, sorted ascending, |action| = m.
    pub action: Vec<usize>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Binary vector: 1 where selecting that stream causally earns reward.
    pub causal_mask: Vec<u8>,
}

/// Ring buffer with uniform without-replacement batch sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    buf: Vec<Transition>,
    next: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        ReplayBuffer {
            capacity,
            buf: Vec::with_capacity(capacity.min(4096)),
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    /// Uniform sample of `batch` distinct transitions (all of them when the
    /// buffer is smaller than the batch).
    pub fn sample(&mut self, batch: usize) -> Vec<Transition> {
        let n = self.buf.len();
        if n <= batch {
            return self.buf.clone();
        }
        // partial Fisher-Yates over an index array
        let mut idx: Vec<usize> = (0..n).collect();
        for k in 0..batch {
            let j = k + self.rng.random_range(0..(n - k));
            idx.swap(k, j);
        }
        idx[..batch].iter().map(|&i| self.buf[i].clone()).collect()
    }
}

struct ForwardCache {
    /// Activations per layer, `a[0]` is the input.
    activations: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    zs: Vec<Vec<f64>>,
}

fn forward_cache(params: &NetParams, state: &[f64]) -> ForwardCache {
    let mut activations = Vec::with_capacity(params.layers.len() + 1);
    let mut zs = Vec::with_capacity(params.layers.len());
    activations.push(state.to_vec());
    let last = params.layers.len() - 1;
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = layer.w.mat_vec(activations.last().unwrap());
        for (zi, bi) in z.iter_mut().zip(layer.b.iter()) {
            *zi += bi;
        }
        zs.push(z.clone());
        if l < last {
            for v in z.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        activations.push(z);
    }
    ForwardCache { activations, zs }
}

/// Per-stream Q-values for a flattened causal state.
pub fn forward(params: &NetParams, state: &[f64]) -> Result<Vec<f64>> {
    if state.len() != params.input_width() {
        return Err(Error::Invalid(format!(
            "state length {} != network input width {}",
            state.len(),
            params.input_width()
        )));
    }
    let mut cache = forward_cache(params, state);
    Ok(cache.activations.pop().expect("at least the input layer"))
}

/// Softmax with temperature, max-subtracted for stability.
pub fn boltzmann(q: &[f64], tau: f64) -> PolicyDistribution {
    assert!(tau > 0.0, "temperature must be positive");
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = q.iter().map(|&v| ((v - max) / tau).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    PolicyDistribution { probs, tau }
}

/// Masked policy entropy `-sum_i mask_i pi_i ln pi_i` with `0 ln 0 = 0`.
pub fn causal_entropy(pi: &PolicyDistribution, mask: &[u8]) -> f64 {
    debug_assert_eq!(pi.probs.len(), mask.len());
    let mut h = 0.0;
    for (p, &m) in pi.probs.iter().zip(mask.iter()) {
        if m != 0 && *p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// TD target with double-Q decoupling and the causal-entropy bonus.
pub fn td_target(r: f64, gamma: f64, q_next_best: f64, h_c: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&gamma));
    r + gamma * q_next_best + h_c
}

/// The `m` indices with the largest Q-values, ties broken toward the lowest
/// index; returned sorted ascending.
pub fn select_top_m(q: &[f64], m: usize) -> Result<Vec<usize>> {
    let p = q.len();
    if m == 0 || m > p {
        return Err(Error::Invalid(format!("m={m} out of range 1..={p}")));
    }
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| {
        q[b].partial_cmp(&q[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut top: Vec<usize> = idx[..m].to_vec();
    top.sort_unstable();
    Ok(top)
}

/// Sample `m` distinct streams without replacement, proportional to the
/// policy probabilities.
pub fn sample_distinct(
    pi: &PolicyDistribution,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let p = pi.probs.len();
    if m == 0 || m > p {
        return Err(Error::Invalid(format!("m={m} out of range 1..={p}")));
    }
    let mut remaining: Vec<(usize, f64)> =
        pi.probs.iter().copied().enumerate().collect();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let total: f64 = remaining.iter().map(|(_, w)| w).sum();
        let pick = if total <= 0.0 {
            0
        } else {
            let u = rng.random_range(0.0..total);
            let mut acc = 0.0;
            let mut chosen = remaining.len() - 1;
            for (k, (_, w)) in remaining.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = k;
                    break;
                }
            }
            chosen
        };
        out.push(remaining.remove(pick).0);
    }
    out.sort_unstable();
    Ok(out)
}

/// Loss and analytic gradient over a batch.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: NetParams,
}

/// Frozen TD targets for a batch (the value the squared error pulls toward).
///
/// For each transition: the online net ranks the next state's streams, the
/// target net scores that subset, and the causal entropy of the online
/// policy at the current state is added per the regularized target.
pub fn compute_targets(
    online: &NetParams,
    target: &NetParams,
    batch: &[Transition],
    tau: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    let mut ys = Vec::with_capacity(batch.len());
    for (k, tr) in batch.iter().enumerate() {
        let q_s = forward(online, &tr.state)?;
        let pi = boltzmann(&q_s, tau);
        let h_c = causal_entropy(&pi, &tr.causal_mask);
        let q_next_online = forward(online, &tr.next_state)?;
        let best = select_top_m(&q_next_online, tr.action.len())?;
        let q_next_target = forward(target, &tr.next_state)?;
        let q_next_best =
            best.iter().map(|&i| q_next_target[i]).sum::<f64>() / best.len() as f64;
        let y = td_target(tr.reward, gamma, q_next_best, h_c);
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("target for batch index {k}")));
        }
        ys.push(y);
    }
    Ok(ys)
}

/// Loss evaluated at `params` against fixed targets:
/// `mean (y - Q(s,a))^2 - alpha_ent * mean H_c(pi(.|s))`.
pub fn loss_with_targets(
    params: &NetParams,
    batch: &[Transition],
    targets: &[f64],
    alpha_ent: f64,
    tau: f64,
) -> Result<f64> {
    let b = batch.len() as f64;
    let mut loss = 0.0;
    for (tr, &y) in batch.iter().zip(targets.iter()) {
        let q_s = forward(params, &tr.state)?;
        let q_sa =
            tr.action.iter().map(|&i| q_s[i]).sum::<f64>() / tr.action.len() as f64;
        let pi = boltzmann(&q_s, tau);
        let h_c = causal_entropy(&pi, &tr.causal_mask);
        loss += (y - q_sa) * (y - q_sa) / b - alpha_ent * h_c / b;
    }
    Ok(loss)
}

/// Loss and reverse-mode gradient of the causal-entropy-regularized TD
/// objective. Target parameters are held constant; the targets themselves
/// are frozen values (no gradient flows through them).
pub fn loss_and_grad(
    online: &NetParams,
    target: &NetParams,
    batch: &[Transition],
    alpha_ent: f64,
    tau: f64,
    gamma: f64,
) -> Result<LossGrad> {
    if batch.is_empty() {
        return Err(Error::Invalid("batch must be nonempty".into()));
    }
    let targets = compute_targets(online, target, batch, tau, gamma)?;
    let b = batch.len() as f64;
    let mut grad = online.zeros_like();
    let mut loss = 0.0;
    for (k, (tr, &y)) in batch.iter().zip(targets.iter()).enumerate() {
        let cache = forward_cache(online, &tr.state);
        let q_s = cache.activations.last().unwrap().clone();
        if q_s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("q-values for batch index {k}")));
        }
        let m = tr.action.len() as f64;
        let q_sa = tr.action.iter().map(|&i| q_s[i]).sum::<f64>() / m;
        let pi = boltzmann(&q_s, tau);
        let h_c = causal_entropy(&pi, &tr.causal_mask);
        loss += (y - q_sa) * (y - q_sa) / b - alpha_ent * h_c / b;

        // adjoint on the per-stream outputs
        let p = q_s.len();
        let mut g_out = vec![0.0; p];
        let td_coeff = 2.0 * (q_sa - y) / (b * m);
        for &i in &tr.action {
            g_out[i] += td_coeff;
        }
        if alpha_ent != 0.0 {
            // d(-alpha H_c)/dq_k through the softmax Jacobian; x (ln x + 1)
            // has limit 0 as x -> 0+, so underflowed probabilities drop out
            let xlnx1 = |x: f64| if x > 0.0 { x * (x.ln() + 1.0) } else { 0.0 };
            let s: f64 = pi
                .probs
                .iter()
                .zip(tr.causal_mask.iter())
                .filter(|(_, &c)| c != 0)
                .map(|(&pk, _)| xlnx1(pk))
                .sum();
            for k2 in 0..p {
                let pk = pi.probs[k2];
                let ck = if tr.causal_mask[k2] != 0 { 1.0 } else { 0.0 };
                g_out[k2] += alpha_ent / (tau * b) * (ck * xlnx1(pk) - pk * s);
            }
        }
        backprop(online, &cache, &g_out, &mut grad);
    }
    if !grad.is_finite() || !loss.is_finite() {
        return Err(Error::NonFinite("loss or gradient".into()));
    }
    Ok(LossGrad { loss, grad })
}

/// Accumulate parameter gradients for one sample given the output adjoint.
fn backprop(params: &NetParams, cache: &ForwardCache, g_out: &[f64], grad: &mut NetParams) {
    let last = params.layers.len() - 1;
    let mut g = g_out.to_vec();
    for l in (0..params.layers.len()).rev() {
        let a_prev = &cache.activations[l];
        let gl = &mut grad.layers[l];
        for i in 0..params.layers[l].w.rows {
            let gi = g[i];
            if gi != 0.0 {
                let row = gl.w.row_mut(i);
                for (rj, aj) in row.iter_mut().zip(a_prev.iter()) {
                    *rj += gi * aj;
                }
                gl.b[i] += gi;
            }
        }
        if l > 0 {
            let mut g_prev = vec![0.0; params.layers[l].w.cols];
            for i in 0..params.layers[l].w.rows {
                let gi = g[i];
                if gi != 0.0 {
                    let row = params.layers[l].w.row(i);
                    for (gp, wj) in g_prev.iter_mut().zip(row.iter()) {
                        *gp += gi * wj;
                    }
                }
            }
            // rectifier derivative on the previous pre-activation
            let z_prev = &cache.zs[l - 1];
            for (gp, z) in g_prev.iter_mut().zip(z_prev.iter()) {
                if *z <= 0.0 {
                    *gp = 0.0;
                }
            }
            g = g_prev;
        }
        let _ = last;
    }
}

/// Euclidean norm over every parameter gradient.
pub fn grad_norm(grad: &NetParams) -> f64 {
    let mut total = 0.0;
    for layer in &grad.layers {
        total += layer.w.data().iter().map(|v| v * v).sum::<f64>();
        total += layer.b.iter().map(|v| v * v).sum::<f64>();
    }
    total.sqrt()
}

/// Scale a gradient so its global norm does not exceed `max_norm`.
pub fn clip_grad(grad: &mut NetParams, max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad_norm(grad);
    if norm > max_norm {
        let scale = max_norm / norm;
        for layer in grad.layers.iter_mut() {
            layer.w.scale(scale);
            for b in layer.b.iter_mut() {
                *b *= scale;
            }
        }
    }
}

/// One SGD step: `theta <- theta - lr * grad`.
pub fn sgd_step(params: &NetParams, grad: &NetParams, lr: f64) -> Result<NetParams> {
    if lr <= 0.0 {
        return Err(Error::Invalid("learning rate must be positive".into()));
    }
    if params.layers.len() != grad.layers.len() {
        return Err(Error::Invalid("gradient shape mismatch".into()));
    }
    let mut out = params.clone();
    for (layer, glayer) in out.layers.iter_mut().zip(grad.layers.iter()) {
        if layer.w.rows != glayer.w.rows
            || layer.w.cols != glayer.w.cols
            || layer.b.len() != glayer.b.len()
        {
            return Err(Error::Invalid("gradient shape mismatch".into()));
        }
        layer.w.add_scaled(-lr, &glayer.w);
        for (bi, gi) in layer.b.iter_mut().zip(glayer.b.iter()) {
            *bi -= lr * gi;
        }
    }
    Ok(out)
}

/// Target-network update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyncMode {
    /// Full copy of the online parameters.
    Hard,
    /// `target <- (1-rate) target + rate * online`.
    Polyak(f64),
}

pub fn sync_target(online: &NetParams, target: &NetParams, mode: SyncMode) -> NetParams {
    match mode {
        SyncMode::Hard => online.clone(),
        SyncMode::Polyak(rate) => {
            let mut out = target.clone();
            for (t, o) in out.layers.iter_mut().zip(online.layers.iter()) {
                t.w.scale(1.0 - rate);
                t.w.add_scaled(rate, &o.w);
                for (tb, ob) in t.b.iter_mut().zip(o.b.iter()) {
                    *tb = (1.0 - rate) * *tb + rate * ob;
                }
            }
            out
        }
    }
}

/// Versioned textual checkpoint; full-precision decimal values round-trip
/// bit-exactly.
pub fn format_checkpoint(params: &NetParams) -> String {
    let mut out = String::from("qnet-checkpoint v1\n");
    out.push_str(&format!("layers {}\n", params.layers.len()));
    for layer in &params.layers {
        out.push_str(&format!("layer {} {}\n", layer.w.cols, layer.w.rows));
        for i in 0..layer.w.rows {
            let row: Vec<String> = layer.w.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str("w ");
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        let bias: Vec<String> = layer.b.iter().map(|v| format!("{v}")).collect();
        out.push_str("b ");
        out.push_str(&bias.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_checkpoint(text: &str) -> Result<NetParams> {
    let mut lines = text.lines().enumerate().peekable();
    let parse_err = |row: usize, msg: String| Error::Parse { row: row + 1, col: 1, msg };
    let (r0, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty checkpoint".into()))?;
    if header.trim() != "qnet-checkpoint v1" {
        return Err(parse_err(r0, format!("unsupported header {header:?}")));
    }
    let (r1, count_line) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing layer count".into()))?;
    let n_layers: usize = count_line
        .strip_prefix("layers ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| parse_err(r1, format!("expected `layers <n>`, got {count_line:?}")))?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let (rl, shape_line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing layer shape".into()))?;
        let dims: Vec<usize> = shape_line
            .strip_prefix("layer ")
            .map(|s| s.split_whitespace().filter_map(|t| t.parse().ok()).collect())
            .unwrap_or_default();
        if dims.len() != 2 {
            return Err(parse_err(rl, format!("expected `layer <in> <out>`, got {shape_line:?}")));
        }
        let (fan_in, fan_out) = (dims[0], dims[1]);
        // bound the up-front allocation for untrusted input
        if fan_in == 0 || fan_out == 0 || fan_in.saturating_mul(fan_out) > 1 << 22 {
            return Err(parse_err(rl, format!("implausible layer shape {fan_in}x{fan_out}")));
        }
        let mut w = Mat::zeros(fan_out, fan_in);
        for i in 0..fan_out {
            let (rw, wline) = lines
                .next()
                .ok_or_else(|| parse_err(0, "missing weight row".into()))?;
            let vals = parse_value_line(wline, "w", fan_in)
                .map_err(|msg| parse_err(rw, msg))?;
            for (j, v) in vals.into_iter().enumerate() {
                w.set(i, j, v);
            }
        }
        let (rb, bline) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing bias row".into()))?;
        let b = parse_value_line(bline, "b", fan_out).map_err(|msg| parse_err(rb, msg))?;
        layers.push(Layer { w, b });
    }
    if layers.is_empty() {
        return Err(parse_err(0, "checkpoint has no layers".into()));
    }
    // consecutive layer shapes must chain
    for win in layers.windows(2) {
        if win[0].w.rows != win[1].w.cols {
            return Err(Error::Invalid(format!(
                "layer widths do not chain: {} then {}",
                win[0].w.rows, win[1].w.cols
            )));
        }
    }
    let params = NetParams { layers };
    if !params.is_finite() {
        return Err(Error::NonFinite("checkpoint parameter".into()));
    }
    Ok(params)
}

fn parse_value_line(
    line: &str,
    prefix: &str,
    expect: usize,
) -> std::result::Result<Vec<f64>, String> {
    let body = line
        .strip_prefix(prefix)
        .ok_or_else(|| format!("expected `{prefix} ...`, got {line:?}"))?;
    let vals: std::result::Result<Vec<f64>, String> = body
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad value {t:?}")))
        .collect();
    let vals = vals?;
    if vals.len() != expect {
        return Err(format!("expected {expect} values, got {}", vals.len()));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_transition(p: usize, m: usize, reward: f64) -> Transition {
        Transition {
            state: (0..3 * p).map(|i| (i as f64 * 0.37).sin()).collect(),
            action: (0..m).collect(),
            reward,
            next_state: (0..3 * p).map(|i| (i as f64 * 0.53).cos()).collect(),
            causal_mask: (0..p).map(|i| if i % 2 == 0 { 1 } else { 0 }).collect(),
        }
    }

    #[test]
    fn forward_zero_params_zero_output() {
        let params = NetParams::init(&[6, 4, 2], 1).zeros_like();
        let out = forward(&params, &[1.0; 6]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn forward_single_linear_layer_is_matrix_product() {
        let mut params = NetParams::init(&[3, 2], 7);
        params.layers[0].b = vec![0.5, -0.5];
        let x = [1.0, -2.0, 0.25];
        let out = forward(&params, &x).unwrap();
        for i in 0..2 {
            let want: f64 = params.layers[0]
                .w
                .row(i)
                .iter()
                .zip(x.iter())
                .map(|(w, v)| w * v)
                .sum::<f64>()
                + params.layers[0].b[i];
            assert!((out[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_shape_contract_and_mismatch() {
        let params = NetParams::init(&[9, 5, 4], 3);
        assert_eq!(forward(&params, &[0.0; 9]).unwrap().len(), 4);
        assert!(forward(&params, &[0.0; 8]).is_err());
    }

    #[test]
    fn boltzmann_uniform_and_closed_form() {
        let pi = boltzmann(&[2.0; 5], 1.0);
        for p in &pi.probs {
            assert!((p - 0.2).abs() < 1e-12);
        }
        let pi = boltzmann(&[1.0, 2.0], 1.0);
        assert!((pi.probs[0] - 0.2689).abs() < 1e-4);
        assert!((pi.probs[1] - 0.7311).abs() < 1e-4);
        // near-zero temperature concentrates on the argmax
        let pi = boltzmann(&[0.1, 0.9, 0.3], 1e-6);
        assert!(pi.probs[1] > 0.999);
    }

    #[test]
    fn boltzmann_shift_invariance() {
        let q = [0.3, -1.2, 2.5, 0.0];
        for &c in &[-5.0, 1.0, 100.0] {
            let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
            let a = boltzmann(&q, 0.7);
            let b = boltzmann(&shifted, 0.7);
            for (x, y) in a.probs.iter().zip(b.probs.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn causal_entropy_examples() {
        let pi = PolicyDistribution { probs: vec![0.5, 0.5], tau: 1.0 };
        assert_eq!(causal_entropy(&pi, &[0, 0]), 0.0);
        let h = causal_entropy(&pi, &[1, 0]);
        assert!((h - 0.5 * 0.5_f64.ln().abs()).abs() < 1e-12);
        // uniform over p with full mask: ln p
        let p = 7;
        let pi = boltzmann(&vec![1.0; p], 1.0);
        let h = causal_entropy(&pi, &vec![1u8; p]);
        assert!((h - (p as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounded_by_log_mask_sum() {
        // The ln(sum C) ceiling is exact for policies supported on the mask
        // and for mask sums >= 3; partial-support policies with one or two
        // masked entries can only reach sum(C)/e.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..300 {
            let p = 6;
            let q: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let pi = boltzmann(&q, 0.5);
            let mask: Vec<u8> = (0..p).map(|_| rng.random_range(0..2) as u8).collect();
            let total: u32 = mask.iter().map(|&m| m as u32).sum();
            let h = causal_entropy(&pi, &mask);
            assert!(h >= 0.0);
            match total {
                0 => assert_eq!(h, 0.0),
                1 | 2 => assert!(h <= total as f64 / std::f64::consts::E + 1e-12),
                _ => assert!(h <= (total as f64).ln() + 1e-12),
            }
            // full mask: plain entropy bounded by ln p
            let h_full = causal_entropy(&pi, &vec![1u8; p]);
            assert!(h_full <= (p as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn td_target_examples() {
        assert!((td_target(1.0, 0.9, 2.0, 0.5) - 3.3).abs() < 1e-12);
        assert_eq!(td_target(0.0, 0.0, 123.0, 0.0), 0.0);
        // no entropy reduces to the plain double-Q target
        assert_eq!(td_target(2.0, 0.5, 4.0, 0.0), 2.0 + 0.5 * 4.0);
    }

    #[test]
    fn top_m_examples_and_enumeration() {
        assert_eq!(select_top_m(&[3.0, 1.0, 3.0], 2).unwrap(), vec![0, 2]);
        assert_eq!(select_top_m(&[1.0, 2.0, 3.0], 3).unwrap(), vec![0, 1, 2]);
        assert!(select_top_m(&[1.0], 2).is_err());
        assert!(select_top_m(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn top_m_maximizes_subset_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let p = 8;
            let q: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = 1 + rng.random_range(0..p);
            let top = select_top_m(&q, m).unwrap();
            let top_sum: f64 = top.iter().map(|&i| q[i]).sum();
            // enumerate all C(p, m) subsets
            for bits in 0u32..(1 << p) {
                if bits.count_ones() as usize != m {
                    continue;
                }
                let sum: f64 =
                    (0..p).filter(|&i| bits & (1 << i) != 0).map(|i| q[i]).sum();
                assert!(sum <= top_sum + 1e-12);
            }
        }
    }

    #[test]
    fn sample_distinct_returns_m_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pi = boltzmann(&[0.0, 1.0, 2.0, 3.0, 4.0], 1.0);
        for _ in 0..100 {
            let a = sample_distinct(&pi, 3, &mut rng).unwrap();
            assert_eq!(a.len(), 3);
            assert!(a.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn loss_zero_for_zero_everything() {
        let params = NetParams::init(&[6, 3, 2], 1).zeros_like();
        let tr = Transition {
            state: vec![0.0; 6],
            action: vec![0],
            reward: 0.0,
            next_state: vec![0.0; 6],
            causal_mask: vec![0, 0],
        };
        let lg = loss_and_grad(&params, &params, &[tr], 0.0, 1.0, 0.0).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.grad.layers.iter().all(|l| l.w.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn duplicated_batch_leaves_loss_unchanged() {
        let online = NetParams::init(&[6, 8, 2], 5);
        let target = NetParams::init(&[6, 8, 2], 6);
        let tr = toy_transition(2, 1, 1.5);
        let single =
            loss_and_grad(&online, &target, std::slice::from_ref(&tr), 0.1, 0.8, 0.9).unwrap();
        let double =
            loss_and_grad(&online, &target, &[tr.clone(), tr], 0.1, 0.8, 0.9).unwrap();
        assert!((single.loss - double.loss).abs() < 1e-12);
    }

    #[test]
    fn zero_mask_reduces_to_unregularized_loss() {
        let online = NetParams::init(&[6, 8, 2], 5);
        let target = NetParams::init(&[6, 8, 2], 6);
        let mut tr = toy_transition(2, 1, 1.5);
        tr.causal_mask = vec![0, 0];
        let with_alpha =
            loss_and_grad(&online, &target, &[tr.clone()], 7.3, 0.8, 0.9).unwrap();
        let without =
            loss_and_grad(&online, &target, &[tr], 0.0, 0.8, 0.9).unwrap();
        assert_eq!(with_alpha.loss, without.loss);
    }

    /// Central finite differences against the analytic gradient on a small
    /// network, including the entropy term.
    #[test]
    fn gradient_matches_finite_differences() {
        let p = 2;
        let online = NetParams::init(&[3 * p, 6, p], 11);
        let target = NetParams::init(&[3 * p, 6, p], 12);
        let batch = vec![toy_transition(p, 1, 0.7), toy_transition(p, 2, -0.3)];
        let alpha = 0.25;
        let tau = 0.8;
        let gamma = 0.9;
        let lg = loss_and_grad(&online, &target, &batch, alpha, tau, gamma).unwrap();
        let targets = compute_targets(&online, &target, &batch, tau, gamma).unwrap();
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for l in 0..online.layers.len() {
            for i in 0..online.layers[l].w.rows {
                for j in 0..online.layers[l].w.cols {
                    let mut plus = online.clone();
                    plus.layers[l].w.add_at(i, j, h);
                    let mut minus = online.clone();
                    minus.layers[l].w.add_at(i, j, -h);
                    let lp = loss_with_targets(&plus, &batch, &targets, alpha, tau).unwrap();
                    let lm = loss_with_targets(&minus, &batch, &targets, alpha, tau).unwrap();
                    let fd = (lp - lm) / (2.0 * h);
                    let an = lg.grad.layers[l].w.get(i, j);
                    let denom = an.abs().max(fd.abs()).max(1e-8);
                    max_rel = max_rel.max((fd - an).abs() / denom);
                }
            }
            for i in 0..online.layers[l].b.len() {
                let mut plus = online.clone();
                plus.layers[l].b[i] += h;
                let mut minus = online.clone();
                minus.layers[l].b[i] -= h;
                let lp = loss_with_targets(&plus, &batch, &targets, alpha, tau).unwrap();
                let lm = loss_with_targets(&minus, &batch, &targets, alpha, tau).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let an = lg.grad.layers[l].b[i];
                let denom = an.abs().max(fd.abs()).max(1e-8);
                max_rel = max_rel.max((fd - an).abs() / denom);
            }
        }
        assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    }

    #[test]
    fn double_q_argmax_ignores_target_perturbation() {
        let p = 4;
        let online = NetParams::init(&[3 * p, 8, p], 21);
        let target_a = NetParams::init(&[3 * p, 8, p], 22);
        let target_b = NetParams::init(&[3 * p, 8, p], 23);
        let s_next: Vec<f64> = (0..3 * p).map(|i| (i as f64).sin()).collect();
        let q_online = forward(&online, &s_next).unwrap();
        let a_star = select_top_m(&q_online, 2).unwrap();
        // argmax must not depend on which target net scores it
        for target in [&target_a, &target_b] {
            let _ = forward(target, &s_next).unwrap();
            let again = select_top_m(&forward(&online, &s_next).unwrap(), 2).unwrap();
            assert_eq!(a_star, again);
        }
    }

    #[test]
    fn sgd_hand_arithmetic_and_convex_descent() {
        // one step on f(theta) = theta^2 from theta = 1 with lr 0.1 -> 0.8
        let mut params = NetParams::init(&[1, 1], 0).zeros_like();
        params.layers[0].w.set(0, 0, 1.0);
        let mut grad = params.zeros_like();
        grad.layers[0].w.set(0, 0, 2.0); // d/dtheta theta^2 at 1
        let stepped = sgd_step(&params, &grad, 0.1).unwrap();
        assert!((stepped.layers[0].w.get(0, 0) - 0.8).abs() < 1e-15);

        // zero grad leaves params unchanged
        let same = sgd_step(&params, &params.zeros_like(), 0.5).unwrap();
        assert_eq!(same, params);

        // 100 steps on theta^2 decrease monotonically
        let mut theta = 1.0f64;
        let mut last = theta * theta;
        for _ in 0..100 {
            theta -= 0.1 * 2.0 * theta;
            assert!(theta * theta <= last + 1e-15);
            last = theta * theta;
        }
    }

    #[test]
    fn sync_modes() {
        let online = NetParams::init(&[4, 3], 1);
        let target = NetParams::init(&[4, 3], 2);
        assert_eq!(sync_target(&online, &target, SyncMode::Hard), online);
        assert_eq!(sync_target(&online, &target, SyncMode::Polyak(1.0)), online);
        let unchanged = sync_target(&online, &target, SyncMode::Polyak(0.0));
        assert_eq!(unchanged, target);
    }

    #[test]
    fn replay_buffer_ring_and_batch() {
        let mut buf = ReplayBuffer::new(8, 1);
        for k in 0..20 {
            buf.push(toy_transition(2, 1, k as f64));
        }
        assert_eq!(buf.len(), 8);
        let batch = buf.sample(4);
        assert_eq!(batch.len(), 4);
        // without replacement: no duplicate rewards possible here
        let mut rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rewards.dedup();
        assert_eq!(rewards.len(), 4);
    }

    #[test]
    fn checkpoint_round_trip_bit_exact() {
        let params = NetParams::init(&[6, 5, 3], 99);
        let text = format_checkpoint(&params);
        let back = parse_checkpoint(&text).unwrap();
        assert_eq!(params, back);
        let text2 = format_checkpoint(&back);
        assert_eq!(text, text2);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(parse_checkpoint("").is_err());
        assert!(parse_checkpoint("qnet-checkpoint v2\nlayers 0\n").is_err());
        assert!(parse_checkpoint("qnet-checkpoint v1\nlayers 1\nlayer 2 1\nw 1 nope\nb 0\n")
            .is_err());
        // widths that do not chain
        let bad = "qnet-checkpoint v1\nlayers 2\nlayer 2 3\nw 1 2\nw 3 4\nw 5 6\nb 0 0 0\nlayer 2 1\nw 1 2\nb 0\n";
        assert!(parse_checkpoint(bad).is_err());
    }
}
