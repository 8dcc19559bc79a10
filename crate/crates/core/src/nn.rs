//! Dense policy-value network with exact reverse-mode gradients, categorical
//! sampling and Adam.
//!
//! Every policy in the hierarchy (the per-task master and each shared
//! sub-policy) is the same architecture: two tanh hidden layers feeding a
//! logits head and a scalar value head. Parameters live in one flat vector so
//! gradients, optimizer moments and checkpoints share a single layout:
//!
//! ```text
//! w1 [input][hidden] | b1 [hidden] | w2 [hidden][hidden] | b2 [hidden]
//! w_pi [hidden][actions] | b_pi [actions] | w_v [hidden] | b_v [1]
//! ```
//!
//! Weight matrices are stored input-major, so both the forward pass and the
//! weight gradient are sequences of `axpy` calls over contiguous rows, and
//! zero inputs (the one-hot grid encodings) are skipped outright.

use std::ops::Range;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{contract, MlshError, Result};
use crate::rng::Rng;
use crate::scalar::{axpy, dot, Scalar};

pub const DEFAULT_HIDDEN: usize = 64;

/// Architecture of a policy-value network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub action_count: usize,
}

impl NetShape {
    pub fn new(input_dim: usize, action_count: usize) -> Self {
        Self { input_dim, hidden: DEFAULT_HIDDEN, action_count }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn param_count(&self) -> usize {
        let Layout { value_bias, .. } = self.layout();
        value_bias.end
    }

    fn layout(&self) -> Layout {
        let (i, h, a) = (self.input_dim, self.hidden, self.action_count);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        Layout {
            w1: take(i * h),
            b1: take(h),
            w2: take(h * h),
            b2: take(h),
            w_pi: take(h * a),
            b_pi: take(a),
            w_v: take(h),
            value_bias: take(1),
        }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    w1: Range<usize>,
    b1: Range<usize>,
    w2: Range<usize>,
    b2: Range<usize>,
    w_pi: Range<usize>,
    b_pi: Range<usize>,
    w_v: Range<usize>,
    value_bias: Range<usize>,
}

/// Parameters of one policy-value network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<S> {
    shape: NetShape,
    params: Vec<S>,
}

/// Intermediate activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations<S> {
    pub h1: Vec<S>,
    pub h2: Vec<S>,
    pub logits: Vec<S>,
    pub value: S,
}

impl<S: Scalar> Activations<S> {
    pub fn for_shape(shape: NetShape) -> Self {
        Self {
            h1: vec![S::zero(); shape.hidden],
            h2: vec![S::zero(); shape.hidden],
            logits: vec![S::zero(); shape.action_count],
            value: S::zero(),
        }
    }
}

impl<S: Scalar> NetParams<S> {
    pub fn zeros(shape: NetShape) -> Self {
        Self { shape, params: vec![S::zero(); shape.param_count()] }
    }

    /// Orthogonal hidden weights with gain sqrt(2), policy head gain 0.01,
    /// value head gain 1, zero biases.
    pub fn init(shape: NetShape, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(shape);
        let l = shape.layout();
        let (i, h, a) = (shape.input_dim, shape.hidden, shape.action_count);
        let g = std::f64::consts::SQRT_2;
        net.params[l.w1].copy_from_slice(&orthogonal::<S>(i, h, g, rng));
        net.params[l.w2].copy_from_slice(&orthogonal::<S>(h, h, g, rng));
        net.params[l.w_pi].copy_from_slice(&orthogonal::<S>(h, a, 0.01, rng));
        net.params[l.w_v].copy_from_slice(&orthogonal::<S>(h, 1, 1.0, rng));
        net
    }

    /// Rebuild a network from its flat parameter vector.
    pub fn from_flat(shape: NetShape, params: Vec<S>) -> Result<Self> {
        if params.len() != shape.param_count() {
            return Err(contract(format!(
                "flat vector has {} entries, shape {:?} needs {}",
                params.len(),
                shape,
                shape.param_count()
            )));
        }
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn as_flat(&self) -> &[S] {
        &self.params
    }

    pub fn as_flat_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn into_flat(self) -> Vec<S> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn check_obs(&self, obs: &[S]) -> Result<()> {
        if obs.len() != self.shape.input_dim {
            return Err(contract(format!(
                "observation has {} entries, network expects {}",
                obs.len(),
                self.shape.input_dim
            )));
        }
        Ok(())
    }

    /// Logits and value for one observation.
    pub fn forward(&self, obs: &[S]) -> Result<(Vec<S>, S)> {
        self.check_obs(obs)?;
        if obs.iter().any(|x| !x.is_finite()) {
            return Err(contract("observation contains non-finite entries"));
        }
        let mut acts = Activations::for_shape(self.shape);
        self.forward_into(obs, &mut acts);
        Ok((acts.logits, acts.value))
    }

    /// Forward pass into preallocated activations. Shapes are the caller's
    /// responsibility.
    pub fn forward_into(&self, obs: &[S], acts: &mut Activations<S>) {
        let l = self.shape.layout();
        let h = self.shape.hidden;
        let a = self.shape.action_count;
        let p = &self.params;

        acts.h1.copy_from_slice(&p[l.b1]);
        let w1 = &p[l.w1];
        for (i, &x) in obs.iter().enumerate() {
            if x != S::zero() {
                axpy(x, &w1[i * h..(i + 1) * h], &mut acts.h1);
            }
        }
        acts.h1.iter_mut().for_each(|z| *z = z.tanh());

        acts.h2.copy_from_slice(&p[l.b2]);
        let w2 = &p[l.w2];
        for (j, &x) in acts.h1.iter().enumerate() {
            axpy(x, &w2[j * h..(j + 1) * h], &mut acts.h2);
        }
        acts.h2.iter_mut().for_each(|z| *z = z.tanh());

        acts.logits.copy_from_slice(&p[l.b_pi]);
        let w_pi = &p[l.w_pi];
        for (j, &x) in acts.h2.iter().enumerate() {
            axpy(x, &w_pi[j * a..(j + 1) * a], &mut acts.logits);
        }
        acts.value = p[l.value_bias.start] + dot(&acts.h2, &p[l.w_v]);
    }

    /// Gradient of `logit_grad · logits + value_grad · value` with respect to
    /// every parameter.
    pub fn backward(&self, obs: &[S], logit_grad: &[S], value_grad: S) -> Result<GradVector<S>> {
        self.check_obs(obs)?;
        if logit_grad.len() != self.shape.action_count {
            return Err(contract(format!(
                "logit gradient has {} entries, network has {} actions",
                logit_grad.len(),
                self.shape.action_count
            )));
        }
        let mut acts = Activations::for_shape(self.shape);
        self.forward_into(obs, &mut acts);
        let mut grad = vec![S::zero(); self.len()];
        let mut scratch = BackwardScratch::for_shape(self.shape);
        self.backward_accumulate(obs, &acts, logit_grad, value_grad, &mut grad, &mut scratch);
        Ok(GradVector::from_sum(grad, 1))
    }

    /// Adds the parameter gradient for one sample into `grad`.
    pub fn backward_accumulate(
        &self,
        obs: &[S],
        acts: &Activations<S>,
        logit_grad: &[S],
        value_grad: S,
        grad: &mut [S],
        scratch: &mut BackwardScratch<S>,
    ) {
        let l = self.shape.layout();
        let h = self.shape.hidden;
        let a = self.shape.action_count;
        let p = &self.params;

        // Heads.
        axpy(S::one(), logit_grad, &mut grad[l.b_pi.clone()]);
        {
            let gw = &mut grad[l.w_pi.clone()];
            for (j, &x) in acts.h2.iter().enumerate() {
                axpy(x, logit_grad, &mut gw[j * a..(j + 1) * a]);
            }
        }
        axpy(value_grad, &acts.h2, &mut grad[l.w_v.clone()]);
        grad[l.value_bias.start] = grad[l.value_bias.start] + value_grad;

        // Second hidden layer.
        let w_pi = &p[l.w_pi];
        let w_v = &p[l.w_v];
        for j in 0..h {
            let dh = dot(&w_pi[j * a..(j + 1) * a], logit_grad) + value_grad * w_v[j];
            let y = acts.h2[j];
            scratch.dz2[j] = dh * (S::one() - y * y);
        }
        axpy(S::one(), &scratch.dz2, &mut grad[l.b2.clone()]);
        {
            let gw = &mut grad[l.w2.clone()];
            for (j, &x) in acts.h1.iter().enumerate() {
                axpy(x, &scratch.dz2, &mut gw[j * h..(j + 1) * h]);
            }
        }

        // First hidden layer.
        let w2 = &p[l.w2];
        for j in 0..h {
            let dh = dot(&w2[j * h..(j + 1) * h], &scratch.dz2);
            let y = acts.h1[j];
            scratch.dz1[j] = dh * (S::one() - y * y);
        }
        axpy(S::one(), &scratch.dz1, &mut grad[l.b1.clone()]);
        let gw = &mut grad[l.w1];
        for (i, &x) in obs.iter().enumerate() {
            if x != S::zero() {
                axpy(x, &scratch.dz1, &mut gw[i * h..(i + 1) * h]);
            }
        }
    }
}

/// Reusable buffers for [`NetParams::backward_accumulate`].
#[derive(Debug, Clone)]
pub struct BackwardScratch<S> {
    dz1: Vec<S>,
    dz2: Vec<S>,
}

impl<S: Scalar> BackwardScratch<S> {
    pub fn for_shape(shape: NetShape) -> Self {
        Self { dz1: vec![S::zero(); shape.hidden], dz2: vec![S::zero(); shape.hidden] }
    }
}

/// Row-major `rows x cols` matrix whose smaller dimension is orthonormal,
/// scaled by `gain`.
fn orthogonal<S: Scalar>(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Vec<S> {
    // Orthonormalize `n` vectors of length `m` with modified Gram-Schmidt.
    let (n, m) = if rows >= cols { (cols, rows) } else { (rows, cols) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vecs.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            vecs.push(v);
        }
    }
    let mut out = vec![S::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let x = if rows >= cols { vecs[c][r] } else { vecs[r][c] };
            out[r * cols + c] = S::lit(gain * x);
        }
    }
    out
}

/// Gradient accumulator aligned with a [`NetParams`] layout.
///
/// Stores the running sum and the number of contributions; the average is
/// only formed when read.
#[derive(Debug, Clone, PartialEq)]
pub struct GradVector<S> {
    sum: Vec<S>,
    count: usize,
}

impl<S: Scalar> GradVector<S> {
    pub fn zeros(len: usize) -> Self {
        Self { sum: vec![S::zero(); len], count: 0 }
    }

    pub fn from_sum(sum: Vec<S>, count: usize) -> Self {
        Self { sum, count }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sum(&self) -> &[S] {
        &self.sum
    }

    /// Average over contributions; all zeros when nothing was accumulated.
    pub fn mean(&self) -> Vec<S> {
        if self.count == 0 {
            return vec![S::zero(); self.sum.len()];
        }
        let n = S::count(self.count);
        self.sum.iter().map(|&x| x / n).collect()
    }

    /// Add another accumulator's sum and count.
    pub fn absorb(&mut self, other: &GradVector<S>) -> Result<()> {
        if other.len() != self.len() {
            return Err(contract(format!(
                "gradient length {} does not match {}",
                other.len(),
                self.len()
            )));
        }
        axpy(S::one(), &other.sum, &mut self.sum);
        self.count += other.count;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.sum.iter().all(|x| x.is_finite())
    }
}

/// Adam moments and hyperparameters for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    m: Vec<S>,
    v: Vec<S>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(len: usize) -> Self {
        Self { m: vec![S::zero(); len], v: vec![S::zero(); len], step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-5 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[S] {
        &self.m
    }

    pub fn second_moment(&self) -> &[S] {
        &self.v
    }

    /// One bias-corrected Adam update of `params` along `grad`.
    ///
    /// A non-finite gradient is rejected before any state changes.
    pub fn apply(&mut self, params: &mut [S], grad: &[S], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(contract(format!(
                "adam state has {} entries, params {}, grad {}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(MlshError::NonFinite { context: format!("adam gradient entry {i}") });
        }
        self.step += 1;
        let (b1, b2) = (S::lit(self.beta1), S::lit(self.beta2));
        let one = S::one();
        let c1 = one - b1.powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = one - b2.powi(self.step.min(i32::MAX as u64) as i32);
        let lr = S::lit(lr);
        let eps = S::lit(self.eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Adam step on a whole network using the averaged gradient.
pub fn adam_step<S: Scalar>(
    net: &mut NetParams<S>,
    grad: &GradVector<S>,
    state: &mut AdamState<S>,
    lr: f64,
) -> Result<()> {
    state.apply(net.as_flat_mut(), &grad.mean(), lr)
}

/// Scale `grad` in place so its L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm<S: Scalar>(grad: &mut [S], max_norm: f64) -> S {
    let norm = dot(grad, grad).sqrt();
    let max = S::lit(max_norm);
    if max_norm > 0.0 && norm > max {
        let scale = max / (norm + S::lit(1e-6));
        grad.iter_mut().for_each(|g| *g = *g * scale);
    }
    norm
}

/// Numerically stable `log(sum(exp(logits)))`.
pub fn log_sum_exp<S: Scalar>(logits: &[S]) -> S {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let sum: S = logits.iter().map(|&l| (l - max).exp()).sum();
    max + sum.ln()
}

pub fn log_softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&l| l - lse).collect()
}

pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Draw an index from the softmax of `logits`; returns it with its
/// log-probability.
pub fn sample_categorical<S: Scalar>(logits: &[S], rng: &mut Rng) -> Result<(usize, S)> {
    if logits.is_empty() {
        return Err(contract("cannot sample from empty logits"));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(MlshError::NonFinite { context: "sampling logits".into() });
    }
    let probs = softmax(logits);
    let u = S::lit(rng.random::<f64>());
    let mut acc = S::zero();
    let mut index = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        acc = acc + p;
        if u < acc {
            index = i;
            break;
        }
    }
    Ok((index, logits[index] - log_sum_exp(logits)))
}

/// Index of the largest logit (first on ties).
pub fn argmax<S: Scalar>(xs: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
