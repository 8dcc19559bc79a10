//! Clipped-surrogate PPO with GAE over generic rollout batches.
//!
//! The same batch type carries master-level macro transitions and primitive
//! sub-policy steps, so both levels of the hierarchy train through this
//! module unchanged.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{contract, MlshError, Result};
use crate::nn::{clip_global_norm, log_softmax, Activations, AdamState, BackwardScratch, GradVector, NetParams};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            epochs: 4,
            minibatch_size: 256,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 3e-4,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MlshError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("ppo gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("ppo lambda must be in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("ppo clip must be positive");
        }
        if self.epochs == 0 || self.minibatch_size == 0 {
            return bad("ppo epochs and minibatch_size must be positive");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("ppo lr must be positive");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 || self.max_grad_norm < 0.0 {
            return bad("ppo coefficients must be non-negative");
        }
        Ok(())
    }
}

/// How a step relates to the one after it in the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepEnd<S> {
    /// The next batch entry continues this trajectory.
    Continue,
    /// Episode ended; nothing to bootstrap.
    Terminal,
    /// Trajectory cut here; bootstrap from the given value estimate.
    Truncated(S),
}

impl<S> StepEnd<S> {
    pub fn is_done(&self) -> bool {
        !matches!(self, StepEnd::Continue)
    }
}

/// On-policy experience for one network, plus advantages once finalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch<S> {
    obs_dim: usize,
    obs: Vec<S>,
    pub actions: Vec<usize>,
    pub logprobs: Vec<S>,
    pub rewards: Vec<S>,
    pub values: Vec<S>,
    pub ends: Vec<StepEnd<S>>,
    pub advantages: Vec<S>,
    pub returns: Vec<S>,
}

impl<S: Scalar> RolloutBatch<S> {
    pub fn new(obs_dim: usize) -> Self {
        Self {
            obs_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            logprobs: Vec::new(),
            rewards: Vec::new(),
            values: Vec::new(),
            ends: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn push(&mut self, obs: &[S], action: usize, logprob: S, reward: S, value: S, end: StepEnd<S>) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        self.obs.extend_from_slice(obs);
        self.actions.push(action);
        self.logprobs.push(logprob);
        self.rewards.push(reward);
        self.values.push(value);
        self.ends.push(end);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn obs(&self, i: usize) -> &[S] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn is_finalized(&self) -> bool {
        self.advantages.len() == self.len() && self.returns.len() == self.len()
    }

    fn check_lengths(&self) -> Result<()> {
        let n = self.len();
        if self.obs.len() != n * self.obs_dim
            || self.logprobs.len() != n
            || self.rewards.len() != n
            || self.values.len() != n
            || self.ends.len() != n
        {
            return Err(contract("rollout batch fields have unequal lengths"));
        }
        Ok(())
    }
}

/// Generalized advantage estimation.
///
/// `A_t = δ_t + γλ(1 − done_t) A_{t+1}` with
/// `δ_t = r_t + γ V_next − V_t`, where `V_next` is `V_{t+1}` for a continuing
/// step, zero for a terminal one, the stored estimate for a truncated one,
/// and `bootstrap_value` past the final entry.
pub fn compute_gae<S: Scalar>(batch: &mut RolloutBatch<S>, gamma: f64, lambda: f64, bootstrap_value: S) -> Result<()> {
    batch.check_lengths()?;
    let n = batch.len();
    let (g, gl) = (S::lit(gamma), S::lit(gamma * lambda));
    let mut adv = vec![S::zero(); n];
    let mut next_adv = S::zero();
    for t in (0..n).rev() {
        let (next_value, carry) = match batch.ends[t] {
            StepEnd::Continue if t + 1 < n => (batch.values[t + 1], next_adv),
            StepEnd::Continue => (bootstrap_value, S::zero()),
            StepEnd::Terminal => (S::zero(), S::zero()),
            StepEnd::Truncated(v) => (v, S::zero()),
        };
        let delta = batch.rewards[t] + g * next_value - batch.values[t];
        adv[t] = delta + gl * carry;
        next_adv = adv[t];
    }
    if adv.iter().any(|a| !a.is_finite()) {
        return Err(MlshError::NonFinite { context: "advantages".into() });
    }
    batch.returns = adv.iter().zip(&batch.values).map(|(&a, &v)| a + v).collect();
    batch.advantages = adv;
    Ok(())
}

/// Shift and scale advantages to zero mean and unit (population) standard
/// deviation, with the deviation floored at 1e-8.
pub fn normalize_advantages<S: Scalar>(batch: &mut RolloutBatch<S>) {
    let n = batch.advantages.len();
    if n == 0 {
        return;
    }
    let nn = S::count(n);
    let mean = batch.advantages.iter().copied().sum::<S>() / nn;
    let var = batch.advantages.iter().map(|&a| (a - mean) * (a - mean)).sum::<S>() / nn;
    let std = var.sqrt().max(S::lit(1e-8));
    batch.advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
}

/// GAE followed by whole-batch advantage normalization.
pub fn finalize<S: Scalar>(batch: &mut RolloutBatch<S>, cfg: &PpoConfig, bootstrap_value: S) -> Result<()> {
    compute_gae(batch, cfg.gamma, cfg.lambda, bootstrap_value)?;
    normalize_advantages(batch);
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// PPO loss over the batch entries in `indices` and its parameter gradient.
///
/// The returned accumulator holds the summed per-sample gradient with count
/// `indices.len()`, so its mean is the gradient of the mean loss.
pub fn ppo_loss<S: Scalar>(
    batch: &RolloutBatch<S>,
    indices: &[usize],
    net: &NetParams<S>,
    cfg: &PpoConfig,
) -> Result<(LossStats, GradVector<S>)> {
    if !batch.is_finalized() {
        return Err(contract("ppo_loss needs a finalized batch"));
    }
    let shape = net.shape();
    if batch.obs_dim() != shape.input_dim {
        return Err(contract(format!(
            "batch observations have {} entries, network expects {}",
            batch.obs_dim(),
            shape.input_dim
        )));
    }
    let a_count = shape.action_count;
    let mut grad = vec![S::zero(); net.len()];
    let mut acts = Activations::for_shape(shape);
    let mut scratch = BackwardScratch::for_shape(shape);
    let mut logit_grad = vec![S::zero(); a_count];
    let (lo, hi) = (S::one() - S::lit(cfg.clip), S::one() + S::lit(cfg.clip));
    let (c_v, c_e) = (S::lit(cfg.value_coef), S::lit(cfg.entropy_coef));
    let two = S::lit(2.0);

    let (mut pg_sum, mut v_sum, mut h_sum, mut clipped) = (S::zero(), S::zero(), S::zero(), 0usize);
    for &i in indices {
        let action = batch.actions[i];
        if action >= a_count {
            return Err(contract(format!("action {action} out of range for {a_count} logits")));
        }
        net.forward_into(batch.obs(i), &mut acts);
        let logp = log_softmax(&acts.logits);
        let probs: Vec<S> = logp.iter().map(|l| l.exp()).collect();
        let entropy = -probs.iter().zip(&logp).map(|(&p, &l)| p * l).sum::<S>();

        let adv = batch.advantages[i];
        let ratio = (logp[action] - batch.logprobs[i]).exp();
        let surr = ratio * adv;
        let surr_clip = ratio.max(lo).min(hi) * adv;
        // d(-min(surr, surr_clip)) / d logp_new
        let d_logp = if surr <= surr_clip { -ratio * adv } else { S::zero() };
        if surr > surr_clip {
            clipped += 1;
        }
        pg_sum = pg_sum - surr.min(surr_clip);

        let v_err = acts.value - batch.returns[i];
        v_sum = v_sum + v_err * v_err;
        h_sum = h_sum + entropy;

        for j in 0..a_count {
            let onehot = if j == action { S::one() } else { S::zero() };
            logit_grad[j] = d_logp * (onehot - probs[j]) + c_e * probs[j] * (logp[j] + entropy);
        }
        let value_grad = two * c_v * v_err;
        net.backward_accumulate(batch.obs(i), &acts, &logit_grad, value_grad, &mut grad, &mut scratch);
    }

    let n = indices.len().max(1) as f64;
    let policy_loss = pg_sum.as_f64() / n;
    let value_loss = v_sum.as_f64() / n;
    let entropy = h_sum.as_f64() / n;
    let loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy;
    let stats = LossStats { loss, policy_loss, value_loss, entropy, clip_fraction: clipped as f64 / n };
    let grad = GradVector::from_sum(grad, indices.len());
    if !loss.is_finite() || !grad.is_finite() {
        return Err(MlshError::NonFinite { context: "ppo loss".into() });
    }
    Ok((stats, grad))
}

/// Number of optimizer steps per epoch for a batch of `len` entries.
pub fn steps_per_epoch(len: usize, minibatch_size: usize) -> usize {
    len.div_ceil(minibatch_size.max(1))
}

/// Shuffle `0..len` and split it into `steps` contiguous, near-equal chunks.
/// Chunks are empty when `steps > len`.
pub fn plan_minibatches(len: usize, steps: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(rng);
    (0..steps).map(|s| perm[s * len / steps..(s + 1) * len / steps].to_vec()).collect()
}

/// Mean statistics across the minibatches of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub optimizer_steps: usize,
}

impl UpdateStats {
    pub(crate) fn accumulate(&mut self, s: &LossStats) {
        let k = self.optimizer_steps as f64;
        let mix = |a: f64, b: f64| (a * k + b) / (k + 1.0);
        self.loss = LossStats {
            loss: mix(self.loss.loss, s.loss),
            policy_loss: mix(self.loss.policy_loss, s.policy_loss),
            value_loss: mix(self.loss.value_loss, s.value_loss),
            entropy: mix(self.loss.entropy, s.entropy),
            clip_fraction: mix(self.loss.clip_fraction, s.clip_fraction),
        };
        self.optimizer_steps += 1;
    }
}

/// Single-worker PPO update: for each epoch shuffle, then per minibatch take
/// the loss gradient, clip its global norm and apply Adam.
pub fn ppo_update<S: Scalar>(
    net: &mut NetParams<S>,
    adam: &mut AdamState<S>,
    batch: &RolloutBatch<S>,
    cfg: &PpoConfig,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    let mut stats = UpdateStats::default();
    if batch.is_empty() {
        return Ok(stats);
    }
    let steps = steps_per_epoch(batch.len(), cfg.minibatch_size);
    for epoch in 0..cfg.epochs {
        for (mb, chunk) in plan_minibatches(batch.len(), steps, rng).iter().enumerate() {
            if chunk.is_empty() {
                continue;
            }
            let (loss, grad) = ppo_loss(batch, chunk, net, cfg).map_err(|e| annotate(e, epoch, mb))?;
            let mut g = grad.mean();
            clip_global_norm(&mut g, cfg.max_grad_norm);
            adam.apply(net.as_flat_mut(), &g, cfg.lr)?;
            stats.accumulate(&loss);
        }
    }
    Ok(stats)
}

pub(crate) fn annotate(e: MlshError, epoch: usize, minibatch: usize) -> MlshError {
    match e {
        MlshError::NonFinite { context } => {
            MlshError::NonFinite { context: format!("{context} (epoch {epoch}, minibatch {minibatch})") }
        }
        other => other,
    }
}
