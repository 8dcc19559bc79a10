//! Two-level agent: a per-task master picks one of K shared sub-policies
//! every N primitive steps, and the chosen sub-policy emits actions.
//!
//! One rollout is re-sliced two ways. The master view treats each N-step
//! segment as a single transition whose action is the chosen index and whose
//! reward is the segment sum. The sub view routes every primitive step to the
//! sub-policy that produced it, cutting the advantage recursion wherever the
//! active index changes.

use std::io::Write;

use serde::Serialize;

use crate::envs::Env;
use crate::error::{contract, Result};
use crate::nn::{sample_categorical, NetParams, NetShape};
use crate::ppo::{RolloutBatch, StepEnd};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// The shared sub-policy parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPolicySet<S> {
    nets: Vec<NetParams<S>>,
}

impl<S: Scalar> SubPolicySet<S> {
    pub fn new(nets: Vec<NetParams<S>>) -> Result<Self> {
        let Some(first) = nets.first() else {
            return Err(contract("a sub-policy set needs at least one network"));
        };
        if nets.iter().any(|n| n.shape() != first.shape()) {
            return Err(contract("sub-policies must share one shape"));
        }
        Ok(Self { nets })
    }

    pub fn init(count: usize, shape: NetShape, rng: &mut Rng) -> Result<Self> {
        Self::new((0..count).map(|_| NetParams::init(shape, rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.nets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nets.is_empty()
    }

    pub fn shape(&self) -> NetShape {
        self.nets[0].shape()
    }

    pub fn get(&self, k: usize) -> &NetParams<S> {
        &self.nets[k]
    }

    pub fn get_mut(&mut self, k: usize) -> &mut NetParams<S> {
        &mut self.nets[k]
    }

    pub fn nets(&self) -> &[NetParams<S>] {
        &self.nets
    }

    pub fn into_nets(self) -> Vec<NetParams<S>> {
        self.nets
    }
}

/// Per-task policy over sub-policy indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterPolicy<S> {
    pub net: NetParams<S>,
}

impl<S: Scalar> MasterPolicy<S> {
    pub fn init(obs_dim: usize, subpolicies: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self { net: NetParams::init(NetShape::new(obs_dim, subpolicies).with_hidden(hidden), rng) }
    }

    pub fn subpolicies(&self) -> usize {
        self.net.shape().action_count
    }
}

/// Output of one agent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentStep<S> {
    pub action: usize,
    pub k: usize,
    pub sub_logprob: S,
    pub sub_value: S,
    /// Present when the master made a fresh decision this step.
    pub master: Option<MasterChoice<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterChoice<S> {
    pub logprob: S,
    pub value: S,
}

/// One step of the hierarchical policy. At `step_in_segment == 0` the master
/// samples a fresh index; otherwise `cached_k` is reused.
pub fn act<S: Scalar>(
    master: &MasterPolicy<S>,
    subs: &SubPolicySet<S>,
    master_obs: &[S],
    sub_obs: &[S],
    step_in_segment: usize,
    cached_k: Option<usize>,
    rng: &mut Rng,
) -> Result<AgentStep<S>> {
    if master.subpolicies() != subs.len() {
        return Err(contract(format!(
            "master chooses among {} sub-policies but {} exist",
            master.subpolicies(),
            subs.len()
        )));
    }
    let (k, choice) = if step_in_segment == 0 {
        let (logits, value) = master.net.forward(master_obs)?;
        let (k, logprob) = sample_categorical(&logits, rng)?;
        (k, Some(MasterChoice { logprob, value }))
    } else {
        match cached_k {
            Some(k) if k < subs.len() => (k, None),
            Some(k) => return Err(contract(format!("cached sub-policy {k} out of range"))),
            None => return Err(contract("mid-segment step without a cached sub-policy index")),
        }
    };
    let (logits, sub_value) = subs.get(k).forward(sub_obs)?;
    let (action, sub_logprob) = sample_categorical(&logits, rng)?;
    Ok(AgentStep { action, k, sub_logprob, sub_value, master: choice })
}

/// A master decision point within a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision<S> {
    /// Index of the first primitive step of the segment.
    pub start: usize,
    pub k: usize,
    pub logprob: S,
    pub value: S,
}

/// D primitive steps annotated with the active sub-policy, plus the master
/// decisions that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub master_period: usize,
    pub subpolicies: usize,
    master_obs_dim: usize,
    sub_obs_dim: usize,
    sub_obs: Vec<S>,
    pub actions: Vec<usize>,
    pub rewards: Vec<S>,
    pub dones: Vec<bool>,
    pub active: Vec<usize>,
    pub sub_logprobs: Vec<S>,
    pub sub_values: Vec<S>,
    /// Value of a step's own sub-policy at the next observation, recorded
    /// where the following step belongs to another sub-policy or the
    /// trajectory ends mid-episode.
    pub cut_values: Vec<Option<S>>,
    decision_obs: Vec<S>,
    pub decisions: Vec<Decision<S>>,
    /// Master value after the last step when that step did not end an episode.
    pub final_master_value: Option<S>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn sub_obs(&self, t: usize) -> &[S] {
        &self.sub_obs[t * self.sub_obs_dim..(t + 1) * self.sub_obs_dim]
    }

    pub fn decision_obs(&self, i: usize) -> &[S] {
        &self.decision_obs[i * self.master_obs_dim..(i + 1) * self.master_obs_dim]
    }

    /// Primitive-step range covered by decision `i`.
    pub fn segment(&self, i: usize) -> std::ops::Range<usize> {
        let end = self.decisions.get(i + 1).map_or(self.len(), |d| d.start);
        self.decisions[i].start..end
    }

    pub fn total_reward(&self) -> S {
        self.rewards.iter().copied().sum()
    }

    /// Returns of the episodes that finished inside this trajectory.
    pub fn episode_returns(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut acc = 0.0;
        for (r, &done) in self.rewards.iter().zip(&self.dones) {
            acc += r.as_f64();
            if done {
                out.push(acc);
                acc = 0.0;
            }
        }
        out
    }

    /// Write one JSON record per primitive step.
    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Record<'a> {
            t: usize,
            k: usize,
            decision: bool,
            action: usize,
            reward: f64,
            done: bool,
            logprob: f64,
            value: f64,
            obs: &'a [f64],
        }
        let mut next_decision = 0;
        let mut obs = vec![0.0; self.sub_obs_dim];
        for t in 0..self.len() {
            let decision = self.decisions.get(next_decision).is_some_and(|d| d.start == t);
            if decision {
                next_decision += 1;
            }
            obs.iter_mut().zip(self.sub_obs(t)).for_each(|(o, x)| *o = x.as_f64());
            let rec = Record {
                t,
                k: self.active[t],
                decision,
                action: self.actions[t],
                reward: self.rewards[t].as_f64(),
                done: self.dones[t],
                logprob: self.sub_logprobs[t].as_f64(),
                value: self.sub_values[t].as_f64(),
                obs: &obs,
            };
            serde_json::to_writer(&mut *w, &rec).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Collect exactly `steps` primitive steps, resetting at episode ends. The
/// master decides every `master_period` steps and at every episode start.
pub fn rollout<S: Scalar>(
    env: &mut Env,
    master: &MasterPolicy<S>,
    subs: &SubPolicySet<S>,
    steps: usize,
    master_period: usize,
    rng: &mut Rng,
) -> Result<Trajectory<S>> {
    if steps == 0 || master_period == 0 {
        return Err(contract("rollout needs positive length and master period"));
    }
    let spec = env.spec().clone();
    if master.net.shape().input_dim != spec.obs_dim || subs.shape().input_dim != spec.sub_obs_dim {
        return Err(contract(format!(
            "policy input dims (master {}, sub {}) do not match environment (master {}, sub {})",
            master.net.shape().input_dim,
            subs.shape().input_dim,
            spec.obs_dim,
            spec.sub_obs_dim
        )));
    }
    if subs.shape().action_count != spec.action_count {
        return Err(contract("sub-policy action count does not match environment"));
    }

    let mut traj = Trajectory {
        master_period,
        subpolicies: subs.len(),
        master_obs_dim: spec.obs_dim,
        sub_obs_dim: spec.sub_obs_dim,
        sub_obs: Vec::with_capacity(steps * spec.sub_obs_dim),
        actions: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        dones: Vec::with_capacity(steps),
        active: Vec::with_capacity(steps),
        sub_logprobs: Vec::with_capacity(steps),
        sub_values: Vec::with_capacity(steps),
        cut_values: Vec::with_capacity(steps),
        decision_obs: Vec::new(),
        decisions: Vec::new(),
        final_master_value: None,
    };
    let mut master_obs = vec![S::zero(); spec.obs_dim];
    let mut sub_obs = vec![S::zero(); spec.sub_obs_dim];

    env.reset(rng);
    let mut in_segment = 0;
    let mut cached_k: Option<usize> = None;
    for t in 0..steps {
        env.observe_sub(&mut sub_obs);
        if in_segment == 0 {
            env.observe(&mut master_obs);
        }
        let out = act(master, subs, &master_obs, &sub_obs, in_segment, cached_k, rng)?;
        if let Some(choice) = out.master {
            // A switch mid-episode cuts the previous sub-policy's credit here.
            if t > 0 && !traj.dones[t - 1] && traj.active[t - 1] != out.k {
                let prev = traj.active[t - 1];
                traj.cut_values[t - 1] = Some(subs.get(prev).forward(&sub_obs)?.1);
            }
            traj.decisions.push(Decision { start: t, k: out.k, logprob: choice.logprob, value: choice.value });
            traj.decision_obs.extend_from_slice(&master_obs);
        }
        cached_k = Some(out.k);

        let outcome = env.step(out.action)?;
        traj.sub_obs.extend_from_slice(&sub_obs);
        traj.actions.push(out.action);
        traj.rewards.push(S::lit(outcome.reward));
        traj.dones.push(outcome.done);
        traj.active.push(out.k);
        traj.sub_logprobs.push(out.sub_logprob);
        traj.sub_values.push(out.sub_value);
        traj.cut_values.push(None);

        in_segment += 1;
        if in_segment == master_period {
            in_segment = 0;
        }
        if outcome.done {
            env.reset(rng);
            in_segment = 0;
        }
    }
    if !traj.dones[steps - 1] {
        env.observe_sub(&mut sub_obs);
        env.observe(&mut master_obs);
        let k = traj.active[steps - 1];
        traj.cut_values[steps - 1] = Some(subs.get(k).forward(&sub_obs)?.1);
        traj.final_master_value = Some(master.net.forward(&master_obs)?.1);
    }
    Ok(traj)
}

/// One master-level transition covering a segment of at most N steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroTransition<S> {
    pub obs: Vec<S>,
    pub k: usize,
    pub reward: S,
    pub done: bool,
    pub logprob: S,
    pub value: S,
    pub steps: usize,
}

pub fn macro_transitions<S: Scalar>(traj: &Trajectory<S>) -> Vec<MacroTransition<S>> {
    (0..traj.decisions.len())
        .map(|i| {
            let seg = traj.segment(i);
            let d = traj.decisions[i];
            MacroTransition {
                obs: traj.decision_obs(i).to_vec(),
                k: d.k,
                reward: traj.rewards[seg.clone()].iter().copied().sum(),
                done: traj.dones[seg.end - 1],
                logprob: d.logprob,
                value: d.value,
                steps: seg.len(),
            }
        })
        .collect()
}

/// Master-level batch: one entry per decision, action = chosen index, reward
/// = segment sum.
pub fn master_view<S: Scalar>(traj: &Trajectory<S>) -> RolloutBatch<S> {
    let macros = macro_transitions(traj);
    let mut batch = RolloutBatch::new(traj.master_obs_dim);
    let last = macros.len().saturating_sub(1);
    for (i, m) in macros.iter().enumerate() {
        let end = if m.done {
            StepEnd::Terminal
        } else if i == last {
            traj.final_master_value.map_or(StepEnd::Continue, StepEnd::Truncated)
        } else {
            StepEnd::Continue
        };
        batch.push(&m.obs, m.k, m.logprob, m.reward, m.value, end);
    }
    batch
}

/// Per-sub-policy batches, indexed by k. Each primitive step goes only to the
/// sub-policy that was active for it.
pub fn sub_view<S: Scalar>(traj: &Trajectory<S>) -> Vec<RolloutBatch<S>> {
    let mut batches: Vec<RolloutBatch<S>> =
        (0..traj.subpolicies).map(|_| RolloutBatch::new(traj.sub_obs_dim)).collect();
    for t in 0..traj.len() {
        let end = if traj.dones[t] {
            StepEnd::Terminal
        } else {
            traj.cut_values[t].map_or(StepEnd::Continue, StepEnd::Truncated)
        };
        batches[traj.active[t]].push(
            traj.sub_obs(t),
            traj.actions[t],
            traj.sub_logprobs[t],
            traj.rewards[t],
            traj.sub_values[t],
            end,
        );
    }
    batches
}
