//! Test-time adaptation: learning curves on fresh tasks with a budget of
//! policy updates.
//!
//! A curve has `budget + 1` points. Point `i` is the mean completed-episode
//! return of the rollout collected after `i` updates, and is reported at
//! `(i + 1) * D` environment steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::MlshConfig;
use crate::envs::{Env, TaskDistribution, TaskSeed};
use crate::error::Result;
use crate::hierarchy::{master_view, rollout, sub_view, MasterPolicy, SubPolicySet};
use crate::metrics::{summarize, MetricsRecord};
use crate::nn::{AdamState, NetParams, NetShape};
use crate::ppo::{finalize, ppo_update};
use crate::rng::{stream, Stream};
use crate::scalar::Scalar;

/// What is trained during adaptation.
#[derive(Debug)]
pub enum Learner<'a, S> {
    /// A fresh master over frozen sub-policies.
    Master(&'a SubPolicySet<S>),
    /// A flat policy trained from the given parameters, or from a fresh
    /// initialization when `None`.
    Flat(Option<&'a NetParams<S>>),
    /// A flat policy that is only evaluated.
    Frozen(&'a NetParams<S>),
}

impl<S> Clone for Learner<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S> Copy for Learner<'_, S> {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptCurve {
    pub task: TaskSeed,
    pub timesteps: Vec<u64>,
    /// `None` where the rollout completed no episode.
    pub returns: Vec<Option<f64>>,
    pub success: Vec<Option<f64>>,
    pub episodes: Vec<usize>,
}

impl AdaptCurve {
    pub fn final_return(&self) -> Option<f64> {
        self.returns.last().copied().flatten()
    }

    /// One metrics record per curve point; `group` carries the task index.
    pub fn records(&self, label: &str, index: usize) -> Vec<MetricsRecord> {
        (0..self.returns.len())
            .map(|i| MetricsRecord {
                run: label.to_string(),
                iteration: i,
                group: index,
                phase: "adapt".into(),
                task: self.task.0,
                timesteps: self.timesteps[i],
                episodes: self.episodes[i],
                episode_return: self.returns[i],
                success_rate: self.success[i],
                macro_return: None,
                master_loss: None,
                master_entropy: None,
                sub_loss: None,
                sub_entropy: None,
            })
            .collect()
    }
}

/// Tasks used for adaptation: the held-out goals when there are any,
/// otherwise draws from the task distribution on a dedicated stream.
pub fn adaptation_tasks(cfg: &MlshConfig) -> Result<Vec<TaskSeed>> {
    let dist = TaskDistribution::new(cfg.env, cfg.holdout_goals)?;
    let held = dist.held_out();
    if !held.is_empty() {
        return Ok((0..cfg.adapt.tasks).map(|i| held[i % held.len()]).collect());
    }
    let mut rng = stream(cfg.seed, Stream::AdaptTasks);
    Ok((0..cfg.adapt.tasks).map(|_| dist.sample(&mut rng)).collect())
}

/// Flat-policy network shape for an environment (no transfer view).
pub fn flat_shape(cfg: &MlshConfig) -> Result<NetShape> {
    let spec = Env::new(cfg.env, cfg.episode_len, false)?.spec().clone();
    Ok(NetShape::new(spec.obs_dim, spec.action_count).with_hidden(cfg.hidden))
}

/// Adaptation curve on one task. `index` selects the random stream.
pub fn adapt_curve<S: Scalar>(cfg: &MlshConfig, learner: Learner<'_, S>, task: TaskSeed, index: usize) -> Result<AdaptCurve> {
    let mut rng = stream(cfg.seed, Stream::Adapt(index));
    let transfer_view = matches!(learner, Learner::Master(_)) && cfg.transfer_view;
    let mut env = Env::new(cfg.env, cfg.episode_len, transfer_view)?;
    env.set_task(task);
    let obs_dim = env.spec().obs_dim;

    let (mut subs, period) = match learner {
        Learner::Master(subs) => (subs.clone(), cfg.master_period),
        Learner::Flat(init) => {
            let net = match init {
                Some(net) => net.clone(),
                None => NetParams::init(flat_shape(cfg)?, &mut rng),
            };
            (SubPolicySet::new(vec![net])?, cfg.episode_len)
        }
        Learner::Frozen(net) => (SubPolicySet::new(vec![net.clone()])?, cfg.episode_len),
    };
    let mut master = MasterPolicy::<S>::init(obs_dim, subs.len(), cfg.hidden, &mut rng);
    let mut master_adam = AdamState::new(master.net.len());
    let mut flat_adam = AdamState::new(subs.get(0).len());

    let mut curve = AdaptCurve { task, timesteps: Vec::new(), returns: Vec::new(), success: Vec::new(), episodes: Vec::new() };
    for i in 0..=cfg.adapt.budget {
        let traj = rollout(&mut env, &master, &subs, cfg.rollout_len, period, &mut rng)?;
        let returns = traj.episode_returns();
        let (mean, success) = summarize(&returns);
        curve.episodes.push(returns.len());
        curve.timesteps.push(((i + 1) * cfg.rollout_len) as u64);
        curve.returns.push(mean);
        curve.success.push(success);
        if i == cfg.adapt.budget {
            break;
        }
        match learner {
            Learner::Master(_) => {
                let mut batch = master_view(&traj);
                finalize(&mut batch, &cfg.master_ppo, S::zero())?;
                ppo_update(&mut master.net, &mut master_adam, &batch, &cfg.master_ppo, &mut rng)?;
            }
            Learner::Flat(_) => {
                let mut batch = sub_view(&traj).swap_remove(0);
                finalize(&mut batch, &cfg.sub_ppo, S::zero())?;
                ppo_update(subs.get_mut(0), &mut flat_adam, &batch, &cfg.sub_ppo, &mut rng)?;
            }
            Learner::Frozen(_) => {}
        }
    }
    Ok(curve)
}

/// Curves for several tasks, computed in parallel; task `i` uses stream `i`.
pub fn adapt_curves<S: Scalar>(cfg: &MlshConfig, learner: Learner<'_, S>, tasks: &[TaskSeed]) -> Result<Vec<AdaptCurve>> {
    tasks.par_iter().enumerate().map(|(i, &task)| adapt_curve(cfg, learner, task, i)).collect()
}

/// Mean and standard error across curves at each point, ignoring missing
/// values.
pub fn curve_summary(curves: &[AdaptCurve]) -> Vec<(u64, Option<f64>, Option<f64>)> {
    let Some(first) = curves.first() else { return Vec::new() };
    (0..first.returns.len())
        .map(|i| {
            let xs: Vec<f64> = curves.iter().filter_map(|c| c.returns.get(i).copied().flatten()).collect();
            let (mean, stderr) = mean_stderr(&xs);
            (first.timesteps[i], mean, stderr)
        })
        .collect()
}

/// Sample mean and standard error of the mean (n - 1 denominator).
pub fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}
