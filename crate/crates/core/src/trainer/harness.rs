//! Synchronous group harness for meta-training.
//!
//! `G x P` workers advance in lockstep. Each iteration every worker collects
//! `D` steps with its group's master and the global sub-policies. Master
//! parameters are then updated from group-averaged gradients and the
//! sub-policies from gradients averaged over the workers whose group is in its
//! joint phase. Every optimizer step is a barrier; reductions run in ascending
//! worker order, so the threaded and sequential executors produce identical
//! bits.
//!
//! Random streams: the sub-policies are initialized from
//! `Stream::SubPolicyInit`; group `g` draws tasks and master initializations
//! from `Stream::Group(g)`; worker `w` uses `Stream::Worker(w)` for its
//! rollout, then its master minibatch shuffles, then its sub-policy shuffles
//! in ascending `k`.

use rayon::prelude::*;

use super::aggregate::aggregate;
use super::schedule::{phase_at, schedule_offsets, starvation_possible, Phase};
use crate::config::MlshConfig;
use crate::envs::{Env, TaskDistribution, TaskSeed};
use crate::error::{MlshError, Result};
use crate::hierarchy::{master_view, rollout, sub_view, MasterPolicy, SubPolicySet};
use crate::metrics::{summarize, MetricsRecord};
use crate::nn::{clip_global_norm, AdamState, NetParams, NetShape};
use crate::ppo::{annotate, finalize, plan_minibatches, ppo_loss, steps_per_epoch, LossStats, PpoConfig, RolloutBatch, UpdateStats};
use crate::rng::{stream, Rng, Stream};
use crate::scalar::Scalar;

/// How workers are scheduled between barriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executor {
    Sequential,
    Threaded,
}

/// What the harness trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Per-group masters over shared sub-policies.
    Hierarchical,
    /// One flat policy (K = 1, never reset) trained by every group.
    SharedBaseline,
}

/// Per-group state: task, master parameters and the master's optimizer.
#[derive(Debug, Clone)]
pub struct GroupState<S> {
    pub id: usize,
    pub task: TaskSeed,
    pub master: MasterPolicy<S>,
    pub adam: AdamState<S>,
    pub offset: usize,
    /// Position within the warmup + joint cycle.
    pub position: usize,
    rng: Rng,
}

impl<S: Scalar> GroupState<S> {
    fn new(id: usize, offset: usize, cfg: &MlshConfig, obs_dim: usize, dist: &TaskDistribution) -> Self {
        let mut rng = stream(cfg.seed, Stream::Group(id));
        let (task, master) = fresh_task(&mut rng, cfg, obs_dim, dist);
        let adam = AdamState::new(master.net.len());
        Self { id, task, master, adam, offset, position: offset, rng }
    }

    fn restart(&mut self, cfg: &MlshConfig, obs_dim: usize, dist: &TaskDistribution) {
        let (task, master) = fresh_task(&mut self.rng, cfg, obs_dim, dist);
        self.task = task;
        self.adam = AdamState::new(master.net.len());
        self.master = master;
    }

    pub fn phase(&self, warmup: usize) -> Phase {
        phase_at(self.position, warmup)
    }
}

fn fresh_task<S: Scalar>(
    rng: &mut Rng,
    cfg: &MlshConfig,
    obs_dim: usize,
    dist: &TaskDistribution,
) -> (TaskSeed, MasterPolicy<S>) {
    let task = dist.sample(rng);
    let master = MasterPolicy::init(obs_dim, cfg.subpolicies, cfg.hidden, rng);
    (task, master)
}

/// Global state shared by all workers.
#[derive(Debug, Clone)]
pub struct MetaState<S> {
    pub subs: SubPolicySet<S>,
    pub adams: Vec<AdamState<S>>,
    pub iteration: usize,
}

struct Worker {
    group: usize,
    env: Env,
    rng: Rng,
}

struct Collected<S> {
    master: RolloutBatch<S>,
    subs: Option<Vec<RolloutBatch<S>>>,
    returns: Vec<f64>,
}

/// Outcome of [`Harness::run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub iterations: usize,
    pub plateau_stop: bool,
}

pub struct Harness<S> {
    cfg: MlshConfig,
    mode: Mode,
    executor: Executor,
    dist: TaskDistribution,
    pub meta: MetaState<S>,
    pub groups: Vec<GroupState<S>>,
    workers: Vec<Worker>,
    best_return: f64,
    since_best: usize,
}

impl<S: Scalar> Harness<S> {
    pub fn new(cfg: &MlshConfig, mode: Mode, executor: Executor) -> Result<Self> {
        let mut cfg = cfg.clone();
        if mode == Mode::SharedBaseline {
            cfg.subpolicies = 1;
            cfg.master_period = cfg.episode_len;
            cfg.transfer_view = false;
        }
        cfg.validate()?;
        if mode == Mode::Hierarchical && starvation_possible(cfg.groups, cfg.warmup, cfg.joint) {
            log::warn!(
                "G*U = {} < W+U = {}: some iterations will produce no sub-policy gradient",
                cfg.groups * cfg.joint,
                cfg.cycle_len()
            );
        }
        let dist = TaskDistribution::new(cfg.env, cfg.holdout_goals)?;
        let probe = Env::new(cfg.env, cfg.episode_len, cfg.transfer_view)?;
        let spec = probe.spec().clone();

        let mut init_rng = stream(cfg.seed, Stream::SubPolicyInit);
        let shape = NetShape::new(spec.sub_obs_dim, spec.action_count).with_hidden(cfg.hidden);
        let subs = SubPolicySet::init(cfg.subpolicies, shape, &mut init_rng)?;
        let adams = (0..cfg.subpolicies).map(|_| AdamState::new(shape.param_count())).collect();

        let offsets = schedule_offsets(cfg.groups, cfg.warmup, cfg.joint);
        let groups: Vec<GroupState<S>> =
            (0..cfg.groups).map(|g| GroupState::new(g, offsets[g], &cfg, spec.obs_dim, &dist)).collect();
        let mut workers = Vec::with_capacity(cfg.total_workers());
        for (w, group) in (0..cfg.total_workers()).map(|w| (w, w / cfg.workers_per_group)) {
            let mut env = probe.clone();
            env.set_task(groups[group].task);
            workers.push(Worker { group, env, rng: stream(cfg.seed, Stream::Worker(w)) });
        }
        Ok(Self {
            cfg,
            mode,
            executor,
            dist,
            meta: MetaState { subs, adams, iteration: 0 },
            groups,
            workers,
            best_return: f64::NEG_INFINITY,
            since_best: 0,
        })
    }

    pub fn config(&self) -> &MlshConfig {
        &self.cfg
    }

    pub fn subs(&self) -> &SubPolicySet<S> {
        &self.meta.subs
    }

    fn group_phase(&self, g: usize) -> Phase {
        match self.mode {
            Mode::Hierarchical => self.groups[g].phase(self.cfg.warmup),
            Mode::SharedBaseline => Phase::Joint,
        }
    }

    /// One synchronized iteration across all groups. On error the shared
    /// sub-policies are restored to their state before the iteration.
    pub fn tick(&mut self) -> Result<Vec<MetricsRecord>> {
        let snapshot = (self.meta.subs.clone(), self.meta.adams.clone());
        let out = self.tick_inner();
        if out.is_err() {
            self.meta.subs = snapshot.0;
            self.meta.adams = snapshot.1;
        }
        out
    }

    fn tick_inner(&mut self) -> Result<Vec<MetricsRecord>> {
        let cfg = &self.cfg;
        let obs_dim = self.workers[0].env.spec().obs_dim;
        if self.meta.iteration > 0 {
            for g in 0..self.groups.len() {
                if self.groups[g].position == 0 {
                    self.groups[g].restart(cfg, obs_dim, &self.dist);
                    let task = self.groups[g].task;
                    for w in self.workers.iter_mut().filter(|w| w.group == g) {
                        w.env.set_task(task);
                    }
                }
            }
        }
        let phases: Vec<Phase> = (0..self.groups.len()).map(|g| self.group_phase(g)).collect();

        // Collection.
        let (groups, subs, mode) = (&self.groups, &self.meta.subs, self.mode);
        let collect_one = |w: &mut Worker| collect(w, &groups[w.group].master, subs, phases[w.group], cfg, mode);
        let collected: Vec<Collected<S>> = match self.executor {
            Executor::Threaded => self.workers.par_iter_mut().map(collect_one).collect::<Result<_>>()?,
            Executor::Sequential => self.workers.iter_mut().map(collect_one).collect::<Result<_>>()?,
        };

        // Master updates, one barrier group per worker group.
        let per_group = cfg.workers_per_group;
        let mut master_stats: Vec<Option<UpdateStats>> = vec![None; self.groups.len()];
        if self.mode == Mode::Hierarchical {
            let executor = self.executor;
            let update_group = |((group, workers), batches): ((&mut GroupState<S>, &mut [Worker]), &[Collected<S>])| {
                let batches: Vec<&RolloutBatch<S>> = batches.iter().map(|c| &c.master).collect();
                let mut rngs: Vec<&mut Rng> = workers.iter_mut().map(|w| &mut w.rng).collect();
                lockstep_update(&mut group.master.net, &mut group.adam, &cfg.master_ppo, &batches, &mut rngs, executor)
            };
            master_stats = match self.executor {
                Executor::Threaded => self
                    .groups
                    .par_iter_mut()
                    .zip(self.workers.par_chunks_mut(per_group))
                    .zip(collected.par_chunks(per_group))
                    .map(update_group)
                    .collect::<Result<_>>()?,
                Executor::Sequential => self
                    .groups
                    .iter_mut()
                    .zip(self.workers.chunks_mut(per_group))
                    .zip(collected.chunks(per_group))
                    .map(update_group)
                    .collect::<Result<_>>()?,
            };
        }

        // Sub-policy updates over all joint-phase workers.
        let mut sub_stats: Vec<UpdateStats> = Vec::new();
        for k in 0..self.meta.subs.len() {
            let mut batches = Vec::new();
            let mut rngs = Vec::new();
            for (w, c) in self.workers.iter_mut().zip(&collected) {
                if let Some(b) = c.subs.as_ref().map(|s| &s[k]).filter(|b| !b.is_empty()) {
                    batches.push(b);
                    rngs.push(&mut w.rng);
                }
            }
            let net = self.meta.subs.get_mut(k);
            if let Some(s) =
                lockstep_update(net, &mut self.meta.adams[k], &self.cfg.sub_ppo, &batches, &mut rngs, self.executor)?
            {
                sub_stats.push(s);
            }
        }
        let sub_summary = mean_stats(&sub_stats);

        let records = self.records(&collected, &phases, &master_stats, sub_summary);
        for g in &mut self.groups {
            g.position = (g.position + 1) % self.cfg.cycle_len();
        }
        self.meta.iteration += 1;
        Ok(records)
    }

    fn records(
        &self,
        collected: &[Collected<S>],
        phases: &[Phase],
        master_stats: &[Option<UpdateStats>],
        sub_summary: Option<LossStats>,
    ) -> Vec<MetricsRecord> {
        let cfg = &self.cfg;
        let timesteps = ((self.meta.iteration + 1) * cfg.rollout_len * cfg.total_workers()) as u64;
        let per_group = cfg.workers_per_group;
        self.groups
            .iter()
            .enumerate()
            .map(|(g, group)| {
                let chunk = &collected[g * per_group..(g + 1) * per_group];
                let returns: Vec<f64> = chunk.iter().flat_map(|c| c.returns.iter().copied()).collect();
                let (episode_return, success_rate) = summarize(&returns);
                let (macro_sum, macro_n) = chunk.iter().fold((0.0, 0usize), |(s, n), c| {
                    (s + c.master.rewards.iter().map(|r| r.as_f64()).sum::<f64>(), n + c.master.len())
                });
                let master = master_stats[g].map(|s| s.loss);
                let sub = if phases[g] == Phase::Joint { sub_summary } else { None };
                let phase = match self.mode {
                    Mode::Hierarchical => phases[g].name(),
                    Mode::SharedBaseline => "shared",
                };
                MetricsRecord {
                    run: cfg.label.clone(),
                    iteration: self.meta.iteration,
                    group: g,
                    phase: phase.to_string(),
                    task: group.task.0,
                    timesteps,
                    episodes: returns.len(),
                    episode_return,
                    success_rate,
                    macro_return: (macro_n > 0).then(|| macro_sum / macro_n as f64),
                    master_loss: master.map(|s| s.loss),
                    master_entropy: master.map(|s| s.entropy),
                    sub_loss: sub.map(|s| s.loss),
                    sub_entropy: sub.map(|s| s.entropy),
                }
            })
            .collect()
    }

    /// Iterate until the meta-iteration budget is spent or the plateau stop
    /// fires. `observe` sees the harness and the records after every
    /// iteration.
    pub fn run(
        &mut self,
        mut observe: impl FnMut(&Self, &[MetricsRecord]) -> Result<()>,
    ) -> Result<RunSummary> {
        let mut plateau_stop = false;
        while self.meta.iteration < self.cfg.meta_iterations {
            let records = self.tick()?;
            observe(self, &records)?;
            if self.plateaued(&records) {
                plateau_stop = true;
                break;
            }
        }
        Ok(RunSummary { iterations: self.meta.iteration, plateau_stop })
    }

    fn plateaued(&mut self, records: &[MetricsRecord]) -> bool {
        if self.cfg.plateau_window == 0 {
            return false;
        }
        let returns: Vec<f64> = records.iter().filter_map(|r| r.episode_return).collect();
        if returns.is_empty() {
            return false;
        }
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        if mean > self.best_return {
            self.best_return = mean;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.since_best >= self.cfg.plateau_window
    }
}

fn collect<S: Scalar>(
    w: &mut Worker,
    master: &MasterPolicy<S>,
    subs: &SubPolicySet<S>,
    phase: Phase,
    cfg: &MlshConfig,
    mode: Mode,
) -> Result<Collected<S>> {
    let traj = rollout(&mut w.env, master, subs, cfg.rollout_len, cfg.master_period, &mut w.rng)?;
    let mut master_batch = master_view(&traj);
    if mode == Mode::Hierarchical {
        finalize(&mut master_batch, &cfg.master_ppo, S::zero())?;
    }
    let sub_batches = match phase {
        Phase::Joint => {
            let mut batches = sub_view(&traj);
            for b in &mut batches {
                finalize(b, &cfg.sub_ppo, S::zero())?;
            }
            Some(batches)
        }
        Phase::Warmup => None,
    };
    Ok(Collected { master: master_batch, subs: sub_batches, returns: traj.episode_returns() })
}

fn mean_stats(stats: &[UpdateStats]) -> Option<LossStats> {
    let mut acc = UpdateStats::default();
    for s in stats {
        acc.accumulate(&s.loss);
    }
    (!stats.is_empty()).then_some(acc.loss)
}

/// PPO update of one network from several workers' batches in lockstep.
///
/// Each epoch every contributor shuffles its own batch with its own stream
/// and splits it into the same number of chunks (enough for the largest
/// batch at the configured minibatch size). For each chunk index, the
/// contributors' mean gradients are averaged, norm-clipped and applied with
/// one Adam step. With a single contributor this is exactly
/// [`crate::ppo::ppo_update`]. Returns `None` when there is nothing to train
/// on.
pub fn lockstep_update<S: Scalar>(
    net: &mut NetParams<S>,
    adam: &mut AdamState<S>,
    cfg: &PpoConfig,
    batches: &[&RolloutBatch<S>],
    rngs: &mut [&mut Rng],
    executor: Executor,
) -> Result<Option<UpdateStats>> {
    if batches.len() != rngs.len() {
        return Err(MlshError::Contract("one random stream per contributing batch".into()));
    }
    let steps = batches.iter().map(|b| steps_per_epoch(b.len(), cfg.minibatch_size)).max().unwrap_or(0);
    if steps == 0 {
        return Ok(None);
    }
    let mut stats = UpdateStats::default();
    for epoch in 0..cfg.epochs {
        let plans: Vec<Vec<Vec<usize>>> =
            batches.iter().zip(rngs.iter_mut()).map(|(b, rng)| plan_minibatches(b.len(), steps, rng)).collect();
        for step in 0..steps {
            let shared: &NetParams<S> = net;
            let grad_for = |i: usize| -> Result<Option<(LossStats, _)>> {
                let chunk = &plans[i][step];
                if chunk.is_empty() {
                    return Ok(None);
                }
                ppo_loss(batches[i], chunk, shared, cfg).map(Some).map_err(|e| annotate(e, epoch, step))
            };
            let per_worker: Vec<Option<(LossStats, _)>> = match executor {
                Executor::Threaded => (0..batches.len()).into_par_iter().map(grad_for).collect::<Result<_>>()?,
                Executor::Sequential => (0..batches.len()).map(grad_for).collect::<Result<_>>()?,
            };
            let grads: Vec<_> = per_worker.iter().map(|o| o.as_ref().map(|(_, g)| g.clone())).collect();
            let Some(total) = aggregate(&grads)? else { continue };
            let mut g = total.mean();
            clip_global_norm(&mut g, cfg.max_grad_norm);
            adam.apply(net.as_flat_mut(), &g, cfg.lr)?;

            let losses: Vec<UpdateStats> = per_worker
                .iter()
                .flatten()
                .map(|(l, _)| UpdateStats { loss: *l, optimizer_steps: 1 })
                .collect();
            if let Some(mean) = mean_stats(&losses) {
                stats.accumulate(&mean);
            }
        }
    }
    Ok(Some(stats))
}

/// Run meta-training to completion with the threaded executor.
pub fn meta_loop<S: Scalar>(cfg: &MlshConfig) -> Result<(SubPolicySet<S>, Vec<MetricsRecord>)> {
    let mut harness = Harness::<S>::new(cfg, Mode::Hierarchical, Executor::Threaded)?;
    let mut records = Vec::new();
    harness.run(|_, r| {
        records.extend_from_slice(r);
        Ok(())
    })?;
    Ok((harness.meta.subs, records))
}
