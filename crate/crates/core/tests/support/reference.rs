//! Straight-line, single-threaded re-statement of the meta-training schedule.
//! Built only from the public primitives; shares no code with the harness.

use mlsh_core::envs::{Env, TaskDistribution, TaskSeed};
use mlsh_core::hierarchy::{master_view, rollout, sub_view, MasterPolicy, SubPolicySet};
use mlsh_core::nn::{clip_global_norm, AdamState, NetParams, NetShape};
use mlsh_core::ppo::{finalize, plan_minibatches, ppo_loss, ppo_update, steps_per_epoch, PpoConfig, RolloutBatch};
use mlsh_core::rng::{stream, Rng, Stream};
use mlsh_core::MlshConfig;

struct Group {
    task: TaskSeed,
    master: MasterPolicy<f64>,
    adam: AdamState<f64>,
    position: usize,
    rng: Rng,
}

struct Worker {
    group: usize,
    env: Env,
    rng: Rng,
}

pub struct Reference {
    cfg: MlshConfig,
    dist: TaskDistribution,
    obs_dim: usize,
    pub subs: Vec<NetParams<f64>>,
    adams: Vec<AdamState<f64>>,
    groups: Vec<Group>,
    workers: Vec<Worker>,
    iteration: usize,
}

impl Reference {
    pub fn new(cfg: &MlshConfig) -> Self {
        let cfg = cfg.clone();
        let dist = TaskDistribution::new(cfg.env, cfg.holdout_goals).unwrap();
        let env = Env::new(cfg.env, cfg.episode_len, cfg.transfer_view).unwrap();
        let spec = env.spec().clone();
        let shape = NetShape::new(spec.sub_obs_dim, spec.action_count).with_hidden(cfg.hidden);
        let subs = SubPolicySet::<f64>::init(cfg.subpolicies, shape, &mut stream(cfg.seed, Stream::SubPolicyInit))
            .unwrap()
            .into_nets();
        let adams = subs.iter().map(|n| AdamState::new(n.len())).collect();
        let cycle = cfg.warmup + cfg.joint;
        let mut groups = Vec::new();
        for g in 0..cfg.groups {
            let mut rng = stream(cfg.seed, Stream::Group(g));
            let task = dist.sample(&mut rng);
            let master = MasterPolicy::init(spec.obs_dim, cfg.subpolicies, cfg.hidden, &mut rng);
            let adam = AdamState::new(master.net.len());
            groups.push(Group { task, master, adam, position: g * cycle / cfg.groups, rng });
        }
        let mut workers = Vec::new();
        for w in 0..cfg.groups * cfg.workers_per_group {
            let group = w / cfg.workers_per_group;
            let mut env = env.clone();
            env.set_task(groups[group].task);
            workers.push(Worker { group, env, rng: stream(cfg.seed, Stream::Worker(w)) });
        }
        Self { cfg, dist, obs_dim: spec.obs_dim, subs, adams, groups, workers, iteration: 0 }
    }

    pub fn step(&mut self) {
        let cfg = self.cfg.clone();
        if self.iteration > 0 {
            for (g, group) in self.groups.iter_mut().enumerate() {
                if group.position == 0 {
                    group.task = self.dist.sample(&mut group.rng);
                    group.master = MasterPolicy::init(self.obs_dim, cfg.subpolicies, cfg.hidden, &mut group.rng);
                    group.adam = AdamState::new(group.master.net.len());
                    for w in self.workers.iter_mut().filter(|w| w.group == g) {
                        w.env.set_task(group.task);
                    }
                }
            }
        }
        let joint: Vec<bool> = self.groups.iter().map(|g| g.position >= cfg.warmup).collect();
        let subs = SubPolicySet::new(self.subs.clone()).unwrap();

        let mut master_batches = Vec::new();
        let mut sub_batches = Vec::new();
        for w in &mut self.workers {
            let master = &self.groups[w.group].master;
            let traj = rollout(&mut w.env, master, &subs, cfg.rollout_len, cfg.master_period, &mut w.rng).unwrap();
            let mut mb = master_view(&traj);
            finalize(&mut mb, &cfg.master_ppo, 0.0).unwrap();
            master_batches.push(mb);
            if joint[w.group] {
                let mut per_k = sub_view(&traj);
                for b in &mut per_k {
                    finalize(b, &cfg.sub_ppo, 0.0).unwrap();
                }
                sub_batches.push(Some(per_k));
            } else {
                sub_batches.push(None);
            }
        }

        let p = cfg.workers_per_group;
        for (g, group) in self.groups.iter_mut().enumerate() {
            let idx: Vec<usize> = (g * p..(g + 1) * p).collect();
            let batches: Vec<&RolloutBatch<f64>> = idx.iter().map(|&w| &master_batches[w]).collect();
            let mut rngs: Vec<&mut Rng> =
                self.workers[g * p..(g + 1) * p].iter_mut().map(|w| &mut w.rng).collect();
            averaged_update(&mut group.master.net, &mut group.adam, &cfg.master_ppo, &batches, &mut rngs);
        }

        for k in 0..self.subs.len() {
            let mut batches = Vec::new();
            let mut rngs = Vec::new();
            for (w, sb) in self.workers.iter_mut().zip(&sub_batches) {
                if let Some(b) = sb.as_ref().map(|s| &s[k]).filter(|b| !b.is_empty()) {
                    batches.push(b);
                    rngs.push(&mut w.rng);
                }
            }
            averaged_update(&mut self.subs[k], &mut self.adams[k], &cfg.sub_ppo, &batches, &mut rngs);
        }

        let cycle = cfg.warmup + cfg.joint;
        for group in &mut self.groups {
            group.position = (group.position + 1) % cycle;
        }
        self.iteration += 1;
    }
}

/// One contributor: plain single-worker PPO. Several: per minibatch step,
/// average each contributor's mean gradient, clip, one Adam step.
fn averaged_update(
    net: &mut NetParams<f64>,
    adam: &mut AdamState<f64>,
    cfg: &PpoConfig,
    batches: &[&RolloutBatch<f64>],
    rngs: &mut [&mut Rng],
) {
    match batches.len() {
        0 => {}
        1 => {
            ppo_update(net, adam, batches[0], cfg, rngs[0]).unwrap();
        }
        _ => {
            let steps = batches.iter().map(|b| steps_per_epoch(b.len(), cfg.minibatch_size)).max().unwrap();
            for _ in 0..cfg.epochs {
                let plans: Vec<_> =
                    batches.iter().zip(rngs.iter_mut()).map(|(b, r)| plan_minibatches(b.len(), steps, r)).collect();
                for s in 0..steps {
                    let mut acc = vec![0.0; net.len()];
                    let mut n = 0usize;
                    for (b, plan) in batches.iter().zip(&plans) {
                        if plan[s].is_empty() {
                            continue;
                        }
                        let (_, grad) = ppo_loss(b, &plan[s], net, cfg).unwrap();
                        for (a, g) in acc.iter_mut().zip(grad.mean()) {
                            *a += g;
                        }
                        n += 1;
                    }
                    if n == 0 {
                        continue;
                    }
                    let mut g: Vec<f64> = acc.iter().map(|a| a / n as f64).collect();
                    clip_global_norm(&mut g, cfg.max_grad_norm);
                    adam.apply(net.as_flat_mut(), &g, cfg.lr).unwrap();
                }
            }
        }
    }
}
