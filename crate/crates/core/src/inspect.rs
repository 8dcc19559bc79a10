//! Probes of trained sub-policies: goal specialization on moving bandits and
//! greedy action maps on grids.

use rand::Rng as _;
use serde::Serialize;

use crate::envs::bandits::{self, BanditTask};
use crate::envs::gridworld::GridWorld;
use crate::envs::TaskSeed;
use crate::error::{contract, Result};
use crate::hierarchy::SubPolicySet;
use crate::nn::{argmax, NetParams};
use crate::rng::{stream, Stream};
use crate::scalar::Scalar;

/// A bandit probe state: a layout and an agent position on the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeState {
    pub goals: [(f64, f64); 2],
    pub agent: (f64, f64),
}

impl ProbeState {
    fn obs<S: Scalar>(&self) -> [S; bandits::OBS_DIM] {
        let [g1, g2] = self.goals;
        [self.agent.0, self.agent.1, g1.0, g1.1, g2.0, g2.1].map(S::lit)
    }
}

/// `count` probe states drawn from the task distribution with the agent on a
/// uniformly random lattice cell outside both goal thresholds.
pub fn bandit_probe_states(seed: u64, count: usize) -> Vec<ProbeState> {
    let mut rng = stream(seed, Stream::Probe);
    let cells = (1.0 / bandits::STEP).round() as u32;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let goals = BanditTask::from_seed(TaskSeed(rng.random())).goals;
        let coord = |i: u32| f64::from(i) * bandits::STEP;
        let agent = (coord(rng.random_range(0..=cells)), coord(rng.random_range(0..=cells)));
        if goals.iter().any(|&g| bandits::within_reach(agent, g)) {
            continue;
        }
        out.push(ProbeState { goals, agent });
    }
    out
}

/// Greedy action of a network on an observation.
pub fn greedy<S: Scalar>(net: &NetParams<S>, obs: &[S]) -> Result<usize> {
    Ok(argmax(&net.forward(obs)?.0))
}

/// Fraction of probe states a sub-policy must move toward its majority goal
/// to count as specialized.
pub const SPECIALIZED_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecializationReport {
    /// `toward[k][j]`: fraction of probe states where sub-policy `k`'s greedy
    /// action strictly reduces the distance to goal `j`.
    pub toward: Vec<[f64; 2]>,
    /// Goal each sub-policy moves toward most often (ties go to goal 0).
    pub majority: Vec<usize>,
    /// Best over distinct sub-policies `a`, `b` of
    /// `min(toward[a][0], toward[b][1])`; `None` with fewer than two
    /// sub-policies.
    pub score: Option<f64>,
}

impl SpecializationReport {
    /// Some pair of sub-policies has distinct majority goals and each moves
    /// toward its own in at least [`SPECIALIZED_FRACTION`] of the states.
    pub fn specialized(&self) -> bool {
        let strong: Vec<usize> = (0..self.toward.len())
            .filter(|&k| self.toward[k][self.majority[k]] >= SPECIALIZED_FRACTION)
            .map(|k| self.majority[k])
            .collect();
        strong.contains(&0) && strong.contains(&1)
    }
}

pub fn bandit_specialization<S: Scalar>(subs: &SubPolicySet<S>, probes: &[ProbeState]) -> Result<SpecializationReport> {
    if subs.shape().input_dim != bandits::OBS_DIM {
        return Err(contract("specialization probe needs moving-bandit sub-policies"));
    }
    if probes.is_empty() {
        return Err(contract("specialization probe needs at least one state"));
    }
    let mut toward = Vec::with_capacity(subs.len());
    for net in subs.nets() {
        let mut hits = [0usize; 2];
        for p in probes {
            let next = bandits::moved(p.agent, greedy(net, &p.obs::<S>())?);
            for (j, &goal) in p.goals.iter().enumerate() {
                if bandits::distance(next, goal) < bandits::distance(p.agent, goal) - 1e-12 {
                    hits[j] += 1;
                }
            }
        }
        toward.push(hits.map(|h| h as f64 / probes.len() as f64));
    }
    let majority = toward.iter().map(|t| usize::from(t[1] > t[0])).collect();
    let mut score: Option<f64> = None;
    for a in 0..toward.len() {
        for b in (0..toward.len()).filter(|&b| b != a) {
            let s = toward[a][0].min(toward[b][1]);
            score = Some(score.map_or(s, |best| best.max(s)));
        }
    }
    Ok(SpecializationReport { toward, majority, score })
}

/// One arrow of a bandit policy field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrow {
    pub subpolicy: usize,
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

/// Greedy moves of every sub-policy on a `side x side` grid of positions for
/// a fixed goal layout.
pub fn bandit_arrows<S: Scalar>(subs: &SubPolicySet<S>, goals: [(f64, f64); 2], side: usize) -> Result<Vec<Arrow>> {
    let mut out = Vec::new();
    let span = side.saturating_sub(1).max(1) as f64;
    for (k, net) in subs.nets().iter().enumerate() {
        for i in 0..side {
            for j in 0..side {
                let agent = (i as f64 / span, j as f64 / span);
                let a = greedy(net, &ProbeState { goals, agent }.obs::<S>())?;
                let next = bandits::moved(agent, a);
                out.push(Arrow { subpolicy: k, x: agent.0, y: agent.1, dx: next.0 - agent.0, dy: next.1 - agent.1 });
            }
        }
    }
    Ok(out)
}

/// Greedy action of one sub-policy in one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAction {
    pub subpolicy: usize,
    pub row: usize,
    pub col: usize,
    pub action: usize,
}

/// Greedy action of every sub-policy in every open cell of `world`, with
/// the world's current goal.
pub fn grid_action_map<S: Scalar>(subs: &SubPolicySet<S>, world: &GridWorld) -> Result<Vec<CellAction>> {
    if subs.shape().input_dim != world.spec().sub_obs_dim {
        return Err(contract("sub-policy input does not match the grid's sub-policy view"));
    }
    let mut probe = world.clone();
    let mut obs = vec![S::zero(); world.spec().sub_obs_dim];
    let mut out = Vec::new();
    for (k, net) in subs.nets().iter().enumerate() {
        for cell in world.layout().open_cells() {
            probe.place_agent(cell)?;
            probe.observe_sub(&mut obs);
            out.push(CellAction { subpolicy: k, row: cell.0, col: cell.1, action: greedy(net, &obs)? });
        }
    }
    Ok(out)
}
