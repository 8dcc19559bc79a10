//! Task distributions behind one environment interface.

pub mod bandits;
pub mod gridworld;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MlshError, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

pub use bandits::MovingBandits2D;
pub use gridworld::{GridWorld, Layout};

/// Shape of an environment's observation and action spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvSpec {
    pub name: String,
    /// Observation seen by master and flat policies.
    pub obs_dim: usize,
    /// Observation seen by sub-policies; equals `obs_dim` except under a
    /// transfer view.
    pub sub_obs_dim: usize,
    pub action_count: usize,
    pub episode_len: usize,
}

/// Identifies one MDP drawn from a task distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskSeed(pub u64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Bandits,
    Fourrooms,
    GridObstacle,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Bandits => "bandits",
            EnvKind::Fourrooms => "fourrooms",
            EnvKind::GridObstacle => "grid-obstacle",
        }
    }

    pub fn default_episode_len(self) -> usize {
        match self {
            EnvKind::Bandits => bandits::DEFAULT_EPISODE_LEN,
            EnvKind::Fourrooms => gridworld::FOUR_ROOMS_EPISODE_LEN,
            EnvKind::GridObstacle => gridworld::OBSTACLE_EPISODE_LEN,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = MlshError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandits" | "moving-bandits" => Ok(EnvKind::Bandits),
            "fourrooms" | "four-rooms" => Ok(EnvKind::Fourrooms),
            "grid-obstacle" | "obstacle" => Ok(EnvKind::GridObstacle),
            other => Err(MlshError::Config(format!("unknown task distribution '{other}'"))),
        }
    }
}

/// Draw one task from the named distribution.
pub fn sample_task(kind: EnvKind, rng: &mut Rng) -> TaskSeed {
    match kind {
        EnvKind::Bandits => TaskSeed(rng.random()),
        EnvKind::Fourrooms => TaskSeed(rng.random_range(0..gridworld::four_rooms_goals().len() as u64)),
        EnvKind::GridObstacle => TaskSeed(0),
    }
}

pub fn sample_task_named(name: &str, rng: &mut Rng) -> Result<TaskSeed> {
    Ok(sample_task(name.parse()?, rng))
}

const HOLDOUT_SEED: u64 = 0x5eed_0ff5;

/// A task distribution with an optional held-out set of four-rooms goals
/// that meta-training never samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDistribution {
    kind: EnvKind,
    holdout: Vec<TaskSeed>,
}

impl TaskDistribution {
    pub fn new(kind: EnvKind, holdout_count: usize) -> Result<Self> {
        let holdout = match kind {
            EnvKind::Fourrooms if holdout_count > 0 => {
                let n = gridworld::four_rooms_goals().len();
                if holdout_count >= n {
                    return Err(MlshError::Config(format!("cannot hold out {holdout_count} of {n} goals")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(HOLDOUT_SEED);
                let mut picks: Vec<TaskSeed> =
                    index::sample(&mut rng, n, holdout_count).into_iter().map(|i| TaskSeed(i as u64)).collect();
                picks.sort_unstable();
                picks
            }
            EnvKind::Fourrooms | EnvKind::Bandits | EnvKind::GridObstacle => {
                if holdout_count > 0 && kind != EnvKind::Fourrooms {
                    return Err(MlshError::Config(format!("{kind} has no goal set to hold out")));
                }
                Vec::new()
            }
        };
        Ok(Self { kind, holdout })
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    /// Tasks excluded from [`TaskDistribution::sample`].
    pub fn held_out(&self) -> &[TaskSeed] {
        &self.holdout
    }

    pub fn sample(&self, rng: &mut Rng) -> TaskSeed {
        loop {
            let t = sample_task(self.kind, rng);
            if !self.holdout.contains(&t) {
                return t;
            }
        }
    }
}

/// Any of the supported environments.
#[derive(Debug, Clone)]
pub enum Env {
    Bandits(MovingBandits2D),
    Grid(GridWorld),
}

impl Env {
    pub fn new(kind: EnvKind, episode_len: usize, transfer_view: bool) -> Result<Self> {
        if episode_len == 0 {
            return Err(MlshError::Config("episode length must be positive".into()));
        }
        if transfer_view && kind != EnvKind::GridObstacle {
            return Err(MlshError::Config(format!("{kind} has no transfer view")));
        }
        Ok(match kind {
            EnvKind::Bandits => Env::Bandits(MovingBandits2D::new(episode_len)),
            EnvKind::Fourrooms => Env::Grid(GridWorld::four_rooms(episode_len)),
            EnvKind::GridObstacle => Env::Grid(GridWorld::obstacle(episode_len, transfer_view)),
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        match self {
            Env::Bandits(e) => e.spec(),
            Env::Grid(e) => e.spec(),
        }
    }

    pub fn task_seed(&self) -> TaskSeed {
        match self {
            Env::Bandits(e) => e.task_seed(),
            Env::Grid(e) => e.task_seed(),
        }
    }

    pub fn set_task(&mut self, task: TaskSeed) {
        match self {
            Env::Bandits(e) => e.set_task(task),
            Env::Grid(e) => e.set_task(task),
        }
    }

    /// Start a new episode. Bandits draw fresh goal positions from `rng`.
    pub fn reset(&mut self, rng: &mut Rng) {
        match self {
            Env::Bandits(e) => e.reset(rng),
            Env::Grid(e) => e.reset(),
        }
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        match self {
            Env::Bandits(e) => e.step(action),
            Env::Grid(e) => e.step(action),
        }
    }

    pub fn observe<S: Scalar>(&self, out: &mut [S]) {
        match self {
            Env::Bandits(e) => e.observe(out),
            Env::Grid(e) => e.observe(out),
        }
    }

    pub fn observe_sub<S: Scalar>(&self, out: &mut [S]) {
        match self {
            Env::Bandits(e) => e.observe(out),
            Env::Grid(e) => e.observe_sub(out),
        }
    }

    /// Reset and return the first observation.
    pub fn reset_obs<S: Scalar>(&mut self, rng: &mut Rng) -> Vec<S> {
        self.reset(rng);
        let mut obs = vec![S::zero(); self.spec().obs_dim];
        self.observe(&mut obs);
        obs
    }
}
