//! Two-dimensional moving bandits.
//!
//! The agent sees its own position and two candidate goals in the unit square;
//! only one goal pays, and which one is never observable. A task fixes which
//! goal slot pays; goal positions are redrawn at every reset. Positions live on
//! a lattice of `STEP`-sized cells so repeated moves do not accumulate rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvSpec, StepOutcome, TaskSeed};
use crate::error::{contract, Result};
use crate::scalar::Scalar;

pub const STEP: f64 = 0.05;
pub const THRESHOLD: f64 = 0.1;
pub const GOAL_MIN: f64 = 0.1;
pub const GOAL_MAX: f64 = 0.9;
pub const DEFAULT_EPISODE_LEN: usize = 50;
pub const OBS_DIM: usize = 6;
pub const ACTIONS: usize = 5;

const LATTICE: i32 = 20;
const START: (i32, i32) = (10, 10);
// up, down, left, right, stay
const MOVES: [(i32, i32); ACTIONS] = [(0, 1), (0, -1), (-1, 0), (1, 0), (0, 0)];

/// One goal layout plus the paying slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditTask {
    pub goals: [(f64, f64); 2],
    pub correct: usize,
}

impl BanditTask {
    /// The paying slot of a task, with the layout of its first episode.
    pub fn from_seed(seed: TaskSeed) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
        let goals = random_goals(&mut rng);
        let correct = usize::from(rng.random::<bool>());
        Self { goals, correct }
    }
}

pub fn random_goals(rng: &mut impl Rng) -> [(f64, f64); 2] {
    let mut coord = || rng.random_range(GOAL_MIN..GOAL_MAX);
    [(coord(), coord()), (coord(), coord())]
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

pub fn within_reach(agent: (f64, f64), goal: (f64, f64)) -> bool {
    distance(agent, goal) <= THRESHOLD + 1e-9
}

/// Position after taking `action` from `pos`, clamped to the unit square.
pub fn moved(pos: (f64, f64), action: usize) -> (f64, f64) {
    let (dx, dy) = MOVES[action];
    ((pos.0 + dx as f64 * STEP).clamp(0.0, 1.0), (pos.1 + dy as f64 * STEP).clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct MovingBandits2D {
    spec: EnvSpec,
    task: BanditTask,
    seed: TaskSeed,
    cell: (i32, i32),
    steps: usize,
}

impl MovingBandits2D {
    pub fn new(episode_len: usize) -> Self {
        let seed = TaskSeed(0);
        Self {
            spec: EnvSpec {
                name: "bandits".into(),
                obs_dim: OBS_DIM,
                sub_obs_dim: OBS_DIM,
                action_count: ACTIONS,
                episode_len,
            },
            task: BanditTask::from_seed(seed),
            seed,
            cell: START,
            steps: 0,
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn task(&self) -> &BanditTask {
        &self.task
    }

    pub fn task_seed(&self) -> TaskSeed {
        self.seed
    }

    pub fn set_task(&mut self, seed: TaskSeed) {
        self.seed = seed;
        self.task = BanditTask::from_seed(seed);
    }

    /// Overrides the current layout until the next reset; used by probes and tests.
    pub fn set_layout(&mut self, task: BanditTask) {
        self.task = task;
    }

    pub fn position(&self) -> (f64, f64) {
        (self.cell.0 as f64 * STEP, self.cell.1 as f64 * STEP)
    }

    /// Agent back to the centre, fresh goal positions.
    pub fn reset(&mut self, rng: &mut impl Rng) {
        self.task.goals = random_goals(rng);
        self.cell = START;
        self.steps = 0;
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if action >= ACTIONS {
            return Err(contract(format!("bandit action {action} out of range 0..{ACTIONS}")));
        }
        let (dx, dy) = MOVES[action];
        self.cell = ((self.cell.0 + dx).clamp(0, LATTICE), (self.cell.1 + dy).clamp(0, LATTICE));
        self.steps += 1;
        let reward = if within_reach(self.position(), self.task.goals[self.task.correct]) { 1.0 } else { 0.0 };
        Ok(StepOutcome { reward, done: self.steps >= self.spec.episode_len })
    }

    pub fn observe<S: Scalar>(&self, out: &mut [S]) {
        let (x, y) = self.position();
        let [g1, g2] = self.task.goals;
        for (o, v) in out.iter_mut().zip([x, y, g1.0, g1.1, g2.0, g2.1]) {
            *o = S::lit(v);
        }
    }
}
