//! Deterministic gridworlds: the classic four-rooms layout and a 25x25
//! obstacle course assembled from four copies of it.
//!
//! Observations are a one-hot of the agent cell followed by a one-hot of the
//! goal cell over the full grid (walls included).

use std::collections::VecDeque;

use super::{EnvSpec, StepOutcome, TaskSeed};
use crate::error::{contract, Result};
use crate::scalar::Scalar;

pub const ACTIONS: usize = 4;
pub const FOUR_ROOMS_EPISODE_LEN: usize = 100;
pub const OBSTACLE_EPISODE_LEN: usize = 400;

// up, down, left, right
const MOVES: [(isize, isize); ACTIONS] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

const FOUR_ROOMS: [&str; 13] = [
    "#############",
    "#     #     #",
    "#     #     #",
    "#           #",
    "#     #     #",
    "#     #     #",
    "## ####     #",
    "#     ### ###",
    "#     #     #",
    "#     #     #",
    "#           #",
    "#     #     #",
    "#############",
];

pub const FOUR_ROOMS_SIZE: usize = 13;
pub const FOUR_ROOMS_START: (usize, usize) = (1, 1);

/// Tiles of the obstacle course overlap on their border rows and columns.
const TILE_STRIDE: usize = 12;
pub const OBSTACLE_SIZE: usize = 25;
pub const OBSTACLE_START: (usize, usize) = (23, 1);
pub const OBSTACLE_GOAL: (usize, usize) = (11, 23);
/// Doorways cut into the shared tile borders: bottom-left tile to top-left
/// tile, then top-left to top-right along the top edge, so the route to the
/// goal climbs and then descends. The bottom-right tile is sealed off.
const OBSTACLE_OPENINGS: [(usize, usize); 2] = [(12, 9), (1, 12)];

/// Wall map of a rectangular grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    walls: Vec<bool>,
}

impl Layout {
    fn from_rows(rows: &[&str]) -> Self {
        let cols = rows[0].len();
        let walls = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect();
        Self { rows: rows.len(), cols, walls }
    }

    pub fn four_rooms() -> Self {
        Self::from_rows(&FOUR_ROOMS)
    }

    /// Four four-rooms tiles sharing their borders, joined by two doorways.
    pub fn obstacle_course() -> Self {
        let base = Self::four_rooms();
        let n = OBSTACLE_SIZE;
        let mut walls = vec![false; n * n];
        for tr in 0..2 {
            for tc in 0..2 {
                for r in 0..base.rows {
                    for c in 0..base.cols {
                        if base.is_wall((r, c)) {
                            walls[(tr * TILE_STRIDE + r) * n + tc * TILE_STRIDE + c] = true;
                        }
                    }
                }
            }
        }
        for (r, c) in OBSTACLE_OPENINGS {
            walls[r * n + c] = false;
        }
        Self { rows: n, cols: n, walls }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, cell: (usize, usize)) -> usize {
        cell.0 * self.cols + cell.1
    }

    pub fn is_wall(&self, cell: (usize, usize)) -> bool {
        self.walls[self.index(cell)]
    }

    /// Open cells in row-major order.
    pub fn open_cells(&self) -> Vec<(usize, usize)> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&cell| !self.is_wall(cell))
            .collect()
    }

    /// Cell reached by `action`; walls and the border block movement.
    pub fn moved(&self, cell: (usize, usize), action: usize) -> (usize, usize) {
        let (dr, dc) = MOVES[action];
        let r = cell.0 as isize + dr;
        let c = cell.1 as isize + dc;
        if r < 0 || c < 0 || r >= self.rows as isize || c >= self.cols as isize {
            return cell;
        }
        let next = (r as usize, c as usize);
        if self.is_wall(next) {
            cell
        } else {
            next
        }
    }

    /// Breadth-first distances from `from`; `None` for walls and unreachable cells.
    pub fn distances_from(&self, from: (usize, usize)) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cells()];
        let mut queue = VecDeque::from([from]);
        dist[self.index(from)] = Some(0);
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.index(cell)].unwrap_or(0);
            for a in 0..ACTIONS {
                let next = self.moved(cell, a);
                if dist[self.index(next)].is_none() {
                    dist[self.index(next)] = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }
}

/// Goal cells a four-rooms task can use: every open cell except the start.
pub fn four_rooms_goals() -> Vec<(usize, usize)> {
    Layout::four_rooms().open_cells().into_iter().filter(|&c| c != FOUR_ROOMS_START).collect()
}

/// Map an obstacle-course cell to the matching cell of its four-rooms tile.
pub fn tile_local(cell: (usize, usize)) -> (usize, usize) {
    let local = |x: usize| if x < TILE_STRIDE { x } else { x - TILE_STRIDE };
    (local(cell.0), local(cell.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    FourRooms,
    Obstacle,
}

/// Navigation task on a [`Layout`]: reach the goal for reward 1, which ends
/// the episode.
#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: EnvSpec,
    kind: GridKind,
    layout: Layout,
    start: (usize, usize),
    goal: (usize, usize),
    seed: TaskSeed,
    agent: (usize, usize),
    steps: usize,
    transfer_view: bool,
}

impl GridWorld {
    pub fn four_rooms(episode_len: usize) -> Self {
        let layout = Layout::four_rooms();
        let cells = layout.cells();
        let goal = four_rooms_goals()[0];
        Self {
            spec: EnvSpec {
                name: "fourrooms".into(),
                obs_dim: 2 * cells,
                sub_obs_dim: 2 * cells,
                action_count: ACTIONS,
                episode_len,
            },
            kind: GridKind::FourRooms,
            layout,
            start: FOUR_ROOMS_START,
            goal,
            seed: TaskSeed(0),
            agent: FOUR_ROOMS_START,
            steps: 0,
            transfer_view: false,
        }
    }

    /// The sparse obstacle course. With `transfer_view`, sub-policies observe
    /// the agent and goal in the coordinates of their four-rooms tile, which
    /// matches the observation space of four-rooms sub-policies.
    pub fn obstacle(episode_len: usize, transfer_view: bool) -> Self {
        let layout = Layout::obstacle_course();
        let cells = layout.cells();
        let sub_obs_dim = if transfer_view { 2 * FOUR_ROOMS_SIZE * FOUR_ROOMS_SIZE } else { 2 * cells };
        Self {
            spec: EnvSpec {
                name: "grid-obstacle".into(),
                obs_dim: 2 * cells,
                sub_obs_dim,
                action_count: ACTIONS,
                episode_len,
            },
            kind: GridKind::Obstacle,
            layout,
            start: OBSTACLE_START,
            goal: OBSTACLE_GOAL,
            seed: TaskSeed(0),
            agent: OBSTACLE_START,
            steps: 0,
            transfer_view,
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn agent(&self) -> (usize, usize) {
        self.agent
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn task_seed(&self) -> TaskSeed {
        self.seed
    }

    /// Four-rooms task seeds index [`four_rooms_goals`]; the obstacle course
    /// has a single task.
    pub fn set_task(&mut self, seed: TaskSeed) {
        self.seed = seed;
        if self.kind == GridKind::FourRooms {
            let goals = four_rooms_goals();
            self.goal = goals[(seed.0 % goals.len() as u64) as usize];
        }
    }

    /// Place the agent directly; used by probes.
    pub fn place_agent(&mut self, cell: (usize, usize)) -> Result<()> {
        if self.layout.is_wall(cell) {
            return Err(contract(format!("cell {cell:?} is a wall")));
        }
        self.agent = cell;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.agent = self.start;
        self.steps = 0;
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if action >= ACTIONS {
            return Err(contract(format!("grid action {action} out of range 0..{ACTIONS}")));
        }
        self.agent = self.layout.moved(self.agent, action);
        self.steps += 1;
        let at_goal = self.agent == self.goal;
        Ok(StepOutcome {
            reward: if at_goal { 1.0 } else { 0.0 },
            done: at_goal || self.steps >= self.spec.episode_len,
        })
    }

    fn one_hot_pair<S: Scalar>(out: &mut [S], cells: usize, agent: usize, goal: usize) {
        out.iter_mut().for_each(|x| *x = S::zero());
        out[agent] = S::one();
        out[cells + goal] = S::one();
    }

    pub fn observe<S: Scalar>(&self, out: &mut [S]) {
        let cells = self.layout.cells();
        Self::one_hot_pair(out, cells, self.layout.index(self.agent), self.layout.index(self.goal));
    }

    pub fn observe_sub<S: Scalar>(&self, out: &mut [S]) {
        if !self.transfer_view {
            self.observe(out);
        } else {
            let n = FOUR_ROOMS_SIZE;
            let idx = |c: (usize, usize)| c.0 * n + c.1;
            Self::one_hot_pair(out, n * n, idx(tile_local(self.agent)), idx(tile_local(self.goal)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_rooms_has_104_open_cells() {
        let layout = Layout::four_rooms();
        assert_eq!(layout.open_cells().len(), 104);
        assert_eq!(four_rooms_goals().len(), 103);
        assert!(!layout.is_wall(FOUR_ROOMS_START));
    }

    #[test]
    fn every_goal_reachable_within_episode() {
        let layout = Layout::four_rooms();
        let dist = layout.distances_from(FOUR_ROOMS_START);
        for g in four_rooms_goals() {
            let d = dist[layout.index(g)].expect("goal reachable");
            assert!(d <= FOUR_ROOMS_EPISODE_LEN, "goal {g:?} at distance {d}");
        }
    }

    #[test]
    fn walls_block_moves() {
        let mut env = GridWorld::four_rooms(100);
        env.set_task(TaskSeed(50));
        env.reset();
        let out = env.step(0).unwrap(); // up from (1,1) hits the border
        assert_eq!(env.agent(), FOUR_ROOMS_START);
        assert_eq!(out.reward, 0.0);
        assert!(env.step(4).is_err());
    }

    #[test]
    fn reaching_goal_pays_and_terminates() {
        let mut env = GridWorld::four_rooms(100);
        let goals = four_rooms_goals();
        let seed = goals.iter().position(|&g| g == (1, 2)).unwrap() as u64;
        env.set_task(TaskSeed(seed));
        env.reset();
        let out = env.step(3).unwrap();
        assert_eq!((out.reward, out.done), (1.0, true));
    }

    #[test]
    fn one_hot_observation() {
        let mut env = GridWorld::four_rooms(100);
        env.set_task(TaskSeed(7));
        env.reset();
        let mut obs = vec![0.0f64; env.spec().obs_dim];
        env.observe(&mut obs);
        assert_eq!(obs.len(), 338);
        assert_eq!(obs[..169].iter().sum::<f64>(), 1.0);
        assert_eq!(obs[env.layout().index(FOUR_ROOMS_START)], 1.0);
        assert_eq!(obs[169..].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn obstacle_course_is_connected_and_long() {
        let layout = Layout::obstacle_course();
        let dist = layout.distances_from(OBSTACLE_START);
        let d = dist[layout.index(OBSTACLE_GOAL)].expect("goal reachable");
        assert!(d >= 50 && d <= OBSTACLE_EPISODE_LEN, "shortest path {d}");
    }

    #[test]
    fn transfer_view_uses_tile_coordinates() {
        let mut env = GridWorld::obstacle(OBSTACLE_EPISODE_LEN, true);
        env.reset();
        assert_eq!(env.spec().obs_dim, 1250);
        assert_eq!(env.spec().sub_obs_dim, 338);
        let mut sub = vec![0.0f64; 338];
        env.observe_sub(&mut sub);
        assert_eq!(sub[11 * 13 + 1], 1.0);
        assert_eq!(sub[169 + 11 * 13 + 11], 1.0);
        for cell in Layout::obstacle_course().open_cells() {
            let (r, c) = tile_local(cell);
            assert!(r < 13 && c < 13);
        }
    }
}
