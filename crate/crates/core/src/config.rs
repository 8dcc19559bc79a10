//! Experiment configuration shared by the trainer, baselines and CLI.

use serde::{Deserialize, Serialize};

use crate::envs::EnvKind;
use crate::error::{MlshError, Result};
use crate::nn::DEFAULT_HIDDEN;
use crate::ppo::PpoConfig;

/// Every scalar of a meta-training run.
///
/// Short names used on the command line: `K` = `subpolicies`,
/// `N` = `master_period`, `T` = `episode_len`, `W` = `warmup`,
/// `U` = `joint`, `D` = `rollout_len`, `G` = `groups`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlshConfig {
    pub label: String,
    pub seed: u64,
    pub env: EnvKind,
    pub episode_len: usize,
    /// Present obstacle-course cells to sub-policies in four-rooms tile
    /// coordinates.
    pub transfer_view: bool,
    /// Four-rooms goals withheld from meta-training and used for adaptation.
    pub holdout_goals: usize,
    pub subpolicies: usize,
    pub master_period: usize,
    pub hidden: usize,
    pub warmup: usize,
    pub joint: usize,
    pub rollout_len: usize,
    pub meta_iterations: usize,
    pub groups: usize,
    pub workers_per_group: usize,
    /// Stop after this many meta-iterations without a new best mean return;
    /// 0 disables the plateau stop.
    pub plateau_window: usize,
    /// Checkpoint period in meta-iterations; 0 writes only the final one.
    pub checkpoint_every: usize,
    pub master_ppo: PpoConfig,
    pub sub_ppo: PpoConfig,
    pub adapt: AdaptConfig,
}

/// Test-time adaptation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    /// Number of fresh tasks to adapt on.
    pub tasks: usize,
    /// Master updates per task.
    pub budget: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self { tasks: 10, budget: 10 }
    }
}

impl Default for MlshConfig {
    fn default() -> Self {
        Self {
            label: "mlsh".into(),
            seed: 0,
            env: EnvKind::Bandits,
            episode_len: EnvKind::Bandits.default_episode_len(),
            transfer_view: false,
            holdout_goals: 0,
            subpolicies: 2,
            master_period: 10,
            hidden: DEFAULT_HIDDEN,
            warmup: 9,
            joint: 1,
            rollout_len: 2000,
            meta_iterations: 300,
            groups: 10,
            workers_per_group: 1,
            plateau_window: 0,
            checkpoint_every: 0,
            master_ppo: PpoConfig { lr: 0.01, ..PpoConfig::default() },
            sub_ppo: PpoConfig { lr: 3e-4, ..PpoConfig::default() },
            adapt: AdaptConfig::default(),
        }
    }
}

impl MlshConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MlshError::Config(m));
        if self.subpolicies == 0 {
            return bad("subpolicies (K) must be at least 1".into());
        }
        if self.master_period == 0 {
            return bad("master_period (N) must be at least 1".into());
        }
        if self.joint == 0 {
            return bad("joint (U) must be at least 1".into());
        }
        if self.rollout_len < self.master_period {
            return bad(format!(
                "rollout_len (D = {}) must be at least master_period (N = {})",
                self.rollout_len, self.master_period
            ));
        }
        if self.episode_len == 0 {
            return bad("episode_len (T) must be positive".into());
        }
        if self.groups == 0 || self.workers_per_group == 0 {
            return bad("groups and workers_per_group must be positive".into());
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive".into());
        }
        self.master_ppo.validate()?;
        self.sub_ppo.validate()?;
        Ok(())
    }

    pub fn total_workers(&self) -> usize {
        self.groups * self.workers_per_group
    }

    pub fn cycle_len(&self) -> usize {
        self.warmup + self.joint
    }
}
