//! Meta-learning shared hierarchies.
//!
//! A set of sub-policies is shared across a distribution of tasks. For each
//! task a master policy picks which sub-policy acts for the next `N` steps.
//! Training alternates between a warmup in which only the master learns and
//! a joint phase in which both levels learn; the master is reset whenever
//! the task changes, so the sub-policies are pushed toward primitives that
//! make fast adaptation possible.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which the trainer and CLI use.

pub mod checkpoint;
pub mod config;
pub mod envs;
pub mod error;
pub mod hierarchy;
pub mod inspect;
pub mod metrics;
pub mod nn;
pub mod ppo;
pub mod rng;
pub mod scalar;
pub mod trainer;

pub use config::{AdaptConfig, MlshConfig};
pub use envs::{Env, EnvKind, EnvSpec, TaskDistribution, TaskSeed};
pub use error::{MlshError, Result};
pub use ppo::PpoConfig;
pub use scalar::Scalar;

pub type Net = nn::NetParams<f64>;
pub type Adam = nn::AdamState<f64>;
pub type Grad = nn::GradVector<f64>;
pub type Batch = ppo::RolloutBatch<f64>;
pub type SubPolicies = hierarchy::SubPolicySet<f64>;
pub type Master = hierarchy::MasterPolicy<f64>;
pub type Trajectory = hierarchy::Trajectory<f64>;
pub type Checkpoint = checkpoint::Checkpoint<f64>;
pub type Trainer = trainer::Harness<f64>;
