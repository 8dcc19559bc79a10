//! Built-in experiment presets.

use mlsh_core::{EnvKind, MlshConfig};

pub const PRESET_NAMES: [&str; 3] = ["bandits", "fourrooms", "obstacle-transfer"];

pub fn preset(name: &str) -> Option<MlshConfig> {
    let base = MlshConfig::default();
    match name {
        "bandits" => Some(MlshConfig { label: "bandits".into(), meta_iterations: 1500, ..base }),
        "fourrooms" => Some(fourrooms()),
        "obstacle-transfer" => Some(MlshConfig {
            label: "obstacle-transfer".into(),
            env: EnvKind::GridObstacle,
            episode_len: EnvKind::GridObstacle.default_episode_len(),
            transfer_view: true,
            holdout_goals: 0,
            adapt: mlsh_core::AdaptConfig { tasks: 1, budget: 50 },
            ..fourrooms()
        }),
        _ => None,
    }
}

fn fourrooms() -> MlshConfig {
    MlshConfig {
        label: "fourrooms".into(),
        env: EnvKind::Fourrooms,
        episode_len: EnvKind::Fourrooms.default_episode_len(),
        holdout_goals: 10,
        subpolicies: 4,
        master_period: 25,
        warmup: 20,
        joint: 30,
        adapt: mlsh_core::AdaptConfig { tasks: 10, budget: 20 },
        ..MlshConfig::default()
    }
}
