//! Config resolution: preset or file, then `key=value` overrides.

use std::fs;
use std::path::Path;

use mlsh_core::MlshConfig;
use toml::{Table, Value};

use crate::error::{io_at, CliError, Result};
use crate::presets::{preset, PRESET_NAMES};

/// Short names accepted by `--set`.
const ALIASES: [(&str, &str); 10] = [
    ("K", "subpolicies"),
    ("N", "master_period"),
    ("T", "episode_len"),
    ("W", "warmup"),
    ("U", "joint"),
    ("D", "rollout_len"),
    ("G", "groups"),
    ("P", "workers_per_group"),
    ("theta_lr", "master_ppo.lr"),
    ("phi_lr", "sub_ppo.lr"),
];

pub fn load_file(path: &Path) -> Result<MlshConfig> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn to_toml(cfg: &MlshConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
}

/// Base config from a preset name or a TOML file (a file wins when both are
/// given), then overrides, then the explicit seed.
pub fn resolve(
    preset_name: Option<&str>,
    file: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
) -> Result<MlshConfig> {
    let mut cfg = match (file, preset_name) {
        (Some(path), _) => load_file(path)?,
        (None, Some(name)) => preset(name).ok_or_else(|| {
            CliError::Config(format!("unknown preset `{name}` (expected one of {})", PRESET_NAMES.join(", ")))
        })?,
        (None, None) => MlshConfig::default(),
    };
    if !sets.is_empty() {
        cfg = apply_overrides(&cfg, sets)?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn apply_overrides(cfg: &MlshConfig, sets: &[String]) -> Result<MlshConfig> {
    let mut table = Table::try_from(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    for item in sets {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
        let key = key.trim();
        let key = ALIASES.iter().find(|(a, _)| *a == key).map_or(key, |(_, full)| full);
        set_path(&mut table, key, parse_value(raw.trim()))?;
    }
    table.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("invalid override: {e}")))
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let unknown = || CliError::Config(format!("unknown config key `{key}`"));
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            let slot = cur.get_mut(part).ok_or_else(unknown)?;
            *slot = match (&*slot, value) {
                (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
                (_, v) => v,
            };
            return Ok(());
        }
        cur = cur.get_mut(part).and_then(Value::as_table_mut).ok_or_else(unknown)?;
    }
    Err(unknown())
}
