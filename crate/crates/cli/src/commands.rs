//! Subcommand implementations. Each writes into an output directory and
//! returns what it wrote for callers that want to inspect it.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use mlsh_core::envs::gridworld::GridWorld;
use mlsh_core::hierarchy::SubPolicySet;
use mlsh_core::inspect::{bandit_arrows, bandit_probe_states, bandit_specialization, grid_action_map, SpecializationReport};
use mlsh_core::metrics::{write_jsonl, MetricsRecord};
use mlsh_core::trainer::{
    adapt_curves, adaptation_tasks, curve_summary, flat_shape, AdaptCurve, Executor, Harness, Learner, Mode,
    RunSummary,
};
use mlsh_core::{Checkpoint, Env, EnvKind, MlshConfig, MlshError, Net, SubPolicies};
use serde::Serialize;

use crate::error::{io_at, CliError, Result};
use crate::export::{write_csv, CurvePoint};
use crate::settings::to_toml;

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const CURVES_FILE: &str = "curves.csv";
pub const PHI_FILE: &str = "phi.ckpt";
pub const SHARED_FILE: &str = "shared.ckpt";
pub const SHARED_EVAL_FILE: &str = "eval.jsonl";
pub const SPECIALIZATION_FILE: &str = "specialization.csv";
pub const ARROWS_FILE: &str = "arrows.csv";
pub const ACTIONS_FILE: &str = "actions.csv";

/// Probe states are fixed across runs so scores are comparable.
pub const PROBE_SEED: u64 = 0;
pub const PROBE_STATES: usize = 200;

fn prepare(out: &Path, cfg: &MlshConfig) -> Result<()> {
    fs::create_dir_all(out).map_err(io_at(out))?;
    let path = out.join(CONFIG_FILE);
    fs::write(&path, to_toml(cfg)?).map_err(io_at(&path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_at(path))?))
}

fn write_records(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = create(path)?;
    write_jsonl(records, &mut w)?;
    w.flush().map_err(io_at(path))
}

fn save(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    ckpt.save(path)?;
    Ok(())
}

fn phi_checkpoint(cfg: &MlshConfig, subs: &SubPolicies) -> Checkpoint {
    Checkpoint { master_period: cfg.master_period, subs: subs.nets().to_vec(), master: None }
}

#[derive(Serialize)]
struct Timing {
    iteration: usize,
    seconds: f64,
}

/// Meta-training. On a numeric abort the last good sub-policies are still
/// written to `phi.ckpt` before the error is returned.
pub fn train(cfg: &MlshConfig, out: &Path) -> Result<RunSummary> {
    prepare(out, cfg)?;
    let mut harness = Harness::<f64>::new(cfg, Mode::Hierarchical, Executor::Threaded)?;
    let ckpt_dir = out.join("checkpoints");
    if cfg.checkpoint_every > 0 {
        fs::create_dir_all(&ckpt_dir).map_err(io_at(&ckpt_dir))?;
    }
    let metrics_path = out.join(METRICS_FILE);
    let timing_path = out.join(TIMING_FILE);
    let mut metrics = create(&metrics_path)?;
    let mut timing = create(&timing_path)?;
    let start = Instant::now();
    let mut io_error: Option<CliError> = None;

    let result = harness.run(|h, records| {
        let mut step = || -> Result<()> {
            write_jsonl(records, &mut metrics)?;
            metrics.flush().map_err(io_at(&metrics_path))?;
            let t = Timing { iteration: h.meta.iteration, seconds: start.elapsed().as_secs_f64() };
            serde_json::to_writer(&mut timing, &t).map_err(std::io::Error::from).map_err(io_at(&timing_path))?;
            timing.write_all(b"\n").map_err(io_at(&timing_path))?;
            if cfg.checkpoint_every > 0 && h.meta.iteration % cfg.checkpoint_every == 0 {
                let path = ckpt_dir.join(format!("iter_{:06}.ckpt", h.meta.iteration));
                save(&phi_checkpoint(cfg, h.subs()), &path)?;
            }
            if h.meta.iteration % 10 == 0 {
                let mean = mean_return(records);
                info!("iteration {}: mean return {:.3}", h.meta.iteration, mean.unwrap_or(f64::NAN));
            }
            Ok(())
        };
        step().map_err(|e| {
            let msg = e.to_string();
            io_error = Some(e);
            MlshError::Contract(msg)
        })
    });
    timing.flush().map_err(io_at(&timing_path))?;
    save(&phi_checkpoint(cfg, harness.subs()), &out.join(PHI_FILE))?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let summary = result?;
    if summary.plateau_stop {
        info!("plateau stop after {} iterations", summary.iterations);
    }
    Ok(summary)
}

fn mean_return(records: &[MetricsRecord]) -> Option<f64> {
    let xs: Vec<f64> = records.iter().filter_map(|r| r.episode_return).collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineKind {
    Shared,
    Scratch,
    Finetune,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Shared => "shared",
            BaselineKind::Scratch => "scratch",
            BaselineKind::Finetune => "finetune",
        }
    }
}

fn adapt_records(label: &str, curves: &[AdaptCurve]) -> Vec<MetricsRecord> {
    curves.iter().enumerate().flat_map(|(i, c)| c.records(label, i)).collect()
}

fn write_curves(out: &Path, label: &str, curves: &[AdaptCurve]) -> Result<Vec<CurvePoint>> {
    let points: Vec<CurvePoint> = curve_summary(curves)
        .into_iter()
        .map(|(t, mean, stderr)| CurvePoint {
            label: label.to_string(),
            timesteps: t,
            mean_return: mean.unwrap_or(f64::NAN),
            stderr: stderr.unwrap_or(0.0),
            seeds: curves.len(),
        })
        .collect();
    let path = out.join(CURVES_FILE);
    write_csv(&points, create(&path)?)?;
    Ok(points)
}

fn load_flat(path: &Path, cfg: &MlshConfig) -> Result<Net> {
    let ckpt = Checkpoint::load(path)?;
    let expected = flat_shape(cfg)?;
    match ckpt.subs.as_slice() {
        [net] if net.shape() == expected => Ok(net.clone()),
        [net] => Err(shape_error(path, net.shape(), expected)),
        nets => Err(CliError::Config(format!(
            "{}: a flat policy checkpoint holds one network, found {}",
            path.display(),
            nets.len()
        ))),
    }
}

fn shape_error(path: &Path, got: mlsh_core::nn::NetShape, want: mlsh_core::nn::NetShape) -> CliError {
    CliError::Config(format!(
        "{}: checkpoint networks take {} inputs and {} actions (hidden {}), environment needs {} inputs and {} actions (hidden {})",
        path.display(),
        got.input_dim,
        got.action_count,
        got.hidden,
        want.input_dim,
        want.action_count,
        want.hidden
    ))
}

/// Flat-policy baselines. `shared` trains one policy across the task
/// distribution and evaluates it frozen on the adaptation tasks; `scratch`
/// and `finetune` train per task under the adaptation budget.
pub fn baseline(kind: BaselineKind, cfg: &MlshConfig, checkpoint: Option<&Path>, out: &Path) -> Result<Vec<CurvePoint>> {
    prepare(out, cfg)?;
    let label = kind.label();
    let tasks = adaptation_tasks(cfg)?;
    let curves = match kind {
        BaselineKind::Shared => {
            let (net, records) = train_shared(cfg, label)?;
            write_records(&out.join(METRICS_FILE), &records)?;
            let ckpt = Checkpoint { master_period: cfg.episode_len, subs: vec![net.clone()], master: None };
            save(&ckpt, &out.join(SHARED_FILE))?;
            let curves = adapt_curves(cfg, Learner::Frozen(&net), &tasks)?;
            write_records(&out.join(SHARED_EVAL_FILE), &adapt_records(label, &curves))?;
            curves
        }
        BaselineKind::Scratch => {
            let curves = adapt_curves::<f64>(cfg, Learner::Flat(None), &tasks)?;
            write_records(&out.join(METRICS_FILE), &adapt_records(label, &curves))?;
            curves
        }
        BaselineKind::Finetune => {
            let net = match checkpoint {
                Some(path) => load_flat(path, cfg)?,
                None => {
                    info!("no shared checkpoint given; training the shared policy first");
                    let (net, _) = train_shared(cfg, "shared")?;
                    net
                }
            };
            let curves = adapt_curves(cfg, Learner::Flat(Some(&net)), &tasks)?;
            write_records(&out.join(METRICS_FILE), &adapt_records(label, &curves))?;
            curves
        }
    };
    write_curves(out, label, &curves)
}

fn train_shared(cfg: &MlshConfig, label: &str) -> Result<(Net, Vec<MetricsRecord>)> {
    let cfg = MlshConfig { label: label.to_string(), ..cfg.clone() };
    Ok(mlsh_core::trainer::train_shared(&cfg)?)
}

/// Load sub-policies and check them against the environment's sub-policy
/// view.
pub fn load_subs(path: &Path, cfg: &MlshConfig) -> Result<SubPolicies> {
    let ckpt = Checkpoint::load(path)?;
    let env = Env::new(cfg.env, cfg.episode_len, cfg.transfer_view)?;
    let spec = env.spec();
    let Some(shape) = ckpt.sub_shape() else {
        return Err(CliError::Config(format!("{}: checkpoint holds no sub-policies", path.display())));
    };
    if shape.input_dim != spec.sub_obs_dim || shape.action_count != spec.action_count {
        let want = mlsh_core::nn::NetShape::new(spec.sub_obs_dim, spec.action_count).with_hidden(shape.hidden);
        return Err(shape_error(path, shape, want));
    }
    if ckpt.subs.len() != cfg.subpolicies {
        warn!(
            "checkpoint holds {} sub-policies, config says {}; using the checkpoint",
            ckpt.subs.len(),
            cfg.subpolicies
        );
    }
    Ok(SubPolicySet::new(ckpt.subs)?)
}

/// Test-time adaptation of fresh masters over frozen sub-policies.
pub fn adapt(cfg: &MlshConfig, checkpoint: &Path, out: &Path) -> Result<Vec<CurvePoint>> {
    let subs = load_subs(checkpoint, cfg)?;
    prepare(out, cfg)?;
    let tasks = adaptation_tasks(cfg)?;
    let curves = adapt_curves(cfg, Learner::Master(&subs), &tasks)?;
    write_records(&out.join(METRICS_FILE), &adapt_records(&cfg.label, &curves))?;
    write_curves(out, &cfg.label, &curves)
}

#[derive(Serialize)]
struct SpecializationRow {
    subpolicy: usize,
    toward_goal_1: f64,
    toward_goal_2: f64,
    majority_goal: usize,
}

/// Outputs of [`inspect`].
#[derive(Debug, Clone, PartialEq)]
pub enum InspectReport {
    Bandits(SpecializationReport),
    Grid { cells: usize, subpolicies: usize },
}

/// Specialization report and arrow field for bandit sub-policies; greedy
/// action maps for grid sub-policies.
pub fn inspect(cfg: &MlshConfig, checkpoint: &Path, out: &Path) -> Result<InspectReport> {
    let subs = load_subs(checkpoint, cfg)?;
    fs::create_dir_all(out).map_err(io_at(out))?;
    match cfg.env {
        EnvKind::Bandits => {
            let report = bandit_specialization(&subs, &bandit_probe_states(PROBE_SEED, PROBE_STATES))?;
            let rows: Vec<SpecializationRow> = report
                .toward
                .iter()
                .enumerate()
                .map(|(k, t)| SpecializationRow {
                    subpolicy: k,
                    toward_goal_1: t[0],
                    toward_goal_2: t[1],
                    majority_goal: report.majority[k] + 1,
                })
                .collect();
            write_csv(&rows, create(&out.join(SPECIALIZATION_FILE))?)?;
            let arrows = bandit_arrows(&subs, [(0.25, 0.75), (0.75, 0.25)], 11)?;
            write_csv(&arrows, create(&out.join(ARROWS_FILE))?)?;
            for row in &rows {
                println!(
                    "sub-policy {}: toward goal 1 {:.3}, toward goal 2 {:.3}, majority goal {}",
                    row.subpolicy, row.toward_goal_1, row.toward_goal_2, row.majority_goal
                );
            }
            match report.score {
                Some(s) => println!("specialization score {s:.3} (specialized: {})", report.specialized()),
                None => println!("specialization score undefined for a single sub-policy"),
            }
            Ok(InspectReport::Bandits(report))
        }
        EnvKind::Fourrooms | EnvKind::GridObstacle => {
            let mut world = match Env::new(cfg.env, cfg.episode_len, cfg.transfer_view)? {
                Env::Grid(g) => g,
                Env::Bandits(_) => unreachable!("grid kinds build grid worlds"),
            };
            let tasks = adaptation_tasks(cfg)?;
            if let Some(&task) = tasks.first() {
                world.set_task(task);
            }
            let map = grid_action_map(&subs, &world)?;
            write_csv(&map, create(&out.join(ACTIONS_FILE))?)?;
            print_action_map(&world, &map, subs.len());
            Ok(InspectReport::Grid { cells: world.layout().open_cells().len(), subpolicies: subs.len() })
        }
    }
}

fn print_action_map(world: &GridWorld, map: &[mlsh_core::inspect::CellAction], k: usize) {
    const GLYPHS: [char; 4] = ['^', 'v', '<', '>'];
    let layout = world.layout();
    let side = (layout.cells() as f64).sqrt() as usize;
    for sub in 0..k {
        println!("sub-policy {sub}:");
        for r in 0..side {
            let line: String = (0..side)
                .map(|c| {
                    if layout.is_wall((r, c)) {
                        '#'
                    } else if (r, c) == world.goal() {
                        'G'
                    } else {
                        map.iter()
                            .find(|a| a.subpolicy == sub && a.row == r && a.col == c)
                            .map_or('?', |a| GLYPHS[a.action])
                    }
                })
                .collect();
            println!("  {line}");
        }
    }
}
