use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlsh_cli::commands::{self, BaselineKind};
use mlsh_cli::{export, settings, CliError, Result};
use mlsh_core::MlshConfig;

#[derive(Parser)]
#[command(name = "mlsh", version, about = "Meta-learning shared hierarchies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Built-in preset: bandits, fourrooms or obstacle-transfer.
    #[arg(long)]
    preset: Option<String>,
    /// TOML config file; takes precedence over --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set W=0` or `--set sub_ppo.lr=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Adaptation budget (master or flat-policy updates per task).
    #[arg(long)]
    budget: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<MlshConfig> {
        let mut cfg = settings::resolve(self.preset.as_deref(), self.config.as_deref(), &self.sets, self.seed)?;
        if let Some(b) = self.budget {
            cfg.adapt.budget = b;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Meta-train shared sub-policies.
    Train(ConfigArgs),
    /// Train a flat PPO baseline.
    Baseline {
        #[arg(value_enum)]
        kind: BaselineKind,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Shared-policy checkpoint to fine-tune from.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Adapt fresh masters over frozen sub-policies.
    Adapt {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Report what each sub-policy does.
    Inspect {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Merge metrics files (or run directories) into one curve CSV.
    Export {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let summary = commands::train(&cfg, &args.out)?;
            println!("trained {} meta-iterations; outputs in {}", summary.iterations, args.out.display());
        }
        Command::Baseline { kind, cfg: args, checkpoint } => {
            let cfg = args.resolve()?;
            let points = commands::baseline(kind, &cfg, checkpoint.as_deref(), &args.out)?;
            print_final(&points);
        }
        Command::Adapt { cfg: args, checkpoint } => {
            let cfg = args.resolve()?;
            let points = commands::adapt(&cfg, &checkpoint, &args.out)?;
            print_final(&points);
        }
        Command::Inspect { cfg: args, checkpoint } => {
            let cfg = args.resolve()?;
            commands::inspect(&cfg, &checkpoint, &args.out)?;
        }
        Command::Export { inputs, out } => {
            let file = std::fs::File::create(&out).map_err(|source| CliError::Io { path: out.display().to_string(), source })?;
            let points = export::export(&inputs, file)?;
            println!("wrote {} points to {}", points.len(), out.display());
        }
    }
    Ok(())
}

fn print_final(points: &[export::CurvePoint]) {
    if let Some(p) = points.last() {
        println!("{}: mean return {:.3} at {} timesteps over {} tasks", p.label, p.mean_return, p.timesteps, p.seeds);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
