use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vortexswim::harness::{self, FieldsOptions, RunConfig};
use vortexswim::Error;

/// Swimmer-in-a-wake simulator and navigation trainer.
#[derive(Parser)]
#[command(name = "vortexswim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides run.out, the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver benchmarks; exit 1 if any fails.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Train an agent.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the newest checkpoint in the run directory.
        #[arg(long)]
        resume: bool,
    },
    /// Greedy rollouts from a sweep of start positions.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Start positions A:B:N; defaults to the configured start range, 11 points.
        #[arg(long)]
        sweep: Option<String>,
        /// Checkpoint file; defaults to the newest one of the run.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write field snapshots, or a warm-start wake with --spinup.
    Fields {
        #[command(flatten)]
        common: Common,
        /// Overrides run.snapshot_cadence.
        #[arg(long)]
        cadence: Option<u64>,
        /// Spin the bare wake up from rest and save its populations.
        #[arg(long)]
        spinup: bool,
        /// Policy driving the fish; without one it holds the zero action.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Head tip start x.
        #[arg(long)]
        start: Option<f64>,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) if !p.is_file() => return Err(Failure::Usage(format!("config file {} not found", p.display()))),
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.set("run.seed", &s.to_string())?;
    }
    if let Some(o) = &common.out {
        cfg.set("run.out", &o.to_string_lossy())?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    // re-parse so overrides get the same type checks as file values
    let source = std::mem::take(&mut cfg.source);
    let mut checked = RunConfig::parse(&cfg.resolved())?;
    checked.source = source;
    Ok(checked)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut log = |line: &str| eprintln!("{line}");
    match cli.command {
        Command::Validate { common } => {
            let cfg = load(&common)?;
            let checks = harness::cmd_validate(&cfg, &mut log)?;
            let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
            if !failed.is_empty() {
                let names: Vec<String> = failed.iter().map(|c| format!("{} ({})", c.test, c.metric)).collect();
                return Err(Failure::Run(format!("failed: {}", names.join(", "))));
            }
            println!("all {} checks passed", checks.len());
        }
        Command::Train { common, resume } => {
            let cfg = load(&common)?;
            let dir = harness::cmd_train(&cfg, resume, &mut log)?;
            println!("{}", dir.display());
        }
        Command::Eval { common, sweep, checkpoint } => {
            let cfg = load(&common)?;
            let starts = match sweep {
                Some(s) => harness::parse_sweep(&s)?,
                None => {
                    let env = cfg.env_config()?;
                    harness::parse_sweep(&format!("{}:{}:11", env.init_x[0], env.init_x[1]))?
                }
            };
            let records = harness::cmd_eval(&cfg, checkpoint.as_deref(), &starts, &mut log)?;
            println!("{} rollouts in {}", records.len(), cfg.out_dir().join("eval").display());
        }
        Command::Fields {
            common,
            cadence,
            spinup,
            checkpoint,
            start,
        } => {
            let mut cfg = load(&common)?;
            if let Some(k) = cadence {
                cfg.set("run.snapshot_cadence", &k.to_string())?;
            }
            let opts = FieldsOptions { checkpoint, spinup, start };
            let written = harness::cmd_fields(&cfg, &opts, &mut log)?;
            println!("{} snapshots in {}", written.len(), cfg.out_dir().join("fields").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
