use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flockrl_core::harness::{
    run_benchmark, run_snapshot, run_train, with_workers, HarnessError, RunConfig, OUTPUT_DIR_ENV,
};

#[derive(Parser)]
#[command(
    name = "flockrl",
    version,
    about = "Multi-agent PPO on large agent-based simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory. Defaults to the config value, then $FLOCKRL_OUTPUT_DIR, then ./flockrl-out.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override a config key, e.g. --set n=256. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvArg {
    Flock,
    Tag,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    FixedWorld,
    FixedDensity,
}

#[derive(Subcommand)]
enum Command {
    /// Train policies and write metrics, checkpoints and a run manifest.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Time environment and training steps over increasing agent counts.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        env: Option<EnvArg>,
        /// Comma-separated ascending agent counts.
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        /// Environment steps timed per count.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum)]
        density_mode: Option<DensityArg>,
        /// Training steps timed per count (0 skips training).
        #[arg(long)]
        train_steps: Option<usize>,
    },
    /// Roll out trained policies with mean actions and export positions and views.
    Snapshot {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file; repeat for multi-policy environments. Omit for zero policies.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        /// Agent whose view time series is exported.
        #[arg(long)]
        agent: Option<usize>,
        /// Also write PNG renderings.
        #[arg(long)]
        render: bool,
    },
    /// Check a configuration and print derived quantities.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self, mut extra: Vec<String>) -> Result<RunConfig, HarnessError> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(w) = self.workers {
            overrides.push(format!("workers={w}"));
        }
        overrides.append(&mut extra);
        RunConfig::load(self.config.as_deref(), &overrides)
    }

    fn output_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.output
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("flockrl-out"))
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { common } => {
            let cfg = common.load(Vec::new())?;
            let out = common.output_dir(&cfg);
            let summary = with_workers(cfg.workers, || run_train(&cfg, &out))?;
            println!("wrote {}", summary.output_dir.display());
        }
        Command::Benchmark {
            common,
            env,
            counts,
            steps,
            density_mode,
            train_steps,
        } => {
            let mut extra = Vec::new();
            if let Some(e) = env {
                extra.push(format!(
                    "environment={}",
                    if matches!(e, EnvArg::Tag) { "tag" } else { "flock" }
                ));
            }
            if !counts.is_empty() {
                let list: Vec<String> = counts.iter().map(ToString::to_string).collect();
                extra.push(format!("bench_counts=[{}]", list.join(",")));
            }
            if let Some(s) = steps {
                extra.push(format!("bench_steps={s}"));
            }
            if let Some(d) = density_mode {
                let name = match d {
                    DensityArg::FixedWorld => "fixed-world",
                    DensityArg::FixedDensity => "fixed-density",
                };
                extra.push(format!("density_mode={name}"));
            }
            if let Some(t) = train_steps {
                extra.push(format!("bench_train_steps={t}"));
            }
            let cfg = common.load(extra)?;
            let out = common.output_dir(&cfg);
            let rows = with_workers(cfg.workers, || run_benchmark(&cfg, Some(&out)))?;
            for r in rows {
                let train = r.train_step_ms.map_or("-".to_owned(), |ms| format!("{ms:.1}"));
                println!(
                    "{} n={} env_steps_per_sec={:.2} train_step_ms={train} ({})",
                    r.env, r.n, r.env_steps_per_sec, r.density_mode
                );
            }
        }
        Command::Snapshot {
            common,
            checkpoint,
            steps,
            agent,
            render,
        } => {
            let mut extra = Vec::new();
            if let Some(s) = steps {
                extra.push(format!("snapshot_steps={s}"));
            }
            if let Some(a) = agent {
                extra.push(format!("snapshot_agent={a}"));
            }
            if render {
                extra.push("render=true".into());
            }
            let cfg = common.load(extra)?;
            let out = common.output_dir(&cfg);
            let s = with_workers(cfg.workers, || run_snapshot(&cfg, &checkpoint, &out))?;
            println!("wrote {} and {}", s.positions_path.display(), s.views_path.display());
        }
        Command::Validate { common } => {
            let cfg = common.load(Vec::new())?;
            print!("{}", cfg.validate()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
