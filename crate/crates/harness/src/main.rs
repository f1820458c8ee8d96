use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gdq_harness::run::{find_metric_files, run_experiment_with};
use gdq_harness::{aggregate, evaluate, EvalOptions, HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "gdq", version, about = "Train, evaluate and aggregate multi-agent Q-learning runs")]
struct Cli {
    /// Replace desk-scale budgets with the full-length settings.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed and write metrics, timings and a checkpoint to --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Print a progress line every this many epochs (0 = silent).
        #[arg(long, default_value_t = 0)]
        log_every: u64,
    },
    /// Run greedy episodes with trained policies.
    Eval {
        #[arg(long)]
        checkpoint_dir: PathBuf,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        goal_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Combine the metric files of several seeds.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Smoothing window in epochs; read from the runs' config when omitted.
        #[arg(long)]
        window: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            log_every,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if cli.paper_scale {
                cfg.apply_paper_scale();
                cfg.validate()?;
            }
            let outcome = run_experiment_with(&cfg, &out, |m| {
                if log_every > 0 && (m.epoch + 1) % log_every == 0 {
                    eprintln!(
                        "epoch {} success {:.3} reward {:.3} collisions {:.3} epsilon {:.3}",
                        m.epoch, m.success_rate, m.avg_reward, m.collision_pct, m.epsilon
                    );
                }
            })?;
            println!("{}", outcome.metrics_path.display());
            Ok(())
        }
        Command::Eval {
            checkpoint_dir,
            scene,
            episodes,
            goal_seed,
            out,
            trajectory,
        } => {
            let summary = evaluate(&EvalOptions {
                checkpoint_dir,
                scene,
                episodes,
                goal_seed,
                out,
                trajectory,
            })?;
            print!("{}", summary.table());
            Ok(())
        }
        Command::Aggregate { input, out, window } => {
            let files = find_metric_files(&input)?;
            let window = match window {
                Some(w) => w,
                None => window_from_runs(&files)?,
            };
            if window == 0 {
                return Err(HarnessError::Config("--window: must be >= 1".into()));
            }
            aggregate(&files, &out, window)
        }
    }
}

/// The smoothing window of the run config stored next to the first metric
/// file, or 100 when there is none.
fn window_from_runs(files: &[PathBuf]) -> Result<usize, HarnessError> {
    let cfg = files
        .first()
        .and_then(|f| f.parent())
        .map(|d| d.join("config.toml"))
        .filter(|p| p.is_file());
    match cfg {
        Some(p) => Ok(RunConfig::from_toml(&read(&p)?)?.output.smoothing_window),
        None => Ok(100),
    }
}

fn read(p: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(p).map_err(|source| HarnessError::Io {
        path: p.to_path_buf(),
        source,
    })
}
