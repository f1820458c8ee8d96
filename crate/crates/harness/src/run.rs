//! Training runs, greedy evaluation and cross-seed aggregation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use gdq_core::env::nav::NavWorld;
use gdq_core::env::particle::{ParticleConfig, ParticleWorld};
use gdq_core::env::{EnvStep, MultiAgentEnv};
use gdq_core::rng::{seeded, stream};
use gdq_core::train::{build_learner, evaluate_episode, train_epoch, EpochMetrics, RunRngs, TrainState};

use crate::checkpoint;
use crate::config::{EnvKind, RunConfig};
use crate::metrics::{self, io_err, mean_std, MetricsWriter, Provenance, SCHEMA_VERSION, SUMMARY_METRICS};
use crate::scene::{load_scene, SceneFile};
use crate::HarnessError;

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_DIR: &str = "checkpoint";

/// Builds the environment a config describes. `seed` drives landmark
/// placement (particle) or the goal streams (navigation).
pub fn build_env(
    config: &RunConfig,
    scene: Option<&SceneFile>,
    seed: u64,
) -> Result<Box<dyn MultiAgentEnv>, HarnessError> {
    let n = config.n_agents();
    Ok(match config.env.kind {
        EnvKind::Particle => {
            let pc = ParticleConfig {
                n_agents: n,
                n_landmarks: n,
                ..ParticleConfig::default()
            };
            Box::new(ParticleWorld::new(pc, seeded(seed, stream::ENV))?)
        }
        EnvKind::Nav => {
            let scene = scene.ok_or_else(|| HarnessError::Config("env.scene: required for navigation".into()))?;
            Box::new(NavWorld::new(config.nav(), scene.to_scene(), seed)?)
        }
    })
}

fn provenance(config: &RunConfig, hash: &str) -> Provenance {
    Provenance {
        schema: SCHEMA_VERSION,
        config_hash: hash.to_string(),
        seed: config.seed,
        algorithm: config.algorithm().name().to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics_path: PathBuf,
    pub config_hash: String,
    pub metrics: Vec<EpochMetrics>,
}

pub fn run_experiment(config: &RunConfig, out: &Path) -> Result<RunOutcome, HarnessError> {
    run_experiment_with(config, out, |_| {})
}

/// Trains for `schedule.max_epochs` episodes, writing one metric row per
/// episode as it completes. On a training fault the rows written so far are
/// kept and no checkpoint is saved.
pub fn run_experiment_with(
    config: &RunConfig,
    out: &Path,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    let hash = config.hash()?;
    let scene = config.scene()?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let cfg_path = out.join(checkpoint::CONFIG_FILE);
    std::fs::write(&cfg_path, config.to_toml()).map_err(io_err(&cfg_path))?;

    let mut env = build_env(config, scene.as_ref(), config.seed)?;
    let mut init = seeded(config.seed, stream::INIT);
    let spec = env.action_spec().clone();
    let mut learner = build_learner(
        config.algorithm(),
        &config.learner(),
        config.n_agents(),
        env.obs_dim(),
        &spec,
        &mut init,
    )?;
    let schedule = config.schedule();
    schedule.validate()?;

    let prov = provenance(config, &hash);
    let metrics_path = out.join(METRICS_FILE);
    let mut writer = MetricsWriter::create(&metrics_path, &prov)?;
    let timing_path = out.join(TIMING_FILE);
    let mut timing = BufWriter::new(File::create(&timing_path).map_err(io_err(&timing_path))?);
    metrics::write_preamble(&mut timing, &prov).map_err(io_err(&timing_path))?;
    writeln!(timing, "epoch,wall_time").map_err(io_err(&timing_path))?;

    let mut state = TrainState::default();
    let mut rngs = RunRngs::new(config.seed);
    let mut all = Vec::with_capacity(schedule.max_epochs as usize);
    for _ in 0..schedule.max_epochs {
        let start = Instant::now();
        let m = match train_epoch(learner.as_mut(), env.as_mut(), &schedule, &mut state, &mut rngs) {
            Ok(m) => m,
            Err(e) => {
                timing.flush().map_err(io_err(&timing_path))?;
                return Err(HarnessError::Training(format!("epoch {}: {e}", state.epochs)));
            }
        };
        writer.write(&m)?;
        writeln!(timing, "{},{}", m.epoch, start.elapsed().as_secs_f64()).map_err(io_err(&timing_path))?;
        on_epoch(&m);
        all.push(m);
    }
    timing.flush().map_err(io_err(&timing_path))?;
    if config.output.checkpoint {
        checkpoint::save(&out.join(CHECKPOINT_DIR), config, learner.as_ref())?;
    }
    Ok(RunOutcome {
        metrics_path,
        config_hash: hash,
        metrics: all,
    })
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub checkpoint_dir: PathBuf,
    /// Navigation scene; the training scene when `None`.
    pub scene: Option<PathBuf>,
    pub episodes: usize,
    /// Seed of the goal streams (navigation) or landmark layouts (particle).
    /// Runs that share it see the same goal candidates.
    pub goal_seed: u64,
    /// Directory receiving `episodes.csv` and `summary.csv`.
    pub out: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
}

/// One greedy evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub episode: usize,
    pub reward: f64,
    pub steps: f64,
    /// Percentage of robots that collided at least once, in `[0, 100]`.
    pub collision_pct: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub algorithm: String,
    pub config_hash: String,
    pub episodes: Vec<EvalEpisode>,
    /// `(name, mean, population std)` for reward, steps, collision % and
    /// success rate.
    pub stats: Vec<(&'static str, f64, f64)>,
}

impl EvalSummary {
    pub fn stat(&self, name: &str) -> Option<(f64, f64)> {
        self.stats.iter().find(|s| s.0 == name).map(|s| (s.1, s.2))
    }

    pub fn table(&self) -> String {
        let mut s = format!("algorithm={} episodes={}\n", self.algorithm, self.episodes.len());
        for (name, mean, std) in &self.stats {
            s.push_str(&format!("{name:<14} {mean:>12.4} +/- {std:.4}\n"));
        }
        s
    }
}

fn event_label(step: &EnvStep, i: usize) -> &'static str {
    let e = step.events[i];
    match (e.collided, e.reached_goal) {
        (true, _) => "collision",
        (false, true) => "goal",
        _ => "none",
    }
}

pub fn evaluate(opts: &EvalOptions) -> Result<EvalSummary, HarnessError> {
    if opts.episodes == 0 {
        return Err(HarnessError::Config("--episodes: must be >= 1".into()));
    }
    let ckpt = checkpoint::load(&opts.checkpoint_dir)?;
    let config = &ckpt.config;
    let scene = match (config.env.kind, &opts.scene) {
        (EnvKind::Particle, Some(_)) => {
            return Err(HarnessError::Config("--scene: particle checkpoints take no scene".into()))
        }
        (EnvKind::Particle, None) => None,
        (EnvKind::Nav, Some(p)) => Some(load_scene(p)?),
        (EnvKind::Nav, None) => config.scene()?,
    };
    if let Some(s) = &scene {
        s.to_scene().validate(config.n_agents(), config.nav().robot_radius)?;
    }
    let mut env = build_env(config, scene.as_ref(), opts.goal_seed)?;
    let hash = config.hash()?;
    let policies: Vec<_> = ckpt.policies.iter().collect();
    let n = policies.len();
    if policies.iter().any(|p| p.in_dim() != env.obs_dim() || p.branch_sizes() != env.action_spec().sizes()) {
        return Err(HarnessError::Config("checkpoint networks do not match the environment".into()));
    }

    let mut traj = match &opts.trajectory {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(io_err(p))?);
            metrics::write_preamble(&mut w, &provenance(config, &hash)).map_err(io_err(p))?;
            writeln!(w, "episode,step,robot,x,y,heading,action,reward,event").map_err(io_err(p))?;
            Some((p.clone(), w))
        }
        None => None,
    };

    let mut episodes = Vec::with_capacity(opts.episodes);
    for ep in 0..opts.episodes {
        let mut io_result = Ok(());
        let m = evaluate_episode(&policies, env.as_mut(), config.max_episode_steps(), ep as u64, |t, actions, step| {
            let Some((_, w)) = traj.as_mut() else { return };
            for i in 0..n {
                let [x, y, h] = step.poses[i];
                let action: Vec<String> = actions[i].iter().map(|a| a.to_string()).collect();
                let r = writeln!(
                    w,
                    "{ep},{t},{i},{x},{y},{h},{},{},{}",
                    action.join(":"),
                    step.rewards[i],
                    event_label(step, i)
                );
                if io_result.is_ok() {
                    io_result = r;
                }
            }
        })?;
        if let Some((p, _)) = &traj {
            io_result.map_err(io_err(p))?;
        }
        episodes.push(EvalEpisode {
            episode: ep,
            reward: m.avg_reward,
            steps: m.avg_steps,
            collision_pct: 100.0 * m.collision_pct,
            success_rate: m.success_rate,
        });
    }
    if let Some((p, mut w)) = traj {
        w.flush().map_err(io_err(&p))?;
    }

    let col = |f: fn(&EvalEpisode) -> f64| episodes.iter().map(f).collect::<Vec<_>>();
    let stats = [
        ("reward", col(|e| e.reward)),
        ("steps", col(|e| e.steps)),
        ("collision_pct", col(|e| e.collision_pct)),
        ("success_rate", col(|e| e.success_rate)),
    ]
    .into_iter()
    .map(|(name, xs)| {
        let (m, s) = mean_std(&xs);
        (name, m, s)
    })
    .collect();
    let summary = EvalSummary {
        algorithm: config.algorithm().name().to_string(),
        config_hash: hash,
        episodes,
        stats,
    };
    if let Some(dir) = &opts.out {
        write_eval(dir, config, &summary)?;
    }
    Ok(summary)
}

fn write_eval(dir: &Path, config: &RunConfig, summary: &EvalSummary) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let prov = provenance(config, &summary.config_hash);
    let path = dir.join("episodes.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    let mut body = || -> std::io::Result<()> {
        metrics::write_preamble(&mut w, &prov)?;
        writeln!(w, "episode,reward,steps,collision_pct,success_rate")?;
        for e in &summary.episodes {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.episode, e.reward, e.steps, e.collision_pct, e.success_rate
            )?;
        }
        w.flush()
    };
    body().map_err(io_err(&path))?;

    let path = dir.join("summary.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    let mut body = || -> std::io::Result<()> {
        metrics::write_preamble(&mut w, &prov)?;
        writeln!(w, "metric,mean,std")?;
        for (name, mean, std) in &summary.stats {
            writeln!(w, "{name},{mean},{std}")?;
        }
        w.flush()
    };
    body().map_err(io_err(&path))
}

/// Metric files under `dir`: `dir/*.csv` and `dir/*/metrics.csv`, sorted.
pub fn find_metric_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let p = entry.map_err(io_err(dir))?.path();
        if p.is_dir() {
            let m = p.join(METRICS_FILE);
            if m.is_file() {
                files.push(m);
            }
        } else if p.extension().is_some_and(|e| e == "csv") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Per-epoch mean and std across seeds of every summary metric, plus the
/// trailing moving average of the mean over `window` epochs.
pub fn aggregate(files: &[PathBuf], out: &Path, window: usize) -> Result<(), HarnessError> {
    let Some(first) = files.first() else {
        return Err(HarnessError::Config("aggregate: no metric files".into()));
    };
    let runs = files
        .iter()
        .map(|p| metrics::read_metrics(p))
        .collect::<Result<Vec<_>, _>>()?;
    let base = &runs[0];
    let epochs = base
        .column("epoch")
        .ok_or_else(|| HarnessError::Config(format!("{}: no epoch column", first.display())))?;
    for (p, r) in files.iter().zip(&runs) {
        if r.provenance.schema != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "{}: schema {} (expected {SCHEMA_VERSION})",
                p.display(),
                r.provenance.schema
            )));
        }
        if r.provenance.config_hash != base.provenance.config_hash {
            return Err(HarnessError::Config(format!(
                "{}: config hash {} differs from {}",
                p.display(),
                r.provenance.config_hash,
                base.provenance.config_hash
            )));
        }
        if r.column("epoch").as_ref() != Some(&epochs) {
            return Err(HarnessError::Config(format!("{}: epoch grid differs", p.display())));
        }
    }

    let mut header = vec!["epoch".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for name in SUMMARY_METRICS {
        let series = runs
            .iter()
            .map(|r| r.column(name))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| HarnessError::Config(format!("aggregate: missing column {name}")))?;
        let (means, stds): (Vec<f64>, Vec<f64>) = (0..epochs.len())
            .map(|t| mean_std(&series.iter().map(|s| s[t]).collect::<Vec<_>>()))
            .unzip();
        let smoothed = metrics::smooth(&means, window);
        header.extend([format!("{name}_mean"), format!("{name}_std"), format!("{name}_smoothed")]);
        columns.extend([means, stds, smoothed]);
    }

    let mut w = BufWriter::new(File::create(out).map_err(io_err(out))?);
    let mut body = || -> std::io::Result<()> {
        let seeds: Vec<String> = runs.iter().map(|r| r.provenance.seed.to_string()).collect();
        writeln!(w, "# schema={SCHEMA_VERSION}")?;
        writeln!(w, "# config_hash={}", base.provenance.config_hash)?;
        writeln!(w, "# seeds={}", seeds.join(" "))?;
        writeln!(w, "# algorithm={}", base.provenance.algorithm)?;
        writeln!(w, "# smoothing_window={window}")?;
        writeln!(w, "{}", header.join(","))?;
        for (t, e) in epochs.iter().enumerate() {
            let mut row = vec![e.to_string()];
            row.extend(columns.iter().map(|c| c[t].to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()
    };
    body().map_err(io_err(out))
}
