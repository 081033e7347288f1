use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::records::{MetricsRow, OpinionRow, TimingRow};
use super::{io_err, EnvKind, HarnessError, RunConfig};
use crate::engine::EdgeList;
use crate::env::snapshot::csv_writer;
use crate::env::{FlockEnv, MultiAgentEnv, OpinionModel, TagEnv};
use crate::ppo::{Checkpoint, Trainer};

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub output_dir: PathBuf,
    /// Deterministic metrics; empty for the opinion model.
    pub metrics: Vec<MetricsRow>,
    pub opinion: Vec<OpinionRow>,
    pub checkpoints: Vec<PathBuf>,
}

/// Trains (or, for the opinion model, simulates) and writes all run files
/// into `out`.
pub fn run_train(cfg: &RunConfig, out: &Path) -> Result<TrainSummary, HarnessError> {
    let derived = cfg.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut summary = match cfg.environment {
        EnvKind::Flock => train_env(FlockEnv::reset(cfg.flock_params(), cfg.seed)?, cfg, out)?,
        EnvKind::Tag => train_env(TagEnv::reset(cfg.tag_params(), cfg.seed)?, cfg, out)?,
        EnvKind::Opinion => run_opinion(cfg, out)?,
    };
    summary.output_dir = out.to_path_buf();
    let files: Vec<String> = summary
        .checkpoints
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "format": "flockrl-run/1",
        "version": env!("CARGO_PKG_VERSION"),
        "checkpoint_format": crate::ppo::CHECKPOINT_FORMAT,
        "environment": cfg.environment.name(),
        "seed": cfg.seed,
        "parameters_per_policy": derived.parameter_count,
        "checkpoints": files,
        "config": cfg,
    });
    let path = out.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(io_err(&path))?;
    Ok(summary)
}

fn train_env<E: MultiAgentEnv>(env: E, cfg: &RunConfig, out: &Path) -> Result<TrainSummary, HarnessError> {
    let mut trainer = Trainer::new(env, cfg.ppo())?;
    let metrics_path = out.join("metrics.csv");
    let timings_path = out.join("timings.csv");
    let mut metrics_w = csv_writer(BufWriter::new(
        File::create(&metrics_path).map_err(io_err(&metrics_path))?,
    ));
    let mut timings_w = csv_writer(BufWriter::new(
        File::create(&timings_path).map_err(io_err(&timings_path))?,
    ));
    let csv_fail = |p: &Path, e: csv::Error| HarnessError::Runtime(format!("{}: {e}", p.display()));

    let mut metrics = Vec::new();
    while trainer.training_step() < cfg.training_steps as u64 {
        let rows = trainer.train_step()?;
        let timing = TimingRow {
            training_step: rows[0].training_step,
            wall_ms_env: rows[0].wall_ms_env,
            wall_ms_update: rows[0].wall_ms_update,
        };
        timings_w.serialize(&timing).map_err(|e| csv_fail(&timings_path, e))?;
        for r in rows {
            let row = MetricsRow {
                training_step: r.training_step,
                policy: r.policy,
                mean_reward: r.mean_reward,
                policy_loss: r.policy_loss,
                value_loss: r.value_loss,
                entropy: r.entropy,
                clip_fraction: r.clip_fraction,
            };
            metrics_w.serialize(&row).map_err(|e| csv_fail(&metrics_path, e))?;
            metrics.push(row);
        }
        metrics_w.flush().map_err(io_err(&metrics_path))?;
        timings_w.flush().map_err(io_err(&timings_path))?;
    }

    let state = trainer.env().state();
    let mut checkpoints = Vec::new();
    for l in trainer.learners() {
        let path = out.join(format!("checkpoint_{}.json", l.name));
        Checkpoint::capture(l, trainer.config(), trainer.training_step(), Some(state.clone())).save(&path)?;
        checkpoints.push(path);
    }
    Ok(TrainSummary {
        output_dir: PathBuf::new(),
        metrics,
        opinion: Vec::new(),
        checkpoints,
    })
}

/// Bounded-confidence dynamics on a complete graph from uniform opinions.
pub(crate) fn opinion_model(cfg: &RunConfig) -> Result<OpinionModel, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opinions = (0..cfg.opinion_agents).map(|_| rng.random_range(0.0..=1.0)).collect();
    let edges = EdgeList::complete(cfg.opinion_agents, 1.0)
        .map_err(|e| HarnessError::invalid("opinion_agents", e.to_string()))?;
    Ok(OpinionModel::new(
        opinions,
        edges,
        cfg.opinion_threshold,
        cfg.opinion_strength,
    )?)
}

fn run_opinion(cfg: &RunConfig, out: &Path) -> Result<TrainSummary, HarnessError> {
    let mut model = opinion_model(cfg)?;
    let row = |step: u64, m: &OpinionModel| {
        let o = m.opinions();
        OpinionRow {
            step,
            spread: m.spread(),
            mean_opinion: o.iter().sum::<f64>() / o.len() as f64,
        }
    };
    let mut rows = vec![row(0, &model)];
    for k in 1..=cfg.opinion_steps {
        model.step()?;
        rows.push(row(k as u64, &model));
    }
    super::write_csv(&out.join("opinion.csv"), &rows)?;
    Ok(TrainSummary {
        output_dir: PathBuf::new(),
        metrics: Vec::new(),
        opinion: rows,
        checkpoints: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::read_csv;

    fn tiny(env: &str) -> RunConfig {
        let o: Vec<String> = [
            format!("environment={env}"),
            "n=16".into(),
            "n_runners=12".into(),
            "n_chasers=4".into(),
            "world_width=30".into(),
            "world_height=30".into(),
            "sectors=8".into(),
            "training_steps=2".into(),
            "rollout_steps=8".into(),
            "minibatch_size=32".into(),
            "hidden=8".into(),
            "opinion_agents=10".into(),
            "opinion_steps=5".into(),
        ]
        .into();
        RunConfig::from_json("{}", &o).unwrap()
    }

    #[test]
    fn flock_run_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_train(&tiny("flock"), dir.path()).unwrap();
        assert_eq!(s.metrics.len(), 2);
        assert_eq!(
            read_csv::<MetricsRow>(&dir.path().join("metrics.csv")).unwrap(),
            s.metrics
        );
        assert_eq!(read_csv::<TimingRow>(&dir.path().join("timings.csv")).unwrap().len(), 2);
        assert!(dir.path().join("checkpoint_flock.json").exists());
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn tag_run_writes_two_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_train(&tiny("tag"), dir.path()).unwrap();
        assert_eq!(s.checkpoints.len(), 2);
        assert!(dir.path().join("checkpoint_runner.json").exists());
        assert!(dir.path().join("checkpoint_chaser.json").exists());
    }

    #[test]
    fn opinion_run_shrinks_spread() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny("opinion");
        cfg.opinion_threshold = 1.0;
        let s = run_train(&cfg, dir.path()).unwrap();
        assert_eq!(s.opinion.len(), 6);
        assert!(s.opinion[5].spread < s.opinion[0].spread);
    }
}
