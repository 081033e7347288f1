use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DensityMode, EnvKind, HarnessError, RunConfig};
use crate::env::{FlockEnv, MultiAgentEnv, TagEnv, TagParams};
use crate::geometry::WorldSpec;
use crate::ppo::{uniform_actions, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub env: String,
    pub n: usize,
    pub steps: usize,
    pub env_steps_per_sec: f64,
    /// Mean wall time of a full training step; empty when not measured.
    pub train_step_ms: Option<f64>,
    pub density_mode: String,
}

/// Times pure environment stepping (and optionally training steps) for
/// each agent count in `cfg.bench_counts`, writing `benchmark.csv` to `out`.
pub fn run_benchmark(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<BenchmarkRow>, HarnessError> {
    if cfg.environment == EnvKind::Opinion {
        return Err(HarnessError::invalid("environment", "benchmarks cover flock and tag"));
    }
    if cfg.bench_counts.is_empty() || cfg.bench_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::invalid(
            "bench_counts",
            "must be a non-empty strictly ascending list",
        ));
    }
    if cfg.bench_steps == 0 {
        return Err(HarnessError::invalid("bench_steps", "must be positive"));
    }
    if cfg.bench_train_steps > 0 {
        cfg.ppo().validate()?;
    }
    cfg.validate_env()?;
    let mut rows = Vec::with_capacity(cfg.bench_counts.len());
    for &n in &cfg.bench_counts {
        rows.push(match cfg.environment {
            EnvKind::Flock => {
                let mut p = cfg.flock_params();
                p.world = scaled_world(cfg, p.n, n);
                p.n = n;
                bench_one(FlockEnv::reset(p, cfg.seed)?, cfg, n)?
            }
            _ => {
                let base = cfg.tag_params();
                let mut p = TagParams {
                    world: scaled_world(cfg, base.n(), n),
                    ..base
                };
                let split = TagParams::with_total(n);
                p.n_runners = split.n_runners;
                p.n_chasers = split.n_chasers;
                bench_one(TagEnv::reset(p, cfg.seed)?, cfg, n)?
            }
        });
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(super::io_err(dir))?;
        super::write_csv(&dir.join("benchmark.csv"), &rows)?;
    }
    Ok(rows)
}

/// The configured world, or for fixed density one whose area scales by
/// `n / reference_n`.
fn scaled_world(cfg: &RunConfig, reference_n: usize, n: usize) -> WorldSpec {
    match cfg.density_mode {
        DensityMode::FixedWorld => cfg.world(),
        DensityMode::FixedDensity => {
            let k = (n as f32 / reference_n as f32).sqrt();
            WorldSpec::new(cfg.world_width * k, cfg.world_height * k)
        }
    }
}

fn bench_one<E: MultiAgentEnv + Clone>(env: E, cfg: &RunConfig, n: usize) -> Result<BenchmarkRow, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let actions: Vec<Vec<f32>> = (0..cfg.bench_steps)
        .map(|_| {
            let mut full = vec![0.0; n * 2];
            for g in env.groups() {
                let a = uniform_actions(g.agents.len(), &g.bounds, &mut rng);
                for (row, &i) in a.rows().into_iter().zip(&g.agents) {
                    full[2 * i] = row[0];
                    full[2 * i + 1] = row[1];
                }
            }
            full
        })
        .collect();

    let mut stepped = env.clone();
    let started = Instant::now();
    for a in &actions {
        stepped.step(a)?;
    }
    let secs = started.elapsed().as_secs_f64();

    let train_step_ms = if cfg.bench_train_steps > 0 {
        let mut trainer = Trainer::new(env, cfg.ppo())?;
        let mut total = 0.0;
        for _ in 0..cfg.bench_train_steps {
            let rows = trainer.train_step()?;
            total += rows[0].wall_ms_env + rows[0].wall_ms_update;
        }
        Some(total / cfg.bench_train_steps as f64)
    } else {
        None
    };
    Ok(BenchmarkRow {
        env: cfg.environment.name().into(),
        n,
        steps: cfg.bench_steps,
        env_steps_per_sec: cfg.bench_steps as f64 / secs.max(1e-12),
        train_step_ms,
        density_mode: cfg.density_mode.name().into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::read_csv;

    fn cfg(extra: &[&str]) -> RunConfig {
        let mut o: Vec<String> = ["bench_counts=[100]", "bench_steps=3", "bench_train_steps=0"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        o.extend(extra.iter().map(|s| s.to_string()));
        RunConfig::from_json("{}", &o).unwrap()
    }

    #[test]
    fn single_point_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let rows = run_benchmark(&cfg(&[]), Some(dir.path())).unwrap();
        assert_eq!(rows.len(), 1);
        let text = std::fs::read_to_string(dir.path().join("benchmark.csv")).unwrap();
        assert!(text.starts_with("env,n,steps,env_steps_per_sec,train_step_ms,density_mode\n"));
        assert_eq!(
            read_csv::<BenchmarkRow>(&dir.path().join("benchmark.csv")).unwrap(),
            rows
        );
    }

    #[test]
    fn fixed_density_scales_world() {
        let c = cfg(&["density_mode=fixed-density"]);
        let w = scaled_world(&c, 512, 2048);
        assert_eq!(w.width, 200.0);
    }

    #[test]
    fn tag_uses_tenth_chasers() {
        let rows = run_benchmark(&cfg(&["environment=tag", "bench_counts=[200]"]), None).unwrap();
        assert_eq!(rows[0].n, 200);
        assert_eq!(TagParams::with_total(200).n_chasers, 20);
    }

    #[test]
    fn descending_counts_rejected() {
        assert!(matches!(
            run_benchmark(&cfg(&["bench_counts=[200,100]"]), None),
            Err(HarnessError::Invalid { .. })
        ));
    }
}
