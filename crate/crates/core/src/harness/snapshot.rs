use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb, RgbImage};

use super::records::{write_view_csv, ViewRow};
use super::{io_err, EnvKind, HarnessError, RunConfig};
use crate::env::snapshot::SnapshotRow;
use crate::env::{FlockEnv, MultiAgentEnv, TagEnv};
use crate::geometry::WorldSpec;
use crate::ppo::{ActorCritic, Checkpoint, Learner};

#[derive(Debug, Clone)]
pub struct SnapshotSummary {
    pub positions_path: PathBuf,
    pub views_path: PathBuf,
    pub position_rows: usize,
    pub view_rows: usize,
    pub images: Vec<PathBuf>,
}

/// Rolls out mean actions for `cfg.snapshot_steps` steps and writes
/// `positions.csv` and `view_agent<k>.csv`. With no checkpoints every policy
/// is the all-zero network.
pub fn run_snapshot(cfg: &RunConfig, checkpoints: &[PathBuf], out: &Path) -> Result<SnapshotSummary, HarnessError> {
    cfg.validate_env()?;
    match cfg.environment {
        EnvKind::Flock => snapshot_env(FlockEnv::reset(cfg.flock_params(), cfg.seed)?, cfg, checkpoints, out),
        EnvKind::Tag => snapshot_env(TagEnv::reset(cfg.tag_params(), cfg.seed)?, cfg, checkpoints, out),
        EnvKind::Opinion => Err(HarnessError::invalid("environment", "snapshots cover flock and tag")),
    }
}

fn load_learners<E: MultiAgentEnv>(env: &E, cfg: &RunConfig, paths: &[PathBuf]) -> Result<Vec<Learner>, HarnessError> {
    let loaded = paths
        .iter()
        .map(|p| Checkpoint::load(p).map_err(|e| HarnessError::invalid("checkpoint", e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let ppo = cfg.ppo();
    env.groups()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let net = if loaded.is_empty() {
                ActorCritic::zeros(env.obs_dim(), env.action_dim(), cfg.hidden)
            } else {
                let ck = loaded.iter().find(|c| c.policy == g.name).ok_or_else(|| {
                    HarnessError::invalid("checkpoint", format!("no checkpoint for policy `{}`", g.name))
                })?;
                if ck.obs_dim != env.obs_dim() || ck.action_dim != env.action_dim() {
                    return Err(HarnessError::invalid(
                        "checkpoint",
                        format!(
                            "policy `{}` maps {} -> {}, environment needs {} -> {}",
                            g.name,
                            ck.obs_dim,
                            ck.action_dim,
                            env.obs_dim(),
                            env.action_dim()
                        ),
                    ));
                }
                ck.policy_network()
                    .map_err(|e| HarnessError::invalid("checkpoint", e.to_string()))?
            };
            Ok(Learner::with_policy(g, k, net, &ppo))
        })
        .collect()
}

fn snapshot_env<E: MultiAgentEnv>(
    mut env: E,
    cfg: &RunConfig,
    checkpoints: &[PathBuf],
    out: &Path,
) -> Result<SnapshotSummary, HarnessError> {
    let n = env.num_agents();
    if cfg.snapshot_agent >= n {
        return Err(HarnessError::invalid(
            "snapshot_agent",
            format!("agent {} does not exist ({n} agents)", cfg.snapshot_agent),
        ));
    }
    let mut learners = load_learners(&env, cfg, checkpoints)?;
    let obs_dim = env.obs_dim();
    let mut positions: Vec<SnapshotRow> = Vec::with_capacity(n * cfg.snapshot_steps);
    let mut views = Vec::with_capacity(cfg.snapshot_steps);
    let mut actions = vec![0.0f32; n * 2];
    for k in 1..=cfg.snapshot_steps as u64 {
        for l in &mut learners {
            let obs = l.gather_observations(&env.output().observations, obs_dim);
            let a = l.act(&obs, true)?;
            for (row, &i) in a.rows().into_iter().zip(&l.agents) {
                actions[2 * i] = row[0];
                actions[2 * i + 1] = row[1];
            }
        }
        env.step(&actions)?;
        positions.extend(env.snapshot(k));
        views.push(ViewRow {
            step: k,
            values: env.views().row(cfg.snapshot_agent).to_vec(),
        });
    }
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let positions_path = out.join("positions.csv");
    super::write_csv(&positions_path, &positions)?;
    let views_path = out.join(format!("view_agent{}.csv", cfg.snapshot_agent));
    write_view_csv(&views_path, &views)?;

    let mut images = Vec::new();
    if cfg.render {
        let last = positions.len().saturating_sub(n);
        let path = out.join("positions.png");
        render_scatter(&positions[last..], &cfg.world(), &path)?;
        images.push(path);
        let path = out.join(format!("view_agent{}.png", cfg.snapshot_agent));
        render_views(&views, &path)?;
        images.push(path);
    }
    Ok(SnapshotSummary {
        positions_path,
        views_path,
        position_rows: positions.len(),
        view_rows: views.len(),
        images,
    })
}

fn image_err(path: &Path, e: image::ImageError) -> HarnessError {
    HarnessError::Runtime(format!("{}: {e}", path.display()))
}

/// Agents as small dots: boids black, runners blue, chasers red.
fn render_scatter(rows: &[SnapshotRow], world: &WorldSpec, path: &Path) -> Result<(), HarnessError> {
    const SIZE: u32 = 600;
    let mut img = RgbImage::from_pixel(SIZE, SIZE, Rgb([255, 255, 255]));
    let scale = (SIZE - 1) as f32 / world.width.max(world.height);
    for r in rows {
        let color = match r.kind.as_str() {
            "chaser" => Rgb([200, 30, 30]),
            "runner" => Rgb([30, 60, 200]),
            _ => Rgb([0, 0, 0]),
        };
        let (cx, cy) = ((r.x * scale) as i64, ((world.height - r.y) * scale) as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let (x, y) = (cx + dx, cy + dy);
                if (0..SIZE as i64).contains(&x) && (0..SIZE as i64).contains(&y) {
                    img.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    }
    img.save(path).map_err(|e| image_err(path, e))
}

/// One row per step, one column per sector; darker is closer.
fn render_views(rows: &[ViewRow], path: &Path) -> Result<(), HarnessError> {
    const CELL: u32 = 4;
    let w = rows.first().map_or(1, |r| r.values.len().max(1)) as u32;
    let h = rows.len().max(1) as u32;
    let img = ImageBuffer::from_fn(w * CELL, h * CELL, |x, y| {
        let v = rows
            .get((y / CELL) as usize)
            .and_then(|r| r.values.get((x / CELL) as usize))
            .copied()
            .unwrap_or(1.0);
        Luma([(v.clamp(0.0, 1.0) * 255.0) as u8])
    });
    img.save(path).map_err(|e| image_err(path, e))
}
