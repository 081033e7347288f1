//! Sector-based local views.
//!
//! An agent's field of view is split into `sectors` equal wedges centred on
//! its heading. One ray per wedge centre is cast against every neighbor,
//! modelled as a disc of the body radius; the wedge reads the nearest hit
//! distance divided by the view range, or 1.0 when nothing is hit in range.
//! Neighbors can be routed to separate colour channels by type tag.

use std::f32::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{AgentStore, EngineError, SpatialGrid};
use crate::geometry::{wrap_to_pi, Vec2};

/// Angular slack when pruning sectors a disc cannot reach.
const PRUNE_MARGIN: f32 = 1e-2;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("invalid view configuration: {0}")]
    Config(String),
    #[error("type tag {tag} of agent {agent} has no channel mapping")]
    UnmappedTag { agent: usize, tag: u8 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    /// Number of sectors per channel.
    pub sectors: usize,
    /// Total angular width of the field of view, radians.
    pub fov: f32,
    /// Visual range.
    pub range: f32,
    pub channels: usize,
    /// Radius of the disc each agent presents to others.
    pub body_radius: f32,
}

impl ViewConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        let bad = |m: String| Err(PerceptionError::Config(m));
        if self.sectors == 0 {
            return bad("sectors must be positive".into());
        }
        if !(self.fov > 0.0 && self.fov <= TAU) {
            return bad(format!("fov must lie in (0, 2pi], got {}", self.fov));
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return bad(format!("range must be positive, got {}", self.range));
        }
        if self.channels == 0 {
            return bad("channels must be at least 1".into());
        }
        if !(self.body_radius.is_finite() && self.body_radius > 0.0) {
            return bad(format!("body_radius must be positive, got {}", self.body_radius));
        }
        Ok(())
    }

    /// Farthest centre distance at which a neighbor can still be hit in range.
    pub fn query_radius(&self) -> f32 {
        self.range + self.body_radius
    }

    /// Width of one sector, radians.
    #[inline]
    pub fn sector_width(&self) -> f32 {
        self.fov / self.sectors as f32
    }

    /// Angle of sector `k`'s ray relative to the heading.
    #[inline]
    pub fn relative_angle(&self, k: usize) -> f32 {
        (k as f32 + 0.5) * self.sector_width() - 0.5 * self.fov
    }

    pub fn row_len(&self) -> usize {
        self.sectors * self.channels
    }
}

/// Unit ray directions for every sector, ordered from `heading - fov/2`
/// towards `heading + fov/2`.
pub fn sector_directions(heading: f32, cfg: &ViewConfig) -> Vec<Vec2> {
    (0..cfg.sectors)
        .map(|k| Vec2::from_angle(heading + cfg.relative_angle(k)))
        .collect()
}

/// Smallest `t >= 0` with `|origin + t * dir - center| = radius`.
///
/// Returns `Some(0.0)` when `origin` is inside the disc and `None` when the
/// ray misses it.
#[inline]
pub fn ray_disc_distance(origin: Vec2, dir: Vec2, center: Vec2, radius: f32) -> Option<f32> {
    let m = center - origin;
    let c = m.length_squared() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = m.dot(dir);
    if b <= 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    // c / (b + sqrt) is the near root without cancellation.
    Some(c / (b + disc.sqrt()))
}

/// Row-major `n x channels x sectors` array of normalized distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBuffer {
    n: usize,
    channels: usize,
    sectors: usize,
    values: Vec<f32>,
}

impl ViewBuffer {
    pub fn new(n: usize, cfg: &ViewConfig) -> Self {
        Self {
            n,
            channels: cfg.channels,
            sectors: cfg.sectors,
            values: vec![1.0; n * cfg.row_len()],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// All channels of agent `i`, concatenated.
    pub fn row(&self, i: usize) -> &[f32] {
        let w = self.channels * self.sectors;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn channel(&self, i: usize, c: usize) -> &[f32] {
        let start = (i * self.channels + c) * self.sectors;
        &self.values[start..start + self.sectors]
    }

    pub fn get(&self, i: usize, c: usize, k: usize) -> f32 {
        self.channel(i, c)[k]
    }
}

/// Builds every agent's view. `channel_of[tag]` routes neighbors to a channel.
pub fn compute_views<X: Copy + Send + Sync>(
    store: &AgentStore<X>,
    grid: &SpatialGrid,
    cfg: &ViewConfig,
    channel_of: &[usize],
) -> Result<ViewBuffer, PerceptionError> {
    let mut buf = ViewBuffer::new(store.len(), cfg);
    compute_views_into(store, grid, cfg, channel_of, &mut buf)?;
    Ok(buf)
}

/// As [`compute_views`], reusing `buf`.
pub fn compute_views_into<X: Copy + Send + Sync>(
    store: &AgentStore<X>,
    grid: &SpatialGrid,
    cfg: &ViewConfig,
    channel_of: &[usize],
    buf: &mut ViewBuffer,
) -> Result<(), PerceptionError> {
    cfg.validate()?;
    let n = store.len();
    if grid.len() != n {
        return Err(EngineError::LengthMismatch {
            what: "grid agents",
            expected: n,
            actual: grid.len(),
        }
        .into());
    }
    let radius = cfg.query_radius();
    if radius > grid.cell_size() {
        return Err(EngineError::Config(format!(
            "grid cell_size {} is smaller than the view query radius {radius}",
            grid.cell_size()
        ))
        .into());
    }
    for (agent, &tag) in store.tags().iter().enumerate() {
        match channel_of.get(tag as usize) {
            Some(&c) if c < cfg.channels => {}
            _ => return Err(PerceptionError::UnmappedTag { agent, tag }),
        }
    }
    if buf.n != n || buf.channels != cfg.channels || buf.sectors != cfg.sectors {
        *buf = ViewBuffer::new(n, cfg);
    }

    let rel: Vec<f32> = (0..cfg.sectors).map(|k| cfg.relative_angle(k)).collect();
    let positions = store.positions();
    let headings = store.headings();
    let tags = store.tags();
    let world = store.world();
    let row_len = cfg.row_len();

    buf.values
        .par_chunks_mut(row_len)
        .with_min_len(32)
        .enumerate()
        .for_each_init(
            || (Vec::new(), Vec::with_capacity(cfg.sectors)),
            |(neighbors, dirs), (i, row)| {
                row.fill(cfg.range);
                let heading = headings[i];
                dirs.clear();
                dirs.extend(rel.iter().map(|&a| Vec2::from_angle(heading + a)));
                grid.collect_neighbors(positions, world, i, radius, neighbors);
                for &(j, d, disp) in neighbors.iter() {
                    let c = channel_of[tags[j] as usize];
                    let out = &mut row[c * cfg.sectors..(c + 1) * cfg.sectors];
                    cast_disc(cfg, heading, dirs, disp, d, out);
                }
                for v in row.iter_mut() {
                    *v /= cfg.range;
                }
            },
        );
    Ok(())
}

/// Folds the hits of one disc at `disp` (centre distance `d`) into `out`.
#[inline]
fn cast_disc(cfg: &ViewConfig, heading: f32, dirs: &[Vec2], disp: Vec2, d: f32, out: &mut [f32]) {
    let r = cfg.body_radius;
    let mut hit = |k: usize| {
        if let Some(t) = ray_disc_distance(Vec2::ZERO, dirs[k], disp, r) {
            if t < out[k] {
                out[k] = t;
            }
        }
    };
    // Close discs subtend nearly a half-plane; test everything.
    if d <= 1.05 * r {
        (0..cfg.sectors).for_each(&mut hit);
        return;
    }
    let half_width = (r / d).asin() + PRUNE_MARGIN;
    if half_width >= FRAC_PI_2 {
        (0..cfg.sectors).for_each(&mut hit);
        return;
    }
    let bearing = wrap_to_pi(disp.y.atan2(disp.x) - heading);
    let width = cfg.sector_width();
    let last = cfg.sectors as f32 - 1.0;
    for shift in [-TAU, 0.0, TAU] {
        let lo = bearing + shift - half_width;
        let hi = bearing + shift + half_width;
        let k_lo = ((lo + 0.5 * cfg.fov) / width - 0.5).ceil().max(0.0);
        let k_hi = ((hi + 0.5 * cfg.fov) / width - 0.5).floor().min(last);
        if k_lo > k_hi {
            continue;
        }
        for k in k_lo as usize..=k_hi as usize {
            hit(k);
        }
    }
}
