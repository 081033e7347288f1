use super::EngineError;
use crate::geometry::{Vec2, WorldSpec};

/// Uniform-grid index over a toroidal world.
///
/// The lattice has `floor(extent / cell_size)` cells per axis (at least one),
/// so every cell is at least `cell_size` wide and a radius query no larger
/// than `cell_size` only needs the 3x3 stencil around the query cell. Cell
/// contents are stored CSR-style, each cell holding ascending agent indices.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    world: WorldSpec,
    cell_size: f32,
    nx: usize,
    ny: usize,
    cell_w: f32,
    cell_h: f32,
    starts: Vec<u32>,
    entries: Vec<u32>,
    agent_cell: Vec<u32>,
}

impl SpatialGrid {
    pub fn build(positions: &[Vec2], world: &WorldSpec, cell_size: f32) -> Result<Self, EngineError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(EngineError::Config(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        if !world.is_valid() {
            return Err(EngineError::Config("world extent must be positive".into()));
        }
        let nx = ((world.width / cell_size).floor() as usize).max(1);
        let ny = ((world.height / cell_size).floor() as usize).max(1);
        let cell_w = world.width / nx as f32;
        let cell_h = world.height / ny as f32;

        let mut agent_cell = Vec::with_capacity(positions.len());
        for (i, &p) in positions.iter().enumerate() {
            if !world.contains(p) {
                return Err(EngineError::OutOfBounds {
                    agent: i,
                    x: p.x,
                    y: p.y,
                });
            }
            let cx = ((p.x / cell_w) as usize).min(nx - 1);
            let cy = ((p.y / cell_h) as usize).min(ny - 1);
            agent_cell.push((cy * nx + cx) as u32);
        }

        // Counting sort; a stable pass over ascending i keeps each cell sorted.
        let mut starts = vec![0u32; nx * ny + 1];
        for &c in &agent_cell {
            starts[c as usize + 1] += 1;
        }
        for k in 1..starts.len() {
            starts[k] += starts[k - 1];
        }
        let mut fill = starts.clone();
        let mut entries = vec![0u32; positions.len()];
        for (i, &c) in agent_cell.iter().enumerate() {
            let slot = &mut fill[c as usize];
            entries[*slot as usize] = i as u32;
            *slot += 1;
        }

        Ok(Self {
            world: *world,
            cell_size,
            nx,
            ny,
            cell_w,
            cell_h,
            starts,
            entries,
            agent_cell,
        })
    }

    pub fn cell_size(&self) -> f32 {
        self.cell_size
    }

    pub fn world(&self) -> &WorldSpec {
        &self.world
    }

    /// Number of indexed agents.
    pub fn len(&self) -> usize {
        self.agent_cell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agent_cell.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Agents in cell `(cx, cy)`; coordinates wrap around the lattice.
    pub fn cell(&self, cx: i64, cy: i64) -> &[u32] {
        let cx = cx.rem_euclid(self.nx as i64) as usize;
        let cy = cy.rem_euclid(self.ny as i64) as usize;
        self.cell_slice(cy * self.nx + cx)
    }

    pub fn cell_of(&self, agent: usize) -> (i64, i64) {
        let c = self.agent_cell[agent] as usize;
        ((c % self.nx) as i64, (c / self.nx) as i64)
    }

    /// Non-empty cells as `((cx, cy), agents)`.
    pub fn occupied_cells(&self) -> impl Iterator<Item = ((i64, i64), &[u32])> + '_ {
        (0..self.nx * self.ny).filter_map(move |c| {
            let s = self.cell_slice(c);
            (!s.is_empty()).then(|| (((c % self.nx) as i64, (c / self.nx) as i64), s))
        })
    }

    #[inline]
    fn cell_slice(&self, c: usize) -> &[u32] {
        &self.entries[self.starts[c] as usize..self.starts[c + 1] as usize]
    }

    pub(crate) fn check_radius(&self, radius: f32) -> Result<(), EngineError> {
        if !(radius > 0.0 && radius <= self.cell_size) {
            return Err(EngineError::Config(format!(
                "query radius {radius} must lie in (0, cell_size = {}]",
                self.cell_size
            )));
        }
        Ok(())
    }

    /// Fills `out` with `(j, d_ij, displacement)` for every `j != i` closer
    /// than `radius`, ascending in `j`. Caller guarantees the radius bound.
    pub(crate) fn collect_neighbors(
        &self,
        positions: &[Vec2],
        world: &WorldSpec,
        i: usize,
        radius: f32,
        out: &mut Vec<(usize, f32, Vec2)>,
    ) {
        out.clear();
        let me = positions[i];
        let c = self.agent_cell[i] as usize;
        let (cx, cy) = (c % self.nx, c / self.nx);
        for row in stencil(cy, self.ny) {
            for col in stencil(cx, self.nx) {
                for &j in self.cell_slice(row * self.nx + col) {
                    let j = j as usize;
                    if j == i {
                        continue;
                    }
                    let disp = world.displacement(me, positions[j]);
                    let d = disp.length();
                    if d < radius {
                        out.push((j, d, disp));
                    }
                }
            }
        }
        out.sort_unstable_by_key(|&(j, _, _)| j);
    }

    /// Cell coordinate of an arbitrary in-world point.
    pub fn cell_of_point(&self, p: Vec2) -> (i64, i64) {
        let cx = ((p.x / self.cell_w) as usize).min(self.nx - 1);
        let cy = ((p.y / self.cell_h) as usize).min(self.ny - 1);
        (cx as i64, cy as i64)
    }
}

/// Distinct lattice coordinates within one step of `c` on a ring of `n`.
#[inline]
fn stencil(c: usize, n: usize) -> impl Iterator<Item = usize> {
    let (lo, len) = if n >= 3 { (c + n - 1, 3) } else { (0, n) };
    (0..len).map(move |k| (lo + k) % n)
}

/// Neighbors of agent `i` strictly closer than `radius`, ascending by index.
pub fn neighbors_within(
    grid: &SpatialGrid,
    positions: &[Vec2],
    i: usize,
    radius: f32,
) -> Result<Vec<(usize, f32, Vec2)>, EngineError> {
    grid.check_radius(radius)?;
    if positions.len() != grid.len() {
        return Err(EngineError::LengthMismatch {
            what: "positions",
            expected: grid.len(),
            actual: positions.len(),
        });
    }
    let mut out = Vec::new();
    grid.collect_neighbors(positions, &grid.world, i, radius, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w100() -> WorldSpec {
        WorldSpec::new(100.0, 100.0)
    }

    #[test]
    fn single_agent_cell() {
        let g = SpatialGrid::build(&[Vec2::new(0.0, 0.0)], &w100(), 10.0).unwrap();
        let cells: Vec<_> = g.occupied_cells().collect();
        assert_eq!(cells, vec![((0, 0), &[0u32][..])]);
    }

    #[test]
    fn cell_boundary_arithmetic() {
        let g = SpatialGrid::build(&[Vec2::new(1.0, 1.0), Vec2::new(11.0, 1.0)], &w100(), 10.0).unwrap();
        assert_eq!(g.cell(0, 0), &[0]);
        assert_eq!(g.cell(1, 0), &[1]);
        assert_eq!(g.cell_of(1), (1, 0));
        // Lattice wraps.
        assert_eq!(g.cell(11, 10), &[1]);
    }

    #[test]
    fn out_of_bounds_is_named() {
        let err = SpatialGrid::build(&[Vec2::new(1.0, 1.0), Vec2::new(-0.5, 1.0)], &w100(), 10.0).unwrap_err();
        assert!(matches!(err, EngineError::OutOfBounds { agent: 1, .. }));
    }

    #[test]
    fn non_positive_cell_size_rejected() {
        assert!(SpatialGrid::build(&[], &w100(), 0.0).is_err());
    }

    #[test]
    fn lone_agent_has_no_neighbors() {
        let pts = [Vec2::new(3.0, 4.0)];
        let g = SpatialGrid::build(&pts, &w100(), 10.0).unwrap();
        assert!(neighbors_within(&g, &pts, 0, 10.0).unwrap().is_empty());
    }

    #[test]
    fn direct_distance() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(0.0, 5.0)];
        let g = SpatialGrid::build(&pts, &w100(), 10.0).unwrap();
        let a = neighbors_within(&g, &pts, 0, 6.0).unwrap();
        let b = neighbors_within(&g, &pts, 1, 6.0).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!((a[0].0, a[0].1), (1, 5.0));
        assert_eq!((b[0].0, b[0].1), (0, 5.0));
    }

    #[test]
    fn neighbors_across_the_seam() {
        let pts = [Vec2::new(99.5, 0.5), Vec2::new(0.5, 99.5)];
        let g = SpatialGrid::build(&pts, &w100(), 10.0).unwrap();
        let a = neighbors_within(&g, &pts, 0, 2.0).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].2, Vec2::new(1.0, -1.0));
    }

    #[test]
    fn coarse_lattice_does_not_duplicate() {
        // Only two columns: the 3-wide stencil must not visit a cell twice.
        let w = WorldSpec::new(25.0, 25.0);
        let pts = [Vec2::new(1.0, 1.0), Vec2::new(12.5, 1.0), Vec2::new(24.0, 24.0)];
        let g = SpatialGrid::build(&pts, &w, 12.0).unwrap();
        assert_eq!(g.dims(), (2, 2));
        let a = neighbors_within(&g, &pts, 0, 12.0).unwrap();
        let idx: Vec<_> = a.iter().map(|t| t.0).collect();
        assert_eq!(idx, vec![1, 2]);
    }

    #[test]
    fn non_multiple_extent_still_covers_radius() {
        // 105 / 10 -> ten cells of width 10.5.
        let w = WorldSpec::new(105.0, 105.0);
        let pts = [Vec2::new(0.1, 50.0), Vec2::new(95.5, 50.0)];
        let g = SpatialGrid::build(&pts, &w, 10.0).unwrap();
        let a = neighbors_within(&g, &pts, 0, 10.0).unwrap();
        assert_eq!(a.len(), 1);
    }
}
