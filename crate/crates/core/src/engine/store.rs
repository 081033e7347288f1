use rayon::prelude::*;

use super::{first_fault, EdgeList, EngineError, InteractionResult, SpatialGrid};
use crate::geometry::{normalize_angle, Vec2, WorldSpec};

const MIN_AGENTS_PER_TASK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
struct Columns<X> {
    pos: Vec<Vec2>,
    heading: Vec<f32>,
    speed: Vec<f32>,
    extra: Vec<X>,
}

impl<X: Copy> Columns<X> {
    fn copy_from(&mut self, other: &Columns<X>) {
        self.pos.copy_from_slice(&other.pos);
        self.heading.copy_from_slice(&other.heading);
        self.speed.copy_from_slice(&other.speed);
        self.extra.copy_from_slice(&other.extra);
    }
}

/// Committed state of one agent.
#[derive(Debug, Clone, Copy)]
pub struct AgentRef<'a, X> {
    pub index: usize,
    pub pos: Vec2,
    pub heading: f32,
    pub speed: f32,
    pub tag: u8,
    pub extra: &'a X,
}

/// Pending (write-half) state of one agent.
#[derive(Debug)]
pub struct AgentMut<'a, X> {
    pub pos: &'a mut Vec2,
    pub heading: &'a mut f32,
    pub speed: &'a mut f32,
    pub extra: &'a mut X,
}

/// Structure-of-arrays agent state with a committed read half and a pending
/// write half. `X` carries model-specific per-agent attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStore<X = ()> {
    world: WorldSpec,
    tags: Vec<u8>,
    read: Columns<X>,
    write: Columns<X>,
}

impl<X: Copy + Send + Sync> AgentStore<X> {
    pub fn from_columns(
        world: WorldSpec,
        positions: Vec<Vec2>,
        headings: Vec<f32>,
        speeds: Vec<f32>,
        tags: Vec<u8>,
        extra: Vec<X>,
    ) -> Result<Self, EngineError> {
        if !world.is_valid() {
            return Err(EngineError::Config(format!(
                "world extent must be positive, got {} x {}",
                world.width, world.height
            )));
        }
        let n = positions.len();
        for (what, len) in [
            ("headings", headings.len()),
            ("speeds", speeds.len()),
            ("tags", tags.len()),
            ("extra", extra.len()),
        ] {
            if len != n {
                return Err(EngineError::LengthMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(i) = positions.iter().position(|&p| !world.contains(p)) {
            return Err(EngineError::OutOfBounds {
                agent: i,
                x: positions[i].x,
                y: positions[i].y,
            });
        }
        let read = Columns {
            pos: positions,
            heading: headings.into_iter().map(normalize_angle).collect(),
            speed: speeds,
            extra,
        };
        Ok(Self {
            world,
            tags,
            write: read.clone(),
            read,
        })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn world(&self) -> &WorldSpec {
        &self.world
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.read.pos
    }

    pub fn headings(&self) -> &[f32] {
        &self.read.heading
    }

    pub fn speeds(&self) -> &[f32] {
        &self.read.speed
    }

    pub fn tags(&self) -> &[u8] {
        &self.tags
    }

    pub fn extras(&self) -> &[X] {
        &self.read.extra
    }

    /// Pending write-half values; they only become visible after [`commit`].
    ///
    /// [`commit`]: AgentStore::commit
    pub fn pending_speeds(&self) -> &[f32] {
        &self.write.speed
    }

    pub fn pending_extras(&self) -> &[X] {
        &self.write.extra
    }

    #[inline]
    pub fn agent(&self, index: usize) -> AgentRef<'_, X> {
        AgentRef {
            index,
            pos: self.read.pos[index],
            heading: self.read.heading[index],
            speed: self.read.speed[index],
            tag: self.tags[index],
            extra: &self.read.extra[index],
        }
    }

    /// Runs `f` once per agent against its own pending record.
    pub fn apply_self<F>(&mut self, f: F) -> Result<(), EngineError>
    where
        F: Fn(AgentRef<'_, X>, AgentMut<'_, X>) -> InteractionResult + Sync,
    {
        let Self { read, write, tags, .. } = self;
        let read = &*read;
        let tags = &*tags;
        let fault = (
            write.pos.par_iter_mut(),
            write.heading.par_iter_mut(),
            write.speed.par_iter_mut(),
            write.extra.par_iter_mut(),
        )
            .into_par_iter()
            .with_min_len(MIN_AGENTS_PER_TASK)
            .enumerate()
            .filter_map(|(i, (pos, heading, speed, extra))| {
                let me = committed(read, tags, i);
                f(
                    me,
                    AgentMut {
                        pos,
                        heading,
                        speed,
                        extra,
                    },
                )
                .err()
                .map(|e| (i, e))
            })
            .min_by_key(|(i, _)| *i);
        first_fault(fault)
    }

    /// Runs `f(me, you, distance, displacement, acc)` for every ordered pair
    /// closer than `radius`. `acc` is `me`'s pending extra record; neighbors
    /// are visited in ascending index order.
    pub fn apply_pairs<F>(&mut self, grid: &SpatialGrid, radius: f32, f: F) -> Result<(), EngineError>
    where
        F: Fn(AgentRef<'_, X>, AgentRef<'_, X>, f32, Vec2, &mut X) -> InteractionResult + Sync,
    {
        grid.check_radius(radius)?;
        if grid.len() != self.len() {
            return Err(EngineError::LengthMismatch {
                what: "grid agents",
                expected: self.len(),
                actual: grid.len(),
            });
        }
        let Self {
            read,
            write,
            tags,
            world,
        } = self;
        let read = &*read;
        let tags = &*tags;
        let world = &*world;
        let fault = write
            .extra
            .par_iter_mut()
            .with_min_len(MIN_AGENTS_PER_TASK)
            .enumerate()
            .map_init(Vec::new, |scratch, (i, acc)| {
                grid.collect_neighbors(&read.pos, world, i, radius, scratch);
                let me = committed(read, tags, i);
                for &(j, d, disp) in scratch.iter() {
                    if let Err(e) = f(me, committed(read, tags, j), d, disp, acc) {
                        return Some((i, e));
                    }
                }
                None
            })
            .flatten()
            .min_by_key(|(i, _)| *i);
        first_fault(fault)
    }

    /// Runs `f(me, you, weight, acc)` once per edge `(me, you)`, folding
    /// into `me`'s pending extra record in edge order.
    pub fn apply_graph<F>(&mut self, edges: &EdgeList, f: F) -> Result<(), EngineError>
    where
        F: Fn(AgentRef<'_, X>, AgentRef<'_, X>, f64, &mut X) -> InteractionResult + Sync,
    {
        edges.check_agents(self.len())?;
        let Self { read, write, tags, .. } = self;
        let read = &*read;
        let tags = &*tags;
        let fault = write
            .extra
            .par_iter_mut()
            .with_min_len(MIN_AGENTS_PER_TASK)
            .enumerate()
            .filter_map(|(i, acc)| {
                let me = committed(read, tags, i);
                for &(dst, w) in edges.outgoing(i) {
                    if let Err(e) = f(me, committed(read, tags, dst as usize), w, acc) {
                        return Some((i, e));
                    }
                }
                None
            })
            .min_by_key(|(i, _)| *i);
        first_fault(fault)
    }

    /// Publishes the write half: positions are wrapped into the world and
    /// headings folded into `[0, 2pi)`. The write half then restarts as a
    /// copy of the new committed state.
    pub fn commit(&mut self) {
        let world = self.world;
        let Self { read, write, .. } = self;
        read.pos
            .par_iter_mut()
            .zip(write.pos.par_iter())
            .with_min_len(MIN_AGENTS_PER_TASK * 4)
            .for_each(|(r, &w)| *r = world.wrap(w));
        read.heading
            .par_iter_mut()
            .zip(write.heading.par_iter())
            .with_min_len(MIN_AGENTS_PER_TASK * 4)
            .for_each(|(r, &w)| *r = normalize_angle(w));
        read.speed.copy_from_slice(&write.speed);
        read.extra.copy_from_slice(&write.extra);
        write.copy_from(read);
    }
}

impl<X: Copy + Send + Sync + Default> AgentStore<X> {
    /// Store with default extra attributes.
    pub fn new(
        world: WorldSpec,
        positions: Vec<Vec2>,
        headings: Vec<f32>,
        speeds: Vec<f32>,
        tags: Vec<u8>,
    ) -> Result<Self, EngineError> {
        let n = positions.len();
        Self::from_columns(world, positions, headings, speeds, tags, vec![X::default(); n])
    }
}

#[inline]
fn committed<'a, X>(read: &'a Columns<X>, tags: &[u8], i: usize) -> AgentRef<'a, X> {
    AgentRef {
        index: i,
        pos: read.pos[i],
        heading: read.heading[i],
        speed: read.speed[i],
        tag: tags[i],
        extra: &read.extra[i],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::grid::SpatialGrid;
    use std::f32::consts::TAU;

    fn world() -> WorldSpec {
        WorldSpec::new(100.0, 100.0)
    }

    fn store_at<X: Copy + Send + Sync + Default>(pts: &[(f32, f32)]) -> AgentStore<X> {
        let n = pts.len();
        AgentStore::new(
            world(),
            pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect(),
            vec![0.0; n],
            vec![1.0; n],
            vec![0; n],
        )
        .unwrap()
    }

    #[test]
    fn identity_self_interaction_is_noop() {
        let mut s: AgentStore<f32> = store_at(&[(1.0, 2.0), (50.0, 60.0), (99.5, 0.0)]);
        let before = s.clone();
        s.apply_self(|_, _| Ok(())).unwrap();
        assert_eq!(s.pending_speeds(), s.speeds());
        s.commit();
        assert_eq!(s, before);
    }

    #[test]
    fn constant_self_interaction() {
        let mut s: AgentStore = store_at(&[(1.0, 2.0), (50.0, 60.0)]);
        s.apply_self(|_, w| {
            *w.speed = 0.0;
            Ok(())
        })
        .unwrap();
        assert!(s.pending_speeds().iter().all(|&v| v == 0.0));
        // Read half untouched until commit.
        assert!(s.speeds().iter().all(|&v| v == 1.0));
        s.commit();
        assert!(s.speeds().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn heading_accumulates_with_wrap() {
        let mut s: AgentStore = store_at(&[(1.0, 1.0)]);
        for _ in 0..63 {
            s.apply_self(|me, w| {
                *w.heading = me.heading + 0.1;
                Ok(())
            })
            .unwrap();
            s.commit();
        }
        // Scalar f32 loop with the same fold.
        let mut h = 0.0f32;
        for _ in 0..63 {
            h = normalize_angle(h + 0.1);
        }
        assert!((f64::from(s.headings()[0]) - f64::from(h)).abs() <= 1e-9);
        // 6.3 - 2pi in exact arithmetic.
        let exact = 6.3f64 - std::f64::consts::TAU;
        assert!((f64::from(s.headings()[0]) - exact).abs() < 1e-5);
    }

    #[test]
    fn commit_wraps_position_and_heading() {
        let mut s: AgentStore = store_at(&[(5.0, 5.0)]);
        s.apply_self(|_, w| {
            *w.pos = Vec2::new(101.0, 5.0);
            *w.heading = -0.1;
            Ok(())
        })
        .unwrap();
        s.commit();
        assert_eq!(s.positions()[0], Vec2::new(1.0, 5.0));
        assert!((s.headings()[0] - (TAU - 0.1)).abs() < 1e-6);
    }

    #[test]
    fn pair_count_is_symmetric_and_isolated_is_zero() {
        let mut s: AgentStore<u32> = store_at(&[(0.0, 0.0), (0.0, 5.0), (50.0, 50.0)]);
        let grid = SpatialGrid::build(s.positions(), s.world(), 10.0).unwrap();
        s.apply_pairs(&grid, 6.0, |_, _, _, _, acc| {
            *acc += 1;
            Ok(())
        })
        .unwrap();
        s.commit();
        assert_eq!(s.extras(), &[1, 1, 0]);
    }

    #[test]
    fn pair_swap_is_simultaneous() {
        let mut s: AgentStore<f32> = AgentStore::from_columns(
            world(),
            vec![Vec2::new(10.0, 10.0), Vec2::new(12.0, 10.0)],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0; 2],
            vec![3.0, 7.0],
        )
        .unwrap();
        let grid = SpatialGrid::build(s.positions(), s.world(), 5.0).unwrap();
        s.apply_pairs(&grid, 5.0, |_, you, _, _, acc| {
            *acc = *you.extra;
            Ok(())
        })
        .unwrap();
        s.commit();
        assert_eq!(s.extras(), &[7.0, 3.0]);
    }

    #[test]
    fn radius_larger_than_cell_is_rejected() {
        let mut s: AgentStore<u32> = store_at(&[(0.0, 0.0)]);
        let grid = SpatialGrid::build(s.positions(), s.world(), 10.0).unwrap();
        let err = s.apply_pairs(&grid, 11.0, |_, _, _, _, _| Ok(())).unwrap_err();
        assert!(matches!(err, EngineError::Config(_)));
    }

    #[test]
    fn callback_fault_names_lowest_agent() {
        let mut s: AgentStore = store_at(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]);
        let err = s
            .apply_self(|me, _| if me.index >= 2 { Err("boom".into()) } else { Ok(()) })
            .unwrap_err();
        assert_eq!(
            err,
            EngineError::Callback {
                agent: 2,
                message: "boom".into()
            }
        );
    }

    #[test]
    fn out_of_bounds_construction_names_agent() {
        let err = AgentStore::<()>::new(
            world(),
            vec![Vec2::new(1.0, 1.0), Vec2::new(100.0, 3.0)],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0; 2],
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::OutOfBounds { agent: 1, .. }));
    }

    #[test]
    fn graph_empty_and_single_edge() {
        let mut s: AgentStore<f64> = AgentStore::from_columns(
            world(),
            vec![Vec2::ZERO; 2],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0; 2],
            vec![0.25, 0.75],
        )
        .unwrap();
        let before = s.clone();
        s.apply_graph(&EdgeList::new(2, vec![]).unwrap(), |_, _, _, _| Ok(()))
            .unwrap();
        s.commit();
        assert_eq!(s, before);

        let edges = EdgeList::new(2, vec![(0, 1, 1.0)]).unwrap();
        s.apply_graph(&edges, |_, you, _, acc| {
            *acc = *you.extra;
            Ok(())
        })
        .unwrap();
        s.commit();
        assert_eq!(s.extras(), &[0.75, 0.75]);
    }

    #[test]
    fn graph_rejects_edges_for_wrong_population() {
        let mut s: AgentStore<f64> = store_at(&[(1.0, 1.0)]);
        let edges = EdgeList::new(3, vec![(0, 2, 1.0)]).unwrap();
        let err = s.apply_graph(&edges, |_, _, _, _| Ok(())).unwrap_err();
        assert!(matches!(err, EngineError::DanglingEdge { .. }));
    }
}
