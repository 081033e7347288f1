use std::f32::consts::TAU;

use flockrl_core::engine::{AgentStore, SpatialGrid};
use flockrl_core::perception::{compute_views, ray_disc_distance, ViewBuffer, ViewConfig};
use flockrl_core::{Vec2, WorldSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every ray against every other agent, no grid and no pruning.
fn brute_force(store: &AgentStore, cfg: &ViewConfig, channel_of: &[usize]) -> Vec<f32> {
    let n = store.len();
    let world = store.world();
    let mut out = vec![cfg.range; n * cfg.row_len()];
    for i in 0..n {
        let row = &mut out[i * cfg.row_len()..(i + 1) * cfg.row_len()];
        let heading = store.headings()[i];
        for j in (0..n).filter(|&j| j != i) {
            let disp = world.displacement(store.positions()[i], store.positions()[j]);
            let c = channel_of[store.tags()[j] as usize];
            for k in 0..cfg.sectors {
                let dir = Vec2::from_angle(heading + cfg.relative_angle(k));
                if let Some(t) = ray_disc_distance(Vec2::ZERO, dir, disp, cfg.body_radius) {
                    let slot = &mut row[c * cfg.sectors + k];
                    if t < *slot {
                        *slot = t;
                    }
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= cfg.range);
    out
}

fn views(store: &AgentStore, cfg: &ViewConfig, channel_of: &[usize]) -> ViewBuffer {
    let grid = SpatialGrid::build(store.positions(), store.world(), cfg.query_radius()).unwrap();
    compute_views(store, &grid, cfg, channel_of).unwrap()
}

fn random_store(rng: &mut ChaCha8Rng, n: usize, world: WorldSpec, types: u8) -> AgentStore {
    let positions = (0..n)
        .map(|_| Vec2::new(rng.random_range(0.0..world.width), rng.random_range(0.0..world.height)))
        .collect();
    let headings = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    let tags = (0..n).map(|_| rng.random_range(0..types)).collect();
    AgentStore::new(world, positions, headings, vec![0.0; n], tags).unwrap()
}

#[test]
fn twenty_five_configurations_match_brute_force_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..25 {
        let sectors = [8, 64, 128][case % 3];
        let channels = 1 + case % 2;
        let range = rng.random_range(2.0..10.0);
        let side = rng.random_range(2.5 * range..60.0);
        let cfg = ViewConfig {
            sectors,
            fov: rng.random_range(90.0f32..360.0).to_radians(),
            range,
            channels,
            body_radius: rng.random_range(0.1..0.6),
        };
        let n = rng.random_range(1..=200);
        let store = random_store(&mut rng, n, WorldSpec::new(side, side), channels as u8);
        let channel_of: Vec<usize> = (0..channels).collect();
        let got = views(&store, &cfg, &channel_of);
        let expect = brute_force(&store, &cfg, &channel_of);
        let same = got
            .values()
            .iter()
            .zip(&expect)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "case {case}: n {n}, sectors {sectors}, channels {channels}");
    }
}

#[test]
fn dense_clusters_match_brute_force() {
    // Overlapping and touching discs exercise the near-field path.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = ViewConfig {
        sectors: 64,
        fov: 250f32.to_radians(),
        range: 3.0,
        channels: 1,
        body_radius: 0.5,
    };
    let store = random_store(&mut rng, 150, WorldSpec::new(8.0, 8.0), 1);
    assert_eq!(views(&store, &cfg, &[0]).values(), &brute_force(&store, &cfg, &[0])[..]);
}

fn scene(center: Vec2, offsets: &[Vec2], heading: f32) -> AgentStore {
    let world = WorldSpec::new(60.0, 60.0);
    let mut positions = vec![center];
    positions.extend(offsets.iter().map(|&o| center + o));
    let n = positions.len();
    let mut headings = vec![0.3; n];
    headings[0] = heading;
    AgentStore::new(world, positions, headings, vec![0.0; n], vec![0; n]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotating_the_scene_with_the_observer_preserves_its_view(
        phi in 0.0f32..TAU,
        heading in 0.0f32..TAU,
        offsets in prop::collection::vec((-9.0f32..9.0, -9.0f32..9.0), 1..12),
    ) {
        let cfg = ViewConfig { sectors: 32, fov: 250f32.to_radians(), range: 10.0, channels: 1, body_radius: 0.25 };
        let offsets: Vec<Vec2> = offsets.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
        let rotated: Vec<Vec2> = offsets.iter().map(|o| o.rotated(phi)).collect();
        let c = Vec2::new(30.0, 30.0);
        let a = views(&scene(c, &offsets, heading), &cfg, &[0]);
        let b = views(&scene(c, &rotated, heading + phi), &cfg, &[0]);
        for (k, (x, y)) in a.row(0).iter().zip(b.row(0)).enumerate() {
            // A ray grazing a disc edge may flip between hit and miss.
            let grazing = (*x == 1.0) != (*y == 1.0);
            prop_assert!(grazing || (x - y).abs() < 1e-4, "sector {}: {} vs {}", k, x, y);
        }
    }

    #[test]
    fn moving_a_neighbor_away_never_decreases_the_view(
        bearing in -2.0f32..2.0,
        d in 0.6f32..8.0,
        extra in 0.0f32..3.0,
    ) {
        let cfg = ViewConfig { sectors: 64, fov: 250f32.to_radians(), range: 10.0, channels: 1, body_radius: 0.25 };
        let c = Vec2::new(30.0, 30.0);
        let near = views(&scene(c, &[Vec2::from_angle(bearing) * d], 0.0), &cfg, &[0]);
        let far = views(&scene(c, &[Vec2::from_angle(bearing) * (d + extra)], 0.0), &cfg, &[0]);
        for (a, b) in near.row(0).iter().zip(far.row(0)) {
            prop_assert!(b >= a || (a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn values_are_normalized(seed in any::<u64>(), n in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ViewConfig { sectors: 16, fov: 200f32.to_radians(), range: 5.0, channels: 2, body_radius: 0.3 };
        let store = random_store(&mut rng, n, WorldSpec::new(15.0, 15.0), 2);
        let v = views(&store, &cfg, &[0, 1]);
        prop_assert!(v.values().iter().all(|x| (0.0..=1.0).contains(x)));
    }
}

#[test]
fn channels_separate_agent_types() {
    let world = WorldSpec::new(40.0, 40.0);
    // Observer at the centre facing +x, a type-1 agent ahead, a type-0 agent up and to the left.
    let store = AgentStore::new(
        world,
        vec![Vec2::new(20.0, 20.0), Vec2::new(24.0, 20.0), Vec2::new(19.0, 22.0)],
        vec![0.0, 0.0, 0.0],
        vec![0.0; 3],
        vec![0, 1, 0],
    )
    .unwrap();
    let cfg = ViewConfig {
        sectors: 64,
        fov: 250f32.to_radians(),
        range: 10.0,
        channels: 2,
        body_radius: 0.25,
    };
    let v = views(&store, &cfg, &[0, 1]);
    let ch0 = v.channel(0, 0);
    let ch1 = v.channel(0, 1);
    assert!(ch1[31] < 1.0 && ch1[32] < 1.0);
    assert!(ch0[31] == 1.0 && ch0[32] == 1.0);
    assert!(ch0.iter().any(|&x| x < 1.0));
    // Hidden from channel 0 entirely if both agents are type 1.
    let only = views(&store, &cfg, &[1, 1]);
    assert!(only.channel(0, 0).iter().all(|&x| x == 1.0));
}
