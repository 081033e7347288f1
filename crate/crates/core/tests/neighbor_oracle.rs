use flockrl_core::engine::{neighbors_within, SpatialGrid};
use flockrl_core::{Vec2, WorldSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_pairs(positions: &[Vec2], world: &WorldSpec, i: usize, radius: f32) -> Vec<(usize, f32)> {
    (0..positions.len())
        .filter(|&j| j != i)
        .filter_map(|j| {
            let d = world.displacement(positions[i], positions[j]).length();
            (d < radius).then_some((j, d))
        })
        .collect()
}

/// Uniform points, with a share pushed against the world edges so that many
/// neighborhoods wrap around.
fn placement(rng: &mut ChaCha8Rng, n: usize, world: &WorldSpec, edge: f32) -> Vec<Vec2> {
    (0..n)
        .map(|_| {
            let mut x = rng.random_range(0.0..world.width);
            let mut y = rng.random_range(0.0..world.height);
            if rng.random_bool(0.3) {
                x = if rng.random_bool(0.5) {
                    rng.random_range(0.0..edge)
                } else {
                    world.width - rng.random_range(0.0..edge).max(1e-3)
                };
            }
            if rng.random_bool(0.3) {
                y = if rng.random_bool(0.5) {
                    rng.random_range(0.0..edge)
                } else {
                    world.height - rng.random_range(0.0..edge).max(1e-3)
                };
            }
            Vec2::new(x, y)
        })
        .collect()
}

#[test]
fn hundred_random_instances_match_all_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = rng.random_range(1..=500);
        let world = WorldSpec::new(rng.random_range(5.0..120.0), rng.random_range(5.0..120.0));
        let cell = rng.random_range(0.5..world.width.min(world.height));
        let radius = rng.random_range(0.05..=1.0) * cell;
        let positions = placement(&mut rng, n, &world, cell);
        let grid = SpatialGrid::build(&positions, &world, cell).unwrap();
        for i in 0..n {
            let got: Vec<(usize, f32)> = neighbors_within(&grid, &positions, i, radius)
                .unwrap()
                .into_iter()
                .map(|(j, d, _)| (j, d))
                .collect();
            assert_eq!(got, all_pairs(&positions, &world, i, radius), "case {case}, agent {i}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighbor_sets_follow_permutations(seed in any::<u64>(), n in 2usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = WorldSpec::new(40.0, 25.0);
        let positions = placement(&mut rng, n, &world, 4.0);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in (1..n).rev() {
            perm.swap(k, rng.random_range(0..=k));
        }
        let shuffled: Vec<Vec2> = perm.iter().map(|&p| positions[p]).collect();
        let a = SpatialGrid::build(&positions, &world, 4.0).unwrap();
        let b = SpatialGrid::build(&shuffled, &world, 4.0).unwrap();
        for (new_i, &old_i) in perm.iter().enumerate() {
            let mut expect: Vec<usize> = neighbors_within(&a, &positions, old_i, 3.5)
                .unwrap()
                .into_iter()
                .map(|(j, _, _)| j)
                .collect();
            expect.sort_unstable();
            let mut got: Vec<usize> = neighbors_within(&b, &shuffled, new_i, 3.5)
                .unwrap()
                .into_iter()
                .map(|(j, _, _)| perm[j])
                .collect();
            got.sort_unstable();
            prop_assert_eq!(got, expect);
        }
    }

    #[test]
    fn neighborhoods_are_symmetric(seed in any::<u64>(), n in 2usize..150) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = WorldSpec::new(30.0, 30.0);
        let positions = placement(&mut rng, n, &world, 3.0);
        let grid = SpatialGrid::build(&positions, &world, 3.0).unwrap();
        for i in 0..n {
            for (j, _, _) in neighbors_within(&grid, &positions, i, 3.0).unwrap() {
                let back = neighbors_within(&grid, &positions, j, 3.0).unwrap();
                prop_assert!(back.iter().any(|&(k, _, _)| k == i));
            }
        }
    }
}
