use std::sync::Arc;

use mlfmm::*;
use proptest::prelude::*;

const H: f64 = 0.25;

/// Box `[0, n_i h]` per axis, so axis `i` carries `n_i + 1` nodes.
fn grid_from(extents: &[usize]) -> GridSpec {
    let hi = extents.iter().map(|&n| n as f64 * H).collect();
    GridSpec::new(BoxDomain::new(vec![0.0; extents.len()], hi).unwrap(), H).unwrap()
}

fn speed(kind: u8) -> SpeedField {
    match kind {
        0 => SpeedField::constant(1.0).unwrap(),
        1 => SpeedField::constant(2.5).unwrap(),
        _ => SpeedField::new(0.5, 2.0, |p: &[f64]| 1.25 + 0.75 * (3.0 * p.iter().sum::<f64>()).sin()).unwrap(),
    }
}

/// A random grid (full or restricted), a speed kind and a start set of members.
fn instance() -> impl Strategy<Value = (RestrictedGrid, u8, Vec<usize>)> {
    (prop::collection::vec(1usize..=4, 1..=3), any::<bool>(), any::<u64>(), 0u8..3).prop_flat_map(
        |(extents, restrict, seed, kind)| {
            let spec = grid_from(&extents);
            let len = spec.len();
            let grid = if restrict {
                // keep roughly three quarters of the nodes, never all removed
                let members: Vec<usize> = (0..len)
                    .filter(|&i| !(seed.rotate_left(i as u32 % 64) ^ i as u64).is_multiple_of(4) || i == 0)
                    .collect();
                RestrictedGrid::from_members(spec, members).unwrap()
            } else {
                RestrictedGrid::full(spec)
            };
            let members: Vec<usize> = grid.members().collect();
            let n = members.len();
            (Just(grid), Just(kind), prop::collection::vec(0..n, 1..=3))
                .prop_map(move |(g, k, picks)| (g, k, picks.iter().map(|&i| members[i]).collect()))
        },
    )
}

fn march(grid: &RestrictedGrid, speed: &SpeedField, start: &[usize]) -> ValueField {
    partial_fast_march(Arc::new(grid.clone()), speed, &FrontSets::full_sweep(start.to_vec())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matches_value_iteration((grid, kind, start) in instance()) {
        let f = speed(kind);
        let field = march(&grid, &f, &start);
        let oracle = brute_force_values(&grid, &f, &start).unwrap();
        for (i, node) in grid.members().enumerate() {
            let got = field.value_or_inf(node);
            let want = oracle[i];
            if want.is_infinite() {
                prop_assert!(got.is_infinite(), "node {node}: {got} vs inf");
            } else {
                prop_assert!((got - want).abs() <= 1e-10, "node {node}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn acceptance_order_is_monotone((grid, kind, start) in instance()) {
        let f = speed(kind);
        let field = march(&grid, &f, &start);
        let times: Vec<f64> = field.acceptance_order().iter().map(|&n| field.value_or_inf(n)).collect();
        for w in times.windows(2) {
            if kind < 2 {
                prop_assert!(w[0] <= w[1], "{} then {}", w[0], w[1]);
            } else {
                prop_assert!(w[0] <= w[1] + 1e-12, "{} then {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn accepted_values_are_fixed_points((grid, kind, start) in instance()) {
        let f = speed(kind);
        let field = march(&grid, &f, &start);
        for &node in field.acceptance_order() {
            if start.contains(&node) {
                continue;
            }
            let u = local_update(&grid, &f, |n| field.value_or_inf(n), node).unwrap();
            prop_assert!((u - field.value_or_inf(node)).abs() <= 1e-12);
        }
    }

    #[test]
    fn far_exactly_when_infinite((grid, kind, start) in instance()) {
        let field = march(&grid, &speed(kind), &start);
        for (node, t) in field.iter() {
            prop_assert_eq!(field.state(node) == Some(NodeState::Far), t.is_infinite());
        }
    }

    #[test]
    fn restriction_never_lowers_values(extents in prop::collection::vec(1usize..=4, 1..=3), drop in any::<u64>(), kind in 0u8..3) {
        let spec = grid_from(&extents);
        let full = RestrictedGrid::full(spec.clone());
        let kept: Vec<usize> = (0..spec.len()).filter(|&i| i == 0 || (drop >> (i % 64)) & 1 == 1).collect();
        let sub = RestrictedGrid::from_members(spec, kept).unwrap();
        let f = speed(kind);
        let big = march(&full, &f, &[0]);
        let small = march(&sub, &f, &[0]);
        for node in sub.members() {
            prop_assert!(small.value_or_inf(node) >= big.value_or_inf(node));
        }
    }

    #[test]
    fn early_stop_agrees_with_full_sweep((grid, kind, start) in instance(), pick in any::<prop::sample::Index>()) {
        let f = speed(kind);
        let full = march(&grid, &f, &start);
        let members: Vec<usize> = grid.members().collect();
        let end = members[pick.index(members.len())];
        let partial =
            partial_fast_march(Arc::new(grid.clone()), &f, &FrontSets::new(start.clone(), vec![end])).unwrap();
        prop_assert!(partial.accepted_count() <= full.accepted_count());
        for &node in partial.acceptance_order() {
            prop_assert_eq!(partial.value_or_inf(node), full.value_or_inf(node));
        }
    }

    #[test]
    fn kruzkov_round_trip(t in 0.0f64..5.0, v in 0.0f64..0.999) {
        prop_assert!((inverse_kruzkov(kruzkov(t).unwrap()).unwrap() - t).abs() <= 1e-12);
        prop_assert!((kruzkov(inverse_kruzkov(v).unwrap()).unwrap() - v).abs() <= 1e-12);
    }
}

#[test]
fn kruzkov_round_trip_in_time_units() {
    // over the range of times met in practice the inverse is accurate to 1e-12 absolutely
    for i in 0..=1000 {
        let t = i as f64 * 0.005;
        assert!((inverse_kruzkov(kruzkov(t).unwrap()).unwrap() - t).abs() <= 1e-12, "t = {t}");
    }
}

#[test]
fn corner_distance_converges_at_first_order() {
    // a point source costs a logarithmic factor: the error scales like h ln(1/h)
    let mut constants = Vec::new();
    for inv_h in [20usize, 40, 80] {
        let h = 1.0 / inv_h as f64;
        let spec = GridSpec::new(BoxDomain::unit(2).unwrap(), h).unwrap();
        let field = march(&RestrictedGrid::full(spec.clone()), &SpeedField::constant(1.0).unwrap(), &[0]);
        let err = (0..spec.len())
            .map(|n| (field.value_or_inf(n) - euclid(&spec.flat_to_point(n).unwrap(), &[0.0, 0.0])).abs())
            .fold(0.0, f64::max);
        constants.push(err / (h * (1.0 / h).ln()));
    }
    for w in constants.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "error constant grew: {constants:?}");
    }
}

#[test]
fn brute_force_is_monotone_in_start_set() {
    let spec = grid_from(&[4, 3]);
    let grid = RestrictedGrid::full(spec);
    let f = speed(2);
    let small = brute_force_values(&grid, &f, &[0]).unwrap();
    let large = brute_force_values(&grid, &f, &[0, 7, 19]).unwrap();
    for (a, b) in small.iter().zip(&large) {
        assert!(b <= a);
    }
    let all: Vec<usize> = grid.members().collect();
    assert!(brute_force_values(&grid, &f, &all).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn four_by_four_matches_value_iteration() {
    let grid = RestrictedGrid::full(grid_from(&[3, 3]));
    let f = SpeedField::constant(1.0).unwrap();
    for start in 0..grid.len() {
        let field = march(&grid, &f, &[start]);
        let oracle = brute_force_values(&grid, &f, &[start]).unwrap();
        for (n, want) in oracle.iter().enumerate() {
            assert!((field.value_or_inf(n) - want).abs() <= 1e-10);
        }
    }
}
