use std::sync::Arc;

use mlfmm::*;

const TAU_2D: f64 = 0.648528;

fn auto(d: usize, h: f64) -> LevelSchedule {
    let p = paper_benchmark(d).unwrap();
    schedule_params(&ScheduleParams::from_finest_h(h, 1.0, d, ScheduleMode::Auto)).unwrap().snapped(&p.domain).unwrap()
}

fn classic(p: &ProblemSpec, h: f64) -> MlfmResult {
    run_multilevel(p, &LevelSchedule::classic(h).unwrap()).unwrap()
}

/// Largest l-infinity distance from a point of the analytic segment to the node set.
fn worst_gap(points: &[Vec<f64>], nodes: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| nodes.iter().map(|q| linf(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

fn distance_to_segment(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
    let s =
        (ab.iter().zip(&ap).map(|(x, y)| x * y).sum::<f64>() / ab.iter().map(|x| x * x).sum::<f64>()).clamp(0.0, 1.0);
    let foot: Vec<f64> = a.iter().zip(&ab).map(|(x, y)| x + s * y).collect();
    euclid(p, &foot)
}

#[test]
fn coarse_solve_accepts_the_corridor() {
    let p = paper_benchmark(2).unwrap();
    let spec = GridSpec::new(p.domain.clone(), 0.1).unwrap();
    let grid = Arc::new(RestrictedGrid::full(spec.clone()));
    let bi = bidirectional_coarse_solve(grid, &p.speed, &p.src, &p.dst, DEFAULT_ETA_CONST * 0.1).unwrap();
    let (a, b) = (vec![0.2, 0.2], vec![0.8, 0.8]);
    let corridor: Vec<usize> =
        (0..spec.len()).filter(|&n| distance_to_segment(&spec.flat_to_point(n).unwrap(), &a, &b) <= 0.05).collect();
    assert!(!corridor.is_empty());
    for n in corridor {
        assert!(bi.accepted_both.binary_search(&n).is_ok(), "corridor node {n} missing");
    }
}

#[test]
fn coarse_solve_between_single_nodes() {
    let spec = GridSpec::new(BoxDomain::unit(2).unwrap(), 0.25).unwrap();
    let grid = Arc::new(RestrictedGrid::full(spec.clone()));
    let src = Region::ball(vec![0.25, 0.25], 0.0);
    let dst = Region::ball(vec![0.75, 0.75], 0.0);
    let bi = bidirectional_coarse_solve(grid, &SpeedField::constant(1.0).unwrap(), &src, &dst, 0.0).unwrap();
    let s = spec.flat_index(&[1, 1]).unwrap();
    let d = spec.flat_index(&[3, 3]).unwrap();
    assert!(bi.accepted_both.contains(&s));
    assert!(bi.accepted_both.contains(&d));
}

#[test]
fn isolated_destination_is_unreachable() {
    let spec = GridSpec::new(BoxDomain::unit(2).unwrap(), 0.25).unwrap();
    let d = spec.flat_index(&[3, 3]).unwrap();
    let ring: Vec<usize> = [[2, 3], [4, 3], [3, 2], [3, 4], [2, 2], [4, 4], [2, 4], [4, 2]]
        .iter()
        .map(|i| spec.flat_index(i).unwrap())
        .collect();
    let members: Vec<usize> = (0..spec.len()).filter(|n| !ring.contains(n)).collect();
    assert!(members.contains(&d));
    let grid = Arc::new(RestrictedGrid::from_members(spec, members).unwrap());
    let src = Region::ball(vec![0.25, 0.25], 0.0);
    let dst = Region::ball(vec![0.75, 0.75], 0.0);
    let err = bidirectional_coarse_solve(grid, &SpeedField::constant(1.0).unwrap(), &src, &dst, 0.0).unwrap_err();
    assert!(matches!(err, Error::Unreachable { .. }), "{err}");
}

#[test]
fn active_set_covers_the_geodesic_at_coarse_scale() {
    let p = paper_benchmark(2).unwrap();
    let o = paper_oracle(2).unwrap();
    let h = 0.1;
    let spec = GridSpec::new(p.domain.clone(), h).unwrap();
    let grid = Arc::new(RestrictedGrid::full(spec.clone()));
    let eta = DEFAULT_ETA_CONST * h;
    let bi = bidirectional_coarse_solve(grid, &p.speed, &p.src, &p.dst, eta).unwrap();
    let active = select_active(&bi, eta).unwrap();
    let nodes: Vec<Vec<f64>> = active.nodes.iter().map(|&n| spec.flat_to_point(n).unwrap()).collect();
    assert!(worst_gap(&o.geodesic_points(500), &nodes) <= h);
}

#[test]
fn auto_schedule_reaches_the_analytic_time_on_a_small_fine_grid() {
    let p = paper_benchmark(2).unwrap();
    let s = schedule_params(&ScheduleParams::new(0.01, 2, ScheduleMode::Auto)).unwrap().snapped(&p.domain).unwrap();
    let r = run_multilevel(&p, &s).unwrap();
    assert!((r.tau_star - TAU_2D).abs() <= 0.05, "tau* = {}", r.tau_star);
    let finest = r.per_level.last().unwrap();
    assert!(finest.grid_nodes as f64 <= 0.2 * 101.0 * 101.0, "final grid has {} nodes", finest.grid_nodes);
}

#[test]
fn single_level_is_plain_partial_marching() {
    let p = paper_benchmark(2).unwrap();
    let h = 1.0 / 40.0;
    let r = classic(&p, h);
    let grid = Arc::new(RestrictedGrid::full(GridSpec::new(p.domain.clone(), h).unwrap()));
    let fronts = FrontSets::new(grid.nodes_in_region(&p.dst), grid.nodes_in_region(&p.src));
    let direct = partial_fast_march(grid, &p.speed, &fronts).unwrap();
    assert_eq!(r.final_values.acceptance_order(), direct.acceptance_order());
    for &n in direct.acceptance_order() {
        assert_eq!(r.final_values.value_or_inf(n).to_bits(), direct.value_or_inf(n).to_bits());
    }
    assert_eq!(r.per_level.len(), 1);
}

#[test]
fn two_levels_in_three_dimensions_match_classic() {
    let p = paper_benchmark(3).unwrap();
    let h = 1.0 / 50.0;
    let s = schedule_params(&ScheduleParams::from_finest_h(h, 1.0, 3, ScheduleMode::NLevel(2)))
        .unwrap()
        .snapped(&p.domain)
        .unwrap();
    assert_eq!(s.len(), 2);
    let ml = run_multilevel(&p, &s).unwrap();
    let cl = classic(&p, h);
    assert!((ml.tau_star - cl.tau_star).abs() <= 2.0 * h);
}

#[test]
fn restricted_values_stay_close_to_full_grid_values() {
    for d in [2, 3] {
        let p = paper_benchmark(d).unwrap();
        let o = paper_oracle(d).unwrap();
        for inv_h in [25.0, 50.0] {
            let h = 1.0 / inv_h;
            let ml = run_multilevel(&p, &auto(d, h)).unwrap();
            let cl = classic(&p, h);
            let base = cl.final_values.grid().base().clone();
            let sources = ml.final_values.grid().nodes_in_region(&p.src);
            let classic_error = sources
                .iter()
                .map(|&n| (cl.final_values.value_or_inf(n) - o.value_at(&base.flat_to_point(n).unwrap())).abs())
                .fold(0.0, f64::max);
            let gap = sources
                .iter()
                .map(|&n| (ml.final_values.value_or_inf(n) - cl.final_values.value_or_inf(n)).abs())
                .fold(0.0, f64::max);
            assert!(gap <= 2.0 * classic_error, "d={d} h=1/{inv_h}: gap {gap} vs classic error {classic_error}");
        }
    }
}

#[test]
fn every_level_contains_the_geodesic() {
    for d in [2, 3] {
        let o = paper_oracle(d).unwrap();
        let points = o.geodesic_points(400);
        let s = auto(d, 1.0 / 50.0);
        let r = run_multilevel(&paper_benchmark(d).unwrap(), &s).unwrap();
        for (active, level) in r.active_sets.iter().zip(&s.levels) {
            let nodes: Vec<Vec<f64>> = active.nodes.iter().map(|&n| active.grid.flat_to_point(n).unwrap()).collect();
            assert!(worst_gap(&points, &nodes) <= level.step, "d={d} H={}", level.step);
        }
    }
}

#[test]
fn variable_speed_problems_match_classic() {
    let h = 1.0 / 50.0;
    // the channel gaps are narrower than the coarsest step, so coarse times on
    // the true route are badly overestimated and need a wider threshold
    for (kind, eta_const) in [(SpeedKind::TwoChannel, 1.0), (SpeedKind::Bump, DEFAULT_ETA_CONST)] {
        let p = variable_speed_problem(kind, 2).unwrap();
        let mut params = ScheduleParams::from_finest_h(h, 1.0, 2, ScheduleMode::Auto);
        params.eta_const = eta_const;
        let s = schedule_params(&params).unwrap().snapped(&p.domain).unwrap();
        let ml = run_multilevel(&p, &s).unwrap();
        let cl = classic(&p, h);
        assert!((ml.tau_star - cl.tau_star).abs() <= 2.0 * h, "{kind:?}: {} vs {}", ml.tau_star, cl.tau_star);
    }
}

#[test]
fn unresolved_gaps_defeat_a_narrow_threshold() {
    let h = 1.0 / 50.0;
    let p = variable_speed_problem(SpeedKind::TwoChannel, 2).unwrap();
    let s = schedule_params(&ScheduleParams::from_finest_h(h, 1.0, 2, ScheduleMode::Auto))
        .unwrap()
        .snapped(&p.domain)
        .unwrap();
    let ml = run_multilevel(&p, &s).unwrap();
    let cl = classic(&p, h);
    // restriction can only lengthen the optimal route
    assert!(ml.tau_star >= cl.tau_star);
    assert!(ml.tau_star - cl.tau_star > 2.0 * h);
}

#[test]
fn runs_are_deterministic() {
    let p = variable_speed_problem(SpeedKind::TwoChannel, 2).unwrap();
    let s = auto(2, 1.0 / 60.0);
    let a = run_multilevel(&p, &s).unwrap();
    let b = run_multilevel(&p, &s).unwrap();
    assert_eq!(a.v_star.to_bits(), b.v_star.to_bits());
    assert_eq!(a.argmin_source, b.argmin_source);
    assert_eq!(a.final_values.acceptance_order(), b.final_values.acceptance_order());
    assert_eq!(a.active_sets, b.active_sets);
    let strip = |r: &MlfmResult| -> Vec<LevelRecord> {
        r.per_level.iter().map(|l| LevelRecord { wall_ms: 0.0, ..l.clone() }).collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn totals_and_invariants_of_the_result() {
    let p = paper_benchmark(2).unwrap();
    let r = run_multilevel(&p, &auto(2, 0.01)).unwrap();
    assert_eq!(r.total_visited(), r.per_level.iter().map(|l| l.visited).sum::<usize>());
    assert_eq!(r.tau_star, inverse_kruzkov(r.v_star).unwrap());
    let sources = r.final_values.grid().nodes_in_region(&p.src);
    let best = sources.iter().map(|&n| r.final_values.value_or_inf(n)).fold(f64::INFINITY, f64::min);
    assert_eq!(r.v_star, kruzkov(best).unwrap());
    for (active, record) in r.active_sets.iter().zip(&r.per_level) {
        assert_eq!(Some(active.nodes.len()), record.active);
    }
}

#[test]
fn tiny_thresholds_are_widened_or_reported() {
    let p = paper_benchmark(2).unwrap();
    let mut params = ScheduleParams::from_finest_h(0.01, 1.0, 2, ScheduleMode::Auto);
    params.eta_const = 1e-9;
    let s = schedule_params(&params).unwrap().snapped(&p.domain).unwrap();
    match run_multilevel(&p, &s) {
        Ok(r) => assert!((r.tau_star - TAU_2D).abs() <= 0.1),
        Err(e) => assert!(matches!(e, Error::LevelUnreachable { .. }), "{e}"),
    }
}

#[test]
fn expired_deadline_aborts() {
    let p = paper_benchmark(2).unwrap();
    let options = RunOptions { deadline: Some(std::time::Instant::now()), ..RunOptions::default() };
    let mut records = Vec::new();
    let err = run_multilevel_recording(&p, &auto(2, 1.0 / 200.0), options, &mut records).unwrap_err();
    assert_eq!(err, Error::BudgetExceeded);
}

#[test]
fn path_follows_the_straight_geodesic() {
    let p = paper_benchmark(2).unwrap();
    let o = paper_oracle(2).unwrap();
    let h = 1.0 / 50.0;
    let r = run_multilevel(&p, &auto(2, h)).unwrap();
    let path = extract_path(&r, &p).unwrap();
    assert!(path.len() >= 2);
    assert!(p.dst.contains(path.last().unwrap()));
    let segment = o.geodesic_points(2000);
    for v in &path {
        let gap = segment.iter().map(|q| linf(v, q)).fold(f64::INFINITY, f64::min);
        assert!(gap <= 2.0 * h, "vertex {v:?} is {gap} away");
    }
}

#[test]
fn path_between_adjacent_sets_is_short() {
    let domain = BoxDomain::unit(2).unwrap();
    let p = ProblemSpec::new(
        "adjacent",
        domain,
        Region::ball(vec![0.3, 0.5], 0.11),
        Region::ball(vec![0.55, 0.5], 0.1),
        SpeedField::constant(1.0).unwrap(),
    )
    .unwrap();
    let r = classic(&p, 0.1);
    let path = extract_path(&r, &p).unwrap();
    assert!(path.len() <= 2, "{path:?}");
}

#[test]
fn one_dimensional_path_walks_monotonically() {
    let p = ProblemSpec::new(
        "line",
        BoxDomain::unit(1).unwrap(),
        Region::ball(vec![0.1], 0.05),
        Region::ball(vec![0.9], 0.05),
        SpeedField::constant(1.0).unwrap(),
    )
    .unwrap();
    let r = classic(&p, 0.1);
    let path = extract_path(&r, &p).unwrap();
    let xs: Vec<f64> = path.iter().map(|v| v[0]).collect();
    assert_eq!(xs.len(), 9);
    for w in xs.windows(2) {
        assert!((w[1] - w[0] - 0.1).abs() < 1e-12, "{xs:?}");
    }
}
