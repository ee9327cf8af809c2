use affproj::diagnostics::{check_b_prime, check_condition_b, check_fejer, Phase};
use affproj::oracle::oracle_projection;
use affproj::random::{random_family, sample_members, FamilySpec, RandomFamily};
use affproj::sets::residual;
use affproj::solver::{
    alg1_step, alg2_step, lift_start, run_map, solve, Algorithm, CyclicSchedule, HyperplaneBuffer, IterState,
    SolveOptions, SolveResult, SolverConfig, StopReason, WindowPolicy,
};
use affproj::{AffineSet, DenseMatrix, Point};

fn point(v: &[f64]) -> Point {
    Point::new(v.to_vec()).unwrap()
}

fn line(direction: [f64; 2]) -> AffineSet {
    // the normal of the line spanned by `direction`
    AffineSet::rows(DenseMatrix::new(1, 2, vec![-direction[1], direction[0]]).unwrap(), point(&[0.0])).unwrap()
}

fn axis_and_diagonal() -> Vec<AffineSet> {
    vec![line([1.0, 0.0]), line([1.0, 1.0])]
}

fn configured(alg: Algorithm, policy: WindowPolicy, oracle: Option<Point>) -> SolverConfig {
    let mut c = SolverConfig::new(alg, policy);
    c.options = SolveOptions { monitors: true, keep_points: true, oracle, ..Default::default() };
    c.options.stop.max_iter = 20_000;
    c
}

fn family(dim: usize, k: usize, seed: u64) -> RandomFamily {
    random_family(&FamilySpec::new(dim, k, seed)).unwrap()
}

fn points(r: &SolveResult) -> Vec<Point> {
    r.trace.iter().filter_map(|t| t.point.clone()).collect()
}

#[test]
fn map_single_set_is_one_projection() {
    let fam = family(8, 1, 3);
    let r = solve(&fam.sets, &fam.x0, &configured(Algorithm::Map, WindowPolicy::All, None)).unwrap();
    assert!(r.converged);
    assert_eq!(r.projections_onto(0), 1);
    let direct = fam.sets[0].project(&fam.x0).unwrap();
    assert!(r.solution.distance(&direct) < 1e-12);
}

#[test]
fn map_orthogonal_planes_finish_in_one_cycle() {
    let planes = vec![
        AffineSet::rows(DenseMatrix::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap(), point(&[0.0])).unwrap(),
        AffineSet::rows(DenseMatrix::new(1, 3, vec![0.0, 1.0, 0.0]).unwrap(), point(&[0.0])).unwrap(),
    ];
    let r = solve(&planes, &point(&[1.0, 1.0, 1.0]), &configured(Algorithm::Map, WindowPolicy::All, None)).unwrap();
    assert_eq!(r.solution.as_slice(), &[0.0, 0.0, 1.0]);
    assert_eq!(r.projections_onto(0) + r.projections_onto(1), 2);
}

#[test]
fn map_lines_at_45_degrees_contract_by_one_half_per_cycle() {
    let mut c = configured(Algorithm::Map, WindowPolicy::All, Some(Point::zeros(2)));
    c.options.stop.max_iter = 40;
    c.options.stop.stop_tol = 1e-300;
    let r = solve(&axis_and_diagonal(), &point(&[0.3, 2.0]), &c).unwrap();
    let on_axis: Vec<f64> =
        r.trace.iter().filter(|t| t.set_index == Some(0)).map(|t| t.point.as_ref().unwrap().norm()).collect();
    assert!(on_axis.len() > 10);
    for w in on_axis.windows(2).take(15) {
        assert!((w[1] / w[0] - 0.5).abs() < 1e-12, "ratio {}", w[1] / w[0]);
    }
    assert!(check_fejer(&points(&r), &Point::zeros(2)) <= 0.0);
}

#[test]
fn alg1_window_one_is_map() {
    let fam = family(12, 3, 21);
    let map = solve(&fam.sets, &fam.x0, &configured(Algorithm::Map, WindowPolicy::All, None)).unwrap();
    let alg1 = solve(&fam.sets, &fam.x0, &configured(Algorithm::Alg1, WindowPolicy::LastQ { q: 1 }, None)).unwrap();
    let set_points = |r: &SolveResult| -> Vec<Point> {
        r.trace
            .iter()
            .filter(|t| matches!(t.phase, Phase::SetProjection | Phase::HyperplaneProjection))
            .filter_map(|t| t.point.clone())
            .collect()
    };
    let (a, b) = (set_points(&map), set_points(&alg1));
    assert!(!a.is_empty());
    // every alg1 hyperplane step returns the set projection it follows
    let alg1_dedup: Vec<&Point> = b.iter().step_by(2).collect();
    for (p, q) in a.iter().zip(alg1_dedup) {
        assert!(p.distance(q) < 1e-12);
    }
}

#[test]
fn alg1_all_on_lines_is_exact_at_iteration_two() {
    let sets = axis_and_diagonal();
    let mut state = IterState::new(point(&[1.0, 2.0]), CyclicSchedule::cyclic(2));
    let mut buffer = HyperplaneBuffer::new(WindowPolicy::All);
    alg1_step(&mut state, &sets, &mut buffer);
    assert!(state.x.norm() > 1e-3);
    alg1_step(&mut state, &sets, &mut buffer);
    assert!(state.x.norm() < 1e-14);
}

#[test]
fn alg2_figure_example_in_one_step() {
    let sets = axis_and_diagonal();
    let x0 = lift_start(&point(&[1.0, 0.0]), &sets[0]).unwrap();
    let mut state = IterState::new(x0, CyclicSchedule::skipping_first(2));
    let mut buffer = HyperplaneBuffer::new(WindowPolicy::All);
    let step = alg2_step(&mut state, &sets, &mut buffer);
    assert!(step.after_set.distance(&point(&[0.5, 0.5])) < 1e-15);
    assert!(step.after_m1.distance(&point(&[0.5, 0.0])) < 1e-15);
    assert!(step.next.norm() < 1e-15);
}

#[test]
fn random_families_reach_the_oracle() {
    for (dim, seed) in [(20, 7), (20, 8), (10, 9)] {
        let fam = family(dim, 3, seed);
        let exact = oracle_projection(&fam.sets, &fam.x0).unwrap();
        for (alg, policy, tol) in [
            (Algorithm::Alg1, WindowPolicy::LastQ { q: 4 }, 1e-6),
            (Algorithm::Alg1, WindowPolicy::All, 1e-8),
            (Algorithm::Alg2, WindowPolicy::LastQ { q: 2 }, 1e-6),
            (Algorithm::Alg2, WindowPolicy::All, 1e-8),
            (Algorithm::Map, WindowPolicy::All, 1e-6),
        ] {
            let r = solve(&fam.sets, &fam.x0, &configured(alg, policy, Some(exact.clone()))).unwrap();
            assert!(r.converged, "{alg} {policy} dim {dim}");
            let d = r.solution.distance(&exact);
            assert!(d <= tol, "{alg} {policy} dim {dim}: {d:e}");
            assert!(r.residual_max() <= r.trace.last().unwrap().residual_max() + 1e-15);
        }
    }
}

#[test]
fn trace_records_are_well_formed() {
    let fam = family(15, 4, 2);
    for alg in [Algorithm::Map, Algorithm::Alg1, Algorithm::Alg2] {
        let r = solve(&fam.sets, &fam.x0, &configured(alg, WindowPolicy::LastQ { q: 3 }, None)).unwrap();
        assert_eq!(r.trace[0].phase, Phase::Initial);
        for t in &r.trace {
            assert!(t.step_norm >= 0.0);
            assert_eq!(t.per_set_residuals.len(), 4);
            assert!(t.distance_to_oracle.is_none());
        }
        assert!(r.converged);
        assert!(r.residual_max() <= 1e-10);
        let rep = r.report.unwrap();
        assert!(rep.sum_of_squares.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn fejer_and_orthogonality_along_traces() {
    for seed in 0..6 {
        let fam = family(16, 3, 100 + seed);
        let exact = oracle_projection(&fam.sets, &fam.x0).unwrap();
        let members = sample_members(&fam, 4, seed).unwrap();
        for (alg, policy) in [
            (Algorithm::Map, WindowPolicy::All),
            (Algorithm::Alg1, WindowPolicy::LastQ { q: 3 }),
            (Algorithm::Alg1, WindowPolicy::All),
            (Algorithm::Alg2, WindowPolicy::LastQ { q: 2 }),
            (Algorithm::Alg2, WindowPolicy::ConditionB),
        ] {
            let r = solve(&fam.sets, &fam.x0, &configured(alg, policy, Some(exact.clone()))).unwrap();
            let pts = points(&r);
            for m in members.iter().chain([&exact]) {
                assert!(check_fejer(&pts, m) <= 1e-9, "{alg} {policy} seed {seed}");
            }
            let scale = fam.x0.norm_sq();
            for p in pts.iter().skip(1) {
                let d = fam.x0.sub(p);
                let dm = members[0].sub(&members[1]);
                assert!(d.dot(&dm).abs() <= 1e-8 * scale, "{alg} {policy} seed {seed}");
            }
        }
    }
}

#[test]
fn condition_b_holds_for_all_and_fails_for_short_windows() {
    let fam = family(20, 3, 5);
    let exact = oracle_projection(&fam.sets, &fam.x0).unwrap();
    let all = solve(&fam.sets, &fam.x0, &configured(Algorithm::Alg1, WindowPolicy::All, Some(exact.clone()))).unwrap();
    let rep = all.report.unwrap();
    assert!(rep.max_condition_b_residual() <= 1e-8);
    let short =
        solve(&fam.sets, &fam.x0, &configured(Algorithm::Alg1, WindowPolicy::LastQ { q: 2 }, Some(exact))).unwrap();
    assert!(short.report.unwrap().max_condition_b_residual() > 1e-6);
    assert_eq!(check_condition_b(&fam.x0, &fam.x0, &[]), 0.0);
}

#[test]
fn b_prime_is_one_for_map_and_finite_for_alg1() {
    let fam = family(14, 3, 17);
    let map = solve(&fam.sets, &fam.x0, &configured(Algorithm::Map, WindowPolicy::All, None)).unwrap();
    let ratios = map.report.unwrap().b_prime_ratios;
    assert!(!ratios.is_empty());
    assert!(ratios.iter().all(|r| (r - 1.0).abs() <= 1e-9));
    let alg1 = solve(&fam.sets, &fam.x0, &configured(Algorithm::Alg1, WindowPolicy::LastQ { q: 3 }, None)).unwrap();
    let ratios = alg1.report.unwrap().b_prime_ratios;
    assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
    assert!(check_b_prime(&[Default::default()]).is_empty());
}

#[test]
fn alg2_iterates_stay_on_the_easy_set() {
    for seed in 0..8 {
        let fam = family(18, 3, 300 + seed);
        for policy in [WindowPolicy::LastQ { q: 1 }, WindowPolicy::LastQ { q: 3 }, WindowPolicy::All] {
            let r = solve(&fam.sets, &fam.x0, &configured(Algorithm::Alg2, policy, None)).unwrap();
            let rep = r.report.unwrap();
            assert!(rep.m1_residuals.iter().all(|v| *v <= 1e-8), "{policy} seed {seed}");
            for t in r.trace.iter().filter(|t| t.phase == Phase::HyperplaneProjection) {
                assert!(residual(&fam.sets[0], t.point.as_ref().unwrap()) <= 1e-8);
            }
            assert!(rep.equal_projection_gaps.iter().all(|g| *g <= 1e-8), "{policy} seed {seed}");
        }
    }
}

#[test]
fn custom_schedules_still_converge() {
    let fam = family(12, 3, 41);
    let exact = oracle_projection(&fam.sets, &fam.x0).unwrap();
    let opts = SolveOptions::default();
    let r = run_map(&fam.sets, &fam.x0, CyclicSchedule::new(vec![2, 0, 1, 0]).unwrap(), &opts).unwrap();
    assert!(r.converged);
    assert!(r.solution.distance(&exact) < 1e-6);
    assert!(CyclicSchedule::new(vec![0, 0]).is_ok());
}

#[test]
fn max_iter_is_reported() {
    let fam = family(20, 3, 2);
    let mut c = configured(Algorithm::Map, WindowPolicy::All, None);
    c.options.stop.max_iter = 3;
    let r = solve(&fam.sets, &fam.x0, &c).unwrap();
    assert!(!r.converged);
    assert_eq!(r.stop_reason, StopReason::MaxIter);
    assert_eq!(r.iterations, 3);
}
