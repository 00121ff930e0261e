use lienard_core::census::{census, innermost_matches_origin, lemma1_certificate, Lemma1, Stability};
use lienard_core::conserved::{quantity_drift, DiracOptions, Quantity};
use lienard_core::ode::{flow, Direction, OdeConfig, Record, TerminalEvent};
use lienard_core::poly::outer_branches;
use lienard_core::section::{
    return_derivative_fd, return_map, section_config, NoReturnReason, ReturnStatus,
};
use lienard_core::separatrix::{
    crossing_at, find_d0, monotonic_scan, separatrix, splitting, Branch, FindD0Options, ShootConfig,
};
use lienard_core::{PhaseState, Poly, State4, SystemParams};
use proptest::prelude::*;

fn coeffs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1..=max_len)
}

fn sys(c: &[f64]) -> SystemParams {
    SystemParams::new(Poly::new(c.to_vec()).unwrap())
}

proptest! {
    #[test]
    fn even_odd_parts_recombine(c in coeffs(8)) {
        let f = Poly::new(c).unwrap();
        let (e, o) = f.even_odd();
        prop_assert!(e.is_even() && o.is_odd());
        for i in 0..100 {
            let x = -10.0 + 20.0 * i as f64 / 99.0;
            let scale = f.eval(x).abs().max(e.eval(x).abs()).max(1.0);
            prop_assert!((e.eval(x) + o.eval(x) - f.eval(x)).abs() <= 1e-12 * scale);
            prop_assert!((e.eval(-x) - e.eval(x)).abs() <= 1e-12 * scale);
            prop_assert!((o.eval(-x) + o.eval(x)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn reflection_evaluates_at_minus_x(c in coeffs(8), x in -3.0f64..3.0) {
        let f = Poly::new(c).unwrap();
        let g = f.reflected();
        prop_assert!((g.eval(x) - f.eval(-x)).abs() <= 1e-12 * f.eval(-x).abs().max(1.0));
    }

    #[test]
    fn level_roots_are_roots(c in coeffs(6), level in -2.0f64..2.0) {
        let f = Poly::new(c).unwrap();
        prop_assume!(!f.is_zero());
        for r in f.level_roots(level) {
            let slope = f.eval_deriv(r).abs().max(1.0);
            prop_assert!((f.eval(r) - level).abs() <= 1e-9 * slope * r.abs().max(1.0).powi(f.degree() as i32));
        }
    }

    #[test]
    fn outer_branch_residual_is_small(
        b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0, y in 1e2f64..1e8,
    ) {
        let f = Poly::quartic(1.0, b, c, d);
        let o = outer_branches(&f, y).unwrap();
        for x in [o.a_of_y, o.b_of_y] {
            prop_assert!((f.eval(x) - y).abs() <= 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn outer_branch_sum_approaches_its_limit(
        a in 0.5f64..2.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0,
    ) {
        let f = Poly::quartic(a, b, c, d);
        let limit = -b / (2.0 * a);
        let gap: Vec<f64> = [1e4, 1e6, 1e8]
            .iter()
            .map(|&y| {
                let o = outer_branches(&f, y).unwrap();
                (o.a_of_y + o.b_of_y - limit).abs()
            })
            .collect();
        prop_assert!(gap[1] <= gap[0] && gap[2] <= gap[1], "{gap:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_then_backward_returns_to_start(
        x in -1.0f64..1.0, y in -1.0f64..1.0, t in 0.1f64..5.0,
    ) {
        prop_assume!(x.hypot(y) > 1e-3);
        let p = sys(&[-0.5, 0.0, 1.0]);
        let cfg = OdeConfig::default().with_t_max(t);
        let fwd = flow(&p, PhaseState::new(x, y), &[], &cfg, Record::Nothing).unwrap();
        prop_assume!(fwd.terminal == TerminalEvent::Timeout && fwd.end_state.radius() < 1e3);
        let back = p.clone().with_direction(Direction::Backward);
        let r = flow(&back, fwd.end_state, &[], &cfg, Record::Nothing).unwrap();
        prop_assert!((r.end_state.x - x).hypot(r.end_state.y - y) <= 1e-7);
    }

    #[test]
    fn returned_samples_have_positive_derivative(y0 in -3.0f64..-0.05) {
        let p = sys(&[-1.0, 0.0, 1.0]);
        let s = return_map(&p, y0, &section_config()).unwrap();
        prop_assert!(s.returned());
        prop_assert!(s.derivative().unwrap() > 0.0);
    }

    #[test]
    fn derivative_formula_matches_finite_difference(y0 in -2.0f64..-0.1, d in -0.5f64..0.5) {
        let p = SystemParams::new(Poly::quartic(1.0, 0.0, 0.0, d));
        let cfg = section_config();
        let s = return_map(&p, y0, &cfg).unwrap();
        prop_assume!(s.returned());
        let v = s.derivative().unwrap();
        let fd = return_derivative_fd(&p, y0, &cfg).unwrap();
        prop_assert!((v - fd).abs() <= (1e-3 * v.abs()).max(1e-4), "{v} vs {fd}");
    }
}

#[test]
fn return_point_moves_monotonically_with_d() {
    let cfg = section_config();
    for y0 in [-0.2, -0.4] {
        let ps: Vec<f64> = (0..10)
            .map(|i| {
                let d = -0.4 + 0.08 * i as f64;
                let s = return_map(&SystemParams::new(Poly::quartic(1.0, 1.0, 0.0, d)), y0, &cfg).unwrap();
                assert!(s.returned(), "d = {d}: {}", s.status);
                s.p
            })
            .collect();
        assert!(ps.windows(2).all(|w| w[1] > w[0]), "y0 = {y0}: {ps:?}");
    }
}

#[test]
fn escape_persists_at_a_larger_blow_up_radius() {
    let p = sys(&[0.0, 0.0, 0.0, 1.0]);
    for y0 in [-1.0, -2.0, -5.0] {
        for radius in [1e6, 1e7] {
            let cfg = section_config().with_blowup_radius(radius);
            let s = return_map(&p, y0, &cfg).unwrap();
            assert_eq!(s.status, ReturnStatus::NoReturn(NoReturnReason::Escape), "y0 = {y0}, radius {radius}");
        }
    }
}

#[test]
fn reflected_family_negates_d0_and_flips_loop_stability() {
    let opts = FindD0Options::<f64>::default();
    let r = find_d0(1.0, 1.0, 0.0, &opts).unwrap();
    let m = find_d0(1.0, -1.0, 0.0, &opts).unwrap();
    assert!((r.d0 + m.d0).abs() <= 2.0 * opts.tol, "{} vs {}", r.d0, m.d0);
    assert_ne!(r.loop_stable, m.loop_stable);
}

#[test]
fn even_family_swaps_branches_under_d_to_minus_d() {
    let grid = [-0.6, -0.3, 0.0, 0.3, 0.6];
    let scan = monotonic_scan(1.0, 0.0, 0.0, &grid, &ShootConfig::<f64>::default()).unwrap();
    for (i, row) in scan.rows.iter().enumerate() {
        let mirror = &scan.rows[grid.len() - 1 - i];
        let u = row.u.as_ref().unwrap();
        let s = mirror.s.as_ref().unwrap();
        assert!((u.value - s.value).abs() <= 2.0 * (u.err_est + s.err_est) + 1e-9, "d = {}", row.d);
    }
}

#[test]
fn doubling_the_cutoff_stays_within_the_error_estimate() {
    let cfg = ShootConfig::default();
    for d in [-1.0, -0.5, 0.0] {
        let p = SystemParams::new(Poly::quartic(1.0, 1.0, 0.0, d));
        for branch in [Branch::Stable, Branch::Unstable] {
            let r = separatrix(&p, branch, &cfg).unwrap();
            let v = crossing_at(&p, branch, 2.0 * r.x_far, &cfg.ode).unwrap();
            assert!((v - r.value).abs() < 2.0 * r.err_est, "d = {d}, {branch}: {} vs {v}", r.value);
        }
    }
}

#[test]
fn splitting_changes_sign_once_on_the_grid() {
    let cfg = ShootConfig::default();
    for (a, b, c) in [(1.0, 1.0, 0.0), (1.0, 1.0, 1.0), (1.0, 2.0, 0.0)] {
        let signs: Vec<bool> = (0..=60)
            .map(|i| splitting(a, b, c, -3.0 + 0.05 * i as f64, &cfg).unwrap().0 > 0.0)
            .collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1, "({a},{b},{c})");
    }
}

#[test]
fn no_cycles_for_positive_d() {
    let p0 = find_d0(1.0, 1.0, 0.0, &FindD0Options::default()).unwrap().p0;
    for d in [0.05, 0.3, 1.0] {
        let p = SystemParams::new(Poly::quartic(1.0, 1.0, 0.0, d));
        let r = census(&p, 0.999 * p0, -1e-3, 96, &section_config()).unwrap();
        assert_eq!(r.count(), 0, "d = {d}");
    }
}

#[test]
fn certified_polynomials_have_no_cycles() {
    let certified: [&[f64]; 6] = [
        &[1.0, 0.0, 0.0, 1.0],
        &[0.5, 0.0, 0.0, 0.0, 0.0, 1.0],
        &[1.4, 1.0],
        &[-1.0, 1.0, 0.0, 2.0],
        &[2.0, 0.0, 1.0, 1.0],
        &[-0.3, 1.0, 0.0, 1.0],
    ];
    for c in certified {
        let p = sys(c);
        assert_eq!(lemma1_certificate(&p.f), Lemma1::Certified, "{}", p.f);
        let r = census(&p, -2.5, -0.05, 64, &section_config()).unwrap();
        assert_eq!(r.count(), 0, "{}", p.f);
    }
}

#[test]
fn doubling_the_samples_never_loses_cycles() {
    let cfg = section_config();
    let p0 = find_d0(1.0, 1.0, 0.0, &FindD0Options::default()).unwrap().p0;
    for i in 0..10 {
        let d = -1.2 + 0.12 * i as f64;
        let p = SystemParams::new(Poly::quartic(1.0, 1.0, 0.0, d));
        let coarse = census(&p, 0.999 * p0, -1e-3, 48, &cfg).unwrap().count();
        let fine = census(&p, 0.999 * p0, -1e-3, 96, &cfg).unwrap().count();
        assert!(fine >= coarse, "d = {d}: {coarse} -> {fine}");
    }
}

#[test]
fn two_nested_cycles_alternate_and_match_the_origin() {
    // averaged amplitude equation with roots r = 1 and r = 2
    let p = sys(&[0.4, 0.0, -2.0 / 3.0, 0.0, 0.16]);
    let r = census(&p, -3.0, -0.05, 128, &section_config()).unwrap();
    assert_eq!(r.count(), 2, "{:?}", r.cycles);
    assert!(r.cycles.iter().all(|c| c.stability != Stability::SemiStable));
    assert_ne!(r.cycles[0].stability, r.cycles[1].stability);
    assert_eq!(r.cycles[0].stability, Stability::Unstable);
    assert!(innermost_matches_origin(&p, &r));
}

#[test]
fn h_drift_shrinks_with_tolerance() {
    let f = Poly::new(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let start = State4::new(0.3, -0.2, 1.0, 0.0);
    let drift = |rtol: f64| {
        quantity_drift(&f, Quantity::H, start, 50.0, &DiracOptions::default().with_rtol(rtol))
            .unwrap()
            .max_abs_drift
    };
    let (loose, tight) = (drift(1e-8), drift(1e-10));
    assert!(tight * 10.0 <= loose, "{loose:e} -> {tight:e}");
}
