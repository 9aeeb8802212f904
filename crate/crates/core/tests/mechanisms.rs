mod common;

use mechlab_core::mechanism::{DeterministicMechanism, Mechanism, MechanismSpec, StepLineMechanism};
use mechlab_core::phi::{PhiEvaluator, PhiMode};
use mechlab_core::revenue::{revenue_direct, revenue_from_payoff_grid, revenue_via_phi, PayoffGrid};
use mechlab_core::{BaseDensity, Density, MechError};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn example() -> StepLineMechanism {
    StepLineMechanism::new(1.0, 0.6, vec![(0.1, 0.3), (0.2, 0.5), (0.6, 1.0)]).unwrap()
}

#[test]
fn decomposition_matches_direct_revenue_on_regular_families() {
    let fams = [
        Density::uniform_triangle(1.0).unwrap(),
        Density::uniform_triangle(0.6).unwrap(),
        Density::ordered_decreasing(BaseDensity::power(2.0).unwrap(), 0.7).unwrap(),
        Density::ordered_decreasing(BaseDensity::exponential(1.5).unwrap(), 1.0).unwrap(),
        Density::scale_invariant(BaseDensity::power(3.0).unwrap()).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for d in &fams {
        for mode in [PhiMode::ClosedForm, PhiMode::Quadrature] {
            let ev = PhiEvaluator::new(d, mode).unwrap();
            for _ in 0..20 {
                let m = common::random_line(&mut rng, d.domain.a, 5);
                let direct = revenue_direct(d, &Mechanism::Line(m.clone())).unwrap();
                let via_phi = revenue_via_phi(&ev, &m).unwrap();
                assert!((via_phi - direct).abs() < 1e-6, "{:?} {mode:?} {m:?}: {via_phi} vs {direct}", d.kind);
            }
        }
    }
}

#[test]
fn conditional_family_misses_exactly_the_corner_flux() {
    // f = g1 g2 / (1 - G1(v2)) is unbounded at (1, 1); the row mass g2(v2)
    // survives as the row shrinks, leaving u(1, 1) g2(1) outside the formula.
    let g2 = BaseDensity::exponential(1.0).unwrap();
    let d = Density::conditional_decreasing(BaseDensity::power(2.0).unwrap(), g2.clone()).unwrap();
    let ev = PhiEvaluator::auto(&d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let m = common::random_line(&mut rng, 1.0, 4);
        let direct = revenue_direct(&d, &Mechanism::Line(m.clone())).unwrap();
        let via_phi = revenue_via_phi(&ev, &m).unwrap();
        assert!((via_phi - direct + m.u1(1.0) * g2.pdf(1.0)).abs() < 1e-6);
    }
}

#[test]
fn payoff_route_agrees_with_direct_revenue() {
    let d = Density::ordered_decreasing(BaseDensity::power(2.0).unwrap(), 1.0).unwrap();
    let m = example();
    let u = PayoffGrid::from_fn(d.domain, 401, 401, |x, y| m.payoff(x, y)).unwrap();
    let via_payoff = revenue_from_payoff_grid(&d, &u).unwrap();
    let direct = revenue_direct(&d, &Mechanism::Line(m)).unwrap();
    assert!((via_payoff - direct).abs() < 2e-4, "{via_payoff} vs {direct}");
}

#[test]
fn cover_structure_on_a_three_step_line() {
    let m = example();
    let c = m.cover().unwrap();
    let top = m.a * m.alpha();
    assert_eq!(c.t10, m.t10);
    assert!((c.alpha() - m.alpha()).abs() < 1e-12);
    let q_top = m.q2(top);
    let cut = (m.t1(top) - m.t10) / q_top;
    assert!((c.v2_lower() - cut).abs() < 1e-12);
    for k in 0..=1000 {
        let y = k as f64 / 1000.0;
        let q = c.q2(y);
        assert!([0.0, q_top, 1.0].iter().any(|l| (q - l).abs() < 1e-12), "level {q} at {y}");
        if y < top {
            assert!(c.u1(y) <= m.u1(y) + 1e-12);
        } else {
            assert!((c.u1(y) - m.u1(y)).abs() < 1e-12);
        }
    }
    assert!(c.diagnostics().is_semi_deterministic);
    assert_eq!(c.cover().unwrap(), c);
}

#[test]
fn deterministic_mechanisms_are_their_own_cover() {
    for (p1, p2) in [(2.0 / 3.0, 0.2), (0.5, 0.4), (0.8, 0.0)] {
        let line = DeterministicMechanism::new(p1, p2).to_line(1.0).unwrap();
        assert_eq!(line.cover().unwrap(), line);
    }
}

#[test]
fn straightening_flattens_below_the_cut_only() {
    let m = example();
    let top = m.a * m.alpha();
    let s = m.straighten(0.3).unwrap();
    assert!((s.alpha() - m.alpha()).abs() < 1e-12);
    assert!(s.t10 < m.t10);
    for k in 0..=1000 {
        let y = k as f64 / 1000.0;
        if y < 0.3 {
            assert!((s.u1(y) - m.u1(0.3)).abs() < 1e-12);
            assert_eq!(s.q2(y), 0.0);
        } else {
            assert!((s.u1(y) - m.u1(y)).abs() < 1e-12);
        }
    }
    assert!(matches!(m.straighten(0.05), Err(MechError::BadCut { .. })));
    assert!(matches!(m.straighten(top + 0.01), Err(MechError::BadCut { .. })));
    assert_eq!(m.straighten(m.v2_lower()).unwrap(), m);
}

#[test]
fn no_trade_region_is_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..50 {
        let m = common::random_line(&mut rng, 1.0, 6);
        let pts = m.z0_boundary(200).unwrap();
        for w in pts.windows(3) {
            let (d1, d2) = ([w[1][0] - w[0][0], w[1][1] - w[0][1]], [w[2][0] - w[1][0], w[2][1] - w[1][1]]);
            let cross = d1[0] * d2[1] - d1[1] * d2[0];
            // moving up the boundary the curve only turns one way
            assert!(cross >= -1e-12, "{m:?}: {cross}");
        }
    }
}

#[test]
fn line_extension_is_incentive_compatible() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..20 {
        let m = common::random_line(&mut rng, 1.0, 5);
        let d = Density::uniform_triangle(1.0).unwrap();
        for _ in 0..100 {
            let (x, y) = common::interior_point(&mut rng, &d, 0.0);
            let (x2, y2) = common::interior_point(&mut rng, &d, 0.0);
            let (q1, q2, _) = m.outcome(x2, y2);
            let lhs = m.payoff(x, y);
            let rhs = m.payoff(x2, y2) + (x - x2) * q1 + (y - y2) * q2;
            assert!(lhs >= rhs - 1e-9, "{m:?} at ({x}, {y}) vs ({x2}, {y2})");
        }
    }
}

#[test]
fn specs_round_trip_through_json() {
    let spec: MechanismSpec = serde_json::from_str(r#"{"kind":"line","t10":0.6,"steps":[[0.1,0.3],[0.6,1.0]]}"#).unwrap();
    let Mechanism::Line(m) = spec.build(&Density::uniform_triangle(1.0).unwrap().domain).unwrap() else {
        panic!("expected a line mechanism")
    };
    assert_eq!(m.steps, vec![(0.1, 0.3), (0.6, 1.0)]);
    let back = MechanismSpec::from(&Mechanism::Line(m));
    assert_eq!(back, spec);
    let bad: MechanismSpec = serde_json::from_str(r#"{"kind":"line","t10":0.6,"steps":[[0.5,0.3],[0.2,0.4]]}"#).unwrap();
    assert!(bad.build(&Density::uniform_triangle(1.0).unwrap().domain).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_is_the_fixed_point(seed in any::<u64>(), a in 0.3f64..1.5) {
        let m = common::random_line(&mut ChaCha8Rng::seed_from_u64(seed), a, 6);
        let alpha = m.alpha();
        if alpha > 0.0 && alpha < 1.0 {
            prop_assert!((alpha - (1.0 - m.u1(a * alpha))).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_payoff_is_convex_and_increasing(seed in any::<u64>()) {
        let m = common::random_line(&mut ChaCha8Rng::seed_from_u64(seed), 1.0, 6);
        let ys: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
        let u: Vec<f64> = ys.iter().map(|&y| m.u1(y)).collect();
        for w in u.windows(3) {
            prop_assert!(w[1] >= w[0] - 1e-12);
            prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-12);
        }
    }

    #[test]
    fn cover_is_idempotent_and_keeps_alpha(seed in any::<u64>()) {
        let m = common::random_constrained_line(&mut ChaCha8Rng::seed_from_u64(seed), 1.0, 0.0, 1.0);
        let c = m.cover().unwrap();
        prop_assert!((c.alpha() - m.alpha()).abs() < 1e-9);
        prop_assert_eq!(c.t10, m.t10);
        let cc = c.cover().unwrap();
        prop_assert_eq!(cc, c);
    }
}
