use mechlab_core::mechanism::DeterministicMechanism;
use mechlab_core::optimizer::{
    check_necessary_conditions, golden_max, imv_bundle_price, optimize_deterministic, sweep, uniform_closed_form, FocCase,
    Regime,
};
use mechlab_core::revenue::revenue_deterministic;
use mechlab_core::{BaseDensity, Density, MechError};
use proptest::prelude::*;

#[test]
fn search_matches_or_beats_the_closed_form() {
    for a in [0.2, 1.0 / 3.0, 0.5, 1.0, 2.0] {
        let d = Density::uniform_triangle(a).unwrap();
        let r = optimize_deterministic(&d).unwrap();
        let cf = uniform_closed_form(a).unwrap();
        let target = cf.unbundled_revenue.max(cf.bundle_revenue);
        assert!(r.revenue >= target - 1e-6, "a={a}: {} < {target}", r.revenue);
        if (a - 1.0 / 3.0).abs() > 1e-9 {
            assert_eq!(r.regime == Regime::Bundle, cf.regime == Regime::Bundle, "a={a}");
        }
    }
}

#[test]
fn interior_optimum_satisfies_the_conditions() {
    for d in [
        Density::uniform_triangle(1.0).unwrap(),
        Density::ordered_decreasing(BaseDensity::power(2.0).unwrap(), 1.0).unwrap(),
    ] {
        let r = optimize_deterministic(&d).unwrap();
        assert_eq!(r.regime, Regime::Interior);
        let nc = check_necessary_conditions(&d, r.best.p1, r.best.p2).unwrap();
        assert_eq!(nc.case, FocCase::Interior);
        assert!(nc.holds(1e-4, 1e-8), "{nc:?}");
        let res = r.foc_residuals.unwrap();
        assert!(res.iter().all(|x| x.abs() < 1e-4));
    }
}

#[test]
fn regime_flips_once_near_one_third() {
    let rows = sweep(0.2, 0.5, 31, Density::uniform_triangle).unwrap();
    let flips: Vec<usize> = (0..30).filter(|&k| rows[k].regime != rows[k + 1].regime).collect();
    assert_eq!(flips.len(), 1);
    let k = flips[0];
    assert!(rows[k].param <= 1.0 / 3.0 && 1.0 / 3.0 <= rows[k + 1].param);
    assert_eq!(rows[0].regime, Regime::Bundle);
    assert_eq!(rows[30].regime, Regime::Interior);
}

#[test]
fn bundle_price_fixed_points() {
    let oi = imv_bundle_price(&Density::ordered_increasing(BaseDensity::uniform(), 1.0).unwrap()).unwrap();
    assert!(oi.regular);
    assert!((oi.price - (2.0f64 / 3.0).sqrt()).abs() < 1e-5);
    assert!(oi.residual.abs() < 1e-8);
    let quad = imv_bundle_price(&Density::imv_quadratic()).unwrap();
    assert!(quad.regular && quad.residual.abs() < 1e-8);
    // the fixed point is the maximizer of B (1 - T(B))
    let sum = Density::imv_quadratic();
    let t = sum.sum_distribution();
    let (w, _) = golden_max(|w| w * (1.0 - t.cdf(w)), 0.0, 2.0, 1e-10);
    assert!((w - quad.price).abs() < 1e-6);
    assert_eq!(imv_bundle_price(&Density::uniform_triangle(1.0).unwrap()).unwrap_err(), MechError::WrongOrientation);
}

#[test]
fn conditions_reject_boundary_prices() {
    let d = Density::uniform_triangle(1.0).unwrap();
    assert!(matches!(check_necessary_conditions(&d, 0.5, 0.5), Err(MechError::OnBoundary(..))));
    assert!(matches!(check_necessary_conditions(&d, 0.5, 0.0), Err(MechError::OnBoundary(..))));
    assert_eq!(optimize_deterministic(&Density::imv_quadratic()).unwrap_err(), MechError::WrongOrientation);
}

#[test]
fn repeated_runs_are_identical() {
    let d = Density::uniform_triangle(0.7).unwrap();
    assert_eq!(optimize_deterministic(&d).unwrap(), optimize_deterministic(&d).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimum_beats_random_prices(a in 0.2f64..2.0, p1 in 0.0f64..1.0, frac in 0.0f64..1.0) {
        let d = Density::uniform_triangle(a).unwrap();
        let r = optimize_deterministic(&d).unwrap();
        let other = revenue_deterministic(&d, &DeterministicMechanism::new(p1, frac * a));
        prop_assert!(r.revenue >= other - 1e-9);
    }
}
