mod common;

use mechlab_core::phi::{
    check_ordered_conditions, check_sc, check_sch, lattice, ConditionSet, PhiEvaluator, PhiMode, ScConfig, Verdict,
};
use mechlab_core::{BaseDensity, Density};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dmv_with_closed_form() -> Vec<(String, Density)> {
    common::families(1.0)
        .into_iter()
        .chain(common::families(0.5))
        .filter(|(_, d)| d.domain.is_dmv() && d.closed_form_phi())
        .collect()
}

#[test]
fn closed_form_and_quadrature_agree() {
    let fams = dmv_with_closed_form();
    assert!(fams.len() >= 6);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (name, d) in fams {
        let cf = PhiEvaluator::new(&d, PhiMode::ClosedForm).unwrap();
        let qd = PhiEvaluator::new(&d, PhiMode::Quadrature).unwrap();
        for _ in 0..200 {
            let (x, y) = common::interior_point(&mut rng, &d, 1e-3);
            let (p, q) = (cf.phi(x, y), qd.phi(x, y));
            assert!((p - q).abs() < 1e-7, "{name} at ({x}, {y}): {p} vs {q}");
        }
    }
}

#[test]
fn scale_invariant_phi_ignores_the_second_value() {
    let d = Density::scale_invariant(BaseDensity::power(3.0).unwrap()).unwrap();
    let ev = PhiEvaluator::auto(&d).unwrap();
    let s = lattice(101);
    let mut diagonal = Vec::new();
    for &x in &s {
        let column: Vec<f64> = s.iter().filter(|&&y| y < x).map(|&y| ev.phi(x, y)).collect();
        let (lo, hi) = column.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &p| (l.min(p), h.max(p)));
        if !column.is_empty() {
            assert!(hi - lo < 1e-8, "column v1={x}: spread {}", hi - lo);
        }
        diagonal.push(ev.phi(x, x));
    }
    assert!(check_sc(&d, ConditionSet::SCH, &ScConfig::default()).unwrap().all_hold());
    assert!(diagonal.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn sch_verdict_is_the_pointwise_sign() {
    let cfg = ScConfig { n: 101, ..Default::default() };
    let s = lattice(cfg.n);
    let cases = [
        Density::uniform_triangle(1.0).unwrap(),
        Density::ordered_decreasing(BaseDensity::exponential(1.0).unwrap(), 1.0).unwrap(),
        Density::ordered_decreasing(BaseDensity::exponential(-5.0).unwrap(), 1.0).unwrap(),
        Density::ordered_increasing(BaseDensity::exponential(-6.0).unwrap(), 0.5).unwrap(),
        Density::imv_quadratic(),
    ];
    let mut saw_failure = false;
    for d in &cases {
        let a = d.domain.a;
        let mut negative = false;
        for i in 0..cfg.n {
            for j in 0..i {
                let (v1, v2) = if d.domain.is_dmv() { (s[i], a * s[j]) } else { (a * s[j], s[i]) };
                negative |= d.sch_integrand(v1, v2).unwrap() < -cfg.tol;
            }
        }
        let verdict = check_sch(d, &cfg).verdict;
        assert_eq!(verdict == Verdict::Holds, !negative, "{:?}", d.kind);
        saw_failure |= negative;
    }
    assert!(saw_failure, "at least one case must fail");
}

#[test]
fn ordered_model_matches_direct_checks() {
    for g in [BaseDensity::power(2.0).unwrap(), BaseDensity::exponential(1.0).unwrap(), BaseDensity::beta(2.0, 1.0).unwrap()] {
        let model = check_ordered_conditions(&g, 1.0).unwrap();
        let direct = check_sc(&Density::ordered_decreasing(g.clone(), 1.0).unwrap(), ConditionSet::ALL, &ScConfig::default()).unwrap();
        assert_eq!((model.sch, model.scv, model.scd), (direct.sch, direct.scv, direct.scd), "{g:?}");
    }
}

#[test]
fn steep_exponential_fails_with_a_witness() {
    let d = Density::ordered_decreasing(BaseDensity::exponential(-5.0).unwrap(), 1.0).unwrap();
    let r = check_sc(&d, ConditionSet::SCH, &ScConfig { n: 101, ..Default::default() }).unwrap();
    assert_eq!(r.sch, Some(Verdict::Fails));
    assert!(!r.witnesses.is_empty() && r.max_violation[0] > 0.0);
}

#[test]
fn reports_are_reproducible() {
    let d = Density::conditional_decreasing(BaseDensity::power(2.0).unwrap(), BaseDensity::uniform()).unwrap();
    let cfg = ScConfig { n: 151, ..Default::default() };
    let a = check_sc(&d, ConditionSet::ALL, &cfg).unwrap();
    let b = check_sc(&d, ConditionSet::ALL, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn row_integral_matches_pointwise_phi(x in 0.05f64..0.95, frac in 0.0f64..1.0) {
        let d = Density::ordered_decreasing(BaseDensity::power(2.0).unwrap(), 1.0).unwrap();
        let ev = PhiEvaluator::new(&d, PhiMode::Quadrature).unwrap();
        let y = frac * x;
        // trapezoid against the accumulated integral, on a fine mesh
        let n = 4000;
        let h = (1.0 - x) / n as f64;
        let trap: f64 = (0..=n).map(|k| {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * ev.phi(x + k as f64 * h, y)
        }).sum::<f64>() * h;
        prop_assert!((trap - ev.phi_row_integral(x, y)).abs() < 1e-6);
    }

    #[test]
    fn uniform_phi_sign_follows_two_thirds(x in 0.0f64..1.0, frac in 0.0f64..1.0) {
        let d = Density::uniform_triangle(1.0).unwrap();
        let ev = PhiEvaluator::auto(&d).unwrap();
        let p = ev.phi(x, frac * x);
        prop_assert!((p - 2.0 * (3.0 * x - 2.0)).abs() < 1e-12);
    }
}
