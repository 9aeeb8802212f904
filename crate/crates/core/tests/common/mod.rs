#![allow(dead_code)]

use mechlab_core::mechanism::StepLineMechanism;
use rand::Rng;

/// A valid step line mechanism with up to `max_steps` steps.
pub fn random_line(rng: &mut impl Rng, a: f64, max_steps: usize) -> StepLineMechanism {
    loop {
        let t10 = rng.gen_range(0.0..=1.0);
        let k = rng.gen_range(0..=max_steps);
        let mut breaks: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..a)).collect();
        let mut levels: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        breaks.sort_by(f64::total_cmp);
        levels.sort_by(f64::total_cmp);
        if k > 0 && rng.gen_bool(0.3) {
            levels[k - 1] = 1.0;
        }
        if let Ok(m) = StepLineMechanism::new(a, t10, breaks.into_iter().zip(levels).collect()) {
            return m;
        }
    }
}

/// A constrained line mechanism whose first step lies below `aα`, with
/// first-unit price drawn from `t10_range`.
pub fn random_constrained_line(rng: &mut impl Rng, a: f64, t10_lo: f64, t10_hi: f64) -> StepLineMechanism {
    loop {
        let base = random_line(rng, a, 4);
        let t10 = rng.gen_range(t10_lo..=t10_hi);
        let Ok(m) = StepLineMechanism::new(a, t10, base.steps.clone()) else { continue };
        let top = a * m.alpha();
        if !(m.v2_lower() < top) {
            continue;
        }
        // above aα only the level reached there or the full unit may follow
        let mut steps: Vec<(f64, f64)> = m.steps.iter().copied().filter(|s| s.0 <= top).collect();
        let last = steps.last().map_or(0.0, |s| s.1);
        if last < 1.0 && top < a && rng.gen_bool(0.5) {
            steps.push((rng.gen_range(top..a).max(top + 1e-9).min(a), 1.0));
        }
        let Ok(c) = StepLineMechanism::new(a, t10, steps) else { continue };
        if c.diagnostics().is_constrained && c.v2_lower() < a * c.alpha() {
            return c;
        }
    }
}

use mechlab_core::{BaseDensity, Density};

/// Every built-in analytic family at slope `a`; families tied to `a = 1`
/// appear only then.
pub fn families(a: f64) -> Vec<(String, Density)> {
    let bases = [
        ("uniform", BaseDensity::uniform()),
        ("power(2)", BaseDensity::power(2.0).unwrap()),
        ("exponential(1.5)", BaseDensity::exponential(1.5).unwrap()),
        ("beta(2,0.8)", BaseDensity::beta(2.0, 0.8).unwrap()),
    ];
    let mut out = vec![("uniform-triangle".to_string(), Density::uniform_triangle(a).unwrap())];
    for (name, g) in &bases {
        out.push((format!("ordered-decreasing {name}"), Density::ordered_decreasing(g.clone(), a).unwrap()));
        out.push((format!("ordered-increasing {name}"), Density::ordered_increasing(g.clone(), a).unwrap()));
    }
    if a == 1.0 {
        out.push((
            "conditional power(2)/exponential(1)".into(),
            Density::conditional_decreasing(BaseDensity::power(2.0).unwrap(), BaseDensity::exponential(1.0).unwrap()).unwrap(),
        ));
        out.push(("scale-invariant power(3)".into(), Density::scale_invariant(BaseDensity::power(3.0).unwrap()).unwrap()));
        out.push(("imv-quadratic".into(), Density::imv_quadratic()));
    }
    out
}

/// A uniformly random point of the support at distance at least `margin`
/// from its boundary (in each coordinate).
pub fn interior_point(rng: &mut impl Rng, d: &Density, margin: f64) -> (f64, f64) {
    loop {
        let v1 = rng.gen_range(0.0..d.domain.v1_max());
        let v2 = rng.gen_range(0.0..d.domain.v2_max());
        if d.domain.is_interior(v1, v2, margin) {
            return (v1, v2);
        }
    }
}
