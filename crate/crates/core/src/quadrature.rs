//! Composite Gauss–Legendre quadrature with adaptive panel splitting.
//!
//! Each panel is evaluated with an `order`-point rule and with the
//! `order / 2`-point rule; the panel is accepted when the two agree to the
//! local tolerance, otherwise it is halved. Analytic densities use 64-point
//! panels. Piecewise-polynomial integrands (grid densities, payoff grids)
//! pass their kinks explicitly and use short 8-point panels instead.

use std::sync::OnceLock;

const MAX_DEPTH: u32 = 26;
const REL_FLOOR: f64 = 1e-13;
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn rule(order: usize) -> &'static Rule {
    static R4: OnceLock<Rule> = OnceLock::new();
    static R8: OnceLock<Rule> = OnceLock::new();
    static R16: OnceLock<Rule> = OnceLock::new();
    static R32: OnceLock<Rule> = OnceLock::new();
    static R64: OnceLock<Rule> = OnceLock::new();
    let cell = match order {
        4 => &R4,
        8 => &R8,
        16 => &R16,
        32 => &R32,
        64 => &R64,
        _ => panic!("unsupported Gauss-Legendre order {order}"),
    };
    cell.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(order);
        Rule { nodes, weights }
    })
}

/// Rule value on `[a, b]` and the same sum of absolute terms, which sets
/// the roundoff scale of the estimate.
fn apply(r: &Rule, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let (s, s_abs) = r
        .nodes
        .iter()
        .zip(&r.weights)
        .map(|(x, w)| w * f(mid + half * x))
        .fold((0.0, 0.0), |(s, sa), t| (s + t, sa + t.abs()));
    (s * half, s_abs * half.abs())
}

/// An adaptive composite Gauss–Legendre integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    /// Nodes per panel (4, 8, 16, 32 or 64).
    pub order: usize,
    /// Absolute tolerance for the whole integral.
    pub tol: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::STANDARD
    }
}

impl Quadrature {
    /// 64-point panels, absolute tolerance 1e-9.
    pub const STANDARD: Quadrature = Quadrature { order: 64, tol: 1e-9 };
    /// 8-point panels for piecewise-polynomial integrands with known kinks.
    pub const PANEL: Quadrature = Quadrature { order: 8, tol: 1e-9 };

    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }

    /// Integrates `f` over `[a, b]`; a reversed interval yields the negated
    /// integral and an empty one yields zero.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        if b == a {
            return 0.0;
        }
        if b < a {
            return -self.integrate(f, b, a);
        }
        let fine = rule(self.order);
        let coarse = rule(self.order / 2);
        adapt(fine, coarse, &f, a, b, self.tol, 0)
    }

    /// Integrates `f` over `[a, b]`, splitting first at every breakpoint
    /// strictly inside the interval. `breaks` need not be sorted.
    pub fn integrate_with_breaks(
        &self,
        f: impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> f64 {
        if breaks.is_empty() {
            return self.integrate(f, a, b);
        }
        if b <= a {
            return if b == a { 0.0 } else { -self.integrate_with_breaks(f, b, a, breaks) };
        }
        let pts = interior_points(a, b, breaks);
        let n_pieces = pts.len() - 1;
        let local = Quadrature { tol: self.tol / n_pieces as f64, ..*self };
        pts.windows(2).map(|w| local.integrate(&f, w[0], w[1])).sum()
    }
}

/// `a`, the sorted breakpoints strictly inside `(a, b)`, then `b`.
pub(crate) fn interior_points(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let scale = (b - a).abs().max(1e-300);
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a + 1e-14 * scale && x < b - 1e-14 * scale)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * scale);
    pts
}

fn adapt(
    fine: &Rule,
    coarse: &Rule,
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (hi, hi_abs) = apply(fine, f, a, b);
    let (lo, _) = apply(coarse, f, a, b);
    let err = (hi - lo).abs();
    let floor = (REL_FLOOR * hi.abs()).max(ROUNDOFF * hi_abs);
    if err <= tol.max(floor) || depth >= MAX_DEPTH || !err.is_finite() {
        return hi;
    }
    let mid = 0.5 * (a + b);
    adapt(fine, coarse, f, a, mid, 0.5 * tol, depth + 1)
        + adapt(fine, coarse, f, mid, b, 0.5 * tol, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for &n in &[4usize, 8, 16, 32, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "weights n={n}");
            // degree 2n-1 is exact
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = 2.0 / deg as f64; // even power deg-1
            assert!((s - exact).abs() < 1e-12, "n={n}: {s} vs {exact}");
        }
    }

    #[test]
    fn adaptive_handles_smooth_and_log_singular() {
        let q = Quadrature::STANDARD;
        let v = q.integrate(|x| x.sin(), 0.0, std::f64::consts::PI);
        assert!((v - 2.0).abs() < 1e-12);
        let v = q.integrate(|x| -x.ln(), 0.0, 1.0);
        assert!((v - 1.0).abs() < 1e-9, "{v}");
        let v = q.integrate(|x| x, 1.0, 0.0);
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn breaks_make_kinked_integrands_exact() {
        let q = Quadrature::PANEL;
        let f = |x: f64| (x - 0.3).abs() + (x - 0.71).max(0.0);
        let exact = (0.3f64.powi(2) + 0.7f64.powi(2)) / 2.0 + 0.29f64.powi(2) / 2.0;
        let v = q.integrate_with_breaks(f, 0.0, 1.0, &[0.71, 0.3, 2.0]);
        assert!((v - exact).abs() < 1e-14, "{v} vs {exact}");
    }
}
