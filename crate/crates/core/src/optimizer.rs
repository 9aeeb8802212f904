//! The best deterministic price pair, its first-order certificate, the
//! closed forms for the uniform triangle and the optimal bundle price.

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{MechError, Result};
use crate::mechanism::DeterministicMechanism;
use crate::phi::PhiEvaluator;
use crate::revenue::{revenue_deterministic, revenue_deterministic_tol};

/// Points per axis of the coarse price grid.
pub const COARSE_GRID: usize = 200;
/// Price resolution of the golden-section refinement.
pub const PRICE_TOL: f64 = 1e-7;
/// Resolution of the exhaustive bundle-price search.
pub const BUNDLE_SCAN_STEP: f64 = 1e-5;
const POLISH_STEPS: usize = 8;
const SWEEP_LIMIT: usize = 200;
const SCAN_TOL: f64 = 1e-8;

/// Where a price pair sits relative to the support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `a p1 > p2 > 0`.
    Interior,
    /// `a p1 <= p2`: the two units are effectively priced separately.
    SeparateEdge,
    /// `p2 = 0`.
    Bundle,
}

impl Regime {
    pub fn of(a: f64, p1: f64, p2: f64) -> Self {
        if p2 == 0.0 {
            Regime::Bundle
        } else if a * p1 > p2 {
            Regime::Interior
        } else {
            Regime::SeparateEdge
        }
    }

    fn rank(self) -> u8 {
        match self {
            Regime::Bundle => 2,
            Regime::SeparateEdge => 1,
            Regime::Interior => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub p1: f64,
    pub p2: f64,
    pub revenue: f64,
    pub regime: Regime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best: DeterministicMechanism,
    pub revenue: f64,
    pub regime: Regime,
    pub candidates: Vec<Candidate>,
    /// Residuals of the two integral conditions, for interior optima.
    pub foc_residuals: Option<[f64; 2]>,
}

/// Maximizes a unimodal `f` on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(x1, f1), (x2, f2), (x, fx)]
        .into_iter()
        .fold((x, fx), |best, c| if c.1 > best.1 { c } else { best })
}

fn better(c: &Candidate, best: &Candidate) -> bool {
    (c.revenue, c.p1, c.p2) > (best.revenue, best.p1, best.p2)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Coarse grid, then golden-section refinement inside each regime; the
/// edges `p2 = 0` and `p2 = a p1` are searched as one-dimensional problems.
pub fn optimize_deterministic(density: &Density) -> Result<OptResult> {
    if !density.domain.is_dmv() {
        return Err(MechError::WrongOrientation);
    }
    let a = density.domain.a;
    let rev = |p1: f64, p2: f64| revenue_deterministic(density, &DeterministicMechanism::new(p1, p2));
    let scan = |p1: f64, p2: f64| Candidate {
        p1,
        p2,
        revenue: revenue_deterministic_tol(density, &DeterministicMechanism::new(p1, p2), SCAN_TOL),
        regime: Regime::of(a, p1, p2),
    };

    let n = COARSE_GRID;
    let p1s = linspace(0.0, 1.0, n);
    let p2s = linspace(0.0, a, n);
    let coarse: Vec<Candidate> = crate::par::map_range(n * n, |k| scan(p1s[k % n], p2s[k / n]));
    let best_in = |regime: Regime| {
        coarse
            .iter()
            .filter(|c| c.regime == regime)
            .fold(None::<Candidate>, |b, c| match b {
                Some(b) if !better(c, &b) => Some(b),
                _ => Some(*c),
            })
    };
    let (h1, h2) = (1.0 / (n - 1) as f64, a / (n - 1) as f64);
    let mut candidates = Vec::new();

    if let Some(start) = best_in(Regime::Interior) {
        let c = refine_2d(&rev, a, start, h1, h2);
        candidates.push(polish_interior(density, c).unwrap_or(c));
    }
    if let Some(c) = separate_candidate(density) {
        candidates.push(c);
    }
    // the edge p2 = a p1 (for a > 1 only p1 <= 1 is admissible)
    let edge = |p1: f64| rev(p1, (a * p1).min(a));
    let grid: Vec<f64> = linspace(0.0, 1.0, 4 * n);
    let k = (0..grid.len()).fold(0, |k, i| if edge(grid[i]) > edge(grid[k]) { i } else { k });
    let (lo, hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let (p1, _) = golden_max(edge, lo, hi, PRICE_TOL);
    let p2 = (a * p1).min(a);
    candidates.push(Candidate { p1, p2, revenue: rev(p1, p2), regime: Regime::SeparateEdge });

    let (b, _) = best_bundle(|w| rev(w, 0.0), density.domain.w_max());
    candidates.push(Candidate { p1: b, p2: 0.0, revenue: rev(b, 0.0), regime: Regime::Bundle });

    // Ties within roundoff go to the more specific regime.
    let best = *candidates
        .iter()
        .reduce(|x, y| {
            let close = (x.revenue - y.revenue).abs() <= 1e-12;
            if close && x.regime.rank() != y.regime.rank() {
                if x.regime.rank() > y.regime.rank() {
                    x
                } else {
                    y
                }
            } else if better(y, x) {
                y
            } else {
                x
            }
        })
        .expect("at least the bundle candidate");
    let foc_residuals = if best.regime == Regime::Interior && best.p1 < 1.0 {
        check_necessary_conditions(density, best.p1, best.p2).ok().map(|r| r.residuals)
    } else {
        None
    };
    Ok(OptResult {
        best: DeterministicMechanism::new(best.p1, best.p2),
        revenue: best.revenue,
        regime: best.regime,
        candidates,
        foc_residuals,
    })
}

/// Coordinate golden-section ascent from `start`, staying strictly inside
/// `0 < p2 < a p1`.
fn refine_2d(
    rev: &impl Fn(f64, f64) -> f64,
    a: f64,
    start: Candidate,
    h1: f64,
    h2: f64,
) -> Candidate {
    let (mut p1, mut p2) = (start.p1, start.p2);
    let (mut s1, mut s2) = (h1, h2);
    let floor = 1e-12;
    for _ in 0..SWEEP_LIMIT {
        let (old1, old2) = (p1, p2);
        let (lo, hi) = ((p1 - s1).max(p2 / a + floor), (p1 + s1).min(1.0));
        if hi > lo {
            p1 = golden_max(|x| rev(x, p2), lo, hi, PRICE_TOL).0;
        }
        let (lo, hi) = ((p2 - s2).max(floor), (p2 + s2).min(a * p1 - floor));
        if hi > lo {
            p2 = golden_max(|y| rev(p1, y), lo, hi, PRICE_TOL).0;
        }
        let moved = (p1 - old1).abs().max((p2 - old2).abs());
        if moved < PRICE_TOL {
            break;
        }
        // keep the bracket a few steps wide around the current point
        s1 = (4.0 * (p1 - old1).abs()).clamp(10.0 * PRICE_TOL, h1);
        s2 = (4.0 * (p2 - old2).abs()).clamp(10.0 * PRICE_TOL, h2);
    }
    Candidate { p1, p2, revenue: rev(p1, p2), regime: Regime::of(a, p1, p2) }
}

/// Newton steps on the two integral conditions. Revenue is flat at the
/// optimum, so golden section alone leaves prices about `PRICE_TOL` off;
/// the conditions pin them to quadrature accuracy. `None` when the polish
/// leaves the interior, loses revenue or fails to reduce the residuals.
fn polish_interior(density: &Density, c: Candidate) -> Option<Candidate> {
    let a = density.domain.a;
    let res = |p1: f64, p2: f64| check_necessary_conditions(density, p1, p2).ok().filter(|n| n.case == FocCase::Interior).map(|n| n.residuals);
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let (mut p1, mut p2) = (c.p1, c.p2);
    let mut r = res(p1, p2)?;
    let start = norm(r);
    let h = 1e-6;
    for _ in 0..POLISH_STEPS {
        if norm(r) < 1e-13 {
            break;
        }
        let r1 = res(p1 + h, p2)?;
        let r2 = res(p1, p2 + h)?;
        let j = [[(r1[0] - r[0]) / h, (r2[0] - r[0]) / h], [(r1[1] - r[1]) / h, (r2[1] - r[1]) / h]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let d1 = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let d2 = (r[1] * j[0][0] - r[0] * j[1][0]) / det;
        let (n1, n2) = (p1 - d1, p2 - d2);
        let Some(rn) = res(n1, n2) else { return None };
        if norm(rn) >= norm(r) {
            break;
        }
        (p1, p2, r) = (n1, n2, rn);
    }
    let revenue = revenue_deterministic(density, &DeterministicMechanism::new(p1, p2));
    let improved = norm(r) < start && revenue >= c.revenue - 1e-9 && Regime::of(a, p1, p2) == Regime::Interior;
    improved.then_some(Candidate { p1, p2, revenue, regime: Regime::Interior })
}

/// With `a p1 <= p2` every buyer of the second unit also buys the first,
/// so revenue separates into `p1 (1 - F¹(p1)) + p2 (1 - F²(p2))`. The
/// unconstrained maximizers are a candidate when they respect `a p1 < p2`;
/// otherwise the optimum of the region lies on the edge, searched apart.
fn separate_candidate(density: &Density) -> Option<Candidate> {
    let a = density.domain.a;
    let m = density.marginal_cdfs();
    let (p1, _) = best_bundle(|x| x * (1.0 - m.cdf1(x)), 1.0);
    let (p2, _) = best_bundle(|y| y * (1.0 - m.cdf2(y)), a);
    (a * p1 < p2 && p2 > 0.0).then(|| Candidate {
        p1,
        p2,
        revenue: revenue_deterministic(density, &DeterministicMechanism::new(p1, p2)),
        regime: Regime::SeparateEdge,
    })
}

/// Maximizes `revenue(w)` over `[0, w_max]`: a uniform scan, then golden
/// section around the best scan point.
fn best_bundle(revenue: impl Fn(f64) -> f64 + Sync, w_max: f64) -> (f64, f64) {
    let grid = linspace(0.0, w_max, 4 * COARSE_GRID);
    let vals = crate::par::map_slice(&grid, |&w| revenue(w));
    let k = (0..grid.len()).fold(0, |k, i| if vals[i] > vals[k] { i } else { k });
    let (lo, hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    golden_max(revenue, lo, hi, PRICE_TOL * 1e-2)
}

/// Which form the first-order conditions take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocCase {
    /// `a p1 > p2`: the two integral conditions on Φ.
    Interior,
    /// `a p1 < p2`: a monopoly price for each marginal.
    Separate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecessaryConditions {
    pub case: FocCase,
    pub residuals: [f64; 2],
    /// `Φ(p1, p2)`, which must be nonpositive (interior case).
    pub phi_at_prices: Option<f64>,
    /// `Φ(p1, 0)`, which must be nonnegative (interior case).
    pub phi_at_base: Option<f64>,
}

impl NecessaryConditions {
    pub fn holds(&self, residual_tol: f64, sign_tol: f64) -> bool {
        self.residuals.iter().all(|r| r.abs() <= residual_tol)
            && self.phi_at_prices.map_or(true, |p| p <= sign_tol)
            && self.phi_at_base.map_or(true, |p| p >= -sign_tol)
    }
}

/// Residuals of the first-order conditions at an interior price pair.
///
/// For `a p1 > p2`, with `α = (p1 + p2) / (1 + a)`:
/// `∫_0^{p2} Φ(p1, v2) dv2` and
/// `∫_{p2}^{aα} Φ((1+a)α - v2, v2) dv2 + ∫_{aα}^a Φ(v2/a, v2) dv2`.
/// For `a p1 < p2`: `p_i - (1 - F^i(p_i)) / f^i(p_i)`.
pub fn check_necessary_conditions(density: &Density, p1: f64, p2: f64) -> Result<NecessaryConditions> {
    let a = density.domain.a;
    if !(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < a) {
        return Err(MechError::OnBoundary(p1, p2));
    }
    if a * p1 == p2 {
        return Err(MechError::OnBoundary(p1, p2));
    }
    let ev = PhiEvaluator::auto(density)?;
    if a * p1 > p2 {
        let quad = density.quad().with_tol(1e-11);
        let mut breaks: Vec<f64> = density.kinks().v2.to_vec();
        breaks.extend(density.kinks().v1.iter().map(|x| a * x));
        let first = quad.integrate_with_breaks(|y| ev.phi(p1, y), 0.0, p2, &breaks);
        let alpha = (p1 + p2) / (1.0 + a);
        let top = a * alpha;
        let mut slant_breaks: Vec<f64> = density.kinks().v2.to_vec();
        slant_breaks.extend(density.kinks().v1.iter().map(|x| p1 + p2 - x));
        let slant = quad.integrate_with_breaks(|y| ev.phi(p1 + p2 - y, y), p2, top, &slant_breaks);
        let second = slant + quad.integrate_with_breaks(|y| ev.phi(y / a, y), top, a, &breaks);
        Ok(NecessaryConditions {
            case: FocCase::Interior,
            residuals: [first, second],
            phi_at_prices: Some(ev.phi(p1, p2)),
            phi_at_base: Some(ev.phi(p1, 0.0)),
        })
    } else {
        let m = density.marginal_cdfs();
        let r1 = p1 - (1.0 - m.cdf1(p1)) / m.pdf1(p1);
        let r2 = p2 - (1.0 - m.cdf2(p2)) / m.pdf2(p2);
        Ok(NecessaryConditions { case: FocCase::Separate, residuals: [r1, r2], phi_at_prices: None, phi_at_base: None })
    }
}

/// The two candidate optima on the uniform triangle with slope `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformSolution {
    pub unbundled: DeterministicMechanism,
    pub unbundled_revenue: f64,
    pub bundle_price: f64,
    pub bundle_revenue: f64,
    pub regime: Regime,
}

/// `(2/3, (2a - sqrt(a(1+a)))/3)` against the bundle at `sqrt((1+a)/3)`,
/// compared by direct revenue.
pub fn uniform_closed_form(a: f64) -> Result<UniformSolution> {
    let density = Density::uniform_triangle(a)?;
    let unbundled = DeterministicMechanism::new(2.0 / 3.0, (2.0 * a - (a * (1.0 + a)).sqrt()) / 3.0);
    let bundle_price = ((1.0 + a) / 3.0).sqrt();
    let unbundled_revenue = revenue_deterministic(&density, &unbundled);
    let bundle_revenue = revenue_deterministic(&density, &DeterministicMechanism::bundle(bundle_price));
    let regime = if bundle_revenue > unbundled_revenue { Regime::Bundle } else { Regime::Interior };
    Ok(UniformSolution { unbundled, unbundled_revenue, bundle_price, bundle_revenue, regime })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundlePrice {
    pub price: f64,
    pub revenue: f64,
    /// `B τ(B) - (1 - T(B))`.
    pub residual: f64,
    /// Whether `w - (1 - T(w)) / τ(w)` was increasing on the scan grid.
    pub regular: bool,
}

/// The revenue-maximizing price for the bundle of both units. When the
/// virtual value of `v1 + v2` is increasing this is the root of
/// `B = (1 - T(B)) / τ(B)`; otherwise `w (1 - T(w))` is maximized by
/// exhaustive scan.
pub fn imv_bundle_price(density: &Density) -> Result<BundlePrice> {
    if density.domain.is_dmv() {
        return Err(MechError::WrongOrientation);
    }
    let sum = density.sum_distribution();
    let w_max = density.domain.w_max();
    let h = |w: f64| w * sum.pdf(w) - (1.0 - sum.cdf(w));
    let grid = linspace(0.0, w_max, 2001);
    let vv: Vec<Option<f64>> = crate::par::map_slice(&grid[1..grid.len() - 1], |&w| {
        let t = sum.pdf(w);
        (t > 0.0).then(|| w - (1.0 - sum.cdf(w)) / t)
    });
    let known: Vec<f64> = vv.iter().flatten().copied().collect();
    let regular = known.windows(2).all(|p| p[1] >= p[0] - 1e-9);
    let revenue = |w: f64| w * (1.0 - sum.cdf(w));
    let price = if regular {
        let hs = crate::par::map_slice(&grid, |&w| h(w));
        match (1..grid.len()).find(|&k| hs[k] >= 0.0) {
            Some(k) => bisect(h, grid[k - 1], grid[k]),
            None => w_max,
        }
    } else {
        let n = (w_max / BUNDLE_SCAN_STEP).ceil() as usize + 1;
        let fine = linspace(0.0, w_max, n);
        let vals = crate::par::map_slice(&fine, |&w| revenue(w));
        let k = (0..n).fold(0, |k, i| if vals[i] > vals[k] { i } else { k });
        golden_max(revenue, fine[k.saturating_sub(1)], fine[(k + 1).min(n - 1)], 1e-12).0
    };
    Ok(BundlePrice { price, revenue: revenue(price), residual: h(price), regular })
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub p1: f64,
    pub p2: f64,
    pub regime: Regime,
    pub revenue: f64,
}

/// Optimizes at `n` evenly spaced parameter values in `[from, to]`.
pub fn sweep(from: f64, to: f64, n: usize, build: impl Fn(f64) -> Result<Density>) -> Result<Vec<SweepRow>> {
    if n < 2 {
        return Err(MechError::InvalidArgument("a sweep needs at least 2 points".into()));
    }
    linspace(from, to, n)
        .into_iter()
        .map(|param| {
            let r = optimize_deterministic(&build(param)?)?;
            Ok(SweepRow { param, p1: r.best.p1, p2: r.best.p2, regime: r.regime, revenue: r.revenue })
        })
        .collect()
}
