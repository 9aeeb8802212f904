//! Joint densities on the triangular type space.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::base::BaseDensity;
use crate::domain::{Domain, Orientation};
use crate::error::{MechError, Result};
use crate::grid::GridData;
use crate::quadrature::Quadrature;
use crate::region::{integrate_strip, Affine, Kinks};

/// Step of the central differences used for grid gradients.
pub const FD_STEP: f64 = 1e-5;
/// Resolution of the grid produced by [`Density::fosd_tilt`].
pub const TILT_NODES: usize = 201;

#[derive(Clone, Debug, PartialEq)]
pub enum DensityKind {
    /// `f = 2 / a` on the DMV triangle.
    UniformTriangle,
    /// `f = (2/a) g(v1) g(v2/a)`: the larger and smaller of two iid draws.
    OrderedDecreasing(BaseDensity),
    /// `f = g1(v1) g2(v2) / (1 - G1(v2))` on `1 >= v1 >= v2 >= 0`.
    ConditionalDecreasing(BaseDensity, BaseDensity),
    /// `f = g(v1) / v1` on `1 >= v1 >= v2 >= 0`.
    ScaleInvariant(BaseDensity),
    /// `f = (2/a) g(v1/a) g(v2)` on the IMV triangle.
    OrderedIncreasing(BaseDensity),
    /// `f = (12/11)(2 - v1^2)` on `0 <= v1 <= v2 <= 1`.
    ImvQuadratic,
    Grid(Arc<GridData>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    pub domain: Domain,
    pub kind: DensityKind,
}

impl Density {
    pub fn new(domain: Domain, kind: DensityKind) -> Result<Self> {
        let need = |o: Orientation, unit_a: bool| -> Result<()> {
            if domain.orientation != o {
                return Err(MechError::InvalidDensity(format!(
                    "{kind:?} requires orientation {o:?}"
                )));
            }
            if unit_a && domain.a != 1.0 {
                return Err(MechError::InvalidDensity(format!("{kind:?} requires a = 1")));
            }
            Ok(())
        };
        match &kind {
            DensityKind::UniformTriangle | DensityKind::OrderedDecreasing(_) => need(Orientation::Dmv, false)?,
            DensityKind::ConditionalDecreasing(..) | DensityKind::ScaleInvariant(_) => {
                need(Orientation::Dmv, true)?
            }
            DensityKind::OrderedIncreasing(_) => need(Orientation::Imv, false)?,
            DensityKind::ImvQuadratic => need(Orientation::Imv, true)?,
            DensityKind::Grid(g) => {
                if g.domain != domain {
                    return Err(MechError::InvalidDensity("grid domain mismatch".into()));
                }
            }
        }
        Ok(Self { domain, kind })
    }

    pub fn uniform_triangle(a: f64) -> Result<Self> {
        Self::new(Domain::dmv(a)?, DensityKind::UniformTriangle)
    }

    pub fn ordered_decreasing(g: BaseDensity, a: f64) -> Result<Self> {
        Self::new(Domain::dmv(a)?, DensityKind::OrderedDecreasing(g))
    }

    pub fn conditional_decreasing(g1: BaseDensity, g2: BaseDensity) -> Result<Self> {
        Self::new(Domain::dmv(1.0)?, DensityKind::ConditionalDecreasing(g1, g2))
    }

    pub fn scale_invariant(g: BaseDensity) -> Result<Self> {
        Self::new(Domain::dmv(1.0)?, DensityKind::ScaleInvariant(g))
    }

    pub fn ordered_increasing(g: BaseDensity, a: f64) -> Result<Self> {
        Self::new(Domain::imv(a)?, DensityKind::OrderedIncreasing(g))
    }

    pub fn imv_quadratic() -> Self {
        Self { domain: Domain { orientation: Orientation::Imv, a: 1.0 }, kind: DensityKind::ImvQuadratic }
    }

    pub fn from_grid(grid: GridData) -> Self {
        Self { domain: grid.domain, kind: DensityKind::Grid(Arc::new(grid)) }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.kind, DensityKind::Grid(_))
    }

    /// Whether Φ has a closed form for this family.
    pub fn closed_form_phi(&self) -> bool {
        matches!(
            self.kind,
            DensityKind::UniformTriangle
                | DensityKind::OrderedDecreasing(_)
                | DensityKind::ConditionalDecreasing(..)
                | DensityKind::ScaleInvariant(_)
        )
    }

    /// Quadrature rule suited to this density's smoothness.
    pub fn quad(&self) -> Quadrature {
        if self.is_grid() {
            Quadrature::PANEL
        } else {
            Quadrature::STANDARD
        }
    }

    pub fn kinks(&self) -> Kinks<'_> {
        match &self.kind {
            DensityKind::Grid(g) => g.kinks(),
            _ => Kinks::NONE,
        }
    }

    /// `f(v)`, zero outside the closed support.
    pub fn eval_f(&self, v1: f64, v2: f64) -> f64 {
        if !self.domain.contains(v1, v2) {
            return 0.0;
        }
        self.f_inside(v1, v2)
    }

    /// The interior formula, evaluated without a support check.
    pub(crate) fn f_inside(&self, v1: f64, v2: f64) -> f64 {
        let a = self.domain.a;
        match &self.kind {
            DensityKind::UniformTriangle => 2.0 / a,
            DensityKind::OrderedDecreasing(g) => 2.0 / a * g.pdf(v1) * g.pdf(v2 / a),
            DensityKind::ConditionalDecreasing(g1, g2) => g1.pdf(v1) * g2.pdf(v2) / g1.sf(v2),
            DensityKind::ScaleInvariant(g) => g.pdf(v1) / v1,
            DensityKind::OrderedIncreasing(g) => 2.0 / a * g.pdf(v1 / a) * g.pdf(v2),
            DensityKind::ImvQuadratic => 12.0 / 11.0 * (2.0 - v1 * v1),
            DensityKind::Grid(g) => g.interp(v1, v2),
        }
    }

    /// `(∂f/∂v1, ∂f/∂v2)`. Analytic for the built-in families; central
    /// differences clipped to the support for grids.
    pub fn eval_grad_f(&self, v1: f64, v2: f64) -> Result<[f64; 2]> {
        let a = self.domain.a;
        Ok(match &self.kind {
            DensityKind::UniformTriangle => [0.0, 0.0],
            DensityKind::OrderedDecreasing(g) => {
                let s = v2 / a;
                [2.0 / a * g.dpdf(v1) * g.pdf(s), 2.0 / (a * a) * g.pdf(v1) * g.dpdf(s)]
            }
            DensityKind::ConditionalDecreasing(g1, g2) => {
                let s1 = g1.sf(v2);
                let tau = g2.pdf(v2) / s1;
                let dtau = (g2.dpdf(v2) * s1 + g2.pdf(v2) * g1.pdf(v2)) / (s1 * s1);
                [g1.dpdf(v1) * tau, g1.pdf(v1) * dtau]
            }
            DensityKind::ScaleInvariant(g) => [g.dpdf(v1) / v1 - g.pdf(v1) / (v1 * v1), 0.0],
            DensityKind::OrderedIncreasing(g) => {
                let s = v1 / a;
                [2.0 / (a * a) * g.dpdf(s) * g.pdf(v2), 2.0 / a * g.pdf(s) * g.dpdf(v2)]
            }
            DensityKind::ImvQuadratic => [-24.0 / 11.0 * v1, 0.0],
            DensityKind::Grid(_) => return self.fd_gradient(v1, v2),
        })
    }

    fn fd_gradient(&self, v1: f64, v2: f64) -> Result<[f64; 2]> {
        if !self.domain.is_interior(v1, v2, 1e-12) {
            return Err(MechError::BoundaryPoint(v1, v2));
        }
        Ok(self.fd_gradient_clipped(v1, v2))
    }

    /// Central differences with both probes kept inside the support; also
    /// defined on the boundary, where it degrades to a one-sided quotient.
    fn fd_gradient_clipped(&self, v1: f64, v2: f64) -> [f64; 2] {
        let d = &self.domain;
        let h = FD_STEP;
        let (rlo, rhi) = d.row(v2);
        let (x_minus, x_plus) = ((v1 - h).max(rlo), (v1 + h).min(rhi));
        let (clo, chi) = d.column(v1);
        let (y_minus, y_plus) = ((v2 - h).max(clo), (v2 + h).min(chi));
        let d1 = (self.f_inside(x_plus, v2) - self.f_inside(x_minus, v2)) / (x_plus - x_minus);
        let d2 = (self.f_inside(v1, y_plus) - self.f_inside(v1, y_minus)) / (y_plus - y_minus);
        [d1, d2]
    }

    /// `3f + v·∇f`, the integrand of the horizontal single-crossing test.
    pub fn sch_integrand(&self, v1: f64, v2: f64) -> Result<f64> {
        let [f1, f2] = self.eval_grad_f(v1, v2)?;
        Ok(3.0 * self.f_inside(v1, v2) + v1 * f1 + v2 * f2)
    }

    /// As [`Density::sch_integrand`], but total. Grids use the exact
    /// gradient of the interpolant, which is piecewise polynomial and free
    /// of difference-quotient roundoff, so quadrature over it converges.
    pub(crate) fn sch_integrand_total(&self, v1: f64, v2: f64) -> f64 {
        let [f1, f2] = match &self.kind {
            DensityKind::Grid(g) => g.interp_grad(v1, v2),
            _ => self.eval_grad_f(v1, v2).unwrap_or([f64::NAN, f64::NAN]),
        };
        3.0 * self.f_inside(v1, v2) + v1 * f1 + v2 * f2
    }

    /// `2f + v2 ∂f/∂v2`, the part of the SC-H integrand left after the
    /// exact `∂(v1 f)/∂v1`. Integrating it along a row gives Φ without
    /// evaluating `f` on the edge `v1 = 1`, where it may be unbounded.
    pub(crate) fn phi_kernel_total(&self, v1: f64, v2: f64) -> f64 {
        let f2 = match &self.kind {
            DensityKind::Grid(g) => g.interp_grad(v1, v2)[1],
            _ => self.eval_grad_f(v1, v2).map_or(f64::NAN, |g| g[1]),
        };
        2.0 * self.f_inside(v1, v2) + v2 * f2
    }

    /// `∫_lo^hi f(x, v2) dx` for `[lo, hi]` inside the row at `v2`.
    pub fn row_mass(&self, v2: f64, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let a = self.domain.a;
        match &self.kind {
            DensityKind::UniformTriangle => 2.0 / a * (hi - lo),
            DensityKind::OrderedDecreasing(g) => 2.0 / a * g.pdf(v2 / a) * (g.sf(lo) - g.sf(hi)),
            DensityKind::ConditionalDecreasing(g1, g2) => {
                let s = g1.sf(v2);
                if s <= 0.0 {
                    0.0
                } else {
                    g2.pdf(v2) * (g1.sf(lo) - g1.sf(hi)) / s
                }
            }
            DensityKind::ScaleInvariant(g) => g.tail_over_t(lo) - g.tail_over_t(hi),
            DensityKind::OrderedIncreasing(g) => 2.0 * g.pdf(v2) * (g.cdf(hi / a) - g.cdf(lo / a)),
            DensityKind::ImvQuadratic => {
                12.0 / 11.0 * (2.0 * (hi - lo) - (hi * hi * hi - lo * lo * lo) / 3.0)
            }
            DensityKind::Grid(g) => g.row_mass(v2, lo, hi),
        }
    }

    /// Probability of `{y0 <= v2 <= y1, lo(v2) <= v1 <= hi(v2)}`.
    pub fn region_mass(&self, y0: f64, y1: f64, lo: Affine, hi: Affine) -> f64 {
        self.region_mass_tol(y0, y1, lo, hi, 1e-11)
    }

    pub fn region_mass_tol(&self, y0: f64, y1: f64, lo: Affine, hi: Affine, tol: f64) -> f64 {
        integrate_strip(
            &self.domain,
            &self.quad().with_tol(tol),
            y0,
            y1,
            lo,
            hi,
            self.kinks(),
            |y, l, h| self.row_mass(y, l, h),
        )
    }

    /// `∫∫_D f`.
    pub fn total_mass(&self) -> f64 {
        self.region_mass(0.0, self.domain.v2_max(), Affine::NEG_INF, Affine::POS_INF)
    }

    pub fn marginal_cdfs(&self) -> Marginals<'_> {
        Marginals { density: self }
    }

    pub fn sum_distribution(&self) -> SumDistribution<'_> {
        SumDistribution { density: self }
    }

    /// The density proportional to `f(v) exp(θ (v1 + v2))`, tabulated on a
    /// [`TILT_NODES`]-square grid.
    pub fn fosd_tilt(&self, theta: f64) -> Result<Density> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(MechError::InvalidArgument(format!("tilt must be >= 0, got {theta}")));
        }
        let grid = GridData::from_fn(self.domain, TILT_NODES, TILT_NODES, |v1, v2| {
            self.f_inside(v1, v2) * (theta * (v1 + v2)).exp()
        })?;
        Ok(Density::from_grid(grid))
    }

    /// A JSON description of the density, used in reports.
    pub fn describe(&self) -> Value {
        let d = json!({"orientation": self.domain.orientation, "a": self.domain.a});
        let (kind, params) = match &self.kind {
            DensityKind::UniformTriangle => ("uniform", json!({})),
            DensityKind::OrderedDecreasing(g) => ("ordered-decreasing", json!({"g": g.describe()})),
            DensityKind::ConditionalDecreasing(g1, g2) => {
                ("conditional-decreasing", json!({"g1": g1.describe(), "g2": g2.describe()}))
            }
            DensityKind::ScaleInvariant(g) => ("scale-invariant", json!({"g": g.describe()})),
            DensityKind::OrderedIncreasing(g) => ("ordered-increasing", json!({"g": g.describe()})),
            DensityKind::ImvQuadratic => ("imv-quadratic", json!({})),
            DensityKind::Grid(g) => ("grid", json!({"n1": g.n1, "n2": g.n2})),
        };
        let mut d = d;
        d["kind"] = json!(kind);
        d["params"] = params;
        d
    }
}

/// Marginal distributions of `v1` and `v2`.
#[derive(Clone, Copy, Debug)]
pub struct Marginals<'a> {
    density: &'a Density,
}

impl Marginals<'_> {
    /// `F¹(x) = P[v1 <= x]`.
    pub fn cdf1(&self, x: f64) -> f64 {
        let d = self.density;
        d.region_mass(0.0, d.domain.v2_max(), Affine::NEG_INF, Affine::constant(x))
    }

    /// `F²(y) = P[v2 <= y]`.
    pub fn cdf2(&self, y: f64) -> f64 {
        self.density.region_mass(0.0, y, Affine::NEG_INF, Affine::POS_INF)
    }

    /// Marginal density of `v1`.
    pub fn pdf1(&self, x: f64) -> f64 {
        let d = self.density;
        if !(x >= 0.0 && x <= d.domain.v1_max()) {
            return 0.0;
        }
        let (lo, hi) = d.domain.column(x);
        let hi = hi.min(d.domain.v2_max());
        d.quad()
            .with_tol(1e-11)
            .integrate_with_breaks(|y| d.f_inside(x, y), lo, hi, d.kinks().v2)
    }

    /// Marginal density of `v2`.
    pub fn pdf2(&self, y: f64) -> f64 {
        let d = self.density;
        if !(y >= 0.0 && y <= d.domain.v2_max()) {
            return 0.0;
        }
        let (lo, hi) = d.domain.row(y);
        d.row_mass(y, lo, hi)
    }
}

/// Distribution of `w = v1 + v2`.
#[derive(Clone, Copy, Debug)]
pub struct SumDistribution<'a> {
    density: &'a Density,
}

impl SumDistribution<'_> {
    /// `T(w) = P[v1 + v2 <= w]`.
    pub fn cdf(&self, w: f64) -> f64 {
        let d = self.density;
        if w <= 0.0 {
            return 0.0;
        }
        d.region_mass(0.0, d.domain.v2_max(), Affine::NEG_INF, Affine::new(w, -1.0))
    }

    /// `τ(w) = ∫ f(x, w - x) dx` along the slice.
    pub fn pdf(&self, w: f64) -> f64 {
        let d = self.density;
        if !(w > 0.0 && w < d.domain.w_max()) {
            return 0.0;
        }
        let (lo, hi) = d.domain.sum_slice(w);
        if !(hi > lo) {
            return 0.0;
        }
        let mut breaks: Vec<f64> = Vec::new();
        if let DensityKind::Grid(g) = &d.kind {
            breaks.extend_from_slice(g.v1_lines());
            breaks.extend(g.v2_lines().iter().map(|y| w - y));
        }
        d.quad()
            .with_tol(1e-12)
            .integrate_with_breaks(|x| d.f_inside(x, w - x), lo, hi, &breaks)
    }

    /// `P[v1 / (v1 + v2) <= r | v1 + v2 = w]` for a raw share threshold `r`.
    pub fn share_cdf(&self, r: f64, w: f64) -> Result<f64> {
        let d = self.density;
        let tau = self.pdf(w);
        if !(tau > 0.0) {
            return Err(MechError::ZeroDensitySlice(w));
        }
        let (lo, hi) = d.domain.sum_slice(w);
        let cut = (r * w).clamp(lo, hi);
        let mut breaks: Vec<f64> = Vec::new();
        if let DensityKind::Grid(g) = &d.kind {
            breaks.extend_from_slice(g.v1_lines());
            breaks.extend(g.v2_lines().iter().map(|y| w - y));
        }
        let part = d
            .quad()
            .with_tol(1e-13)
            .integrate_with_breaks(|x| d.f_inside(x, w - x), lo, cut, &breaks);
        Ok((part / tau).clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_values() {
        let u = Density::uniform_triangle(1.0).unwrap();
        assert_eq!(u.eval_f(0.5, 0.3), 2.0);
        assert_eq!(u.eval_f(0.3, 0.5), 0.0);
        let od = Density::ordered_decreasing(BaseDensity::uniform(), 1.0).unwrap();
        assert_eq!(od.eval_f(0.5, 0.3), 2.0);
        let quad = Density::imv_quadratic();
        let g = quad.eval_grad_f(0.5, 0.7).unwrap();
        assert!((g[0] + 12.0 / 11.0).abs() < 1e-15 && g[1] == 0.0);
    }

    #[test]
    fn constructor_checks_orientation() {
        assert!(Density::new(Domain::imv(1.0).unwrap(), DensityKind::UniformTriangle).is_err());
        assert!(Density::new(Domain::dmv(0.5).unwrap(), DensityKind::ScaleInvariant(BaseDensity::uniform())).is_err());
    }

    #[test]
    fn uniform_marginals_and_sum() {
        let u = Density::uniform_triangle(1.0).unwrap();
        let m = u.marginal_cdfs();
        for &x in &[0.0, 0.2, 0.7, 1.0] {
            assert!((m.cdf1(x) - x * x).abs() < 1e-12);
            assert!((m.pdf1(x) - 2.0 * x).abs() < 1e-12);
        }
        let s = u.sum_distribution();
        assert_eq!(s.cdf(0.0), 0.0);
        assert!((s.cdf(2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordered_increasing_sum_is_triangular() {
        let d = Density::ordered_increasing(BaseDensity::uniform(), 1.0).unwrap();
        let s = d.sum_distribution();
        assert!((s.cdf(1.0) - 0.5).abs() < 1e-12);
        for &w in &[0.2, 0.5, 0.9] {
            assert!((s.pdf(w) - w).abs() < 1e-12);
        }
    }

    #[test]
    fn tilt_zero_reproduces_uniform() {
        let u = Density::uniform_triangle(1.0).unwrap();
        let t = u.fosd_tilt(0.0).unwrap();
        for &(x, y) in &[(0.5, 0.3), (0.9, 0.1), (1.0, 1.0)] {
            assert!((t.eval_f(x, y) - 2.0).abs() < 1e-10);
        }
        assert!(t.fosd_tilt(-1.0).is_err());
    }

    #[test]
    fn grid_gradient_rejects_boundary() {
        let t = Density::uniform_triangle(1.0).unwrap().fosd_tilt(0.0).unwrap();
        assert!(matches!(t.eval_grad_f(0.5, 0.5), Err(MechError::BoundaryPoint(..))));
        let g = t.eval_grad_f(0.5, 0.3).unwrap();
        assert!(g[0].abs() < 1e-6 && g[1].abs() < 1e-6);
    }
}
