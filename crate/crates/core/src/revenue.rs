//! Expected revenue of a mechanism, three ways: directly from the buyer's
//! best responses, through the Φ decomposition for line mechanisms, and
//! from the buyer's payoff function alone.

use crate::density::Density;
use crate::domain::Domain;
use crate::error::{MechError, Result};
use crate::mechanism::{DeterministicMechanism, Mechanism, StepLineMechanism};
use crate::phi::PhiEvaluator;
use crate::quadrature::Quadrature;
use crate::region::{integrate_strip, Affine, Kinks};

/// Absolute tolerance of every region integral below.
pub const REVENUE_TOL: f64 = 1e-10;

/// `E[t(v)]` under the seller-favorable best response.
pub fn revenue_direct(density: &Density, m: &Mechanism) -> Result<f64> {
    match m {
        Mechanism::Deterministic(d) => Ok(revenue_deterministic(density, d)),
        Mechanism::Line(l) => revenue_line(density, l),
    }
}

/// `p1 P(v1 >= p1, v2 < p2) + (p1 + p2) P(v2 >= p2, v1 + v2 >= p1 + p2)`.
pub fn revenue_deterministic(density: &Density, m: &DeterministicMechanism) -> f64 {
    revenue_deterministic_tol(density, m, REVENUE_TOL)
}

/// [`revenue_deterministic`] with a chosen absolute tolerance per region.
pub fn revenue_deterministic_tol(density: &Density, m: &DeterministicMechanism, tol: f64) -> f64 {
    let (p1, p2) = (m.p1, m.p2);
    let top = density.domain.v2_max();
    let one = density.region_mass_tol(0.0, p2, Affine::constant(p1), Affine::POS_INF, tol);
    let both = density.region_mass_tol(p2, top, Affine::new(p1 + p2, -1.0), Affine::POS_INF, tol);
    p1 * one + (p1 + p2) * both
}

/// Pieces `[c, c_next)` of `[0, a]` on which `q2(1, ·)` is constant, with
/// that level.
fn segments(m: &StepLineMechanism) -> Vec<(f64, f64, f64)> {
    let mut cuts = vec![(0.0, 0.0)];
    for &(b, q) in &m.steps {
        if b == 0.0 {
            cuts[0] = (0.0, q);
        } else {
            cuts.push((b, q));
        }
    }
    (0..cuts.len())
        .map(|k| {
            let end = cuts.get(k + 1).map_or(m.a, |c| c.0);
            (cuts[k].0, end, cuts[k].1)
        })
        .filter(|s| s.1 > s.0)
        .collect()
}

/// On the piece starting at `c` with level `q`, buyers with
/// `v1 >= 1 - u(1, v2) = c0 + c1 v2` purchase.
fn purchase_line(m: &StepLineMechanism, c: f64, q: f64) -> Affine {
    Affine::new(1.0 - m.u1(c) + q * c, -q)
}

fn revenue_line(density: &Density, m: &StepLineMechanism) -> Result<f64> {
    if !density.domain.is_dmv() {
        return Err(MechError::WrongOrientation);
    }
    Ok(segments(m)
        .into_iter()
        .map(|(c, end, q)| {
            let t = m.t1(c);
            if t == 0.0 {
                return 0.0;
            }
            t * density.region_mass_tol(c, end, purchase_line(m, c, q), Affine::POS_INF, REVENUE_TOL)
        })
        .sum())
}

/// Revenue of a line mechanism as
/// `∫_0^{aα} ∫_{1-u(1,v2)}^1 Φ + ∫_{aα}^a ∫_{v2/a}^1 Φ + ∫_{aα}^a u(v2/a, v2) Φ(v2/a, v2)`.
pub fn revenue_via_phi(ev: &PhiEvaluator, m: &StepLineMechanism) -> Result<f64> {
    let density = &ev.density;
    if !density.domain.is_dmv() {
        return Err(MechError::WrongOrientation);
    }
    let a = density.domain.a;
    let top = a * m.alpha();
    let quad = density.quad().with_tol(REVENUE_TOL);
    let kinks = density.kinks();
    let inner = |y: f64, l: f64, _h: f64| ev.phi_row_integral(l, y);

    let below: f64 = segments(m)
        .into_iter()
        .filter(|s| s.0 < top)
        .map(|(c, end, q)| {
            integrate_strip(&density.domain, &quad, c, end.min(top), purchase_line(m, c, q), Affine::POS_INF, kinks, inner)
        })
        .sum();
    let above = integrate_strip(&density.domain, &quad, top, a, Affine::NEG_INF, Affine::POS_INF, kinks, inner);

    let mut breaks: Vec<f64> = m.steps.iter().map(|s| s.0).collect();
    breaks.extend_from_slice(kinks.v2);
    breaks.extend(kinks.v1.iter().map(|x| a * x));
    let diagonal = quad.integrate_with_breaks(
        |y| {
            let x = y / a;
            m.payoff(x, y) * ev.phi(x, y)
        },
        top,
        a,
        &breaks,
    );
    Ok(below + above + diagonal)
}

/// Buyer payoffs at the nodes of a regular mesh over the bounding box of
/// the support, bilinear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffGrid {
    pub domain: Domain,
    pub n1: usize,
    pub n2: usize,
    /// Row-major: `values[j * n1 + i]` sits at `(i h1, j h2)`.
    pub values: Vec<f64>,
}

impl PayoffGrid {
    pub fn from_values(domain: Domain, n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if n1 < 2 || n2 < 2 || values.len() != n1 * n2 {
            return Err(MechError::InvalidArgument(format!(
                "payoff grid {n1}x{n2} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MechError::InvalidArgument("non-finite payoff".into()));
        }
        Ok(Self { domain, n1, n2, values })
    }

    /// Samples `u` at every node, moving nodes outside the support onto it
    /// along their row.
    pub fn from_fn(domain: Domain, n1: usize, n2: usize, u: impl Fn(f64, f64) -> f64 + Sync + Send) -> Result<Self> {
        let (h1, h2) = (domain.v1_max() / (n1.max(2) - 1) as f64, domain.v2_max() / (n2.max(2) - 1) as f64);
        let mut values = vec![0.0; n1 * n2];
        crate::par::for_each_row_mut(&mut values, n1.max(1), |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                let (x, y) = domain.project(i as f64 * h1, j as f64 * h2);
                *v = u(x, y);
            }
        });
        Self::from_values(domain, n1, n2, values)
    }

    fn h(&self) -> (f64, f64) {
        (self.domain.v1_max() / (self.n1 - 1) as f64, self.domain.v2_max() / (self.n2 - 1) as f64)
    }

    pub fn v1_lines(&self) -> Vec<f64> {
        let h1 = self.h().0;
        (0..self.n1).map(|i| i as f64 * h1).collect()
    }

    pub fn v2_lines(&self) -> Vec<f64> {
        let h2 = self.h().1;
        (0..self.n2).map(|j| j as f64 * h2).collect()
    }

    pub fn interp(&self, v1: f64, v2: f64) -> f64 {
        let (h1, h2) = self.h();
        let locate = |x: f64, h: f64, n: usize| {
            let s = (x / h).clamp(0.0, (n - 1) as f64);
            let k = (s.floor() as usize).min(n - 2);
            (k, s - k as f64)
        };
        let (i, s) = locate(v1, h1, self.n1);
        let (j, t) = locate(v2, h2, self.n2);
        let n1 = self.n1;
        let v = &self.values;
        (1.0 - t) * ((1.0 - s) * v[j * n1 + i] + s * v[j * n1 + i + 1])
            + t * ((1.0 - s) * v[(j + 1) * n1 + i] + s * v[(j + 1) * n1 + i + 1])
    }
}

/// Revenue implied by a payoff function alone:
/// `∫ u f` along the outer edge (`v1 = 1` for DMV, `v2 = 1` for IMV) minus
/// `∫∫ u (3f + v·∇f)`.
pub fn revenue_from_payoff_grid(density: &Density, u: &PayoffGrid) -> Result<f64> {
    let domain = density.domain;
    if domain != u.domain {
        return Err(MechError::InvalidArgument("payoff grid and density live on different domains".into()));
    }
    let quad = Quadrature::PANEL.with_tol(1e-9);
    let dk = density.kinks();
    let mut v1_lines = u.v1_lines();
    v1_lines.extend_from_slice(dk.v1);
    let mut v2_lines = u.v2_lines();
    v2_lines.extend_from_slice(dk.v2);

    let edge = if domain.is_dmv() {
        quad.integrate_with_breaks(|y| u.interp(1.0, y) * density.f_inside(1.0, y), 0.0, domain.a, &v2_lines)
    } else {
        quad.integrate_with_breaks(|x| u.interp(x, 1.0) * density.f_inside(x, 1.0), 0.0, domain.a, &v1_lines)
    };
    let kinks = Kinks { v1: &v1_lines, v2: &v2_lines };
    let bulk = integrate_strip(&domain, &quad, 0.0, domain.v2_max(), Affine::NEG_INF, Affine::POS_INF, kinks, |y, l, h| {
        quad.integrate_with_breaks(|x| u.interp(x, y) * density.sch_integrand_total(x, y), l, h, &v1_lines)
    });
    Ok(edge - bulk)
}
