//! Integration over strips of the support whose v1 limits are affine in v2.
//!
//! A strip is `{ y0 <= v2 <= y1, lo(v2) <= v1 <= hi(v2) }` intersected with
//! the support. Inside each row the integral is delegated to a closure
//! `inner(v2, l, h)`, so densities with closed-form row masses never pay for
//! a nested quadrature. The outer integral is split wherever the effective
//! limits change slope and at caller-supplied kinks.

use crate::domain::Domain;
use crate::quadrature::Quadrature;

/// `c0 + c1 * v2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub c0: f64,
    pub c1: f64,
}

impl Affine {
    pub const NEG_INF: Affine = Affine { c0: f64::NEG_INFINITY, c1: 0.0 };
    pub const POS_INF: Affine = Affine { c0: f64::INFINITY, c1: 0.0 };

    pub const fn new(c0: f64, c1: f64) -> Self {
        Self { c0, c1 }
    }

    pub const fn constant(c: f64) -> Self {
        Self { c0: c, c1: 0.0 }
    }

    #[inline]
    pub fn at(&self, y: f64) -> f64 {
        if self.c1 == 0.0 {
            self.c0
        } else {
            self.c0 + self.c1 * y
        }
    }

    /// Where two lines cross, if they do at a finite height.
    fn crossing(&self, other: &Affine) -> Option<f64> {
        if !(self.c0.is_finite() && other.c0.is_finite()) || self.c1 == other.c1 {
            return None;
        }
        let y = (other.c0 - self.c0) / (self.c1 - other.c1);
        y.is_finite().then_some(y)
    }
}

/// Lines of non-smoothness of the integrand: vertical (`v1 = const`) and
/// horizontal (`v2 = const`).
#[derive(Clone, Copy, Debug, Default)]
pub struct Kinks<'a> {
    pub v1: &'a [f64],
    pub v2: &'a [f64],
}

impl Kinks<'_> {
    pub const NONE: Kinks<'static> = Kinks { v1: &[], v2: &[] };

    pub fn is_empty(&self) -> bool {
        self.v1.is_empty() && self.v2.is_empty()
    }
}

fn row_lines(domain: &Domain) -> (Affine, Affine) {
    let a = domain.a;
    if domain.is_dmv() {
        (Affine::new(0.0, 1.0 / a), Affine::constant(1.0))
    } else {
        (Affine::constant(0.0), Affine::new(0.0, a))
    }
}

/// `∫_{y0}^{y1} inner(v2, L(v2), H(v2)) dv2` where `L = max(lo, row start)`
/// and `H = min(hi, row end)`; rows with `H <= L` contribute nothing.
#[allow(clippy::too_many_arguments)]
pub fn integrate_strip(
    domain: &Domain,
    quad: &Quadrature,
    y0: f64,
    y1: f64,
    lo: Affine,
    hi: Affine,
    kinks: Kinks<'_>,
    inner: impl Fn(f64, f64, f64) -> f64,
) -> f64 {
    let y0 = y0.max(0.0);
    let y1 = y1.min(domain.v2_max());
    if !(y1 > y0) {
        return 0.0;
    }
    let (row_lo, row_hi) = row_lines(domain);
    let lines = [lo, hi, row_lo, row_hi];
    let mut breaks: Vec<f64> = Vec::new();
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            if let Some(y) = lines[i].crossing(&lines[j]) {
                breaks.push(y);
            }
        }
    }
    breaks.extend_from_slice(kinks.v2);
    for &k in kinks.v1 {
        let vertical = Affine::constant(k);
        for line in &lines {
            if let Some(y) = line.crossing(&vertical) {
                breaks.push(y);
            }
        }
    }
    let integrand = |y: f64| {
        let l = lo.at(y).max(row_lo.at(y));
        let h = hi.at(y).min(row_hi.at(y));
        if h > l {
            inner(y, l, h)
        } else {
            0.0
        }
    };
    // Rows are empty exactly on a union of intervals delimited by the
    // breakpoints, so skipping empty pieces is both exact and cheaper.
    let pts = crate::quadrature::interior_points(y0, y1, &breaks);
    let local = quad.with_tol(quad.tol / (pts.len() - 1) as f64);
    pts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let l = lo.at(mid).max(row_lo.at(mid));
            let h = hi.at(mid).min(row_hi.at(mid));
            if h > l {
                local.integrate(integrand, w[0], w[1])
            } else {
                0.0
            }
        })
        .sum()
}
