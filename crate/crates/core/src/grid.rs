//! Tabulated densities: node values on a regular mesh over the bounding box
//! of the support, bilinear in between.

use crate::domain::Domain;
use crate::error::{MechError, Result};
use crate::quadrature::Quadrature;
use crate::region::{integrate_strip, Affine, Kinks};

/// Largest tolerated `|∫∫ f - 1|` before renormalization.
pub const GRID_MASS_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GridData {
    pub domain: Domain,
    pub n1: usize,
    pub n2: usize,
    /// Row-major: `values[j * n1 + i]` sits at `(x1[i], x2[j])`.
    pub values: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    h1: f64,
    h2: f64,
}

impl GridData {
    /// Builds a grid from raw node values. Nodes inside the support must be
    /// positive; nodes outside it are replaced by the nearest support node
    /// of the same row. The total mass must be within [`GRID_MASS_TOL`] of
    /// one and is then normalized exactly.
    pub fn from_values(domain: Domain, n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        let mut g = Self::raw(domain, n1, n2, values)?;
        g.validate_positive()?;
        g.fill_outside();
        let mass = g.mass();
        if !((mass - 1.0).abs() <= GRID_MASS_TOL) {
            return Err(MechError::InvalidDensity(format!(
                "grid density integrates to {mass}, not 1 (tolerance {GRID_MASS_TOL})"
            )));
        }
        g.scale(1.0 / mass);
        Ok(g)
    }

    /// Samples a positive function at the support nodes and normalizes it.
    pub fn from_fn(
        domain: Domain,
        n1: usize,
        n2: usize,
        f: impl Fn(f64, f64) -> f64 + Sync + Send,
    ) -> Result<Self> {
        let mut g = Self::raw(domain, n1, n2, vec![0.0; n1 * n2])?;
        let (x1, x2) = (g.x1.clone(), g.x2.clone());
        crate::par::for_each_row_mut(&mut g.values, n1, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                let (p1, p2) = domain.project(x1[i], x2[j]);
                *v = f(p1, p2);
            }
        });
        if let Some(bad) = g.values.iter().find(|v| !v.is_finite()) {
            return Err(MechError::InvalidDensity(format!("non-finite sampled value {bad}")));
        }
        g.validate_positive()?;
        g.fill_outside();
        let mass = g.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(MechError::InvalidDensity(format!("grid mass {mass}")));
        }
        g.scale(1.0 / mass);
        Ok(g)
    }

    fn raw(domain: Domain, n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(MechError::InvalidDensity(format!("grid needs at least 2x2 nodes, got {n1}x{n2}")));
        }
        if values.len() != n1 * n2 {
            return Err(MechError::InvalidDensity(format!(
                "grid has {} values, expected {n1}x{n2}={}",
                values.len(),
                n1 * n2
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(MechError::InvalidDensity(format!("non-finite grid value {bad}")));
        }
        let h1 = domain.v1_max() / (n1 - 1) as f64;
        let h2 = domain.v2_max() / (n2 - 1) as f64;
        let x1 = (0..n1).map(|i| i as f64 * h1).collect();
        let x2 = (0..n2).map(|j| j as f64 * h2).collect();
        Ok(Self { domain, n1, n2, values, x1, x2, h1, h2 })
    }

    fn validate_positive(&self) -> Result<()> {
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                let v = self.values[j * self.n1 + i];
                if self.domain.is_interior(self.x1[i], self.x2[j], 1e-12) && v <= 0.0 {
                    return Err(MechError::InvalidDensity(format!(
                        "grid value {v} at interior node ({}, {}) is not positive",
                        self.x1[i], self.x2[j]
                    )));
                }
            }
        }
        Ok(())
    }

    fn fill_outside(&mut self) {
        let n1 = self.n1;
        for j in 0..self.n2 {
            let inside: Vec<usize> = (0..n1)
                .filter(|&i| self.domain.contains(self.x1[i], self.x2[j]))
                .collect();
            let (first, last) = match (inside.first(), inside.last()) {
                (Some(&f), Some(&l)) => (f, l),
                _ => continue,
            };
            for i in 0..n1 {
                if i < first {
                    self.values[j * n1 + i] = self.values[j * n1 + first];
                } else if i > last {
                    self.values[j * n1 + i] = self.values[j * n1 + last];
                }
            }
        }
    }

    fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn v1_lines(&self) -> &[f64] {
        &self.x1
    }

    pub fn v2_lines(&self) -> &[f64] {
        &self.x2
    }

    pub fn kinks(&self) -> Kinks<'_> {
        Kinks { v1: &self.x1, v2: &self.x2 }
    }

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n1 + i]
    }

    fn locate(x: f64, h: f64, n: usize) -> (usize, f64) {
        let s = (x / h).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        (k, s - k as f64)
    }

    /// Bilinear interpolant, ignoring the support.
    pub fn interp(&self, v1: f64, v2: f64) -> f64 {
        let (i, s) = Self::locate(v1, self.h1, self.n1);
        let (j, t) = Self::locate(v2, self.h2, self.n2);
        let n1 = self.n1;
        let f00 = self.values[j * n1 + i];
        let f10 = self.values[j * n1 + i + 1];
        let f01 = self.values[(j + 1) * n1 + i];
        let f11 = self.values[(j + 1) * n1 + i + 1];
        (1.0 - t) * ((1.0 - s) * f00 + s * f10) + t * ((1.0 - s) * f01 + s * f11)
    }

    /// Gradient of the bilinear interpolant; on a cell edge the upper cell
    /// is used.
    pub fn interp_grad(&self, v1: f64, v2: f64) -> [f64; 2] {
        let (i, s) = Self::locate(v1, self.h1, self.n1);
        let (j, t) = Self::locate(v2, self.h2, self.n2);
        let n1 = self.n1;
        let f00 = self.values[j * n1 + i];
        let f10 = self.values[j * n1 + i + 1];
        let f01 = self.values[(j + 1) * n1 + i];
        let f11 = self.values[(j + 1) * n1 + i + 1];
        [
            ((1.0 - t) * (f10 - f00) + t * (f11 - f01)) / self.h1,
            ((1.0 - s) * (f01 - f00) + s * (f11 - f10)) / self.h2,
        ]
    }

    /// `∫_lo^hi f(x, v2) dx`, exact for the bilinear interpolant.
    pub fn row_mass(&self, v2: f64, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let (j, t) = Self::locate(v2, self.h2, self.n2);
        let n1 = self.n1;
        let node = |i: usize| {
            (1.0 - t) * self.values[j * n1 + i] + t * self.values[(j + 1) * n1 + i]
        };
        let at = |x: f64| {
            let (i, s) = Self::locate(x, self.h1, n1);
            (1.0 - s) * node(i) + s * node(i + 1)
        };
        let i_start = ((lo / self.h1).floor() as isize + 1).max(0) as usize;
        let mut x_prev = lo;
        let mut f_prev = at(lo);
        let mut total = 0.0;
        let mut i = i_start;
        while i < n1 && self.x1[i] < hi {
            if self.x1[i] > x_prev {
                let f_i = node(i);
                total += 0.5 * (f_prev + f_i) * (self.x1[i] - x_prev);
                x_prev = self.x1[i];
                f_prev = f_i;
            }
            i += 1;
        }
        total + 0.5 * (f_prev + at(hi)) * (hi - x_prev)
    }

    /// Total mass over the support.
    pub fn mass(&self) -> f64 {
        integrate_strip(
            &self.domain,
            &Quadrature::PANEL.with_tol(1e-12),
            0.0,
            self.domain.v2_max(),
            Affine::NEG_INF,
            Affine::POS_INF,
            self.kinks(),
            |y, l, h| self.row_mass(y, l, h),
        )
    }
}
