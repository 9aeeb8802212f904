//! The Φ function of a DMV density and the single-crossing checks built on
//! it.
//!
//! `Φ(v1, v2) = f(1, v2) - ∫_{v1}^1 [3f + (x, v2)·∇f](x, v2) dx`.
//! Quadrature mode evaluates the equivalent
//! `v1 f(v1, v2) - ∫_{v1}^1 [2f + v2 ∂f/∂v2](x, v2) dx`, which stays finite
//! when `f` blows up on the edge `v1 = 1`.
//!
//! All checks run on finite lattices. A `Fails` verdict is a genuine
//! counterexample on the lattice; `Holds` is evidence, not a proof.

use serde::{Deserialize, Serialize};

use crate::base::BaseDensity;
use crate::density::{Density, DensityKind};
use crate::error::{MechError, Result};
use crate::quadrature::Quadrature;

/// Values in `[-SIGN_TOL, SIGN_TOL]` count as zero in sign scans.
pub const SIGN_TOL: f64 = 1e-10;
/// Default lattice size of the SC scans.
pub const SC_GRID: usize = 401;
/// Lattice size of the one-dimensional model checks.
pub const MODEL_GRID: usize = 1001;
/// Violations no larger than this multiple of the tolerance are reported
/// as inconclusive rather than as failures.
pub const INCONCLUSIVE_FACTOR: f64 = 10.0;
const MAX_WITNESSES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiMode {
    ClosedForm,
    Quadrature,
}

/// Evaluates Φ for a DMV density.
#[derive(Clone, Debug)]
pub struct PhiEvaluator {
    pub density: Density,
    pub mode: PhiMode,
}

impl PhiEvaluator {
    pub fn new(density: &Density, mode: PhiMode) -> Result<Self> {
        if !density.domain.is_dmv() {
            return Err(MechError::WrongOrientation);
        }
        if mode == PhiMode::ClosedForm && !density.closed_form_phi() {
            return Err(MechError::InvalidArgument(
                "this density has no closed-form Φ; use quadrature mode".into(),
            ));
        }
        Ok(Self { density: density.clone(), mode })
    }

    /// Closed form when available, quadrature otherwise.
    pub fn auto(density: &Density) -> Result<Self> {
        let mode = if density.closed_form_phi() { PhiMode::ClosedForm } else { PhiMode::Quadrature };
        Self::new(density, mode)
    }

    fn quad(&self) -> Quadrature {
        self.density.quad().with_tol(1e-12)
    }

    fn v1_kinks(&self) -> &[f64] {
        self.density.kinks().v1
    }

    pub fn phi(&self, v1: f64, v2: f64) -> f64 {
        match self.mode {
            PhiMode::ClosedForm => self.phi_closed(v1, v2),
            PhiMode::Quadrature => {
                let d = &self.density;
                v1 * d.f_inside(v1, v2)
                    - self.quad().integrate_with_breaks(|x| d.phi_kernel_total(x, v2), v1, 1.0, self.v1_kinks())
            }
        }
    }

    fn phi_closed(&self, v1: f64, v2: f64) -> f64 {
        let a = self.density.domain.a;
        match &self.density.kind {
            DensityKind::UniformTriangle => (6.0 * v1 - 4.0) / a,
            DensityKind::OrderedDecreasing(g) => {
                let s = v2 / a;
                2.0 / a * g.pdf(s) * (v1 * g.pdf(v1) - g.sf(v1) * (2.0 + g.eta(s)))
            }
            DensityKind::ConditionalDecreasing(g1, g2) => {
                let s1 = g1.sf(v2);
                let tau = g2.pdf(v2) / s1;
                let gamma = g2.eta(v2) + v2 * g1.pdf(v2) / s1;
                tau * (v1 * g1.pdf(v1) - g1.sf(v1) * (2.0 + gamma))
            }
            DensityKind::ScaleInvariant(g) => g.pdf(v1) - 2.0 * g.tail_over_t(v1),
            _ => unreachable!("closed form checked at construction"),
        }
    }

    /// Φ along a row at the ascending abscissae `xs`. In quadrature mode the
    /// row is integrated once, cumulatively from `v1 = 1`.
    pub fn phi_row(&self, v2: f64, xs: &[f64]) -> Vec<f64> {
        match self.mode {
            PhiMode::ClosedForm => xs.iter().map(|&x| self.phi_closed(x, v2)).collect(),
            PhiMode::Quadrature => {
                let d = &self.density;
                let q = self.quad();
                let mut out = vec![0.0; xs.len()];
                let mut acc = 0.0;
                let mut upper = 1.0;
                for (k, &x) in xs.iter().enumerate().rev() {
                    acc += q.integrate_with_breaks(|t| d.phi_kernel_total(t, v2), x, upper, self.v1_kinks());
                    upper = x;
                    out[k] = x * d.f_inside(x, v2) - acc;
                }
                out
            }
        }
    }

    /// `∫_{v1}^1 Φ(x, v2) dx`. In quadrature mode the inner integral of Φ is
    /// swapped out, `∫_{v1}^1 [x f - (x - v1) k](x, v2) dx`, so one pass
    /// suffices.
    pub fn phi_row_integral(&self, v1: f64, v2: f64) -> f64 {
        if !(v1 < 1.0) {
            return 0.0;
        }
        match self.mode {
            PhiMode::ClosedForm => self.quad().integrate(|x| self.phi_closed(x, v2), v1, 1.0),
            PhiMode::Quadrature => {
                let d = &self.density;
                self.quad().integrate_with_breaks(
                    |x| x * d.f_inside(x, v2) - (x - v1) * d.phi_kernel_total(x, v2),
                    v1,
                    1.0,
                    self.v1_kinks(),
                )
            }
        }
    }

    /// `I(v2) = ∫_{v2}^a Φ(y/a, y) dy`.
    pub fn diag_integral(&self, v2: f64) -> f64 {
        let a = self.density.domain.a;
        self.diag_segment(v2, a)
    }

    fn diag_segment(&self, y0: f64, y1: f64) -> f64 {
        let a = self.density.domain.a;
        let breaks: Vec<f64> = self.density.kinks().v2.to_vec();
        let mut all = breaks;
        all.extend(self.v1_kinks().iter().map(|x| a * x));
        self.density
            .quad()
            .with_tol(1e-11)
            .integrate_with_breaks(|y| self.phi(y / a, y), y0, y1, &all)
    }

    /// `I` at the ascending heights `ys`, accumulated from the top.
    pub fn diag_integrals(&self, ys: &[f64]) -> Vec<f64> {
        let a = self.density.domain.a;
        let mut out = vec![0.0; ys.len()];
        let mut acc = 0.0;
        let mut upper = a;
        for (k, &y) in ys.iter().enumerate().rev() {
            acc += self.diag_segment(y, upper);
            upper = y;
            out[k] = acc;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// Grid evidence for a violation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub condition: String,
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub verdict: Verdict,
    /// Size of the largest violation found (0 when none).
    pub max_violation: f64,
    pub witnesses: Vec<Witness>,
}

impl ConditionResult {
    fn from_violations(tol: f64, violations: Vec<(f64, Witness)>) -> Self {
        let max_violation = violations.iter().map(|v| v.0).fold(0.0, f64::max);
        let verdict = if violations.is_empty() {
            Verdict::Holds
        } else if max_violation <= INCONCLUSIVE_FACTOR * tol {
            Verdict::Inconclusive
        } else {
            Verdict::Fails
        };
        let mut ranked = violations;
        // Largest first; the sort is stable so ties keep lattice order.
        ranked.sort_by(|x, y| y.0.total_cmp(&x.0));
        let witnesses = ranked.into_iter().take(MAX_WITNESSES).map(|v| v.1).collect();
        Self { verdict, max_violation, witnesses }
    }

    fn holds() -> Self {
        Self { verdict: Verdict::Holds, max_violation: 0.0, witnesses: vec![] }
    }
}

/// Which conditions to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSet {
    pub sch: bool,
    pub scv: bool,
    pub scd: bool,
}

impl ConditionSet {
    pub const ALL: ConditionSet = ConditionSet { sch: true, scv: true, scd: true };
    pub const SCH: ConditionSet = ConditionSet { sch: true, scv: false, scd: false };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScConfig {
    pub n: usize,
    pub tol: f64,
}

impl Default for ScConfig {
    fn default() -> Self {
        Self { n: SC_GRID, tol: SIGN_TOL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScReport {
    pub sch: Option<Verdict>,
    pub scv: Option<Verdict>,
    pub scd: Option<Verdict>,
    pub max_violation: [f64; 3],
    pub witnesses: Vec<Witness>,
    pub grid_resolution: usize,
    pub tolerance: f64,
    pub notes: Vec<String>,
}

impl ScReport {
    /// True when every evaluated condition holds.
    pub fn all_hold(&self) -> bool {
        [self.sch, self.scv, self.scd]
            .iter()
            .all(|v| v.map_or(true, |v| v == Verdict::Holds))
    }
}

/// Cell-centre abscissae `(k + 1/2) / n`.
pub fn lattice(n: usize) -> Vec<f64> {
    (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect()
}

/// SC-H: `3f + v·∇f >= -tol` at the interior lattice points. Works for both
/// orientations; DMV failures also carry a pair witness from Φ.
pub fn check_sch(density: &Density, cfg: &ScConfig) -> ConditionResult {
    let s = lattice(cfg.n);
    let d = &density.domain;
    let a = d.a;
    let tol = cfg.tol;
    // Column i holds the points strictly inside the triangle.
    let columns = crate::par::map_range(cfg.n, |i| {
        let mut out = Vec::new();
        for j in 0..i {
            let (v1, v2) = if d.is_dmv() { (s[i], a * s[j]) } else { (a * s[j], s[i]) };
            let h = density.sch_integrand_total(v1, v2);
            if !(h >= -tol) {
                out.push((v1, v2, h));
            }
        }
        out
    });
    let raw: Vec<(f64, f64, f64)> = columns.into_iter().flatten().collect();
    let mut violations: Vec<(f64, Witness)> = raw
        .iter()
        .map(|&(v1, v2, h)| {
            let size = if h.is_nan() { f64::INFINITY } else { -h };
            (size, Witness { condition: "sch".into(), points: vec![[v1, v2]], values: vec![h] })
        })
        .collect();
    if d.is_dmv() && !violations.is_empty() {
        if let Ok(ev) = PhiEvaluator::auto(density) {
            violations = attach_pairs(&ev, violations, tol);
        }
    }
    ConditionResult::from_violations(tol, violations)
}

/// Replaces the worst point witnesses by Φ pairs `(v1, v1')` on the same row
/// with `Φ(v1) > Φ(v1') + tol`, found by walking out of the violating run.
fn attach_pairs(ev: &PhiEvaluator, mut violations: Vec<(f64, Witness)>, tol: f64) -> Vec<(f64, Witness)> {
    let d = &ev.density;
    let mut order: Vec<usize> = (0..violations.len()).collect();
    order.sort_by(|&x, &y| violations[y].0.total_cmp(&violations[x].0));
    for &k in order.iter().take(MAX_WITNESSES) {
        let [v1, v2] = violations[k].1.points[0];
        let (lo, hi) = d.domain.row(v2);
        let step = 1e-3;
        let mut left = v1;
        while left - step > lo && d.sch_integrand_total(left - step, v2) < 0.0 {
            left -= step;
        }
        let mut right = v1;
        while right + step < hi && d.sch_integrand_total(right + step, v2) < 0.0 {
            right += step;
        }
        let (x0, x1) = ((left - step).max(lo), (right + step).min(hi));
        let (p0, p1) = (ev.phi(x0, v2), ev.phi(x1, v2));
        if p0 > p1 + tol {
            violations[k].1.points = vec![[x0, v2], [x1, v2]];
            violations[k].1.values = vec![p0, p1];
        }
    }
    violations
}

/// Φ on the DMV lattice, one vector per row `j` covering columns `i >= j`.
fn phi_table(ev: &PhiEvaluator, s: &[f64]) -> Vec<Vec<f64>> {
    let a = ev.density.domain.a;
    crate::par::map_range(s.len(), |j| ev.phi_row(a * s[j], &s[j..]))
}

/// SC-V: scanning each lattice column upward, Φ never returns above `tol`
/// after having dropped below `-tol`.
pub fn check_scv(ev: &PhiEvaluator, cfg: &ScConfig) -> ConditionResult {
    let s = lattice(cfg.n);
    let table = phi_table(ev, &s);
    scv_from_table(ev, cfg, &s, &table)
}

fn scv_from_table(ev: &PhiEvaluator, cfg: &ScConfig, s: &[f64], table: &[Vec<f64>]) -> ConditionResult {
    let a = ev.density.domain.a;
    let tol = cfg.tol;
    let mut violations = Vec::new();
    for i in 0..s.len() {
        let mut low: Option<(usize, f64)> = None;
        for j in 0..=i {
            let p = table[j][i - j];
            if let Some((jl, pl)) = low {
                if p > tol {
                    violations.push((
                        (-pl).min(p),
                        Witness {
                            condition: "scv".into(),
                            points: vec![[s[i], a * s[jl]], [s[i], a * s[j]]],
                            values: vec![pl, p],
                        },
                    ));
                    break;
                }
            }
            if p < -tol && low.map_or(true, |(_, pl)| p < pl) {
                low = Some((j, p));
            }
        }
    }
    ConditionResult::from_violations(tol, violations)
}

/// SC-D: scanning upward, the diagonal integral never drops below `-tol`
/// once it has reached `-tol`.
pub fn check_scd(ev: &PhiEvaluator, cfg: &ScConfig) -> ConditionResult {
    let a = ev.density.domain.a;
    let ys: Vec<f64> = lattice(cfg.n).iter().map(|x| a * x).collect();
    let vals = ev.diag_integrals(&ys);
    let tol = cfg.tol;
    let mut violations = Vec::new();
    let mut high: Option<(usize, f64)> = None;
    for (j, &p) in vals.iter().enumerate() {
        if let Some((jh, ph)) = high {
            if p < -tol {
                violations.push((
                    ph.max(0.0).min(-p),
                    Witness {
                        condition: "scd".into(),
                        points: vec![[ys[jh] / a, ys[jh]], [ys[j] / a, ys[j]]],
                        values: vec![ph, p],
                    },
                ));
                break;
            }
        }
        if p >= -tol && high.map_or(true, |(_, ph)| p > ph) {
            high = Some((j, p));
        }
    }
    ConditionResult::from_violations(tol, violations)
}

/// Runs the requested conditions. IMV densities only support SC-H.
pub fn check_sc(density: &Density, which: ConditionSet, cfg: &ScConfig) -> Result<ScReport> {
    let dmv = density.domain.is_dmv();
    if !dmv && (which.scv || which.scd) {
        return Err(MechError::WrongOrientation);
    }
    let mut report = ScReport {
        sch: None,
        scv: None,
        scd: None,
        max_violation: [0.0; 3],
        witnesses: vec![],
        grid_resolution: cfg.n,
        tolerance: cfg.tol,
        notes: vec![
            "single crossing is tested on a finite lattice: failures are counterexamples, passes are evidence".into(),
            "SC-H is required almost everywhere; violations on measure-zero sets cannot be told apart on a lattice".into(),
        ],
    };
    let mut take = |idx: usize, r: ConditionResult| {
        report.max_violation[idx] = r.max_violation;
        report.witnesses.extend(r.witnesses);
        r.verdict
    };
    if which.sch {
        report.sch = Some(take(0, check_sch(density, cfg)));
    }
    if dmv && (which.scv || which.scd) {
        let ev = PhiEvaluator::auto(density)?;
        if which.scv {
            report.scv = Some(take(1, check_scv(&ev, cfg)));
        }
        if which.scd {
            report.scd = Some(take(2, check_scd(&ev, cfg)));
        }
    }
    Ok(report)
}

/// `W(v1, v2) = v1 - (1 - G(v1)) / g(v1) · [2 + η_g(v2/a)]`.
pub fn ordered_w(v1: f64, v2: f64, g: &BaseDensity, a: f64) -> Result<f64> {
    let gv = g.pdf(v1);
    if !(gv > 0.0) {
        return Err(MechError::DivisionByZero(format!("g({v1}) = {gv}")));
    }
    Ok(v1 - g.sf(v1) / gv * (2.0 + g.eta(v2 / a)))
}

/// `W_min(v2) = [v2 - (1 - G_min(v2)) / g_min(v2)] / a²`.
pub fn ordered_wmin(v2: f64, g: &BaseDensity, a: f64) -> Result<f64> {
    let s = v2 / a;
    let gmin = 2.0 / a * g.pdf(s) * g.sf(s);
    if !(gmin > 0.0) {
        return Err(MechError::DivisionByZero(format!("g_min({v2}) = {gmin}")));
    }
    let sf = g.sf(s);
    Ok((v2 - sf * sf / gmin) / (a * a))
}

/// Marginal density of the smaller value in the ordered model.
pub fn ordered_gmin(v2: f64, g: &BaseDensity, a: f64) -> f64 {
    let s = v2 / a;
    2.0 / a * g.pdf(s) * g.sf(s)
}

fn verdict_min(min_value: f64, floor: f64, tol: f64, cond: &str, at: [f64; 2]) -> ConditionResult {
    if min_value >= floor - tol {
        return ConditionResult::holds();
    }
    ConditionResult::from_violations(
        tol,
        vec![(floor - min_value, Witness { condition: cond.into(), points: vec![at], values: vec![min_value] })],
    )
}

/// The ordered-model conditions: `η_g >= -3/2`; `W(v1, ·)` crosses zero at
/// most once from above; `W_min` crosses zero at most once from below.
pub fn check_ordered_conditions(g: &BaseDensity, a: f64) -> Result<ScReport> {
    let tol = SIGN_TOL;
    let x = lattice(MODEL_GRID);
    let (k_min, eta_min) = x
        .iter()
        .enumerate()
        .map(|(k, &t)| (k, g.eta(t)))
        .fold((0, f64::INFINITY), |acc, e| if e.1 < acc.1 { e } else { acc });
    let sch = verdict_min(eta_min, -1.5, tol, "eta", [x[k_min], 0.0]);

    let eta_v2: Vec<f64> = x.iter().map(|&t| g.eta(t)).collect();
    let cols = crate::par::map_range(x.len(), |i| -> Result<Option<(f64, Witness)>> {
        let v1 = x[i];
        let gv = g.pdf(v1);
        if !(gv > 0.0) {
            return Err(MechError::DivisionByZero(format!("g({v1}) = {gv}")));
        }
        let ratio = g.sf(v1) / gv;
        let mut low: Option<(usize, f64)> = None;
        for j in 0..=i {
            let w = v1 - ratio * (2.0 + eta_v2[j]);
            if let Some((jl, wl)) = low {
                if w > tol {
                    return Ok(Some((
                        (-wl).min(w),
                        Witness {
                            condition: "w".into(),
                            points: vec![[v1, a * x[jl]], [v1, a * x[j]]],
                            values: vec![wl, w],
                        },
                    )));
                }
            }
            if w < -tol && low.map_or(true, |(_, wl)| w < wl) {
                low = Some((j, w));
            }
        }
        Ok(None)
    });
    let mut scv_v = Vec::new();
    for c in cols {
        if let Some(v) = c? {
            scv_v.push(v);
        }
    }
    let scv = ConditionResult::from_violations(tol, scv_v);

    let mut scd_v = Vec::new();
    let mut high: Option<(usize, f64)> = None;
    for (j, &t) in x.iter().enumerate() {
        let w = ordered_wmin(a * t, g, a)?;
        if let Some((jh, wh)) = high {
            if w < -tol {
                scd_v.push((
                    wh.max(0.0).min(-w),
                    Witness {
                        condition: "wmin".into(),
                        points: vec![[x[jh], a * x[jh]], [t, a * t]],
                        values: vec![wh, w],
                    },
                ));
                break;
            }
        }
        if w >= -tol && high.map_or(true, |(_, wh)| w > wh) {
            high = Some((j, w));
        }
    }
    let scd = ConditionResult::from_violations(tol, scd_v);
    Ok(model_report(sch, scv, scd, "ordered decreasing values: eta >= -3/2, W and W_min single crossing"))
}

/// The conditional-model sufficient conditions: `η_{g1}(v1) + η_{g2}(v2) >= -3`
/// for `v1 >= v2`; `γ = η_{g2} + v2 g1/(1 - G1)` increasing with
/// `η_{g2} >= -2`; and `η_{g2} >= -2`.
pub fn check_conditional_conditions(g1: &BaseDensity, g2: &BaseDensity) -> Result<ScReport> {
    let tol = SIGN_TOL;
    let x = lattice(MODEL_GRID);
    let n = x.len();
    let eta1: Vec<f64> = x.iter().map(|&t| g1.eta(t)).collect();
    let eta2: Vec<f64> = x.iter().map(|&t| g2.eta(t)).collect();
    // suffix minima of eta1 over v1 >= v2
    let mut suffix = vec![f64::INFINITY; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1].min(eta1[k]);
    }
    let (j_min, sum_min) = (0..n)
        .map(|j| (j, suffix[j] + eta2[j]))
        .fold((0, f64::INFINITY), |acc, e| if e.1 < acc.1 { e } else { acc });
    let sch = verdict_min(sum_min, -3.0, tol, "eta1+eta2", [x[j_min], x[j_min]]);

    let (k2, eta2_min) = eta2
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, e| if e.1 < acc.1 { e } else { acc });
    let scd = verdict_min(eta2_min, -2.0, tol, "eta2", [x[k2], x[k2]]);

    let gamma: Vec<f64> = x
        .iter()
        .zip(&eta2)
        .map(|(&t, &e)| e + t * g1.pdf(t) / g1.sf(t))
        .collect();
    let mut viol = Vec::new();
    for k in 1..n {
        let drop = gamma[k - 1] - gamma[k];
        if drop > tol {
            viol.push((
                drop,
                Witness {
                    condition: "gamma increasing".into(),
                    points: vec![[x[k - 1], x[k - 1]], [x[k], x[k]]],
                    values: vec![gamma[k - 1], gamma[k]],
                },
            ));
        }
    }
    if eta2_min < -2.0 - tol {
        viol.push((
            -2.0 - eta2_min,
            Witness { condition: "eta2".into(), points: vec![[x[k2], x[k2]]], values: vec![eta2_min] },
        ));
    }
    let scv = ConditionResult::from_violations(tol, viol);
    Ok(model_report(sch, scv, scd, "conditional decreasing values: sufficient elasticity conditions"))
}

fn model_report(sch: ConditionResult, scv: ConditionResult, scd: ConditionResult, note: &str) -> ScReport {
    let mut witnesses = sch.witnesses.clone();
    witnesses.extend(scv.witnesses.iter().cloned());
    witnesses.extend(scd.witnesses.iter().cloned());
    ScReport {
        sch: Some(sch.verdict),
        scv: Some(scv.verdict),
        scd: Some(scd.verdict),
        max_violation: [sch.max_violation, scv.max_violation, scd.max_violation],
        witnesses,
        grid_resolution: MODEL_GRID,
        tolerance: SIGN_TOL,
        notes: vec![note.to_string()],
    }
}

/// `P[v1 / (v1 + v2) <= c · r_max | v1 + v2 = w]`, where `r_max` is the
/// largest share of the first value attainable on the support: 1 for DMV
/// and `a / (1 + a)` for IMV. The threshold `c` is thus a fraction of the
/// attainable range and `c = 1` always gives 1.
pub fn hh_conditional_cdf(density: &Density, c: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(MechError::InvalidArgument(format!("threshold c must lie in [0, 1], got {c}")));
    }
    let d = &density.domain;
    if !(w > 0.0 && w < d.w_max()) {
        return Err(MechError::ZeroDensitySlice(w));
    }
    let r_max = if d.is_dmv() { 1.0 } else { d.a / (1.0 + d.a) };
    if c == 1.0 {
        let tau = density.sum_distribution().pdf(w);
        return if tau > 0.0 { Ok(1.0) } else { Err(MechError::ZeroDensitySlice(w)) };
    }
    density.sum_distribution().share_cdf(c * r_max, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_phi_values() {
        let u = Density::uniform_triangle(1.0).unwrap();
        for mode in [PhiMode::ClosedForm, PhiMode::Quadrature] {
            let ev = PhiEvaluator::new(&u, mode).unwrap();
            assert!(ev.phi(2.0 / 3.0, 0.1).abs() < 1e-12);
            assert!((ev.phi(1.0, 0.4) - 2.0).abs() < 1e-12);
        }
        let od = Density::ordered_decreasing(BaseDensity::uniform(), 1.0).unwrap();
        let ev = PhiEvaluator::new(&od, PhiMode::Quadrature).unwrap();
        assert!((ev.phi(0.5, 0.2) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn imv_is_rejected() {
        assert_eq!(PhiEvaluator::auto(&Density::imv_quadratic()).unwrap_err(), MechError::WrongOrientation);
        assert!(check_sc(&Density::imv_quadratic(), ConditionSet::ALL, &ScConfig::default()).is_err());
    }

    #[test]
    fn row_and_diagonal_accumulation_match_pointwise() {
        let d = Density::conditional_decreasing(BaseDensity::power(2.0).unwrap(), BaseDensity::exponential(1.0).unwrap()).unwrap();
        let ev = PhiEvaluator::new(&d, PhiMode::Quadrature).unwrap();
        let xs = [0.3, 0.5, 0.8, 0.95];
        let row = ev.phi_row(0.3, &xs);
        for (x, r) in xs.iter().zip(&row) {
            assert!((ev.phi(*x, 0.3) - r).abs() < 1e-10);
        }
        let ys = [0.1, 0.4, 0.7];
        let acc = ev.diag_integrals(&ys);
        for (y, i) in ys.iter().zip(&acc) {
            assert!((ev.diag_integral(*y) - i).abs() < 1e-9);
        }
    }

    #[test]
    fn w_and_wmin_for_uniform() {
        let g = BaseDensity::uniform();
        assert!((ordered_w(2.0 / 3.0, 0.4, &g, 1.0).unwrap()).abs() < 1e-15);
        assert!((ordered_w(1.0, 0.3, &g, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((ordered_wmin(1.0 / 3.0, &g, 1.0).unwrap()).abs() < 1e-15);
        let p = BaseDensity::power(2.0).unwrap();
        assert!(matches!(ordered_w(0.0, 0.0, &p, 1.0), Err(MechError::DivisionByZero(_))));
    }

    #[test]
    fn hh_uniform_and_whole_slice() {
        let u = Density::uniform_triangle(1.0).unwrap();
        assert!((hh_conditional_cdf(&u, 2.0 / 3.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(hh_conditional_cdf(&u, 1.0, 1.3).unwrap(), 1.0);
        assert!(matches!(hh_conditional_cdf(&u, 0.5, 2.5), Err(MechError::ZeroDensitySlice(_))));
    }
}
