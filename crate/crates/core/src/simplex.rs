//! A dense primal simplex on the condensed (Tucker) tableau.
//!
//! Solves `max cᵀx` subject to `Ax <= b`, `x >= 0`. Only nonbasic columns
//! are stored, so the tableau is `rows x (vars + 2)` however many slacks
//! there are. Infeasible starts go through the one-artificial auxiliary
//! problem.
//!
//! Programs with mostly zero right-hand sides stall badly on degenerate
//! vertices. The ratio test therefore runs on a right-hand side shifted by
//! tiny distinct amounts, while a second value column carries the exact
//! one. The final basis is optimal for both, since reduced costs do not
//! depend on `b`, and the reported vertex is read from the exact column.

use crate::error::{MechError, Result};

const RATIO_TIE: f64 = 1e-12;
/// Golden-ratio increments give well spread, deterministic shifts.
const SHIFT_STEP: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variables throughout.
    Bland,
    /// Largest reduced cost, falling back to Bland for good after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub rule: PivotRule,
    /// Smallest admissible pivot magnitude.
    pub pivot_tol: f64,
    /// Reduced costs at or below this count as nonpositive.
    pub cost_tol: f64,
    pub max_pivots: usize,
    /// Consecutive degenerate pivots tolerated before switching to Bland.
    pub stall_limit: usize,
    /// Pivots whose row value is at most this are counted as degenerate.
    pub degenerate_tol: f64,
    /// Scale of the right-hand side shifts used by the ratio test.
    pub perturbation: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { rule: PivotRule::Dantzig, pivot_tol: 1e-9, cost_tol: 1e-11, max_pivots: 1_000_000, stall_limit: 50, degenerate_tol: 1e-11, perturbation: 1e-9 }
    }
}

/// `max cᵀx` s.t. each sparse row `Σ a_j x_j <= b`, `x >= 0`.
#[derive(Clone, Debug, Default)]
pub struct Problem {
    pub n_vars: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Problem {
    pub fn new(n_vars: usize) -> Self {
        Self { n_vars, rows: Vec::new(), b: Vec::new(), c: vec![0.0; n_vars] }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(coeffs);
        self.b.push(rhs);
    }

    /// Largest amount by which `x` breaks a row or a sign bound.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .zip(&self.b)
            .map(|(r, &b)| r.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - b)
            .fold(0.0, f64::max);
        x.iter().map(|&v| -v).fold(rows, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// Row-major, `width = cols + 2`; a row ends with its shifted value and
    /// its exact value.
    t: Vec<f64>,
    /// `z = z0 + Σ cost[j] x_N[j]`; `cost[cols]` and `cost[cols + 1]` hold
    /// the shifted and exact `z0`.
    cost: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    /// Columns that may never enter (the retired artificial).
    dead: Vec<bool>,
    rows: usize,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 2
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width() + j]
    }

    fn value(&self, i: usize) -> f64 {
        self.t[i * self.width() + self.cols]
    }

    fn exact(&self, i: usize) -> f64 {
        self.t[i * self.width() + self.cols + 1]
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let w = self.width();
        let p = self.at(r, s);
        let mut prow: Vec<f64> = self.t[r * w..(r + 1) * w].iter().map(|v| v / p).collect();
        prow[s] = 1.0 / p;
        let update = |row: &mut [f64]| {
            let f = row[s];
            if f != 0.0 {
                for (x, &pr) in row.iter_mut().zip(&prow) {
                    *x -= f * pr;
                }
                row[s] = -f / p;
            }
        };
        crate::par::for_each_row_mut(&mut self.t, w, |i, row| {
            if i != r {
                update(row);
            }
        });
        // the cost row reads z = z0 + Σ c x, i.e. the negation of a tableau row
        let f = self.cost[s];
        if f != 0.0 {
            for (x, &pr) in self.cost.iter_mut().zip(&prow) {
                *x -= f * pr;
            }
            self.cost[s] = -f / p;
            self.cost[self.cols] += 2.0 * f * prow[self.cols];
            self.cost[self.cols + 1] += 2.0 * f * prow[self.cols + 1];
        }
        self.t[r * w..(r + 1) * w].copy_from_slice(&prow);
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[s]);
        self.pivots += 1;
    }

    fn entering(&self, rule: PivotRule, tol: f64) -> Option<usize> {
        let eligible = (0..self.cols).filter(|&j| !self.dead[j] && self.cost[j] > tol);
        match rule {
            PivotRule::Bland => eligible.min_by_key(|&j| self.nonbasic[j]),
            PivotRule::Dantzig => eligible.fold(None, |best: Option<usize>, j| match best {
                Some(b) if self.cost[b] >= self.cost[j] => Some(b),
                _ => Some(j),
            }),
        }
    }

    /// Minimum-ratio row; ratios within `RATIO_TIE` count as tied and go
    /// to the smallest basic label.
    fn leaving(&self, s: usize, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, s);
            if a > tol {
                let ratio = self.value(i).max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tied = (ratio - br).abs() <= RATIO_TIE * (1.0 + br.abs());
                        if (tied && self.basic[i] < self.basic[bi]) || (!tied && ratio < br) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|b| b.0)
    }

    fn optimize(&mut self, opts: &SimplexOptions) -> Result<()> {
        let mut rule = opts.rule;
        let mut stall = 0;
        loop {
            let Some(s) = self.entering(rule, opts.cost_tol) else {
                return Ok(());
            };
            let Some(r) = self.leaving(s, opts.pivot_tol) else {
                return Err(MechError::Unbounded);
            };
            if self.pivots >= opts.max_pivots {
                return Err(MechError::SolverFailure(format!("no optimum after {} pivots", self.pivots)));
            }
            let degenerate = self.value(r) <= opts.degenerate_tol;
            self.pivot(r, s);
            stall = if degenerate { stall + 1 } else { 0 };
            if rule == PivotRule::Dantzig && stall > opts.stall_limit {
                rule = PivotRule::Bland;
            }
            if !self.cost[self.cols].is_finite() {
                return Err(MechError::SolverFailure("objective lost finiteness".into()));
            }
        }
    }
}

pub fn solve(p: &Problem, opts: &SimplexOptions) -> Result<Solution> {
    let n = p.n_vars;
    let m = p.rows.len();
    if p.c.len() != n || p.b.len() != m {
        return Err(MechError::InvalidArgument("problem dimensions disagree".into()));
    }
    let needs_phase1 = p.b.iter().any(|&b| b < 0.0);
    // column n is the artificial x0 when present
    let cols = if needs_phase1 { n + 1 } else { n };
    let w = cols + 2;
    let mut t = vec![0.0; m * w];
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, a) in row {
            if j >= n {
                return Err(MechError::InvalidArgument(format!("row {i} refers to variable {j}")));
            }
            t[i * w + j] += a;
        }
        if needs_phase1 {
            t[i * w + n] = -1.0;
        }
        let shift = opts.perturbation * (1.0 + (i as f64 * SHIFT_STEP).fract());
        t[i * w + cols] = p.b[i] + shift;
        t[i * w + cols + 1] = p.b[i];
    }
    let mut tab = Tableau {
        t,
        cost: vec![0.0; w],
        basic: (n + 1..n + 1 + m).collect(),
        nonbasic: (0..cols).collect(),
        dead: vec![false; cols],
        rows: m,
        cols,
        pivots: 0,
    };
    let label_x0 = n;

    if needs_phase1 {
        tab.cost[n] = -1.0;
        let r = (0..m).fold(0, |r, i| if tab.value(i) < tab.value(r) { i } else { r });
        tab.pivot(r, n);
        tab.optimize(opts)?;
        if tab.cost[cols + 1] < -1e-7 {
            return Err(MechError::Infeasible);
        }
        if let Some(r) = tab.basic.iter().position(|&l| l == label_x0) {
            let s = (0..cols)
                .filter(|&j| tab.at(r, j).abs() > opts.pivot_tol)
                .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()))
                .ok_or_else(|| MechError::SolverFailure("artificial variable stuck in the basis".into()))?;
            tab.pivot(r, s);
        }
        let s = tab.nonbasic.iter().position(|&l| l == label_x0).expect("artificial is nonbasic");
        tab.dead[s] = true;
        for i in 0..m {
            tab.t[i * w + s] = 0.0;
        }
    }

    // phase-two costs in terms of the current nonbasic variables
    let cost_of = |label: usize| if label < n { p.c[label] } else { 0.0 };
    let mut cost = vec![0.0; w];
    for j in 0..cols {
        if !tab.dead[j] {
            cost[j] = cost_of(tab.nonbasic[j]);
        }
    }
    for i in 0..m {
        let cb = cost_of(tab.basic[i]);
        if cb != 0.0 {
            for j in 0..cols {
                cost[j] -= cb * tab.at(i, j);
            }
            cost[cols] += cb * tab.value(i);
            cost[cols + 1] += cb * tab.exact(i);
        }
    }
    for j in 0..cols {
        if tab.dead[j] {
            cost[j] = 0.0;
        }
    }
    tab.cost = cost;
    tab.optimize(opts)?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basic[i] < n {
            x[tab.basic[i]] = tab.exact(i).max(0.0);
        }
    }
    let objective = p.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(Solution { x, objective, pivots: tab.pivots })
}
