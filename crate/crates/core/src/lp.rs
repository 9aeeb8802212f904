//! The optimal mechanism over a finite grid of types, as a linear program.
//!
//! Variables are the allocation `q1, q2` and the payoff `u = v·q - t` of
//! every node. Writing the program in payoffs turns individual rationality
//! into the sign bound `u >= 0` and makes the zero mechanism a feasible
//! starting point, so the plain program needs no phase one.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::domain::Domain;
use crate::error::{MechError, Result};
use crate::mechanism::DeterministicMechanism;
use crate::region::Affine;
use crate::simplex::{self, Problem, SimplexOptions};

/// Largest grid side accepted by [`build_lp`].
pub const MAX_GRID: usize = 25;
pub const DEFAULT_GRID: usize = 15;
/// Largest constraint violation accepted from a solution.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Payoff differences below this count as ties in discrete best responses.
const TIE_TOL: f64 = 1e-12;

/// Lattice types inside the support with their probability weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeGrid {
    pub domain: Domain,
    pub n: usize,
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TypeGrid {
    /// Nodes `(i h1, j h2)` with `h1 = v1_max / (n-1)` and
    /// `h2 = v2_max / (n-1)`, row-major. Since the diagonal of the support
    /// passes through nodes and cell corners, the cells of the inside nodes
    /// tile the support exactly; each weight is the mass of its cell.
    pub fn new(density: &Density, n: usize) -> Result<Self> {
        if n > MAX_GRID {
            return Err(MechError::GridTooLarge(n, MAX_GRID));
        }
        if n < 1 {
            return Err(MechError::InvalidArgument("grid needs at least one point per axis".into()));
        }
        let domain = density.domain;
        if n == 1 {
            let top = [domain.v1_max(), domain.v2_max()];
            return Ok(Self { domain, n, nodes: vec![top], weights: vec![1.0] });
        }
        let h1 = domain.v1_max() / (n - 1) as f64;
        let h2 = domain.v2_max() / (n - 1) as f64;
        let mut ij = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let inside = if domain.is_dmv() { j <= i } else { i <= j };
                if inside {
                    ij.push((i, j));
                }
            }
        }
        let nodes: Vec<[f64; 2]> = ij.iter().map(|&(i, j)| [i as f64 * h1, j as f64 * h2]).collect();
        let raw = crate::par::map_slice(&ij, |&(i, j)| {
            let (x, y) = (i as f64 * h1, j as f64 * h2);
            density.region_mass_tol(
                y - 0.5 * h2,
                y + 0.5 * h2,
                Affine::constant(x - 0.5 * h1),
                Affine::constant(x + 0.5 * h1),
                1e-12,
            )
        });
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(MechError::InvalidDensity("type grid carries no mass".into()));
        }
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(Self { domain, n, nodes, weights })
    }

    /// A grid with explicit nodes and weights (normalized here).
    pub fn from_nodes(domain: Domain, nodes: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(MechError::InvalidArgument("nodes and weights must be nonempty and aligned".into()));
        }
        if let Some(p) = nodes.iter().find(|p| !domain.contains(p[0], p[1])) {
            return Err(MechError::InvalidArgument(format!("node ({}, {}) outside the support", p[0], p[1])));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(MechError::InvalidArgument("weights must be nonnegative with positive sum".into()));
        }
        let n = nodes.len();
        Ok(Self { domain, n, nodes, weights: weights.iter().map(|w| w / total).collect() })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Restrictions on the allocation beyond feasibility.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Allocation {
    /// `0 <= q2 <= q1 <= 1`.
    #[default]
    Free,
    /// `q1 = q2` at every node.
    EqualUnits,
    /// `q1` pinned to the given values; `q2` and the payoffs stay free.
    FixedFirst(Vec<f64>),
}

/// Logical constraint counts of the program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCounts {
    pub ic: usize,
    pub ir: usize,
    pub feasibility: usize,
}

impl ConstraintCounts {
    pub fn total(&self) -> usize {
        self.ic + self.ir + self.feasibility
    }
}

#[derive(Clone, Debug)]
pub struct LpInstance {
    pub grid: TypeGrid,
    pub allocation: Allocation,
    pub problem: Problem,
    /// Constant revenue from pinned first-unit allocations.
    pub offset: f64,
    pub counts: ConstraintCounts,
}

/// Which program variable carries a node's `q1`, `q2` and `u`.
#[derive(Clone, Copy, Debug)]
enum Var {
    At(usize),
    Fixed(f64),
}

impl LpInstance {
    fn stride(&self) -> usize {
        match self.allocation {
            Allocation::Free => 3,
            Allocation::EqualUnits | Allocation::FixedFirst(_) => 2,
        }
    }

    fn q1(&self, k: usize) -> Var {
        match &self.allocation {
            Allocation::Free | Allocation::EqualUnits => Var::At(self.stride() * k),
            Allocation::FixedFirst(q) => Var::Fixed(q[k]),
        }
    }

    fn q2(&self, k: usize) -> Var {
        match self.allocation {
            Allocation::Free => Var::At(3 * k + 1),
            Allocation::EqualUnits => Var::At(2 * k),
            Allocation::FixedFirst(_) => Var::At(2 * k),
        }
    }

    fn u(&self, k: usize) -> usize {
        self.stride() * k + self.stride() - 1
    }

    fn var_name(&self, j: usize) -> String {
        let (k, r) = (j / self.stride(), j % self.stride());
        let kind = match (&self.allocation, r) {
            (Allocation::Free, 0) => "q1",
            (Allocation::Free, 1) => "q2",
            (Allocation::EqualUnits, 0) => "q",
            (Allocation::FixedFirst(_), 0) => "q2",
            _ => "u",
        };
        format!("{kind}_{k}")
    }

    /// The program in CPLEX LP text format.
    pub fn to_lp_text(&self) -> String {
        let term = |out: &mut String, first: &mut bool, a: f64, j: usize| {
            if a == 0.0 {
                return;
            }
            let sign = if a < 0.0 { "-" } else if *first { "" } else { "+" };
            let _ = write!(out, " {sign} {} {}", a.abs(), self.var_name(j));
            *first = false;
        };
        let mut s = String::from("\\ optimal mechanism on a type grid\nMaximize\n obj:");
        let mut first = true;
        for (j, &c) in self.problem.c.iter().enumerate() {
            term(&mut s, &mut first, c, j);
        }
        if self.offset != 0.0 {
            let _ = write!(s, " + {}", self.offset);
        }
        s.push_str("\nSubject To\n");
        for (i, (row, b)) in self.problem.rows.iter().zip(&self.problem.b).enumerate() {
            let _ = write!(s, " c{i}:");
            let mut first = true;
            for &(j, a) in row {
                term(&mut s, &mut first, a, j);
            }
            if first {
                s.push_str(" 0 x_unused");
            }
            let _ = writeln!(s, " <= {b}");
        }
        s.push_str("End\n");
        s
    }
}

/// Builds the program on an `n`-per-axis grid.
pub fn build_lp(density: &Density, n: usize) -> Result<LpInstance> {
    build_lp_with(TypeGrid::new(density, n)?, Allocation::Free)
}

pub fn build_lp_with(grid: TypeGrid, allocation: Allocation) -> Result<LpInstance> {
    let m = grid.len();
    if let Allocation::FixedFirst(q) = &allocation {
        if q.len() != m || q.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(MechError::InvalidArgument("pinned first-unit allocations must lie in [0, 1]".into()));
        }
    }
    let stride = match allocation {
        Allocation::Free => 3,
        _ => 2,
    };
    let mut inst = LpInstance {
        grid,
        allocation,
        problem: Problem::new(stride * m),
        offset: 0.0,
        counts: ConstraintCounts { ic: m * m.saturating_sub(1), ir: m, feasibility: 3 * m },
    };
    let nodes = inst.grid.nodes.clone();
    let weights = inst.grid.weights.clone();

    // revenue Σ w (v·q - u)
    let mut c = vec![0.0; stride * m];
    let mut offset = 0.0;
    for k in 0..m {
        let [v1, v2] = nodes[k];
        let w = weights[k];
        match inst.q1(k) {
            Var::At(j) => c[j] += w * v1,
            Var::Fixed(q) => offset += w * v1 * q,
        }
        if let Var::At(j) = inst.q2(k) {
            c[j] += w * v2;
        }
        c[inst.u(k)] -= w;
    }

    // u(v') - u(v) + (v - v')·q(v') <= 0
    let mut rows = Vec::with_capacity(m * m + 2 * m);
    let mut rhs = Vec::with_capacity(m * m + 2 * m);
    for k in 0..m {
        for l in 0..m {
            if k == l {
                continue;
            }
            let d1 = nodes[k][0] - nodes[l][0];
            let d2 = nodes[k][1] - nodes[l][1];
            let mut row = vec![(inst.u(l), 1.0), (inst.u(k), -1.0)];
            let mut b = 0.0;
            for (var, d) in [(inst.q1(l), d1), (inst.q2(l), d2)] {
                match var {
                    Var::At(j) => row.push((j, d)),
                    Var::Fixed(q) => b -= d * q,
                }
            }
            row.retain(|e| e.1 != 0.0);
            rows.push(row);
            rhs.push(b);
        }
    }
    for k in 0..m {
        match (inst.q1(k), inst.q2(k)) {
            (Var::At(j1), Var::At(j2)) if j1 != j2 => {
                rows.push(vec![(j2, 1.0), (j1, -1.0)]);
                rhs.push(0.0);
                rows.push(vec![(j1, 1.0)]);
                rhs.push(1.0);
            }
            (Var::At(j), Var::At(_)) => {
                rows.push(vec![(j, 1.0)]);
                rhs.push(1.0);
            }
            (Var::Fixed(q), Var::At(j2)) => {
                rows.push(vec![(j2, 1.0)]);
                rhs.push(q);
            }
            (_, Var::Fixed(_)) => unreachable!("q2 is always a variable"),
        }
    }
    inst.problem.c = c;
    inst.problem.rows = rows;
    inst.problem.b = rhs;
    inst.offset = offset;
    Ok(inst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeOutcome {
    pub v1: f64,
    pub v2: f64,
    pub q1: f64,
    pub q2: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub objective: f64,
    pub outcomes: Vec<NodeOutcome>,
    pub status: SolveStatus,
    /// Recomputed from `outcomes` against every IC, IR and feasibility
    /// constraint in the primitive form.
    pub max_violation: f64,
    pub pivots: usize,
}

impl LpSolution {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("v1,v2,q1,q2,t\n");
        for o in &self.outcomes {
            let _ = writeln!(s, "{},{},{},{},{}", o.v1, o.v2, o.q1, o.q2, o.t);
        }
        s
    }
}

/// Largest violation of IC, IR and `0 <= q2 <= q1 <= 1` over the outcomes.
pub fn max_violation(outcomes: &[NodeOutcome]) -> f64 {
    let util = |v: &NodeOutcome, o: &NodeOutcome| v.v1 * o.q1 + v.v2 * o.q2 - o.t;
    let mut worst: f64 = 0.0;
    for v in outcomes {
        let own = util(v, v);
        worst = worst.max(-own).max(-v.q2).max(v.q2 - v.q1).max(v.q1 - 1.0);
        for o in outcomes {
            worst = worst.max(util(v, o) - own);
        }
    }
    worst
}

pub fn solve_lp(inst: &LpInstance) -> Result<LpSolution> {
    let sol = simplex::solve(&inst.problem, &SimplexOptions::default())?;
    let x = &sol.x;
    let read = |v: Var| match v {
        Var::At(j) => x[j],
        Var::Fixed(q) => q,
    };
    let outcomes: Vec<NodeOutcome> = (0..inst.grid.len())
        .map(|k| {
            let [v1, v2] = inst.grid.nodes[k];
            let (q1, q2) = (read(inst.q1(k)), read(inst.q2(k)));
            NodeOutcome { v1, v2, q1, q2, t: v1 * q1 + v2 * q2 - x[inst.u(k)] }
        })
        .collect();
    let max_violation = max_violation(&outcomes);
    if max_violation > FEASIBILITY_TOL {
        return Err(MechError::SolverFailure(format!(
            "solution violates a constraint by {max_violation:e}"
        )));
    }
    let objective = outcomes.iter().zip(&inst.grid.weights).map(|(o, w)| w * o.t).sum::<f64>();
    if !objective.is_finite() {
        return Err(MechError::SolverFailure("non-finite objective".into()));
    }
    Ok(LpSolution { objective, outcomes, status: SolveStatus::Optimal, max_violation, pivots: sol.pivots })
}

/// Discrete expected revenue of a price pair, ties going to the larger
/// payment.
pub fn grid_revenue(grid: &TypeGrid, m: &DeterministicMechanism) -> f64 {
    let menu = m.menu();
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .map(|(&[v1, v2], &w)| {
            let util = |item: &(f64, f64, f64)| v1 * item.0 + v2 * item.1 - item.2;
            let best = menu.iter().map(util).fold(f64::NEG_INFINITY, f64::max);
            let t = menu
                .iter()
                .filter(|item| util(item) >= best - TIE_TOL)
                .map(|item| item.2)
                .fold(0.0, f64::max);
            w * t
        })
        .sum()
}

/// The best price pair on the grid. Revenue only changes where some type
/// becomes indifferent, so an optimum is pinned by two of
/// `p1 = v1`, `p2 = v2`, `p1 + p2 = v1 + v2` (or by `p2 = 0`), each taken
/// at node values; all such pairs are tried.
pub fn best_deterministic_on_grid(grid: &TypeGrid) -> (DeterministicMechanism, f64) {
    let dedup = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
        v
    };
    let firsts = dedup(grid.nodes.iter().map(|p| p[0]).collect());
    let seconds = dedup(grid.nodes.iter().map(|p| p[1]).collect());
    let sums = dedup(grid.nodes.iter().map(|p| p[0] + p[1]).collect());
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for &s in &sums {
        pairs.push((s, 0.0));
    }
    for &p1 in &firsts {
        for &p2 in &seconds {
            pairs.push((p1, p2));
        }
        for &s in &sums {
            pairs.push((p1, s - p1));
        }
    }
    for &p2 in &seconds {
        for &s in &sums {
            pairs.push((s - p2, p2));
        }
    }
    pairs.retain(|&(p1, p2)| p1 >= 0.0 && p2 >= 0.0);
    let revs = crate::par::map_slice(&pairs, |&(p1, p2)| grid_revenue(grid, &DeterministicMechanism::new(p1, p2)));
    let k = (0..pairs.len()).fold(0, |k, i| {
        let better = (revs[i], -pairs[i].0, -pairs[i].1) > (revs[k], -pairs[k].0, -pairs[k].1);
        if better {
            i
        } else {
            k
        }
    });
    (DeterministicMechanism::new(pairs[k].0, pairs[k].1), revs[k])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub n: usize,
    pub nodes: usize,
    pub lp_value: f64,
    pub best_det_on_grid: f64,
    pub best_prices: DeterministicMechanism,
    pub gap: f64,
    pub max_violation: f64,
    pub pivots: usize,
}

/// LP optimum against the best deterministic mechanism on the same grid.
pub fn deterministic_gap(density: &Density, n: usize) -> Result<(GapReport, LpSolution)> {
    let inst = build_lp(density, n)?;
    let sol = solve_lp(&inst)?;
    let (best_prices, best_det_on_grid) = best_deterministic_on_grid(&inst.grid);
    let report = GapReport {
        n,
        nodes: inst.grid.len(),
        lp_value: sol.objective,
        best_det_on_grid,
        best_prices,
        gap: sol.objective - best_det_on_grid,
        max_violation: sol.max_violation,
        pivots: sol.pivots,
    };
    Ok((report, sol))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRow {
    pub theta: f64,
    pub lp_value: f64,
}

/// LP optimum along the exponential tilts of `density`.
pub fn monotonicity_check(density: &Density, thetas: &[f64], n: usize) -> Result<Vec<MonotonicityRow>> {
    thetas
        .iter()
        .map(|&theta| {
            let tilted = if theta == 0.0 { density.clone() } else { density.fosd_tilt(theta)? };
            let sol = solve_lp(&build_lp(&tilted, n)?)?;
            Ok(MonotonicityRow { theta, lp_value: sol.objective })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_on_small_grid() {
        let d = Density::uniform_triangle(1.0).unwrap();
        let inst = build_lp(&d, 3).unwrap();
        assert_eq!(inst.grid.len(), 6);
        assert_eq!(inst.counts.ic, 30);
        assert_eq!(inst.counts.total(), 30 + 6 + 18);
        assert!((inst.grid.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(build_lp(&d, 26), Err(MechError::GridTooLarge(26, 25))));
    }

    #[test]
    fn single_node_extracts_everything() {
        let d = Density::uniform_triangle(1.0).unwrap();
        let (rep, sol) = deterministic_gap(&d, 1).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
        assert_eq!(rep.gap, 0.0);
        let o = sol.outcomes[0];
        assert_eq!((o.q1, o.q2), (1.0, 1.0));
    }

    #[test]
    fn cell_weights_of_uniform_triangle() {
        // corner cells are an eighth of a full cell, diagonal cells a half
        let d = Density::uniform_triangle(1.0).unwrap();
        let g = TypeGrid::new(&d, 5).unwrap();
        let full = 2.0 * 0.25 * 0.25;
        let w = |x: f64, y: f64| {
            let k = g.nodes.iter().position(|p| (p[0] - x).abs() < 1e-12 && (p[1] - y).abs() < 1e-12).unwrap();
            g.weights[k]
        };
        assert!((w(0.5, 0.25) - full).abs() < 1e-12);
        assert!((w(0.5, 0.5) - full / 2.0).abs() < 1e-12);
        assert!((w(1.0, 0.5) - full / 2.0).abs() < 1e-12);
        assert!((w(1.0, 1.0) - full / 8.0).abs() < 1e-12);
    }

    #[test]
    fn lp_text_mentions_every_row() {
        let d = Density::uniform_triangle(1.0).unwrap();
        let inst = build_lp(&d, 2).unwrap();
        let text = inst.to_lp_text();
        assert!(text.starts_with("\\ optimal"));
        assert_eq!(text.matches(" <= ").count(), inst.problem.rows.len());
        assert!(text.contains("q1_0") && text.trim_end().ends_with("End"));
    }
}
