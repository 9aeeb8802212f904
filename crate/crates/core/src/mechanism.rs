//! Deterministic price menus and step line mechanisms.
//!
//! A line mechanism is pinned down by its outcomes on the right edge
//! `v1 = 1`: the first unit always sells there and the second-unit
//! probability `q2(1, ·)` is an increasing step function. Every other type
//! `(v1, v2)` either takes the outcome of `(1, v2)` or buys nothing, so its
//! payoff is `max(0, u(1, v2) - (1 - v1))`.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{MechError, Result};

/// Most steps a line mechanism may have.
pub const MAX_STEPS: usize = 64;
const LEVEL_EQ: f64 = 1e-12;

/// Prices `p1` for the first unit and `p2` for the second. `p2 = 0` is pure
/// bundling at price `p1`; only in that case may `p1` exceed 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicMechanism {
    pub p1: f64,
    pub p2: f64,
}

impl DeterministicMechanism {
    pub fn new(p1: f64, p2: f64) -> Self {
        Self { p1, p2 }
    }

    pub fn bundle(price: f64) -> Self {
        Self { p1: price, p2: 0.0 }
    }

    pub fn is_bundle(&self) -> bool {
        self.p2 == 0.0
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let ok = if self.is_bundle() {
            self.p1 >= 0.0 && self.p1 <= domain.w_max()
        } else {
            self.p1 >= 0.0 && self.p1 <= domain.v1_max() && self.p2 > 0.0 && self.p2 <= domain.v2_max()
        };
        if ok {
            Ok(())
        } else {
            Err(MechError::InvalidMechanism(format!("prices ({}, {}) out of range", self.p1, self.p2)))
        }
    }

    /// The menu `(q1, q2, t)` including the outside option.
    pub fn menu(&self) -> [(f64, f64, f64); 3] {
        [(0.0, 0.0, 0.0), (1.0, 0.0, self.p1), (1.0, 1.0, self.p1 + self.p2)]
    }

    pub fn payoff(&self, v1: f64, v2: f64) -> f64 {
        0f64.max(v1 - self.p1).max(v1 + v2 - self.p1 - self.p2)
    }

    /// Best response, ties broken toward the larger payment.
    pub fn outcome(&self, v1: f64, v2: f64) -> (f64, f64, f64) {
        let mut best = (0.0, 0.0, 0.0);
        let mut best_u = 0.0;
        for (q1, q2, t) in self.menu() {
            let u = v1 * q1 + v2 * q2 - t;
            if u > best_u || (u == best_u && t > best.2) {
                best = (q1, q2, t);
                best_u = u;
            }
        }
        best
    }

    /// The same mechanism written as a line mechanism (DMV only).
    pub fn to_line(&self, a: f64) -> Result<StepLineMechanism> {
        if self.is_bundle() {
            if self.p1 <= 1.0 {
                StepLineMechanism::new(a, self.p1, vec![(0.0, 1.0)])
            } else {
                StepLineMechanism::new(a, 1.0, vec![((self.p1 - 1.0).min(a), 1.0)])
            }
        } else if self.p2 >= a {
            StepLineMechanism::new(a, self.p1, vec![])
        } else {
            StepLineMechanism::new(a, self.p1, vec![(self.p2, 1.0)])
        }
    }
}

/// First-unit price `t10` and the steps `(b_k, q_k)` of `q2(1, ·)`:
/// `q2(1, v2) = q_k` on `[b_k, b_{k+1})` and 0 below `b_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLineMechanism {
    pub a: f64,
    pub t10: f64,
    pub steps: Vec<(f64, f64)>,
}

/// Summary quantities of a line mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismDiagnostics {
    pub alpha: f64,
    /// `inf { v2 : q2(1, v2) > 0 }`; infinite when the second unit never sells.
    pub v2_lower: f64,
    /// `sup { v2 <= a : q2(1, v2) < 1 }`.
    pub v2_upper: f64,
    pub qbar2: f64,
    pub is_constrained: bool,
    pub is_semi_deterministic: bool,
}

impl StepLineMechanism {
    /// Validates and normalizes: steps at level 0 are dropped.
    pub fn new(a: f64, t10: f64, steps: Vec<(f64, f64)>) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(MechError::InvalidMechanism(format!("slope a = {a}")));
        }
        if !(0.0..=1.0).contains(&t10) {
            return Err(MechError::InvalidMechanism(format!("t10 = {t10} outside [0, 1]")));
        }
        let steps: Vec<(f64, f64)> = steps.into_iter().filter(|s| s.1 != 0.0).collect();
        if steps.len() > MAX_STEPS {
            return Err(MechError::InvalidMechanism(format!("{} steps exceed the cap {MAX_STEPS}", steps.len())));
        }
        for (k, &(b, q)) in steps.iter().enumerate() {
            if !(b >= 0.0 && b <= a && q > 0.0 && q <= 1.0) {
                return Err(MechError::InvalidMechanism(format!("step ({b}, {q}) out of range")));
            }
            if k > 0 {
                let (pb, pq) = steps[k - 1];
                if !(b > pb && q > pq) {
                    return Err(MechError::InvalidMechanism(
                        "breakpoints and levels must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(Self { a, t10, steps })
    }

    /// `q2(1, v2)`.
    pub fn q2(&self, v2: f64) -> f64 {
        self.steps.iter().take_while(|s| s.0 <= v2).last().map_or(0.0, |s| s.1)
    }

    /// `q2(1, ·)` just below `v2`.
    pub fn q2_left(&self, v2: f64) -> f64 {
        self.steps.iter().take_while(|s| s.0 < v2).last().map_or(0.0, |s| s.1)
    }

    /// `u(1, v2) = 1 - t10 + ∫_0^{v2} q2(1, y) dy`.
    pub fn u1(&self, v2: f64) -> f64 {
        let mut u = 1.0 - self.t10;
        for (k, &(b, q)) in self.steps.iter().enumerate() {
            if v2 <= b {
                break;
            }
            let end = self.steps.get(k + 1).map_or(v2, |s| s.0.min(v2));
            u += q * (end - b);
        }
        u
    }

    /// `t(1, v2) = 1 + v2 q2(1, v2) - u(1, v2)`; constant on each step.
    pub fn t1(&self, v2: f64) -> f64 {
        1.0 + v2 * self.q2(v2) - self.u1(v2)
    }

    pub fn payoff(&self, v1: f64, v2: f64) -> f64 {
        (self.u1(v2) - (1.0 - v1)).max(0.0)
    }

    /// `(q1, q2, t)` of type `v`: the outcome of `(1, v2)` when it is
    /// individually rational, otherwise nothing.
    pub fn outcome(&self, v1: f64, v2: f64) -> (f64, f64, f64) {
        if self.u1(v2) - (1.0 - v1) >= 0.0 {
            (1.0, self.q2(v2), self.t1(v2))
        } else {
            (0.0, 0.0, 0.0)
        }
    }

    /// The unique `α` with `α = 1 - u(1, aα)`, by bisection to 1e-12.
    pub fn alpha(&self) -> f64 {
        let h = |x: f64| x + self.u1(self.a * x) - 1.0;
        if h(0.0) >= 0.0 {
            return 0.0;
        }
        if h(1.0) <= 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn v2_lower(&self) -> f64 {
        self.steps.first().map_or(f64::INFINITY, |s| s.0)
    }

    pub fn v2_upper(&self) -> f64 {
        self.steps.iter().find(|s| s.1 >= 1.0).map_or(self.a, |s| s.0)
    }

    pub fn diagnostics(&self) -> MechanismDiagnostics {
        let alpha = self.alpha();
        let top = self.a * alpha;
        let qbar2 = if alpha > 0.0 { self.q2_left(top) } else { 0.0 };
        let q_top = self.q2(top);
        let eq = |x: f64, y: f64| (x - y).abs() <= LEVEL_EQ;
        let above_ok = self
            .steps
            .iter()
            .filter(|s| s.0 > top)
            .all(|s| eq(s.1, qbar2) || eq(s.1, 1.0));
        let is_constrained = (eq(q_top, qbar2) && above_ok) || eq(q_top, 1.0);
        let is_semi_deterministic = is_constrained
            && self.steps.iter().all(|s| eq(s.1, q_top) || eq(s.1, 1.0));
        MechanismDiagnostics {
            alpha,
            v2_lower: self.v2_lower(),
            v2_upper: self.v2_upper(),
            qbar2,
            is_constrained,
            is_semi_deterministic,
        }
    }

    /// `n` points `(1 - u(1, v2), v2)` for `v2` evenly spaced on `[0, aα]`.
    pub fn z0_boundary(&self, n: usize) -> Result<Vec<[f64; 2]>> {
        if n < 2 {
            return Err(MechError::InvalidArgument("boundary needs at least 2 points".into()));
        }
        let top = self.a * self.alpha();
        Ok((0..n)
            .map(|k| {
                let v2 = top * k as f64 / (n - 1) as f64;
                [1.0 - self.u1(v2), v2]
            })
            .collect())
    }

    /// Flattens `u(1, ·)` below the cut: `u^s(1, v2) = max(u(1, v2), u(1, v2s))`.
    /// The cut must lie in `[v2_lower, aα]`; at `v2_lower` the mechanism is
    /// returned unchanged.
    pub fn straighten(&self, v2s: f64) -> Result<Self> {
        let lower = self.v2_lower();
        let upper = self.a * self.alpha();
        if !(v2s >= lower && v2s <= upper) {
            return Err(MechError::BadCut { cut: v2s, lower, upper });
        }
        if v2s == lower {
            return Ok(self.clone());
        }
        let t10 = (1.0 - self.u1(v2s)).clamp(0.0, 1.0);
        let mut steps = vec![(v2s, self.q2(v2s))];
        steps.extend(self.steps.iter().copied().filter(|s| s.0 > v2s));
        Self::new(self.a, t10, steps)
    }

    /// The cover: below `aα` the outcome is `(q*, t*) = (q2, t)(1, aα)` once
    /// `v2 q* >= t* - t10` and `(0, t10)` before; above `aα` nothing changes.
    pub fn cover(&self) -> Result<Self> {
        let top = self.a * self.alpha();
        let q_star = self.q2(top);
        let mut steps = Vec::new();
        if q_star > 0.0 {
            let mut cut = ((self.t1(top) - self.t10) / q_star).clamp(0.0, top);
            // land exactly on an existing breakpoint when roundoff is all that separates them
            if let Some(s) = self.steps.iter().find(|s| (s.0 - cut).abs() <= 1e-12) {
                cut = s.0;
            }
            steps.push((cut, q_star));
        }
        steps.extend(self.steps.iter().copied().filter(|s| s.0 > top));
        Self::new(self.a, self.t10, steps)
    }
}

/// A mechanism in its serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MechanismSpec {
    Deterministic { p1: f64, p2: f64 },
    Line { t10: f64, steps: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism {
    Deterministic(DeterministicMechanism),
    Line(StepLineMechanism),
}

impl MechanismSpec {
    pub fn build(&self, domain: &Domain) -> Result<Mechanism> {
        match self {
            Self::Deterministic { p1, p2 } => {
                let m = DeterministicMechanism::new(*p1, *p2);
                m.validate(domain)?;
                Ok(Mechanism::Deterministic(m))
            }
            Self::Line { t10, steps } => {
                if !domain.is_dmv() {
                    return Err(MechError::WrongOrientation);
                }
                let steps = steps.iter().map(|s| (s[0], s[1])).collect();
                Ok(Mechanism::Line(StepLineMechanism::new(domain.a, *t10, steps)?))
            }
        }
    }
}

impl From<&Mechanism> for MechanismSpec {
    fn from(m: &Mechanism) -> Self {
        match m {
            Mechanism::Deterministic(d) => Self::Deterministic { p1: d.p1, p2: d.p2 },
            Mechanism::Line(l) => Self::Line { t10: l.t10, steps: l.steps.iter().map(|s| [s.0, s.1]).collect() },
        }
    }
}
