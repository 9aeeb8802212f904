//! One-dimensional densities on [0, 1] used to build the ordered,
//! conditional and scale-invariant joint densities.

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{MechError, Result};
use crate::quadrature::Quadrature;

/// A user-supplied density on [0, 1].
pub trait CustomBase: Send + Sync {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    /// Derivative of the pdf.
    fn dpdf(&self, x: f64) -> f64;
    fn name(&self) -> String {
        "custom".to_string()
    }
}

#[derive(Clone)]
pub enum BaseDensity {
    /// `g(x) = alpha x^(alpha-1)`.
    Power { alpha: f64 },
    /// `g(x) = lambda e^(lambda x) / (e^lambda - 1)`.
    Exponential { lambda: f64 },
    /// Beta(alpha, beta) with `alpha >= 1 >= beta`.
    Beta { alpha: f64, beta: f64, ln_norm: f64 },
    Custom(Arc<dyn CustomBase>),
}

impl fmt::Debug for BaseDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power { alpha } => write!(f, "Power({alpha})"),
            Self::Exponential { lambda } => write!(f, "Exponential({lambda})"),
            Self::Beta { alpha, beta, .. } => write!(f, "Beta({alpha}, {beta})"),
            Self::Custom(c) => write!(f, "Custom({})", c.name()),
        }
    }
}

impl PartialEq for BaseDensity {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Power { alpha: a }, Self::Power { alpha: b }) => a == b,
            (Self::Exponential { lambda: a }, Self::Exponential { lambda: b }) => a == b,
            (Self::Beta { alpha: a1, beta: b1, .. }, Self::Beta { alpha: a2, beta: b2, .. }) => {
                a1 == a2 && b1 == b2
            }
            (Self::Custom(a), Self::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

const LAMBDA_ZERO: f64 = 1e-12;

impl BaseDensity {
    pub fn uniform() -> Self {
        Self::Power { alpha: 1.0 }
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(MechError::InvalidDensity(format!("power exponent must be positive, got {alpha}")));
        }
        Ok(Self::Power { alpha })
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda.abs() > 700.0 {
            return Err(MechError::InvalidDensity(format!("exponential rate out of range: {lambda}")));
        }
        Ok(Self::Exponential { lambda })
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha >= 1.0 && beta > 0.0 && beta <= 1.0) {
            return Err(MechError::InvalidDensity(format!(
                "beta family requires alpha >= 1 >= beta > 0, got ({alpha}, {beta})"
            )));
        }
        Ok(Self::Beta { alpha, beta, ln_norm: ln_beta(alpha, beta) })
    }

    /// Wraps a custom density after checking that it integrates to one.
    pub fn custom(c: Arc<dyn CustomBase>) -> Result<Self> {
        let mass = Quadrature::STANDARD.with_tol(1e-11).integrate(|x| c.pdf(x), 0.0, 1.0);
        if (mass - 1.0).abs() > 1e-8 {
            return Err(MechError::InvalidDensity(format!("custom density integrates to {mass}")));
        }
        Ok(Self::Custom(c))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Power { alpha } => {
                if alpha == 1.0 {
                    1.0
                } else {
                    alpha * x.powf(alpha - 1.0)
                }
            }
            Self::Exponential { lambda } => {
                if lambda.abs() < LAMBDA_ZERO {
                    1.0
                } else {
                    lambda * (lambda * x).exp() / lambda.exp_m1()
                }
            }
            Self::Beta { alpha, beta, ln_norm } => {
                let mut l = -ln_norm;
                if alpha != 1.0 {
                    l += (alpha - 1.0) * x.ln();
                }
                if beta != 1.0 {
                    l += (beta - 1.0) * (1.0 - x).ln();
                }
                l.exp()
            }
            Self::Custom(ref c) => c.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            Self::Power { alpha } => x.powf(alpha),
            Self::Exponential { lambda } => {
                if lambda.abs() < LAMBDA_ZERO {
                    x
                } else {
                    (lambda * x).exp_m1() / lambda.exp_m1()
                }
            }
            Self::Beta { alpha, beta, .. } => beta_reg(alpha, beta, x),
            Self::Custom(ref c) => c.cdf(x),
        }
    }

    /// Survival function `1 - G(x)`, computed without cancellation where the
    /// family allows it.
    pub fn sf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            Self::Power { alpha } => -(alpha * x.ln()).exp_m1(),
            Self::Exponential { lambda } => {
                if lambda.abs() < LAMBDA_ZERO {
                    1.0 - x
                } else {
                    (lambda.exp_m1() - (lambda * x).exp_m1()) / lambda.exp_m1()
                }
            }
            Self::Beta { alpha, beta, .. } => beta_reg(beta, alpha, 1.0 - x),
            Self::Custom(ref c) => 1.0 - c.cdf(x),
        }
    }

    pub fn dpdf(&self, x: f64) -> f64 {
        match *self {
            Self::Power { alpha } => {
                if alpha == 1.0 {
                    0.0
                } else if alpha == 2.0 {
                    2.0
                } else {
                    alpha * (alpha - 1.0) * x.powf(alpha - 2.0)
                }
            }
            Self::Exponential { lambda } => lambda * self.pdf(x),
            Self::Beta { alpha, beta, .. } => {
                let mut s = 0.0;
                if alpha != 1.0 {
                    s += (alpha - 1.0) / x;
                }
                if beta != 1.0 {
                    s -= (beta - 1.0) / (1.0 - x);
                }
                self.pdf(x) * s
            }
            Self::Custom(ref c) => c.dpdf(x),
        }
    }

    /// Elasticity `x g'(x) / g(x)`.
    pub fn eta(&self, x: f64) -> f64 {
        match *self {
            Self::Power { alpha } => alpha - 1.0,
            Self::Exponential { lambda } => lambda * x,
            Self::Beta { alpha, beta, .. } => {
                let mut e = alpha - 1.0;
                if beta != 1.0 {
                    e -= (beta - 1.0) * x / (1.0 - x);
                }
                e
            }
            Self::Custom(ref c) => x * c.dpdf(x) / c.pdf(x),
        }
    }

    /// `∫_x^1 g(t) / t dt`.
    pub fn tail_over_t(&self, x: f64) -> f64 {
        match *self {
            Self::Power { alpha } => {
                if alpha == 1.0 {
                    -x.ln()
                } else {
                    alpha / (alpha - 1.0) * (1.0 - x.powf(alpha - 1.0))
                }
            }
            _ => Quadrature::STANDARD
                .with_tol(1e-12)
                .integrate(|t| self.pdf(t) / t, x, 1.0),
        }
    }

    /// A JSON description of the family and its parameters.
    pub fn describe(&self) -> Value {
        match *self {
            Self::Power { alpha } => json!({"family": "power", "alpha": alpha}),
            Self::Exponential { lambda } => json!({"family": "exponential", "lambda": lambda}),
            Self::Beta { alpha, beta, .. } => json!({"family": "beta", "alpha": alpha, "beta": beta}),
            Self::Custom(ref c) => json!({"family": "custom", "name": c.name()}),
        }
    }
}
