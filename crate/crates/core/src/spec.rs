//! Density specifications as read from JSON files or the command line.
//!
//! ```json
//! {"orientation": "dmv", "a": 1, "kind": "ordered-decreasing",
//!  "params": {"g": {"family": "power", "alpha": 2}}}
//! {"orientation": "imv", "a": 1, "grid": {"n1": 3, "n2": 3, "values": [...]}}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::base::BaseDensity;
use crate::density::{Density, DensityKind};
use crate::domain::{Domain, Orientation};
use crate::error::{MechError, Result};
use crate::grid::GridData;

/// Built-in family names accepted in `kind`.
pub const FAMILIES: [&str; 6] = [
    "uniform",
    "ordered-decreasing",
    "conditional-decreasing",
    "scale-invariant",
    "ordered-increasing",
    "imv-quadratic",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    /// Row-major node values over the bounding box of the support.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaseSpec {
    Uniform,
    Power { alpha: f64 },
    Exponential { lambda: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl BaseSpec {
    pub fn build(&self) -> Result<BaseDensity> {
        match *self {
            BaseSpec::Uniform => Ok(BaseDensity::uniform()),
            BaseSpec::Power { alpha } => BaseDensity::power(alpha),
            BaseSpec::Exponential { lambda } => BaseDensity::exponential(lambda),
            BaseSpec::Beta { alpha, beta } => BaseDensity::beta(alpha, beta),
        }
    }
}

impl DensitySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| MechError::InvalidDensity(format!("malformed density spec: {e}")))
    }

    /// A built-in family with the given slope and parameters.
    pub fn family(kind: &str, a: f64, params: Map<String, Value>) -> Self {
        Self { orientation: None, a: Some(a), kind: Some(kind.to_string()), params, grid: None }
    }

    pub fn build(&self) -> Result<Density> {
        let a = self.a.unwrap_or(1.0);
        if let Some(g) = &self.grid {
            if self.kind.as_deref().is_some_and(|k| k != "grid") {
                return Err(MechError::InvalidDensity("a spec with a grid must not name another kind".into()));
            }
            let domain = Domain::new(self.orientation.unwrap_or(Orientation::Dmv), a)?;
            return Ok(Density::from_grid(GridData::from_values(domain, g.n1, g.n2, g.values.clone())?));
        }
        let kind = self.kind.as_deref().ok_or_else(|| MechError::InvalidDensity("spec needs a kind or a grid".into()))?;
        let allowed: &[&str] = match kind {
            "uniform" | "imv-quadratic" | "example3" => &[],
            "conditional-decreasing" => &["g1", "g2"],
            _ => &["g"],
        };
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(MechError::InvalidDensity(format!("unknown parameter {k:?} for {kind}")));
        }
        let base = |key: &str| -> Result<BaseDensity> {
            match self.params.get(key) {
                None => Ok(BaseDensity::uniform()),
                Some(v) => serde_json::from_value::<BaseSpec>(v.clone())
                    .map_err(|e| MechError::InvalidDensity(format!("parameter {key}: {e}")))?
                    .build(),
            }
        };
        let (orientation, kind) = match kind {
            "uniform" => (Orientation::Dmv, DensityKind::UniformTriangle),
            "ordered-decreasing" => (Orientation::Dmv, DensityKind::OrderedDecreasing(base("g")?)),
            "conditional-decreasing" => (Orientation::Dmv, DensityKind::ConditionalDecreasing(base("g1")?, base("g2")?)),
            "scale-invariant" => (Orientation::Dmv, DensityKind::ScaleInvariant(base("g")?)),
            "ordered-increasing" => (Orientation::Imv, DensityKind::OrderedIncreasing(base("g")?)),
            "imv-quadratic" | "example3" => (Orientation::Imv, DensityKind::ImvQuadratic),
            other => return Err(MechError::InvalidDensity(format!("unknown density kind {other:?}"))),
        };
        if let Some(o) = self.orientation {
            if o != orientation {
                return Err(MechError::InvalidDensity(format!("{} has orientation {orientation:?}", self.kind.as_deref().unwrap_or(""))));
            }
        }
        Density::new(Domain::new(orientation, a)?, kind)
    }
}
