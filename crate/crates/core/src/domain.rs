use serde::{Deserialize, Serialize};

use crate::error::{MechError, Result};

/// Which unit the buyer values more.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Decreasing marginal values: `v2 <= a * v1`.
    Dmv,
    /// Increasing marginal values: `v1 <= a * v2`.
    Imv,
}

/// The triangular type space.
///
/// DMV support: `{(v1, v2) in [0,1] x [0,a] : v2 <= a v1}`.
/// IMV support: `{(v1, v2) in [0,a] x [0,1] : v1 <= a v2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub orientation: Orientation,
    pub a: f64,
}

impl Domain {
    pub fn new(orientation: Orientation, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(MechError::InvalidDomain(format!("slope a must be positive, got {a}")));
        }
        Ok(Self { orientation, a })
    }

    pub fn dmv(a: f64) -> Result<Self> {
        Self::new(Orientation::Dmv, a)
    }

    pub fn imv(a: f64) -> Result<Self> {
        Self::new(Orientation::Imv, a)
    }

    pub fn is_dmv(&self) -> bool {
        self.orientation == Orientation::Dmv
    }

    /// Upper end of the v1 range.
    pub fn v1_max(&self) -> f64 {
        match self.orientation {
            Orientation::Dmv => 1.0,
            Orientation::Imv => self.a,
        }
    }

    /// Upper end of the v2 range.
    pub fn v2_max(&self) -> f64 {
        match self.orientation {
            Orientation::Dmv => self.a,
            Orientation::Imv => 1.0,
        }
    }

    /// Largest attainable `v1 + v2`.
    pub fn w_max(&self) -> f64 {
        1.0 + self.a
    }

    /// Closed-set membership.
    pub fn contains(&self, v1: f64, v2: f64) -> bool {
        if !(v1 >= 0.0 && v2 >= 0.0 && v1 <= self.v1_max() && v2 <= self.v2_max()) {
            return false;
        }
        match self.orientation {
            Orientation::Dmv => v2 <= self.a * v1,
            Orientation::Imv => v1 <= self.a * v2,
        }
    }

    /// Membership with every defining inequality strict by at least `eps`.
    pub fn is_interior(&self, v1: f64, v2: f64, eps: f64) -> bool {
        if !(v1 > eps && v2 > eps && v1 < self.v1_max() - eps && v2 < self.v2_max() - eps) {
            return false;
        }
        match self.orientation {
            Orientation::Dmv => v2 < self.a * v1 - eps,
            Orientation::Imv => v1 < self.a * v2 - eps,
        }
    }

    /// The v1 interval of the support at height `v2` (assumed in range).
    pub fn row(&self, v2: f64) -> (f64, f64) {
        match self.orientation {
            Orientation::Dmv => (v2 / self.a, 1.0),
            Orientation::Imv => (0.0, self.a * v2),
        }
    }

    /// The v2 interval of the support at abscissa `v1` (assumed in range).
    pub fn column(&self, v1: f64) -> (f64, f64) {
        match self.orientation {
            Orientation::Dmv => (0.0, self.a * v1),
            Orientation::Imv => (v1 / self.a, 1.0),
        }
    }

    /// The v1 interval of the segment `v1 + v2 = w` inside the support.
    pub fn sum_slice(&self, w: f64) -> (f64, f64) {
        let a = self.a;
        match self.orientation {
            Orientation::Dmv => (w / (1.0 + a), w.min(1.0)),
            Orientation::Imv => ((w - 1.0).max(0.0), a * w / (1.0 + a)),
        }
    }

    /// Clamps a point into the support: first into the bounding box, then
    /// along its row.
    pub fn project(&self, v1: f64, v2: f64) -> (f64, f64) {
        let v2 = v2.clamp(0.0, self.v2_max());
        let (lo, hi) = self.row(v2);
        (v1.clamp(lo, hi), v2)
    }
}
