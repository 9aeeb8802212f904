//! Revenue-optimal selling of two identical units to a single buyer whose
//! marginal values are decreasing (DMV) or increasing (IMV).
//!
//! The crate provides joint densities on the triangular type space, the Φ
//! function with single-crossing checks, line mechanisms with their
//! straightening and cover transforms, a deterministic price optimizer and
//! a linear-programming oracle over all incentive-compatible mechanisms on
//! a discretized type grid.

pub mod base;
pub mod density;
pub mod domain;
pub mod error;
pub mod grid;
pub mod lp;
pub mod mechanism;
pub mod optimizer;
pub mod par;
pub mod phi;
pub mod quadrature;
pub mod region;
pub mod revenue;
pub mod simplex;
pub mod spec;

pub use base::BaseDensity;
pub use density::{Density, DensityKind};
pub use domain::{Domain, Orientation};
pub use error::{MechError, Result};
pub use spec::DensitySpec;
