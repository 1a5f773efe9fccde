//! Geometry of the constant-curvature model spaces, certified geodesic
//! contractions, and sampling tools for studying nonexpansive self-maps of
//! CAT(kappa) test domains.

pub mod contraction;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod mapping;
pub mod obstruction;
pub mod rakotch;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{Curvature, Model, ModelPoint};
pub use mapping::{Domain, MapExpr};
pub use report::ExperimentReport;
