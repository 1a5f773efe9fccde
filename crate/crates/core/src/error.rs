use thiserror::Error;

use crate::geometry::ModelPoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("curvature mismatch: {0} vs {1}")]
    CurvatureMismatch(f64, f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("points are (numerically) antipodal, the minimizing geodesic is not unique")]
    NonUniqueGeodesic,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("point lies outside the domain")]
    OutsideDomain,

    #[error("vacuous certificate: grid minimum {grid_min} does not exceed twice the mesh {mesh}")]
    VacuousCertificate { grid_min: f64, mesh: f64 },

    #[error("fixed-point search exhausted its budget; best displacement {displacement}")]
    SearchFailure {
        best: Box<ModelPoint>,
        displacement: f64,
    },

    #[error("certificate violated: {0}")]
    CertificateViolated(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn out_of_range(msg: impl Into<String>) -> Self {
        Error::OutOfRange(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }
}
