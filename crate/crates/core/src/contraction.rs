//! Certified geodesic contractions toward a center point.
//!
//! On a ball `B(x, R)` with `R < D_kappa / 2` the map sending `z` to the
//! point of `[x, z]` at distance `t d(x, z)` from `x` is `t^(1/k)`-Lipschitz,
//! where `k` is any integer making `sin^k` convex on `[0, sqrt(kappa) R]`.
//! Nonpositive curvature gives `k = 1`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Curvature, Model, ModelPoint};
use crate::mapping::{Domain, MapExpr};

/// Additive slack for every certified-bound comparison.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCertificate {
    pub kappa: f64,
    pub radius: f64,
    pub exponent_k: u32,
    pub t: f64,
    /// `t^(1/k)`.
    pub lip_bound: f64,
}

impl ContractionCertificate {
    /// Whether the certificate claims a strict contraction.
    pub fn is_strict(&self) -> bool {
        self.lip_bound < 1.0
    }
}

/// Smallest admissible integer exponent for the ball of radius `radius`.
///
/// Positive curvature needs `k >= 1 + tan^2(sqrt(kappa) R)` and `k >= 2`.
pub fn k_exponent(kappa: Curvature, radius: f64) -> Result<u32> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::out_of_range(format!("radius must be positive, got {radius}")));
    }
    if kappa.model() != Model::Spherical {
        return Ok(1);
    }
    let s = kappa.scale() * radius;
    if s >= FRAC_PI_2 {
        return Err(Error::out_of_range(format!(
            "radius {radius} must be below D_kappa / 2 = {}",
            kappa.diameter_bound() / 2.0
        )));
    }
    let tan = s.tan();
    let needed = (1.0 + tan * tan).ceil();
    if needed > u32::MAX as f64 {
        return Err(Error::out_of_range("exponent overflows; radius too close to D_kappa / 2"));
    }
    Ok((needed as u32).max(2))
}

/// Second derivative of `sin^k` at `tau`, written as
/// `k sin^k(tau) ((k - 1) cot^2(tau) - 1)`.
pub fn sin_pow_convexity_margin(k: u32, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < FRAC_PI_2) {
        return Err(Error::domain(format!("tau = {tau} not in (0, pi/2)")));
    }
    let k = k as f64;
    let cot = 1.0 / tau.tan();
    Ok(k * tau.sin().powf(k) * ((k - 1.0) * cot * cot - 1.0))
}

/// `sin(d t) <= t^(1/k) sin(d)`, up to `1e-12`.
pub fn sin_scaling_bound_check(d: f64, t: f64, k: u32) -> bool {
    (d * t).sin() <= t.powf(1.0 / k as f64) * d.sin() + 1e-12
}

/// Certificate for the contraction of `B(center, radius)` toward `center`
/// with factor `t`.
pub fn certify_star_contraction(
    center: &ModelPoint,
    radius: f64,
    t: f64,
) -> Result<ContractionCertificate> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::out_of_range(format!("t = {t} not in [0, 1]")));
    }
    let kappa = center.curvature();
    let k = k_exponent(kappa, radius)?;
    let lip_bound = if k == 1 { t } else { t.powf(1.0 / k as f64) };
    Ok(ContractionCertificate {
        kappa: kappa.value(),
        radius,
        exponent_k: k,
        t,
        lip_bound,
    })
}

/// The contraction toward `center` as a self-map of the closed ball
/// `B(center, radius)`.
pub fn star_contraction(center: &ModelPoint, radius: f64, t: f64) -> Result<MapExpr> {
    let domain = Domain::ball(center.clone(), radius)?;
    MapExpr::star_contraction(&domain, center, radius, t)
}
