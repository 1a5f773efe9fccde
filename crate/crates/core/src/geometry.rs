//! Model spaces of constant curvature.
//!
//! Points of the positively curved model are stored as unit vectors of the
//! unscaled sphere in 3-space; distances are divided by `sqrt(kappa)`. The
//! negatively curved model uses the upper sheet of the hyperboloid
//! `x0^2 - x1^2 - x2^2 = 1` with distances divided by `sqrt(-kappa)`. The flat
//! model is plain Cartesian coordinates of any dimension (the plane is the
//! model space proper; lines and higher-dimensional balls serve as test
//! domains).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Distances this close to `D_kappa` are treated as antipodal.
pub const ANTIPODAL_TOL: f64 = 1e-12;

/// Below this unscaled separation a geodesic collapses to its start point.
const DEGENERATE_ANGLE: f64 = 1e-14;

pub type Coords = SmallVec<[f64; 3]>;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Curvature(f64);

/// Which of the three model geometries a curvature selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Spherical,
    Euclidean,
    Hyperbolic,
}

impl Curvature {
    pub const FLAT: Curvature = Curvature(0.0);

    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::domain(format!("curvature must be finite, got {kappa}")));
        }
        Ok(Curvature(kappa))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn model(self) -> Model {
        if self.0 > 0.0 {
            Model::Spherical
        } else if self.0 < 0.0 {
            Model::Hyperbolic
        } else {
            Model::Euclidean
        }
    }

    /// `D_kappa`: `pi / sqrt(kappa)` for positive curvature, infinite otherwise.
    pub fn diameter_bound(self) -> f64 {
        if self.0 > 0.0 {
            PI / self.0.sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// Factor converting model distances to unscaled (unit-curvature) ones.
    pub fn scale(self) -> f64 {
        if self.0 == 0.0 {
            1.0
        } else {
            self.0.abs().sqrt()
        }
    }
}

impl std::fmt::Display for Curvature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of a model space in its ambient coordinate representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelPoint {
    curvature: Curvature,
    coords: Coords,
}

impl ModelPoint {
    /// Point of the sphere model. The vector is normalized.
    pub fn spherical(kappa: Curvature, v: [f64; 3]) -> Result<Self> {
        if kappa.model() != Model::Spherical {
            return Err(Error::domain("spherical point requires kappa > 0"));
        }
        let n = norm3(v);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(ModelPoint {
            curvature: kappa,
            coords: SmallVec::from_slice(&[v[0] / n, v[1] / n, v[2] / n]),
        })
    }

    pub fn euclidean(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("euclidean point needs finite coordinates"));
        }
        Ok(ModelPoint {
            curvature: Curvature::FLAT,
            coords: SmallVec::from_slice(coords),
        })
    }

    /// Point of the hyperboloid model given by its two spatial coordinates;
    /// the time coordinate is lifted so the point lies on the upper sheet.
    pub fn hyperbolic(kappa: Curvature, spatial: [f64; 2]) -> Result<Self> {
        if kappa.model() != Model::Hyperbolic {
            return Err(Error::domain("hyperbolic point requires kappa < 0"));
        }
        if !(spatial[0].is_finite() && spatial[1].is_finite()) {
            return Err(Error::domain("non-finite hyperbolic coordinates"));
        }
        Ok(Self::lift_hyperbolic(kappa, spatial[0], spatial[1]))
    }

    /// Hyperboloid point from full ambient coordinates, checked against the
    /// sheet equation.
    pub fn from_hyperboloid(kappa: Curvature, v: [f64; 3]) -> Result<Self> {
        if kappa.model() != Model::Hyperbolic {
            return Err(Error::domain("hyperbolic point requires kappa < 0"));
        }
        let form = minkowski(&v, &v);
        if (form - 1.0).abs() > 1e-12 * v[0].abs().max(1.0).powi(2) || v[0] < 1.0 {
            return Err(Error::domain(format!(
                "not on the upper hyperboloid sheet (form {form}, x0 {})",
                v[0]
            )));
        }
        Ok(ModelPoint {
            curvature: kappa,
            coords: SmallVec::from_slice(&v),
        })
    }

    fn lift_hyperbolic(kappa: Curvature, x1: f64, x2: f64) -> Self {
        let x0 = (1.0 + x1 * x1 + x2 * x2).sqrt();
        ModelPoint {
            curvature: kappa,
            coords: SmallVec::from_slice(&[x0, x1, x2]),
        }
    }

    /// Canonical base point of the 2-dimensional model for `kappa`:
    /// `(1,0,0)` on the sphere and hyperboloid, the origin of the plane.
    pub fn base(kappa: Curvature) -> Self {
        match kappa.model() {
            Model::Spherical | Model::Hyperbolic => ModelPoint {
                curvature: kappa,
                coords: SmallVec::from_slice(&[1.0, 0.0, 0.0]),
            },
            Model::Euclidean => ModelPoint {
                curvature: kappa,
                coords: SmallVec::from_slice(&[0.0, 0.0]),
            },
        }
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub(crate) fn xyz(&self) -> [f64; 3] {
        [self.coords[0], self.coords[1], self.coords[2]]
    }

    pub(crate) fn from_raw(curvature: Curvature, coords: Coords) -> Self {
        ModelPoint { curvature, coords }
    }

    /// Point at model distance `dist` from `self`, leaving in the tangent
    /// direction at angle `azimuth` of the canonical frame at `self`.
    /// Only defined for the 2-dimensional models.
    pub fn polar_offset(&self, dist: f64, azimuth: f64) -> Result<ModelPoint> {
        let s = dist * self.curvature.scale();
        let (c, sn) = (azimuth.cos(), azimuth.sin());
        match self.curvature.model() {
            Model::Spherical => {
                let (e1, e2) = sphere_frame(self.xyz());
                let p = self.xyz();
                let (cs, ss) = (s.cos(), s.sin());
                let v = [
                    cs * p[0] + ss * (c * e1[0] + sn * e2[0]),
                    cs * p[1] + ss * (c * e1[1] + sn * e2[1]),
                    cs * p[2] + ss * (c * e1[2] + sn * e2[2]),
                ];
                ModelPoint::spherical(self.curvature, v)
            }
            Model::Hyperbolic => {
                let (e1, e2) = hyperbolic_frame(self.xyz());
                let p = self.xyz();
                let (ch, sh) = (s.cosh(), s.sinh());
                let x1 = ch * p[1] + sh * (c * e1[1] + sn * e2[1]);
                let x2 = ch * p[2] + sh * (c * e1[2] + sn * e2[2]);
                Ok(Self::lift_hyperbolic(self.curvature, x1, x2))
            }
            Model::Euclidean => {
                if self.dim() != 2 {
                    return Err(Error::DimensionMismatch(self.dim(), 2));
                }
                ModelPoint::euclidean(&[self.coords[0] + dist * c, self.coords[1] + dist * sn])
            }
        }
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Minkowski form of signature (+, -, -).
pub(crate) fn minkowski(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] - a[1] * b[1] - a[2] * b[2]
}

/// Orthonormal tangent frame at a unit vector `p`.
pub(crate) fn sphere_frame(p: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    // Pick the coordinate axis least aligned with p. Ties resolve to the
    // lowest index so the frame at (1,0,0) is ((0,1,0), (0,0,1)).
    let mut k = 0;
    for i in 1..3 {
        if p[i].abs() < p[k].abs() {
            k = i;
        }
    }
    let mut a = [0.0; 3];
    a[k] = 1.0;
    let d = dot3(a, p);
    let u = [a[0] - d * p[0], a[1] - d * p[1], a[2] - d * p[2]];
    let n = norm3(u);
    let e1 = [u[0] / n, u[1] / n, u[2] / n];
    let e2 = cross3(p, e1);
    (e1, e2)
}

/// Minkowski-orthonormal tangent frame at a hyperboloid point: the radial
/// direction away from the base point and its rotation by a quarter turn.
pub(crate) fn hyperbolic_frame(p: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let sh = p[1].hypot(p[2]);
    let phi = if sh > 0.0 { p[2].atan2(p[1]) } else { 0.0 };
    let (c, s) = (phi.cos(), phi.sin());
    ([sh, p[0] * c, p[0] * s], [0.0, -s, c])
}

/// Rotation of the unit vector `v` about the unit axis `k` by `angle`.
pub(crate) fn rotate_about(k: [f64; 3], v: [f64; 3], angle: f64) -> [f64; 3] {
    let (c, s) = (angle.cos(), angle.sin());
    let kv = cross3(k, v);
    let kd = dot3(k, v) * (1.0 - c);
    [
        v[0] * c + kv[0] * s + k[0] * kd,
        v[1] * c + kv[1] * s + k[1] * kd,
        v[2] * c + kv[2] * s + k[2] * kd,
    ]
}

fn check_pair(p: &ModelPoint, q: &ModelPoint) -> Result<()> {
    if p.curvature != q.curvature {
        return Err(Error::CurvatureMismatch(p.curvature.0, q.curvature.0));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    Ok(())
}

/// Unscaled separation: great-circle angle, hyperbolic distance at
/// curvature -1, or Euclidean length.
fn unscaled_distance(p: &ModelPoint, q: &ModelPoint) -> f64 {
    match p.curvature.model() {
        Model::Spherical => {
            let (a, b) = (p.xyz(), q.xyz());
            norm3(cross3(a, b)).atan2(dot3(a, b))
        }
        Model::Hyperbolic => {
            // sinh(d/2) equals half the spacelike Minkowski length of p - q.
            let d0 = p.coords[0] - q.coords[0];
            let d1 = p.coords[1] - q.coords[1];
            let d2 = p.coords[2] - q.coords[2];
            let half = ((d1 * d1 + d2 * d2 - d0 * d0).max(0.0)).sqrt() / 2.0;
            2.0 * half.asinh()
        }
        Model::Euclidean => p
            .coords
            .iter()
            .zip(q.coords.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
    }
}

/// The model metric `d_kappa`.
pub fn distance(p: &ModelPoint, q: &ModelPoint) -> Result<f64> {
    check_pair(p, q)?;
    Ok(unscaled_distance(p, q) / p.curvature.scale())
}

/// The point `z` on the minimizing geodesic from `p` to `q` with
/// `d(p, z) = lambda * d(p, q)`.
pub fn geodesic_point(p: &ModelPoint, q: &ModelPoint, lambda: f64) -> Result<ModelPoint> {
    check_pair(p, q)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::out_of_range(format!("lambda {lambda} not in [0, 1]")));
    }
    let kappa = p.curvature;
    let theta = unscaled_distance(p, q);
    if kappa.model() == Model::Spherical
        && kappa.diameter_bound() - theta / kappa.scale() < ANTIPODAL_TOL
    {
        return Err(Error::NonUniqueGeodesic);
    }
    if lambda == 0.0 {
        return Ok(p.clone());
    }
    if lambda == 1.0 {
        return Ok(q.clone());
    }
    if theta < DEGENERATE_ANGLE {
        return Ok(p.clone());
    }
    Ok(interpolate(p, q, theta, lambda))
}

/// Interpolation along the geodesic once the unscaled separation `theta`
/// is known to be admissible.
pub(crate) fn interpolate(p: &ModelPoint, q: &ModelPoint, theta: f64, lambda: f64) -> ModelPoint {
    match p.curvature.model() {
        Model::Spherical => {
            let s = theta.sin();
            let wp = ((1.0 - lambda) * theta).sin() / s;
            let wq = (lambda * theta).sin() / s;
            let v = [
                wp * p.coords[0] + wq * q.coords[0],
                wp * p.coords[1] + wq * q.coords[1],
                wp * p.coords[2] + wq * q.coords[2],
            ];
            let n = norm3(v);
            ModelPoint::from_raw(p.curvature, SmallVec::from_slice(&[v[0] / n, v[1] / n, v[2] / n]))
        }
        Model::Hyperbolic => {
            let s = theta.sinh();
            let wp = ((1.0 - lambda) * theta).sinh() / s;
            let wq = (lambda * theta).sinh() / s;
            let x1 = wp * p.coords[1] + wq * q.coords[1];
            let x2 = wp * p.coords[2] + wq * q.coords[2];
            ModelPoint::lift_hyperbolic(p.curvature, x1, x2)
        }
        Model::Euclidean => ModelPoint::from_raw(
            p.curvature,
            p.coords
                .iter()
                .zip(q.coords.iter())
                .map(|(a, b)| a + lambda * (b - a))
                .collect(),
        ),
    }
}

/// `hav(theta) = sin^2(theta / 2)`.
pub fn hav(theta: f64) -> f64 {
    let s = (theta / 2.0).sin();
    s * s
}

/// Third side of a spherical triangle from two sides and their included
/// angle, by the law of haversines.
pub fn haversine_third_side(a: f64, b: f64, gamma_angle: f64) -> Result<f64> {
    for (name, v) in [("a", a), ("b", b), ("gamma", gamma_angle)] {
        if !(0.0..=PI).contains(&v) {
            return Err(Error::domain(format!("{name} = {v} not in [0, pi]")));
        }
    }
    let h = hav(a - b) + a.sin() * b.sin() * hav(gamma_angle);
    Ok(2.0 * h.clamp(0.0, 1.0).sqrt().asin())
}

/// A triangle in `M_kappa` realizing three prescribed side lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTriangle {
    pub curvature: Curvature,
    pub vertices: [ModelPoint; 3],
    /// `[d(v1, v2), d(v1, v3), d(v2, v3)]` in model units.
    pub side_lengths: [f64; 3],
    /// Interior angle at the first vertex.
    pub angle_at_first: f64,
}

impl ComparisonTriangle {
    /// Comparison point on the side from vertex `i` to vertex `j` at
    /// fraction `lambda` of its length from vertex `i`.
    pub fn comparison_point(&self, i: usize, j: usize, lambda: f64) -> Result<ModelPoint> {
        if i > 2 || j > 2 || i == j {
            return Err(Error::out_of_range(format!("invalid side ({i}, {j})")));
        }
        geodesic_point(&self.vertices[i], &self.vertices[j], lambda)
    }
}

/// Builds a comparison triangle with the first vertex at the base point of
/// the model, the second along the first frame direction and the third on the
/// positive side of that line.
pub fn comparison_triangle(
    rho12: f64,
    rho13: f64,
    rho23: f64,
    kappa: Curvature,
) -> Result<ComparisonTriangle> {
    let sides = [rho12, rho13, rho23];
    if sides.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::infeasible("side lengths must be finite and nonnegative"));
    }
    let perimeter = rho12 + rho13 + rho23;
    let slack = 1e-12 * perimeter.max(1.0);
    if rho12 > rho13 + rho23 + slack || rho13 > rho12 + rho23 + slack || rho23 > rho12 + rho13 + slack
    {
        return Err(Error::infeasible("side lengths violate the triangle inequality"));
    }
    if kappa.model() == Model::Spherical && perimeter >= 2.0 * kappa.diameter_bound() {
        return Err(Error::infeasible("perimeter must be below 2 * D_kappa"));
    }

    let scale = kappa.scale();
    let (a, b, c) = (rho12 * scale, rho13 * scale, rho23 * scale);
    let s_fn: fn(f64) -> f64 = match kappa.model() {
        Model::Spherical => f64::sin,
        Model::Hyperbolic => f64::sinh,
        Model::Euclidean => |x| x,
    };
    // Half-angle form of the law of cosines; stable for thin triangles.
    let denom = s_fn(a) * s_fn(b);
    let angle = if denom > 1e-300 {
        let h = s_fn((c + a - b) / 2.0) * s_fn((c - a + b) / 2.0) / denom;
        2.0 * h.clamp(0.0, 1.0).sqrt().asin()
    } else {
        0.0
    };

    let v1 = ModelPoint::base(kappa);
    let v2 = v1.polar_offset(rho12, 0.0)?;
    let v3 = v1.polar_offset(rho13, angle)?;
    Ok(ComparisonTriangle {
        curvature: kappa,
        vertices: [v1, v2, v3],
        side_lengths: sides,
        angle_at_first: angle,
    })
}
