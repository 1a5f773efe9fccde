use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    distance, hyperbolic_frame, sphere_frame, Curvature, Model, ModelPoint,
};

/// Slack used by membership tests, in model units.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// Closed ball `B(center, radius)` of the sphere model.
    SphericalCap { center: ModelPoint, radius: f64 },
    /// `B(center, outer) \ B(center, inner)` of the sphere model.
    SphericalAnnulus {
        center: ModelPoint,
        inner: f64,
        outer: f64,
    },
    EuclideanInterval { lo: f64, hi: f64 },
    EuclideanBall { center: ModelPoint, radius: f64 },
    HyperbolicBall { center: ModelPoint, radius: f64 },
}

/// A closed test set in a model space.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    star_center: Option<ModelPoint>,
}

impl Domain {
    pub fn spherical_cap(center: ModelPoint, radius: f64) -> Result<Self> {
        let kappa = center.curvature();
        if kappa.model() != Model::Spherical {
            return Err(Error::domain("spherical cap needs a sphere point"));
        }
        if !(radius > 0.0 && radius < kappa.diameter_bound()) {
            return Err(Error::domain(format!(
                "cap radius {radius} not in (0, {})",
                kappa.diameter_bound()
            )));
        }
        Ok(Domain {
            star_center: Some(center.clone()),
            kind: DomainKind::SphericalCap { center, radius },
        })
    }

    pub fn spherical_annulus(center: ModelPoint, inner: f64, outer: f64) -> Result<Self> {
        let kappa = center.curvature();
        if kappa.model() != Model::Spherical {
            return Err(Error::domain("spherical annulus needs a sphere point"));
        }
        if !(inner > 0.0 && inner < outer && outer < kappa.diameter_bound()) {
            return Err(Error::domain(format!(
                "annulus radii must satisfy 0 < r < R < D_kappa, got r = {inner}, R = {outer}"
            )));
        }
        Ok(Domain {
            star_center: None,
            kind: DomainKind::SphericalAnnulus {
                center,
                inner,
                outer,
            },
        })
    }

    /// The interval `[lo, hi]`, star-shaped about its midpoint by default.
    pub fn euclidean_interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Domain {
            star_center: Some(ModelPoint::euclidean(&[(lo + hi) / 2.0])?),
            kind: DomainKind::EuclideanInterval { lo, hi },
        })
    }

    pub fn euclidean_ball(center: ModelPoint, radius: f64) -> Result<Self> {
        if center.curvature().model() != Model::Euclidean {
            return Err(Error::domain("euclidean ball needs a flat point"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("invalid ball radius {radius}")));
        }
        Ok(Domain {
            star_center: Some(center.clone()),
            kind: DomainKind::EuclideanBall { center, radius },
        })
    }

    pub fn hyperbolic_ball(center: ModelPoint, radius: f64) -> Result<Self> {
        if center.curvature().model() != Model::Hyperbolic {
            return Err(Error::domain("hyperbolic ball needs a hyperboloid point"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("invalid ball radius {radius}")));
        }
        Ok(Domain {
            star_center: Some(center.clone()),
            kind: DomainKind::HyperbolicBall { center, radius },
        })
    }

    /// Closed ball about `center` in whichever model `center` lives in.
    pub fn ball(center: ModelPoint, radius: f64) -> Result<Self> {
        match center.curvature().model() {
            Model::Spherical => Self::spherical_cap(center, radius),
            Model::Euclidean => Self::euclidean_ball(center, radius),
            Model::Hyperbolic => Self::hyperbolic_ball(center, radius),
        }
    }

    /// Moves the star center of a convex Euclidean domain to another member.
    pub fn with_star_center(mut self, center: ModelPoint) -> Result<Self> {
        match self.kind {
            DomainKind::EuclideanInterval { .. } | DomainKind::EuclideanBall { .. } => {
                if !self.contains(&center) {
                    return Err(Error::OutsideDomain);
                }
                self.star_center = Some(center);
                Ok(self)
            }
            _ => Err(Error::domain(
                "only convex euclidean domains accept a custom star center",
            )),
        }
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn curvature(&self) -> Curvature {
        match &self.kind {
            DomainKind::SphericalCap { center, .. }
            | DomainKind::SphericalAnnulus { center, .. }
            | DomainKind::EuclideanBall { center, .. }
            | DomainKind::HyperbolicBall { center, .. } => center.curvature(),
            DomainKind::EuclideanInterval { .. } => Curvature::FLAT,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DomainKind::EuclideanInterval { .. } => 1,
            DomainKind::EuclideanBall { center, .. } => center.dim(),
            _ => 2,
        }
    }

    /// Ambient coordinate count of member points.
    pub(crate) fn coord_len(&self) -> usize {
        match &self.kind {
            DomainKind::EuclideanInterval { .. } => 1,
            DomainKind::EuclideanBall { center, .. } => center.dim(),
            _ => 3,
        }
    }

    pub fn star_center(&self) -> Option<&ModelPoint> {
        self.star_center.as_ref()
    }

    /// Rotation axis of spherically symmetric domains.
    pub fn axis(&self) -> Option<&ModelPoint> {
        match &self.kind {
            DomainKind::SphericalCap { center, .. }
            | DomainKind::SphericalAnnulus { center, .. } => Some(center),
            _ => None,
        }
    }

    /// Smallest `R` with the domain inside the closed ball of radius `R`
    /// about the star center.
    pub fn enclosing_radius(&self) -> Option<f64> {
        let c = self.star_center.as_ref()?;
        Some(match &self.kind {
            DomainKind::SphericalCap { radius, .. } | DomainKind::HyperbolicBall { radius, .. } => {
                *radius
            }
            DomainKind::EuclideanBall { center, radius } => {
                radius + distance(center, c).unwrap_or(0.0)
            }
            DomainKind::EuclideanInterval { lo, hi } => {
                let x = c.coords()[0];
                (x - lo).max(hi - x)
            }
            DomainKind::SphericalAnnulus { .. } => return None,
        })
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::SphericalCap { center, radius } => {
                let s = center.curvature().scale();
                (2.0 * radius * s).min(PI) / s
            }
            DomainKind::SphericalAnnulus {
                center,
                inner,
                outer,
            } => {
                let s = center.curvature().scale();
                (2.0 * outer * s).min(PI).min(TAU - 2.0 * inner * s) / s
            }
            DomainKind::EuclideanInterval { lo, hi } => hi - lo,
            DomainKind::EuclideanBall { radius, .. } | DomainKind::HyperbolicBall { radius, .. } => {
                2.0 * radius
            }
        }
    }

    pub fn contains(&self, p: &ModelPoint) -> bool {
        if p.curvature() != self.curvature() || p.dim() != self.coord_len() {
            return false;
        }
        match &self.kind {
            DomainKind::SphericalCap { center, radius }
            | DomainKind::EuclideanBall { center, radius }
            | DomainKind::HyperbolicBall { center, radius } => distance(center, p)
                .map(|d| d <= radius + MEMBERSHIP_TOL)
                .unwrap_or(false),
            DomainKind::SphericalAnnulus {
                center,
                inner,
                outer,
            } => distance(center, p)
                .map(|d| d >= inner - MEMBERSHIP_TOL && d <= outer + MEMBERSHIP_TOL)
                .unwrap_or(false),
            DomainKind::EuclideanInterval { lo, hi } => {
                let x = p.coords()[0];
                x >= lo - MEMBERSHIP_TOL && x <= hi + MEMBERSHIP_TOL
            }
        }
    }

    /// Polar description for the rotationally symmetric 2-dimensional
    /// domains: frame plus unscaled radial range.
    pub(crate) fn polar(&self) -> Option<(Polar, f64, f64)> {
        match &self.kind {
            DomainKind::SphericalCap { center, radius }
            | DomainKind::HyperbolicBall { center, radius } => {
                let s = center.curvature().scale();
                Some((Polar::at(center), 0.0, radius * s))
            }
            DomainKind::SphericalAnnulus {
                center,
                inner,
                outer,
            } => {
                let s = center.curvature().scale();
                Some((Polar::at(center), inner * s, outer * s))
            }
            DomainKind::EuclideanBall { center, radius } if center.dim() == 2 => {
                Some((Polar::at(center), 0.0, *radius))
            }
            _ => None,
        }
    }

    /// A point drawn from the normalized intrinsic area (or length, volume)
    /// measure of the domain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelPoint {
        if let Some((polar, a, b)) = self.polar() {
            let u: f64 = rng.random();
            let s = polar.radial_quantile(a, b, u);
            let phi = rng.random::<f64>() * TAU;
            return polar.point(s, phi);
        }
        match &self.kind {
            DomainKind::EuclideanInterval { lo, hi } => {
                let x = lo + (hi - lo) * rng.random::<f64>();
                ModelPoint::from_raw(Curvature::FLAT, [x.min(*hi)].into_iter().collect())
            }
            DomainKind::EuclideanBall { center, radius } => {
                let n = center.dim();
                let dir = random_direction(n, rng);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                ModelPoint::from_raw(
                    Curvature::FLAT,
                    center.coords().iter().zip(dir).map(|(c, d)| c + r * d).collect(),
                )
            }
            _ => unreachable!("polar domains handled above"),
        }
    }

    /// A member of `B(y, radius)` other than `y`, or `None` when a few
    /// attempts all leave the domain. The offset length is drawn from
    /// `(0, radius)`.
    pub fn sample_near<R: Rng + ?Sized>(
        &self,
        y: &ModelPoint,
        radius: f64,
        rng: &mut R,
    ) -> Option<ModelPoint> {
        self.sample_at_offset(y, 0.0, radius, rng)
    }

    /// Like [`Domain::sample_near`] with the offset length drawn from
    /// `[lo, hi)`.
    pub(crate) fn sample_at_offset<R: Rng + ?Sized>(
        &self,
        y: &ModelPoint,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Option<ModelPoint> {
        for _ in 0..16 {
            let s = lo + (hi - lo) * rng.random::<f64>();
            if s <= 0.0 {
                continue;
            }
            let candidate = match self.curvature().model() {
                Model::Spherical | Model::Hyperbolic => {
                    let phi = rng.random::<f64>() * TAU;
                    y.polar_offset(s, phi).ok()?
                }
                Model::Euclidean => {
                    let dir = random_direction(y.dim(), rng);
                    ModelPoint::from_raw(
                        Curvature::FLAT,
                        y.coords().iter().zip(dir).map(|(c, d)| c + s * d).collect(),
                    )
                }
            };
            if self.contains(&candidate) && candidate != *y {
                return Some(candidate);
            }
        }
        None
    }

    /// A finite covering: every member lies within `covering_radius` of a
    /// grid point, and `covering_radius <= mesh`.
    pub fn grid(&self, mesh: f64) -> Result<Grid> {
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::domain(format!("mesh must be positive, got {mesh}")));
        }
        if let Some((polar, a, b)) = self.polar() {
            let scale = self.curvature().scale();
            let h = mesh * scale;
            let ring_count = ((b - a) / h).ceil().max(0.0) as usize + 1;
            let rings = (0..ring_count)
                .map(|i| {
                    let s = if ring_count == 1 {
                        a
                    } else {
                        a + (b - a) * i as f64 / (ring_count - 1) as f64
                    };
                    let circumference = TAU * polar.circle_factor(s);
                    let count = ((circumference / h).ceil() as usize).max(1);
                    (s, count)
                })
                .collect();
            return Ok(Grid {
                covering_radius: mesh,
                cells: GridCells::Polar { polar, rings },
            });
        }
        let points = match &self.kind {
            DomainKind::EuclideanInterval { lo, hi } => {
                let n = ((hi - lo) / (2.0 * mesh)).ceil() as usize + 1;
                (0..n)
                    .map(|i| {
                        let x = if n == 1 {
                            *lo
                        } else {
                            lo + (hi - lo) * i as f64 / (n - 1) as f64
                        };
                        ModelPoint::from_raw(Curvature::FLAT, [x].into_iter().collect())
                    })
                    .collect()
            }
            DomainKind::EuclideanBall { center, radius } => {
                cube_grid(center, *radius, mesh)
            }
            _ => unreachable!("polar domains handled above"),
        };
        Ok(Grid {
            covering_radius: mesh,
            cells: GridCells::Points(points),
        })
    }

    /// A covering grid with roughly `target` points.
    pub fn grid_with_count(&self, target: usize) -> Result<Grid> {
        let target = target.max(1) as f64;
        let mesh = match &self.kind {
            DomainKind::EuclideanInterval { lo, hi } => (hi - lo) / (2.0 * target),
            DomainKind::EuclideanBall { radius, center } if center.dim() != 2 => {
                let n = center.dim() as f64;
                let spacing = 2.0 * radius / target.powf(1.0 / n);
                spacing * n.sqrt() / 2.0
            }
            _ => {
                let (polar, a, b) = self.polar().expect("polar domain");
                let area = polar.area(a, b);
                (area / target).sqrt() / self.curvature().scale()
            }
        };
        self.grid(mesh)
    }
}

fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Cubic lattice of spacing `2 mesh / sqrt(n)` projected onto the ball.
fn cube_grid(center: &ModelPoint, radius: f64, mesh: f64) -> Vec<ModelPoint> {
    let n = center.dim();
    let spacing = 2.0 * mesh / (n as f64).sqrt();
    let half = (radius / spacing).ceil() as i64;
    let side = (2 * half + 1) as usize;
    let total = side.pow(n as u32);
    let reach = radius + mesh;
    let mut out = Vec::new();
    let mut offset = vec![0.0; n];
    for idx in 0..total {
        let mut rem = idx;
        for o in offset.iter_mut() {
            *o = ((rem % side) as i64 - half) as f64 * spacing;
            rem /= side;
        }
        let len = offset.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > reach {
            continue;
        }
        // Projection onto the ball is 1-Lipschitz and fixes members, so the
        // projected lattice still covers at the same radius.
        let f = if len > radius { radius / len } else { 1.0 };
        out.push(ModelPoint::from_raw(
            Curvature::FLAT,
            center.coords().iter().zip(&offset).map(|(c, o)| c + f * o).collect(),
        ));
    }
    out
}

/// Geodesic polar coordinates about a center of a 2-dimensional model.
#[derive(Debug, Clone)]
pub(crate) struct Polar {
    kappa: Curvature,
    center: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
}

impl Polar {
    pub(crate) fn at(center: &ModelPoint) -> Self {
        let kappa = center.curvature();
        match kappa.model() {
            Model::Spherical => {
                let c = center.xyz();
                let (e1, e2) = sphere_frame(c);
                Polar { kappa, center: c, e1, e2 }
            }
            Model::Hyperbolic => {
                let c = center.xyz();
                let (e1, e2) = hyperbolic_frame(c);
                Polar { kappa, center: c, e1, e2 }
            }
            Model::Euclidean => {
                let c = center.coords();
                Polar {
                    kappa,
                    center: [c[0], c[1], 0.0],
                    e1: [1.0, 0.0, 0.0],
                    e2: [0.0, 1.0, 0.0],
                }
            }
        }
    }

    /// Point at unscaled radial distance `s` and azimuth `phi`.
    pub(crate) fn point(&self, s: f64, phi: f64) -> ModelPoint {
        let (c, sn) = (phi.cos(), phi.sin());
        let dir = [
            c * self.e1[0] + sn * self.e2[0],
            c * self.e1[1] + sn * self.e2[1],
            c * self.e1[2] + sn * self.e2[2],
        ];
        let p = self.center;
        match self.kappa.model() {
            Model::Spherical => {
                let (cs, ss) = (s.cos(), s.sin());
                let v = [
                    cs * p[0] + ss * dir[0],
                    cs * p[1] + ss * dir[1],
                    cs * p[2] + ss * dir[2],
                ];
                let n = crate::geometry::norm3(v);
                ModelPoint::from_raw(self.kappa, [v[0] / n, v[1] / n, v[2] / n].into_iter().collect())
            }
            Model::Hyperbolic => {
                let (ch, sh) = (s.cosh(), s.sinh());
                let x1 = ch * p[1] + sh * dir[1];
                let x2 = ch * p[2] + sh * dir[2];
                let x0 = (1.0 + x1 * x1 + x2 * x2).sqrt();
                ModelPoint::from_raw(self.kappa, [x0, x1, x2].into_iter().collect())
            }
            Model::Euclidean => ModelPoint::from_raw(
                self.kappa,
                [p[0] + s * dir[0], p[1] + s * dir[1]].into_iter().collect(),
            ),
        }
    }

    /// Circumference of the geodesic circle of unscaled radius `s`, over 2 pi.
    pub(crate) fn circle_factor(&self, s: f64) -> f64 {
        match self.kappa.model() {
            Model::Spherical => s.sin().abs(),
            Model::Hyperbolic => s.sinh(),
            Model::Euclidean => s,
        }
    }

    /// Radius whose enclosed area fraction within `[a, b]` is `u`.
    pub(crate) fn radial_quantile(&self, a: f64, b: f64, u: f64) -> f64 {
        let s = match self.kappa.model() {
            Model::Spherical => {
                let (ca, cb) = (a.cos(), b.cos());
                (ca - u * (ca - cb)).clamp(-1.0, 1.0).acos()
            }
            Model::Hyperbolic => {
                let (ca, cb) = (a.cosh(), b.cosh());
                (ca + u * (cb - ca)).max(1.0).acosh()
            }
            Model::Euclidean => (a * a + u * (b * b - a * a)).sqrt(),
        };
        s.clamp(a, b)
    }

    /// Unscaled area of the ring `a <= s <= b`.
    pub(crate) fn area(&self, a: f64, b: f64) -> f64 {
        match self.kappa.model() {
            Model::Spherical => TAU * (a.cos() - b.cos()),
            Model::Hyperbolic => TAU * (b.cosh() - a.cosh()),
            Model::Euclidean => PI * (b * b - a * a),
        }
    }
}

#[derive(Debug, Clone)]
enum GridCells {
    Polar { polar: Polar, rings: Vec<(f64, usize)> },
    Points(Vec<ModelPoint>),
}

/// A finite covering of a domain.
#[derive(Debug, Clone)]
pub struct Grid {
    covering_radius: f64,
    cells: GridCells,
}

/// Minimum and maximum of a function over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }

    pub fn len(&self) -> usize {
        match &self.cells {
            GridCells::Polar { rings, .. } => rings.iter().map(|r| r.1).sum(),
            GridCells::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<ModelPoint> {
        match &self.cells {
            GridCells::Polar { polar, rings } => rings
                .iter()
                .flat_map(|&(s, n)| (0..n).map(move |j| polar.point(s, TAU * j as f64 / n as f64)))
                .collect(),
            GridCells::Points(p) => p.clone(),
        }
    }

    /// Extrema of `f` over the grid, evaluated in parallel. Points are
    /// generated ring by ring so large grids are never materialized.
    pub fn par_extrema<F>(&self, f: F) -> Result<Extrema>
    where
        F: Fn(&ModelPoint) -> Result<f64> + Sync,
    {
        let fold = |acc: Result<Extrema>, v: Result<f64>| -> Result<Extrema> {
            let mut acc = acc?;
            let v = v?;
            acc.min = acc.min.min(v);
            acc.max = acc.max.max(v);
            acc.count += 1;
            Ok(acc)
        };
        let empty = || {
            Ok(Extrema {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
                count: 0,
            })
        };
        let merge = |a: Result<Extrema>, b: Result<Extrema>| -> Result<Extrema> {
            let (a, b) = (a?, b?);
            Ok(Extrema {
                min: a.min.min(b.min),
                max: a.max.max(b.max),
                count: a.count + b.count,
            })
        };
        match &self.cells {
            GridCells::Polar { polar, rings } => rings
                .par_iter()
                .map(|&(s, n)| {
                    (0..n)
                        .map(|j| f(&polar.point(s, TAU * j as f64 / n as f64)))
                        .fold(empty(), fold)
                })
                .reduce(empty, merge),
            GridCells::Points(points) => points
                .par_iter()
                .map(&f)
                .fold(empty, fold)
                .reduce(empty, merge),
        }
    }
}
