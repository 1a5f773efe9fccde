//! Obstructions on spheres: rotations of an annulus stay a fixed distance
//! away from every strict contraction, while every continuous self-map of a
//! proper cap still has a fixed point, located here through the
//! stereographic chart.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    distance, dot3, norm3, rotate_about, sphere_frame, Curvature, Model, ModelPoint,
};
use crate::mapping::{dist_inf, Domain, DomainKind, MapExpr};
use crate::sampling::{derive_seed, stream_rng};

/// Rotation of the annulus `r <= d(x, .) <= R` about `x` by `angle`.
pub fn annulus_rotation(x: &ModelPoint, r: f64, big_r: f64, angle: f64) -> Result<MapExpr> {
    if x.curvature().model() != Model::Spherical {
        return Err(Error::domain("annulus rotations live on spheres"));
    }
    if !(angle > 0.0 && angle < TAU) {
        return Err(Error::out_of_range(format!("angle {angle} not in (0, 2 pi)")));
    }
    let annulus = Domain::spherical_annulus(x.clone(), r, big_r)?;
    MapExpr::rotation_about(&annulus, x, angle)
}

/// `d(p, rot(p))` for a point at distance `a` from the axis:
/// `2 asin(sin(sqrt(kappa) a) sin(angle / 2)) / sqrt(kappa)`.
pub fn rotation_displacement(kappa: Curvature, a: f64, angle: f64) -> f64 {
    let s = kappa.scale();
    let c = (s * a).sin().abs() * (0.5 * angle).sin().abs();
    2.0 * c.min(1.0).asin() / s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoContractionCertificate {
    /// Lower bound on `inf_y d(y, f(y))`.
    pub eps_lower: f64,
    /// Every strict contraction `g` has `d_inf(g, f) >= radius`.
    pub radius: f64,
    pub grid_mesh: f64,
    pub grid_min: f64,
    pub grid_points: usize,
}

/// Largest grid the refinement loop will evaluate.
pub const CERTIFICATE_POINT_BUDGET: usize = 40_000_000;

/// Lower-bounds the displacement of `f` on a covering grid. A strict
/// contraction `g` has a fixed point `z`, so `d(z, f(z)) <= d_inf(g, f)`; any
/// `g` within `eps / 2` of `f` would contradict `d(., f(.)) >= eps`.
///
/// The mesh is halved while the grid minimum is positive but too small to
/// survive the `2 mesh` correction.
pub fn certify_no_strict_contraction(f: &MapExpr, mesh: f64) -> Result<NoContractionCertificate> {
    let domain = f.domain();
    let mut h = mesh;
    loop {
        let grid = domain.grid(h)?;
        if grid.len() > CERTIFICATE_POINT_BUDGET {
            return Err(Error::VacuousCertificate {
                grid_min: f64::NAN,
                mesh: h,
            });
        }
        let ext = grid.par_extrema(|y| distance(y, &f.apply(y)?))?;
        let eps_lower = ext.min - 2.0 * grid.covering_radius();
        if eps_lower > 0.0 {
            return Ok(NoContractionCertificate {
                eps_lower,
                radius: eps_lower / 2.0,
                grid_mesh: grid.covering_radius(),
                grid_min: ext.min,
                grid_points: ext.count,
            });
        }
        if ext.min <= 0.0 {
            return Err(Error::VacuousCertificate {
                grid_min: ext.min,
                mesh: grid.covering_radius(),
            });
        }
        h /= 2.0;
    }
}

/// The strict contractions the library can build on a domain without a star
/// center: constants, and constants composed with rotations on either side.
pub fn strict_contraction_family(domain: &Domain, count: usize, seed: u64) -> Result<Vec<MapExpr>> {
    let mut rng = stream_rng(seed, 0);
    let axis = domain.axis().cloned();
    (0..count)
        .map(|i| {
            let q = domain.sample(&mut rng);
            let angle = rng.random::<f64>() * TAU;
            let c = MapExpr::constant(domain, q)?;
            match (&axis, i % 3) {
                (Some(x), 1) => MapExpr::compose(&MapExpr::rotation_about(domain, x, angle)?, &c),
                (Some(x), 2) => MapExpr::compose(&c, &MapExpr::rotation_about(domain, x, angle)?),
                _ => Ok(c),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionRow {
    pub label: String,
    pub certified_lipschitz: f64,
    /// Measured lower estimate of `d_inf(g, f)`.
    pub distance_lower: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionReport {
    pub pass: bool,
    pub radius: f64,
    pub min_distance: f64,
    pub rows: Vec<ExclusionRow>,
}

/// Checks `d_inf(g, f) >= radius` for every certified strict contraction in
/// `family`. The distance is a sampled lower estimate, so each pass is a
/// proof for that `g`.
pub fn exclusion_check(
    f: &MapExpr,
    cert: &NoContractionCertificate,
    family: &[MapExpr],
    samples: usize,
    seed: u64,
) -> Result<ExclusionReport> {
    let rows = family
        .par_iter()
        .enumerate()
        .filter(|(_, g)| g.certified_lipschitz() < 1.0)
        .map(|(i, g)| -> Result<ExclusionRow> {
            let d = dist_inf(g, f, samples, derive_seed(seed, i as u64))?;
            Ok(ExclusionRow {
                label: g.label(),
                certified_lipschitz: g.certified_lipschitz(),
                distance_lower: d.lower,
                excluded: d.lower >= cert.radius,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExclusionReport {
        pass: rows.iter().all(|r| r.excluded),
        radius: cert.radius,
        min_distance: rows.iter().map(|r| r.distance_lower).fold(f64::INFINITY, f64::min),
        rows,
    })
}

/// Stereographic projection of a cap from the antipode of its center onto
/// the tangent plane at the center. Planar coordinates are those of the unit
/// sphere: colatitude `theta` maps to radius `2 tan(theta / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stereographic {
    kappa: Curvature,
    center: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
    /// Unscaled cap radius.
    theta_max: f64,
}

const POLE_TOL: f64 = 1e-12;

impl Stereographic {
    pub fn new(x: &ModelPoint, radius: f64) -> Result<Self> {
        let kappa = x.curvature();
        if kappa.model() != Model::Spherical {
            return Err(Error::domain("stereographic charts need a sphere"));
        }
        let theta_max = radius * kappa.scale();
        if !(theta_max > 0.0 && theta_max < PI) {
            return Err(Error::out_of_range(format!(
                "cap radius {radius} not in (0, D_kappa)"
            )));
        }
        let center = x.xyz();
        let (e1, e2) = sphere_frame(center);
        Ok(Stereographic {
            kappa,
            center,
            e1,
            e2,
            theta_max,
        })
    }

    /// Chart of a spherical cap domain.
    pub fn for_cap(domain: &Domain) -> Result<Self> {
        match domain.kind() {
            DomainKind::SphericalCap { center, radius } => Stereographic::new(center, *radius),
            _ => Err(Error::domain("stereographic charts are built on spherical caps")),
        }
    }

    pub fn disc_radius(&self) -> f64 {
        2.0 * (0.5 * self.theta_max).tan()
    }

    pub fn h(&self, p: &ModelPoint) -> Result<[f64; 2]> {
        if p.curvature() != self.kappa {
            return Err(Error::CurvatureMismatch(p.curvature().value(), self.kappa.value()));
        }
        let v = p.xyz();
        let denom = 1.0 + dot3(v, self.center);
        if denom <= POLE_TOL {
            return Err(Error::domain("the antipode of the center is the projection pole"));
        }
        Ok([2.0 * dot3(v, self.e1) / denom, 2.0 * dot3(v, self.e2) / denom])
    }

    pub fn h_inverse(&self, w: [f64; 2]) -> ModelPoint {
        let q = w[0] * w[0] + w[1] * w[1];
        let a = (4.0 - q) / (4.0 + q);
        let b = 4.0 / (4.0 + q);
        let v: [f64; 3] =
            std::array::from_fn(|i| a * self.center[i] + b * (w[0] * self.e1[i] + w[1] * self.e2[i]));
        let n = norm3(v);
        ModelPoint::from_raw(self.kappa, v.iter().map(|c| c / n).collect())
    }

    /// Nearest point of the closed disc.
    fn clamp(&self, w: [f64; 2]) -> [f64; 2] {
        let rho = w[0].hypot(w[1]);
        let max = self.disc_radius();
        if rho <= max {
            w
        } else {
            [w[0] * max / rho, w[1] * max / rho]
        }
    }
}

/// A continuous self-map of a domain.
pub trait ContinuousSelfMap: Sync {
    fn domain(&self) -> &Domain;
    fn map_point(&self, p: &ModelPoint) -> Result<ModelPoint>;
    fn describe(&self) -> String;
}

impl ContinuousSelfMap for MapExpr {
    fn domain(&self) -> &Domain {
        MapExpr::domain(self)
    }

    fn map_point(&self, p: &ModelPoint) -> Result<ModelPoint> {
        self.apply(p)
    }

    fn describe(&self) -> String {
        self.label()
    }
}

/// Building blocks of [`ContinuousComposite`]. Each maps the cap into itself.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Map(MapExpr),
    /// `d(x, .)` scaled by `t` in `[0, 1]` along the ray from the center.
    RadialScale(f64),
    /// `d(x, .) -> R (d(x, .) / R)^p` for `p > 0`.
    RadialPower(f64),
    /// Rotation about the center by `rate * d(x, .)`.
    Twist(f64),
    /// `w -> anchor + scale (w - anchor)` in the stereographic chart, with
    /// the anchor in the disc and `scale` in `[0, 1]`.
    ChartAffine { anchor: [f64; 2], scale: f64 },
}

/// Steps applied in order to a cap, giving a continuous but generally
/// non-Lipschitz self-map.
#[derive(Debug, Clone)]
pub struct ContinuousComposite {
    domain: Domain,
    chart: Stereographic,
    steps: Vec<Step>,
}

impl ContinuousComposite {
    pub fn new(cap: &Domain) -> Result<Self> {
        Ok(ContinuousComposite {
            chart: Stereographic::for_cap(cap)?,
            domain: cap.clone(),
            steps: Vec::new(),
        })
    }

    pub fn then(mut self, step: Step) -> Result<Self> {
        let ok = match &step {
            Step::Map(m) => m.domain() == &self.domain,
            Step::RadialScale(t) => (0.0..=1.0).contains(t),
            Step::RadialPower(p) => *p > 0.0 && p.is_finite(),
            Step::Twist(rate) => rate.is_finite(),
            Step::ChartAffine { anchor, scale } => {
                (0.0..=1.0).contains(scale)
                    && anchor[0].hypot(anchor[1]) <= self.chart.disc_radius()
            }
        };
        if !ok {
            return Err(Error::domain(format!("step {step:?} does not map the cap into itself")));
        }
        self.steps.push(step);
        Ok(self)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    fn radial(&self, v: [f64; 3], g: impl Fn(f64) -> f64) -> [f64; 3] {
        let c = self.chart.center;
        let cos = dot3(v, c);
        let u = [v[0] - cos * c[0], v[1] - cos * c[1], v[2] - cos * c[2]];
        let sin = norm3(u);
        if sin == 0.0 {
            return c;
        }
        let theta = g(sin.atan2(cos));
        let (st, ct) = theta.sin_cos();
        [
            ct * c[0] + st * u[0] / sin,
            ct * c[1] + st * u[1] / sin,
            ct * c[2] + st * u[2] / sin,
        ]
    }

    fn step(&self, step: &Step, p: ModelPoint) -> Result<ModelPoint> {
        let kappa = self.chart.kappa;
        let wrap = |v: [f64; 3]| {
            let n = norm3(v);
            ModelPoint::from_raw(kappa, v.iter().map(|c| c / n).collect())
        };
        let max = self.chart.theta_max;
        Ok(match step {
            Step::Map(m) => m.apply(&p)?,
            Step::RadialScale(t) => wrap(self.radial(p.xyz(), |th| t * th)),
            Step::RadialPower(e) => {
                wrap(self.radial(p.xyz(), |th| max * (th / max).clamp(0.0, 1.0).powf(*e)))
            }
            Step::Twist(rate) => {
                let c = self.chart.center;
                let v = p.xyz();
                let theta = norm3(crate::geometry::cross3(v, c)).atan2(dot3(v, c));
                wrap(rotate_about(c, v, rate * theta / kappa.scale()))
            }
            Step::ChartAffine { anchor, scale } => {
                let w = self.chart.h(&p)?;
                self.chart.h_inverse(self.chart.clamp([
                    anchor[0] + scale * (w[0] - anchor[0]),
                    anchor[1] + scale * (w[1] - anchor[1]),
                ]))
            }
        })
    }
}

impl ContinuousSelfMap for ContinuousComposite {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn map_point(&self, p: &ModelPoint) -> Result<ModelPoint> {
        self.steps.iter().try_fold(p.clone(), |q, s| self.step(s, q))
    }

    fn describe(&self) -> String {
        if self.steps.is_empty() {
            return "identity".into();
        }
        self.steps
            .iter()
            .map(|s| match s {
                Step::Map(m) => m.label(),
                Step::RadialScale(t) => format!("radial_scale({t})"),
                Step::RadialPower(p) => format!("radial_power({p})"),
                Step::Twist(r) => format!("twist({r})"),
                Step::ChartAffine { anchor, scale } => {
                    format!("chart_affine([{}, {}], {scale})", anchor[0], anchor[1])
                }
            })
            .collect::<Vec<_>>()
            .join(" then ")
    }
}

/// A random composite of two to four steps on a cap, for stress tests.
pub fn random_composite(cap: &Domain, seed: u64) -> Result<ContinuousComposite> {
    let mut rng = stream_rng(seed, 0);
    let mut out = ContinuousComposite::new(cap)?;
    let x = cap
        .axis()
        .cloned()
        .ok_or_else(|| Error::domain("random composites need a cap"))?;
    let disc = out.chart.disc_radius();
    let count = rng.random_range(2..=4);
    for _ in 0..count {
        let step = match rng.random_range(0..5) {
            0 => Step::RadialScale(rng.random_range(0.3..1.0)),
            1 => Step::RadialPower(rng.random_range(0.5..2.0)),
            2 => Step::Twist(rng.random_range(-2.0..2.0)),
            3 => {
                let rho = 0.9 * disc * rng.random::<f64>().sqrt();
                let phi = rng.random::<f64>() * TAU;
                Step::ChartAffine {
                    anchor: [rho * phi.cos(), rho * phi.sin()],
                    scale: rng.random_range(0.2..0.95),
                }
            }
            _ => Step::Map(MapExpr::rotation_about(cap, &x, rng.random_range(-PI..PI))?),
        };
        out = out.then(step)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    /// Starts: the chart origin plus `starts - 1` uniform points of the disc.
    pub starts: usize,
    pub seed: u64,
    /// Step halvings of the compass search before it gives up.
    pub max_halvings: usize,
    pub newton_steps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            starts: 32,
            seed: 0,
            max_halvings: 60,
            newton_steps: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousFixedPoint {
    pub point: ModelPoint,
    /// `d(p, f(p))`.
    pub displacement: f64,
    pub planar: [f64; 2],
    /// `|F(w) - w|` for the conjugate `F = h . f . h^-1`.
    pub planar_residual: f64,
    pub start: usize,
}

struct Conjugate<'a, F: ContinuousSelfMap + ?Sized> {
    f: &'a F,
    chart: &'a Stereographic,
}

impl<F: ContinuousSelfMap + ?Sized> Conjugate<'_, F> {
    fn gap(&self, w: [f64; 2]) -> Result<[f64; 2]> {
        let w = self.chart.clamp(w);
        let fw = self.chart.h(&self.f.map_point(&self.chart.h_inverse(w))?)?;
        Ok([fw[0] - w[0], fw[1] - w[1]])
    }

    fn norm(&self, w: [f64; 2]) -> Result<f64> {
        let g = self.gap(w)?;
        Ok(g[0].hypot(g[1]))
    }

    /// Pattern search on `|F(w) - w|` over eight directions.
    fn compass(&self, mut w: [f64; 2], opts: &SearchOptions, tol: f64) -> Result<([f64; 2], f64)> {
        let mut best = self.norm(w)?;
        let mut step = self.chart.disc_radius() / 4.0;
        let dirs: [[f64; 2]; 8] = {
            let d = std::f64::consts::FRAC_1_SQRT_2;
            [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [d, d], [-d, d], [d, -d], [-d, -d]]
        };
        let mut halvings = 0;
        while best > tol && halvings < opts.max_halvings {
            let mut improved = false;
            for d in dirs {
                let cand = self.chart.clamp([w[0] + step * d[0], w[1] + step * d[1]]);
                let v = self.norm(cand)?;
                if v < best {
                    best = v;
                    w = cand;
                    improved = true;
                    break;
                }
            }
            if !improved {
                step /= 2.0;
                halvings += 1;
            }
        }
        Ok((w, best))
    }

    /// Damped Newton on `F(w) - w` with a central-difference Jacobian.
    fn newton(&self, mut w: [f64; 2], mut best: f64, steps: usize, tol: f64) -> Result<([f64; 2], f64)> {
        for _ in 0..steps {
            if best <= tol * 1e-3 {
                break;
            }
            let g = self.gap(w)?;
            let h = 1e-7 * (1.0 + w[0].hypot(w[1]));
            let mut jac = [[0.0; 2]; 2];
            for (j, e) in [[h, 0.0], [0.0, h]].into_iter().enumerate() {
                let gp = self.gap([w[0] + e[0], w[1] + e[1]])?;
                let gm = self.gap([w[0] - e[0], w[1] - e[1]])?;
                jac[0][j] = (gp[0] - gm[0]) / (2.0 * h);
                jac[1][j] = (gp[1] - gm[1]) / (2.0 * h);
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if !det.is_finite() || det.abs() < 1e-14 {
                break;
            }
            let dx = [
                -(jac[1][1] * g[0] - jac[0][1] * g[1]) / det,
                -(-jac[1][0] * g[0] + jac[0][0] * g[1]) / det,
            ];
            let mut lambda = 1.0;
            let mut moved = false;
            while lambda > 1e-6 {
                let cand = self.chart.clamp([w[0] + lambda * dx[0], w[1] + lambda * dx[1]]);
                let v = self.norm(cand)?;
                if v < best {
                    best = v;
                    w = cand;
                    moved = true;
                    break;
                }
                lambda /= 2.0;
            }
            if !moved {
                break;
            }
        }
        Ok((w, best))
    }
}

/// Finds `p` with `d(p, f(p)) <= tol` for a continuous self-map of a cap of
/// radius below `D_kappa`, by minimizing `|F(w) - w|` for the conjugate
/// `F = h . f . h^-1` from several starts. A fixed point always exists, so
/// failure only means the budget ran out.
pub fn find_fixed_point_continuous<F: ContinuousSelfMap + ?Sized>(
    f: &F,
    tol: f64,
    opts: &SearchOptions,
) -> Result<ContinuousFixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::out_of_range(format!("tol = {tol} must be positive")));
    }
    let chart = Stereographic::for_cap(f.domain())?;
    let conj = Conjugate { f, chart: &chart };
    let disc = chart.disc_radius();
    let mut rng = stream_rng(opts.seed, 0);
    let starts: Vec<[f64; 2]> = (0..opts.starts.max(1))
        .map(|i| {
            if i == 0 {
                return [0.0, 0.0];
            }
            let rho = disc * rng.random::<f64>().sqrt();
            let phi = rng.random::<f64>() * TAU;
            [rho * phi.cos(), rho * phi.sin()]
        })
        .collect();
    // The chart metric is at most the planar one, so planar residuals below
    // the spherical tolerance are enough.
    let planar_tol = tol * 1e-2;
    let results = starts
        .par_iter()
        .enumerate()
        .map(|(i, &w0)| -> Result<(usize, ContinuousFixedPoint)> {
            let (w, v) = conj.compass(w0, opts, planar_tol)?;
            let (w, v) = conj.newton(w, v, opts.newton_steps, planar_tol)?;
            let w = chart.clamp(w);
            let p = chart.h_inverse(w);
            let displacement = distance(&p, &f.map_point(&p)?)?;
            Ok((
                i,
                ContinuousFixedPoint {
                    point: p,
                    displacement,
                    planar: w,
                    planar_residual: v,
                    start: i,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = results
        .into_iter()
        .min_by(|a, b| a.1.displacement.total_cmp(&b.1.displacement).then(a.0.cmp(&b.0)))
        .map(|(_, r)| r)
        .expect("at least one start");
    if best.displacement <= tol {
        Ok(best)
    } else {
        Err(Error::SearchFailure {
            displacement: best.displacement,
            best: Box::new(best.point),
        })
    }
}

/// `F(w) - w` for the conjugate map, exposed for conjugation checks.
pub fn conjugate_gap<F: ContinuousSelfMap + ?Sized>(
    f: &F,
    chart: &Stereographic,
    w: [f64; 2],
) -> Result<[f64; 2]> {
    Conjugate { f, chart }.gap(w)
}
