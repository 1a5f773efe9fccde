//! Quantitative pieces of the porosity argument: the regularized map
//! `f_gamma = s_{1 - gamma} . f`, the witness constants, far-pair contraction
//! checks, ball inclusions, and a Picard solver.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::contraction::{k_exponent, ContractionCertificate, BOUND_TOL};
use crate::error::{Error, Result};
use crate::geometry::{distance, Curvature, ModelPoint};
use crate::mapping::{dist_inf, Domain, MapExpr};
use crate::sampling::{derive_seed, par_chunks, stream_rng};

/// `f_gamma(z) = (1 - gamma) f(z) (+) gamma x` for the star center `x` and the
/// enclosing radius of the domain. `gamma = 0` returns `f` unchanged.
pub fn regularize(f: &MapExpr, gamma: f64) -> Result<MapExpr> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::out_of_range(format!("gamma = {gamma} not in [0, 1)")));
    }
    let domain = f.domain();
    let x = domain
        .star_center()
        .ok_or_else(|| Error::domain("regularization needs a star-shaped domain"))?;
    if gamma == 0.0 {
        return Ok(f.clone());
    }
    let radius = enclosing_radius(domain)?;
    let s = MapExpr::star_contraction(domain, x, radius, 1.0 - gamma)?;
    MapExpr::compose(&s, f)
}

fn enclosing_radius(domain: &Domain) -> Result<f64> {
    domain
        .enclosing_radius()
        .filter(|r| *r > 0.0)
        .ok_or_else(|| Error::infeasible("domain has no star center or is a single point"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PorosityWitness {
    pub r: f64,
    pub n: u32,
    /// Enclosing radius `R` of the domain about its star center.
    pub radius: f64,
    /// `a_n = R / n`.
    pub scale_a_n: f64,
    pub gamma: f64,
    pub k: u32,
    pub alpha: f64,
    pub beta: f64,
}

/// Relative slack for invariants that hold with equality in exact arithmetic.
const ULP_SLACK: f64 = 8.0 * f64::EPSILON;

impl PorosityWitness {
    /// Contraction factor `(1 - gamma)^(1/k)` of `f_gamma`.
    pub fn lip_bound(&self) -> f64 {
        (1.0 - self.gamma).powf(1.0 / self.k as f64)
    }

    /// The three structural invariants, each as `(holds, lhs, rhs)`.
    pub fn check_invariants(&self) -> [(bool, f64, f64); 3] {
        let ranges = self.gamma > 0.0
            && self.gamma < 0.5
            && self.alpha > 0.0
            && self.alpha <= 0.25 / self.n as f64 * (1.0 + ULP_SLACK)
            && self.beta > 0.5
            && self.beta < 1.0;
        let budget = self.alpha * self.r + self.gamma * self.radius;
        let slack = 2.0 * self.n as f64 * self.alpha * self.r / self.radius;
        let half_gap = (1.0 - self.lip_bound()) / 2.0;
        [
            (ranges, self.gamma, 0.5),
            (budget <= self.r * (1.0 + ULP_SLACK), budget, self.r),
            (slack <= half_gap * (1.0 + ULP_SLACK), slack, half_gap),
        ]
    }
}

/// Witness constants for `f` on `domain` at scale `r` and level `n`.
pub fn make_witness(domain: &Domain, f: &MapExpr, r: f64, n: u32) -> Result<PorosityWitness> {
    if f.domain() != domain {
        return Err(Error::domain("map lives on a different domain"));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::out_of_range(format!("r = {r} not in (0, 1]")));
    }
    if n == 0 {
        return Err(Error::out_of_range("n must be at least 1"));
    }
    let radius = enclosing_radius(domain)?;
    let k = k_exponent(domain.curvature(), radius)
        .map_err(|e| Error::infeasible(format!("no admissible enclosing radius: {e}")))?;
    let gamma = r / (2.0 * (radius + 1.0));
    let root = (1.0 - gamma).powf(1.0 / k as f64);
    let w = PorosityWitness {
        r,
        n,
        radius,
        scale_a_n: radius / n as f64,
        gamma,
        k,
        alpha: radius.min(1.0) * (1.0 - root) / (4.0 * n as f64),
        beta: (1.0 + root) / 2.0,
    };
    if let Some((_, lhs, rhs)) = w.check_invariants().into_iter().find(|c| !c.0) {
        return Err(Error::Internal(format!(
            "witness invariant failed: {lhs} vs {rhs} for {w:?}"
        )));
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KnReport {
    pub pass: bool,
    pub worst_ratio: f64,
    pub pairs_tested: usize,
    /// No pair at distance `>= R / n` exists, so the check is empty.
    pub vacuous: bool,
}

/// Attempts per sample to draw a partner at distance at least `R / n`.
const FAR_ATTEMPTS: usize = 64;

/// Samples pairs at distance at least `R / n` (`R` the enclosing radius, or
/// the diameter for domains without a star center) and checks
/// `d(g(y), g(z)) <= beta d(y, z)`.
pub fn kn_membership(g: &MapExpr, n: u32, beta: f64, samples: usize, seed: u64) -> Result<KnReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::out_of_range(format!("beta = {beta} not in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::out_of_range("n must be at least 1"));
    }
    let domain = g.domain();
    let radius = domain.enclosing_radius().unwrap_or_else(|| domain.diameter());
    let threshold = radius / n as f64;
    if domain.diameter() < threshold || radius <= 0.0 {
        return Ok(KnReport {
            pass: true,
            worst_ratio: 0.0,
            pairs_tested: 0,
            vacuous: true,
        });
    }
    let chunks = par_chunks(samples, seed, |rng, _, len| -> Result<(f64, usize)> {
        let mut worst = 0.0f64;
        let mut tested = 0;
        for _ in 0..len {
            let y = domain.sample(rng);
            for _ in 0..FAR_ATTEMPTS {
                let z = domain.sample(rng);
                let d = distance(&y, &z)?;
                if d >= threshold {
                    let q = distance(&g.apply(&y)?, &g.apply(&z)?)? / d;
                    worst = worst.max(q);
                    tested += 1;
                    break;
                }
            }
        }
        Ok((worst, tested))
    });
    let mut worst = 0.0f64;
    let mut tested = 0;
    for c in chunks {
        let (w, t) = c?;
        worst = worst.max(w);
        tested += t;
    }
    Ok(KnReport {
        pass: worst <= beta + BOUND_TOL,
        worst_ratio: worst,
        pairs_tested: tested,
        vacuous: tested == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Identity,
    Rotation,
    Shrink,
    RotationShrink,
}

/// One map `g` near `f_gamma` with its closed-form distance bound.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub angle: f64,
    pub delta: f64,
    /// Upper bound on `d_inf(g, f_gamma)`.
    pub displacement_bound: f64,
    pub map: MapExpr,
}

/// Largest displacement of the rotation by `angle` about the center of a
/// spherical cap of radius `radius`.
fn cap_rotation_displacement(kappa: Curvature, radius: f64, angle: f64) -> f64 {
    let s = kappa.scale();
    let c = (radius * s).min(std::f64::consts::FRAC_PI_2).sin() * (0.5 * angle).sin().abs();
    2.0 * c.min(1.0).asin() / s
}

/// Rotation angle whose displacement on the cap stays within `budget`.
fn cap_rotation_angle(kappa: Curvature, radius: f64, budget: f64) -> f64 {
    let s = kappa.scale();
    let ratio = (0.5 * budget * s).min(std::f64::consts::FRAC_PI_2).sin()
        / (radius * s).min(std::f64::consts::FRAC_PI_2).sin();
    2.0 * ratio.min(1.0).asin()
}

/// The `index`-th member of the perturbation family around `f_gamma`:
/// index 0 is `f_gamma` itself, then rotations about the star center,
/// shrinks toward it, and both, each within `budget` of `f_gamma`.
pub fn perturbation(
    f_gamma: &MapExpr,
    budget: f64,
    index: usize,
    seed: u64,
) -> Result<Perturbation> {
    let domain = f_gamma.domain();
    let x = domain
        .star_center()
        .ok_or_else(|| Error::domain("perturbations need a star center"))?;
    let radius = enclosing_radius(domain)?;
    let kappa = domain.curvature();
    if index == 0 {
        return Ok(Perturbation {
            kind: PerturbationKind::Identity,
            angle: 0.0,
            delta: 0.0,
            displacement_bound: 0.0,
            map: f_gamma.clone(),
        });
    }
    let rotatable = domain.axis().is_some();
    let kind = match ((index - 1) % 3, rotatable) {
        (0, true) => PerturbationKind::Rotation,
        (2, true) => PerturbationKind::RotationShrink,
        _ => PerturbationKind::Shrink,
    };
    let mut rng = stream_rng(seed, index as u64);
    let u: f64 = rng.random_range(0.05..=1.0);
    let v: f64 = rng.random_range(0.05..=1.0);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let (rot_budget, shrink_budget) = match kind {
        PerturbationKind::Rotation => (budget, 0.0),
        PerturbationKind::Shrink => (0.0, budget),
        _ => (0.5 * budget, 0.5 * budget),
    };
    let mut map = f_gamma.clone();
    let mut bound = 0.0;
    let mut delta = 0.0;
    let mut angle = 0.0;
    if shrink_budget > 0.0 {
        delta = (u * shrink_budget / radius).min(1.0);
        let s = MapExpr::star_contraction(domain, x, radius, 1.0 - delta)?;
        map = MapExpr::compose(&s, &map)?;
        bound += delta * radius;
    }
    if rot_budget > 0.0 {
        angle = sign * v * cap_rotation_angle(kappa, radius, rot_budget);
        let rot = MapExpr::rotation_about(domain, x, angle)?;
        map = MapExpr::compose(&rot, &map)?;
        bound += cap_rotation_displacement(kappa, radius, angle);
    }
    Ok(Perturbation {
        kind,
        angle,
        delta,
        displacement_bound: bound,
        map,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationRow {
    pub index: usize,
    pub kind: PerturbationKind,
    pub angle: f64,
    pub delta: f64,
    pub displacement_bound: f64,
    /// Measured lower estimate of `d_inf(g, f_gamma)`.
    pub dist_to_f_gamma: f64,
    pub kn: KnReport,
    /// Measured lower estimate of `d_inf(g, f)`.
    pub dist_to_f_lower: f64,
    /// Grid bound on `d_inf(g, f)`.
    pub dist_to_f_certified: f64,
    /// `alpha r + gamma R`.
    pub triangle_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallInclusionReport {
    pub pass: bool,
    pub budget: f64,
    pub rows: Vec<PerturbationRow>,
}

/// Sample sizes for [`ball_inclusion_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InclusionSamples {
    pub kn_pairs: usize,
    pub dist_samples: usize,
}

impl Default for InclusionSamples {
    fn default() -> Self {
        InclusionSamples {
            kn_pairs: 20_000,
            dist_samples: 4096,
        }
    }
}

/// Builds `perturbations` maps `g` with `d_inf(g, f_gamma) <= alpha r` and
/// checks that each lies in the far-pair class at `beta` and within `r` of
/// `f`. The family is a certified subfamily, not all of the ball.
pub fn ball_inclusion_check(
    f: &MapExpr,
    w: &PorosityWitness,
    perturbations: usize,
    sizes: InclusionSamples,
    seed: u64,
) -> Result<BallInclusionReport> {
    if perturbations == 0 {
        return Err(Error::out_of_range("need at least one perturbation"));
    }
    let f_gamma = regularize(f, w.gamma)?;
    let budget = w.alpha * w.r;
    let rows = (0..perturbations)
        .into_par_iter()
        .map(|i| -> Result<PerturbationRow> {
            let seed_i = derive_seed(seed, i as u64);
            let p = perturbation(&f_gamma, budget, i, derive_seed(seed_i, 0))?;
            if p.displacement_bound > budget + BOUND_TOL {
                return Err(Error::Internal(format!(
                    "perturbation {i} exceeds its budget: {} > {budget}",
                    p.displacement_bound
                )));
            }
            let near = dist_inf(&p.map, &f_gamma, sizes.dist_samples, derive_seed(seed_i, 1))?;
            if near.lower > p.displacement_bound + BOUND_TOL {
                return Err(Error::Internal(format!(
                    "perturbation {i} measured {} from f_gamma, above its bound {}",
                    near.lower, p.displacement_bound
                )));
            }
            let kn = kn_membership(&p.map, w.n, w.beta, sizes.kn_pairs, derive_seed(seed_i, 2))?;
            let far = dist_inf(&p.map, f, sizes.dist_samples, derive_seed(seed_i, 3))?;
            let certified = far.certified_upper.unwrap_or(f64::INFINITY);
            Ok(PerturbationRow {
                index: i,
                kind: p.kind,
                angle: p.angle,
                delta: p.delta,
                displacement_bound: p.displacement_bound,
                dist_to_f_gamma: near.lower,
                kn,
                dist_to_f_lower: far.lower,
                dist_to_f_certified: certified,
                triangle_bound: budget + w.gamma * w.radius,
                pass: kn.pass && certified <= w.r + BOUND_TOL,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BallInclusionReport {
        pass: rows.iter().all(|r| r.pass),
        budget,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixpointResult {
    pub fixed_point: ModelPoint,
    /// Number of map evaluations.
    pub iterations: usize,
    /// Length of the last step.
    pub residual: f64,
    /// `L^(j - 1) d(x_0, x_1) / (1 - L)` after `j` evaluations, bounding both
    /// the last step and the distance to the fixed point.
    pub apriori_bound: Option<f64>,
    pub converged: bool,
}

/// Absolute round-off allowance in the per-step rate check.
pub const RATE_FLOOR: f64 = 1e-14;

/// Iterates `x_{j+1} = f(x_j)` until a step is shorter than `tol`.
///
/// With a certificate `L < 1` every step must shrink by at least `L` (up to
/// [`BOUND_TOL`] and [`RATE_FLOOR`]); a violation is an error.
pub fn picard_solve(
    f: &MapExpr,
    x0: &ModelPoint,
    tol: f64,
    max_iter: usize,
    certificate: Option<&ContractionCertificate>,
) -> Result<FixpointResult> {
    if !(tol > 0.0) {
        return Err(Error::out_of_range(format!("tol = {tol} must be positive")));
    }
    if !f.domain().contains(x0) {
        return Err(Error::OutsideDomain);
    }
    let lip = certificate.map(|c| c.lip_bound).filter(|l| *l < 1.0);
    let mut x = x0.clone();
    let mut first_step = None;
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = f.apply(&x)?;
        let step = distance(&x, &next)?;
        iterations += 1;
        if let Some(l) = lip {
            if iterations > 1 && step > (l + BOUND_TOL) * last_step + RATE_FLOOR {
                return Err(Error::CertificateViolated(format!(
                    "step {step} after {last_step} exceeds rate {l}"
                )));
            }
        }
        first_step.get_or_insert(step);
        last_step = step;
        x = next;
        if step < tol {
            converged = true;
            break;
        }
    }
    let apriori_bound = match (lip, first_step) {
        (Some(l), Some(s0)) => Some(l.powi(iterations as i32 - 1) * s0 / (1.0 - l)),
        _ => None,
    };
    Ok(FixpointResult {
        fixed_point: x,
        iterations,
        residual: last_step,
        apriori_bound,
        converged,
    })
}

/// The orbit `x_0, f(x_0), ..., f^steps(x_0)`.
pub fn picard_orbit(f: &MapExpr, x0: &ModelPoint, steps: usize) -> Result<Vec<ModelPoint>> {
    if !f.domain().contains(x0) {
        return Err(Error::OutsideDomain);
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.clone());
    for _ in 0..steps {
        let next = f.apply(out.last().expect("orbit is nonempty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Random points of the domain, one per start, drawn from a seeded stream.
pub fn random_starts(domain: &Domain, count: usize, seed: u64) -> Vec<ModelPoint> {
    let mut rng = stream_rng(seed, 0);
    (0..count).map(|_| domain.sample(&mut rng)).collect()
}
