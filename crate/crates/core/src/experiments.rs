//! Batch experiments behind the command-line runner. Each `run_*` function
//! takes a serializable configuration, embeds it in the report, and sets
//! `pass` to the conjunction of its row assertions.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::contraction::{certify_star_contraction, k_exponent, star_contraction, BOUND_TOL};
use crate::error::{Error, Result};
use crate::geometry::{Curvature, ModelPoint};
use crate::mapping::{
    lip_global, rakotch_modulus, witness_sets, Analytic1d, Domain, MapExpr, WitnessParams,
};
use crate::obstruction::{
    certify_no_strict_contraction, exclusion_check, find_fixed_point_continuous,
    random_composite, rotation_displacement, strict_contraction_family, ContinuousSelfMap,
    SearchOptions,
};
use crate::rakotch::{
    ball_inclusion_check, kn_membership, make_witness, picard_solve, random_starts, regularize,
    InclusionSamples,
};
use crate::report::{num, ExperimentReport, Row};
use crate::row;
use crate::sampling::derive_seed;

/// A test domain centered at the base point of its model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Cap { kappa: f64, radius: f64 },
    Annulus { kappa: f64, inner: f64, outer: f64 },
    Interval { lo: f64, hi: f64 },
    Ball { dim: usize, radius: f64 },
    HyperbolicBall { kappa: f64, radius: f64 },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        match *self {
            DomainSpec::Cap { kappa, radius } => {
                Domain::spherical_cap(ModelPoint::base(Curvature::new(kappa)?), radius)
            }
            DomainSpec::Annulus {
                kappa,
                inner,
                outer,
            } => Domain::spherical_annulus(ModelPoint::base(Curvature::new(kappa)?), inner, outer),
            DomainSpec::Interval { lo, hi } => Domain::euclidean_interval(lo, hi),
            DomainSpec::Ball { dim, radius } => {
                Domain::euclidean_ball(ModelPoint::euclidean(&vec![0.0; dim])?, radius)
            }
            DomainSpec::HyperbolicBall { kappa, radius } => {
                Domain::hyperbolic_ball(ModelPoint::base(Curvature::new(kappa)?), radius)
            }
        }
    }
}

/// A self-map of a [`DomainSpec`]; constants map to the domain's center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Identity,
    Constant,
    Rotation { angle: f64 },
    Star { t: f64 },
    Analytic,
}

fn center_of(domain: &Domain) -> Result<ModelPoint> {
    domain
        .star_center()
        .or_else(|| domain.axis())
        .cloned()
        .ok_or_else(|| Error::domain("domain has no distinguished center"))
}

impl MapSpec {
    pub fn build(&self, domain: &Domain) -> Result<MapExpr> {
        match *self {
            MapSpec::Identity => Ok(MapExpr::identity(domain)),
            MapSpec::Constant => {
                // An annulus does not contain its axis; use a point on the
                // inner boundary instead.
                let c = center_of(domain)?;
                if domain.contains(&c) {
                    MapExpr::constant(domain, c)
                } else {
                    let inner = match domain.kind() {
                        crate::mapping::DomainKind::SphericalAnnulus { inner, .. } => *inner,
                        _ => 0.0,
                    };
                    MapExpr::constant(domain, c.polar_offset(inner, 0.0)?)
                }
            }
            MapSpec::Rotation { angle } => MapExpr::rotation_about(domain, &center_of(domain)?, angle),
            MapSpec::Star { t } => {
                let c = domain
                    .star_center()
                    .cloned()
                    .ok_or_else(|| Error::domain("star contractions need a star center"))?;
                let radius = domain
                    .enclosing_radius()
                    .ok_or_else(|| Error::domain("domain has no enclosing radius"))?;
                MapExpr::star_contraction(domain, &c, radius, t)
            }
            MapSpec::Analytic => MapExpr::analytic_1d(domain, Analytic1d::XMinusHalfXSquared),
        }
    }
}

fn to_map<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn tolerances(pairs: &[(&str, f64)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), num(*v))).collect()
}

fn finish(mut report: ExperimentReport, start: Instant) -> ExperimentReport {
    report.runtime_ms = start.elapsed().as_millis() as u64;
    report
}

fn coord_cells(row: &mut Row, prefix: &str, p: &ModelPoint) {
    for (i, c) in p.coords().iter().enumerate() {
        row.insert(format!("{prefix}{i}"), num(*c));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaContractionConfig {
    pub kappas: Vec<f64>,
    pub radii: Vec<f64>,
    pub ts: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for LemmaContractionConfig {
    fn default() -> Self {
        LemmaContractionConfig {
            kappas: vec![-1.0, 0.0, 1.0, 4.0],
            radii: vec![0.3, 0.6, 1.0, 1.4],
            ts: (1..=9).map(|i| i as f64 / 10.0).collect(),
            samples: 100_000,
            seed: 0,
        }
    }
}

/// Empirical Lipschitz ratio of the star contraction `s_{x,R,t}` against the
/// certified `t^(1/k)` on every grid cell.
pub fn run_lemma_contraction(cfg: &LemmaContractionConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.kappas.is_empty() || cfg.radii.is_empty() || cfg.ts.is_empty() {
        return Err(Error::domain("the (kappa, R, t) grid is empty"));
    }
    let cells: Vec<(f64, f64, f64)> = cfg
        .kappas
        .iter()
        .flat_map(|&k| cfg.radii.iter().flat_map(move |&r| cfg.ts.iter().map(move |&t| (k, r, t))))
        .collect();
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(kappa, radius, t))| -> Result<Row> {
            let mut row = row! { "kappa" => kappa, "radius" => radius, "t" => t };
            let kappa_c = Curvature::new(kappa)?;
            let k = match k_exponent(kappa_c, radius) {
                Ok(k) => k,
                Err(e) => {
                    row.extend(row! { "valid" => false, "note" => e.to_string() });
                    return Ok(row);
                }
            };
            let center = if kappa == 0.0 {
                ModelPoint::euclidean(&[0.0, 0.0])?
            } else {
                ModelPoint::base(kappa_c)
            };
            let s = star_contraction(&center, radius, t)?;
            let bound = certify_star_contraction(&center, radius, t)?.lip_bound;
            let empirical = lip_global(&s, cfg.samples, derive_seed(cfg.seed, i as u64))?;
            row.extend(row! {
                "valid" => true,
                "k" => k,
                "bound" => bound,
                "empirical" => empirical,
                "margin" => bound - empirical,
                "pass" => empirical <= bound + BOUND_TOL,
            });
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new(
        "lemma_contraction",
        to_map(cfg),
        tolerances(&[("bound_tol", BOUND_TOL)]),
        cfg.seed,
    );
    report.pass = rows.iter().all(|r| r.get("pass").is_none_or(|v| v == &Value::Bool(true)));
    report.rows = rows;
    Ok(finish(report, start))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremWitnessConfig {
    pub domain: DomainSpec,
    pub map: MapSpec,
    pub r: f64,
    pub ns: Vec<u32>,
    pub perturbations: usize,
    pub kn_pairs: usize,
    pub dist_samples: usize,
    pub seed: u64,
}

impl Default for TheoremWitnessConfig {
    fn default() -> Self {
        TheoremWitnessConfig {
            domain: DomainSpec::Cap {
                kappa: 1.0,
                radius: 1.0,
            },
            map: MapSpec::Identity,
            r: 1.0,
            ns: vec![1, 2, 4],
            perturbations: 64,
            kn_pairs: 20_000,
            dist_samples: 4096,
            seed: 0,
        }
    }
}

/// Witness constants, the far-pair check on `f_gamma`, and the ball
/// inclusion over the perturbation family, for each level `n`.
pub fn run_theorem_witness(cfg: &TheoremWitnessConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let domain = cfg.domain.build()?;
    let f = cfg.map.build(&domain)?;
    let sizes = InclusionSamples {
        kn_pairs: cfg.kn_pairs,
        dist_samples: cfg.dist_samples,
    };
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let w = make_witness(&domain, &f, cfg.r, n)?;
        let seed_n = derive_seed(cfg.seed, n as u64);
        let f_gamma = regularize(&f, w.gamma)?;
        let base = kn_membership(&f_gamma, n, w.beta, cfg.kn_pairs, derive_seed(seed_n, 0))?;
        let inclusion = ball_inclusion_check(&f, &w, cfg.perturbations, sizes, derive_seed(seed_n, 1))?;
        let invariants = w.check_invariants().iter().all(|c| c.0);
        for p in inclusion.rows {
            rows.push(row! {
                "n" => n,
                "r" => w.r,
                "radius" => w.radius,
                "a_n" => w.scale_a_n,
                "gamma" => w.gamma,
                "k" => w.k,
                "alpha" => w.alpha,
                "beta" => w.beta,
                "invariants" => invariants,
                "f_gamma_worst_ratio" => base.worst_ratio,
                "f_gamma_kn_pass" => base.pass,
                "perturbation" => p.index,
                "kind" => serde_json::to_value(p.kind)?,
                "angle" => p.angle,
                "delta" => p.delta,
                "displacement_bound" => p.displacement_bound,
                "dist_to_f_gamma" => p.dist_to_f_gamma,
                "worst_ratio" => p.kn.worst_ratio,
                "pairs_tested" => p.kn.pairs_tested,
                "vacuous" => p.kn.vacuous,
                "kn_pass" => p.kn.pass,
                "dist_to_f_lower" => p.dist_to_f_lower,
                "dist_to_f_certified" => p.dist_to_f_certified,
                "triangle_bound" => p.triangle_bound,
                "pass" => p.pass && invariants && base.pass,
            });
        }
    }
    let mut report = ExperimentReport::new(
        "theorem_witness",
        to_map(cfg),
        tolerances(&[("bound_tol", BOUND_TOL)]),
        cfg.seed,
    );
    report.pass = rows.iter().all(|r| r["pass"] == Value::Bool(true));
    report.rows = rows;
    Ok(finish(report, start))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleConfig {
    pub kappa: f64,
    pub inner: f64,
    pub outer: f64,
    pub map: MapSpec,
    pub mesh: f64,
    /// Size of the strict-contraction family tested for exclusion.
    pub family: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            kappa: 1.0,
            inner: PI / 6.0,
            outer: 1.3,
            map: MapSpec::Rotation { angle: 0.5 },
            mesh: 1e-3,
            family: 48,
            samples: 4096,
            seed: 0,
        }
    }
}

/// Certified distance from a nonexpansive annulus map to all strict
/// contractions, plus the exclusion check on the constructible family.
pub fn run_counterexample(cfg: &CounterexampleConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let domain = Domain::spherical_annulus(
        ModelPoint::base(Curvature::new(cfg.kappa)?),
        cfg.inner,
        cfg.outer,
    )?;
    let f = cfg.map.build(&domain)?;
    let closed_form = match cfg.map {
        MapSpec::Rotation { angle } => {
            // Displacement grows with sin of the colatitude; the minimum sits
            // on whichever boundary circle is closer to a pole.
            let kappa = domain.curvature();
            Some(
                rotation_displacement(kappa, cfg.inner, angle)
                    .min(rotation_displacement(kappa, cfg.outer, angle)),
            )
        }
        _ => None,
    };
    let mut report = ExperimentReport::new(
        "counterexample",
        to_map(cfg),
        tolerances(&[("mesh", cfg.mesh)]),
        cfg.seed,
    );
    let mut rows = Vec::new();
    match certify_no_strict_contraction(&f, cfg.mesh) {
        Ok(cert) => {
            let family = strict_contraction_family(&domain, cfg.family, derive_seed(cfg.seed, 0))?;
            let excl = exclusion_check(&f, &cert, &family, cfg.samples, derive_seed(cfg.seed, 1))?;
            rows.push(row! {
                "kind" => "certificate",
                "epsilon" => cert.grid_min,
                "epsilon_closed_form" => closed_form,
                "eps_lower" => cert.eps_lower,
                "radius" => cert.radius,
                "mesh" => cert.grid_mesh,
                "grid_points" => cert.grid_points,
                "vacuous" => false,
                "pass" => true,
            });
            for r in excl.rows {
                rows.push(row! {
                    "kind" => "exclusion",
                    "radius" => cert.radius,
                    "label" => r.label,
                    "certified_lipschitz" => r.certified_lipschitz,
                    "distance_lower" => r.distance_lower,
                    "pass" => r.excluded,
                });
            }
        }
        Err(Error::VacuousCertificate { grid_min, mesh }) => {
            rows.push(row! {
                "kind" => "certificate",
                "epsilon" => grid_min,
                "epsilon_closed_form" => closed_form,
                "mesh" => mesh,
                "vacuous" => true,
                "pass" => false,
            });
        }
        Err(e) => return Err(e),
    }
    report.pass = rows.iter().all(|r| r["pass"] == Value::Bool(true));
    report.rows = rows;
    Ok(finish(report, start))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RakotchProfileConfig {
    pub domain: DomainSpec,
    pub map: MapSpec,
    pub buckets: usize,
    pub samples: usize,
    /// Points of the witness grid.
    pub grid_points: usize,
    pub threshold: f64,
    pub witness_samples: usize,
    pub seed: u64,
}

impl Default for RakotchProfileConfig {
    fn default() -> Self {
        RakotchProfileConfig {
            domain: DomainSpec::Interval { lo: 0.0, hi: 1.0 },
            map: MapSpec::Analytic,
            buckets: 10,
            samples: 1_000_000,
            grid_points: 21,
            threshold: 0.98,
            witness_samples: 4096,
            seed: 0,
        }
    }
}

/// Evenly spaced points on an interval, or a covering grid of about `count`
/// points elsewhere.
pub fn witness_grid(domain: &Domain, count: usize) -> Result<Vec<ModelPoint>> {
    if let crate::mapping::DomainKind::EuclideanInterval { lo, hi } = *domain.kind() {
        let m = count.max(2);
        return (0..m)
            .map(|i| ModelPoint::euclidean(&[lo + (hi - lo) * i as f64 / (m - 1) as f64]))
            .collect();
    }
    Ok(domain.grid_with_count(count)?.points())
}

/// The step-function modulus and the witness sets of a map.
pub fn run_rakotch_profile(cfg: &RakotchProfileConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let domain = cfg.domain.build()?;
    let f = cfg.map.build(&domain)?;
    let modulus = rakotch_modulus(&f, cfg.buckets, cfg.samples, derive_seed(cfg.seed, 0))?;
    let grid = witness_grid(&domain, cfg.grid_points)?;
    let params = WitnessParams::new(cfg.threshold, cfg.witness_samples, derive_seed(cfg.seed, 1));
    let sets = witness_sets(&f, &grid, &params)?;
    let mut rows = Vec::new();
    for (i, &(t, phi)) in modulus.grid.iter().enumerate() {
        rows.push(row! {
            "kind" => "modulus",
            "t" => t,
            "phi_hat" => phi,
            "empty_bucket" => modulus.empty[i],
            "pass" => (0.0..=1.0).contains(&phi),
        });
    }
    for (i, x) in grid.iter().enumerate() {
        let in_r = sets.r_est.contains(&i);
        let in_hat = sets.r_hat_est.contains(&i);
        let mut row = row! { "kind" => "witness", "index" => i };
        coord_cells(&mut row, "x", x);
        row.extend(row! {
            "lip_at" => sets.lip_at[i],
            "lip_hat" => sets.lip_hat[i],
            "in_r_est" => in_r,
            "in_r_hat_est" => in_hat,
            "pass" => !in_r || in_hat,
        });
        rows.push(row);
    }
    let mut report = ExperimentReport::new(
        "rakotch_profile",
        to_map(cfg),
        tolerances(&[("threshold", cfg.threshold)]),
        cfg.seed,
    );
    report.pass = rows.iter().all(|r| r["pass"] == Value::Bool(true));
    report.rows = rows;
    Ok(finish(report, start))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixpointMethod {
    /// Picard iteration of the map from random starts.
    Picard,
    /// Chart search for the map itself.
    Search,
    /// Chart search for random continuous composites on the cap.
    Composites,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixpointConfig {
    pub domain: DomainSpec,
    pub map: MapSpec,
    pub method: FixpointMethod,
    /// Starts for Picard, composites for the composite search.
    pub count: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FixpointConfig {
    fn default() -> Self {
        FixpointConfig {
            domain: DomainSpec::Cap {
                kappa: 1.0,
                radius: 1.0,
            },
            map: MapSpec::Star { t: 0.75 },
            method: FixpointMethod::Picard,
            count: 10,
            tol: 1e-10,
            max_iter: 100_000,
            seed: 0,
        }
    }
}

pub fn run_fixpoint(cfg: &FixpointConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let domain = cfg.domain.build()?;
    let mut rows = Vec::new();
    match cfg.method {
        FixpointMethod::Picard => {
            let f = cfg.map.build(&domain)?;
            let cert = match f.node() {
                crate::mapping::Node::StarContraction { certificate, .. } => Some(*certificate),
                _ => None,
            };
            for (i, x0) in random_starts(&domain, cfg.count, cfg.seed).iter().enumerate() {
                let r = picard_solve(&f, x0, cfg.tol, cfg.max_iter, cert.as_ref())?;
                let within = r.apriori_bound.is_none_or(|b| r.residual <= b + 1e-12);
                let mut row = row! {
                    "start" => i,
                    "iterations" => r.iterations,
                    "residual" => r.residual,
                    "apriori_bound" => r.apriori_bound,
                    "converged" => r.converged,
                };
                coord_cells(&mut row, "p", &r.fixed_point);
                row.insert("pass".into(), Value::Bool(r.converged && within));
                rows.push(row);
            }
        }
        FixpointMethod::Search | FixpointMethod::Composites => {
            let opts = SearchOptions {
                seed: cfg.seed,
                ..SearchOptions::default()
            };
            let maps: Vec<Box<dyn ContinuousSelfMap>> = if cfg.method == FixpointMethod::Search {
                vec![Box::new(cfg.map.build(&domain)?)]
            } else {
                (0..cfg.count)
                    .map(|i| -> Result<Box<dyn ContinuousSelfMap>> {
                        Ok(Box::new(random_composite(&domain, derive_seed(cfg.seed, i as u64))?))
                    })
                    .collect::<Result<_>>()?
            };
            for (i, f) in maps.iter().enumerate() {
                let mut row = row! { "map" => i, "label" => f.describe() };
                match find_fixed_point_continuous(f.as_ref(), cfg.tol, &opts) {
                    Ok(r) => {
                        row.extend(row! {
                            "displacement" => r.displacement,
                            "planar_residual" => r.planar_residual,
                            "start" => r.start,
                        });
                        coord_cells(&mut row, "p", &r.point);
                        row.insert("pass".into(), Value::Bool(true));
                    }
                    Err(Error::SearchFailure { best, displacement }) => {
                        row.insert("displacement".into(), num(displacement));
                        coord_cells(&mut row, "p", &best);
                        row.insert("pass".into(), Value::Bool(false));
                    }
                    Err(e) => return Err(e),
                }
                rows.push(row);
            }
        }
    }
    let mut report = ExperimentReport::new(
        "fixpoint",
        to_map(cfg),
        tolerances(&[("tol", cfg.tol)]),
        cfg.seed,
    );
    report.pass = rows.iter().all(|r| r["pass"] == Value::Bool(true));
    report.rows = rows;
    Ok(finish(report, start))
}
