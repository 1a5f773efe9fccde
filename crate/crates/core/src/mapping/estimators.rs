//! Sampling estimators for uniform distance, Lipschitz quantities and the
//! Rakotch modulus of a [`MapExpr`].
//!
//! All estimators are lower estimates of suprema. Sampling is seeded and
//! chunked through [`crate::sampling`], so results are reproducible and do not
//! depend on the number of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{distance, ModelPoint};
use crate::mapping::{Domain, MapExpr};
use crate::sampling::{derive_seed, max_of, par_chunks, stream_rng, SampleRng};

/// Local pairs use offsets between `LOCAL_MIN_EXP` and zero decades of half
/// the diameter.
const LOCAL_MIN_EXP: f64 = -5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistInf {
    /// Largest sampled or grid value of `d(f(x), g(x))`.
    pub lower: f64,
    /// `grid max + 2 * mesh`; valid because `x -> d(f(x), g(x))` is
    /// 2-Lipschitz for nonexpansive `f` and `g`.
    pub certified_upper: Option<f64>,
    pub mesh: f64,
    pub grid_points: usize,
}

/// Estimates `d_inf(f, g) = sup_x d(f(x), g(x))` from `samples` random points
/// and a covering grid of about `samples` points.
pub fn dist_inf(f: &MapExpr, g: &MapExpr, samples: usize, seed: u64) -> Result<DistInf> {
    if f.domain() != g.domain() {
        return Err(Error::domain("d_inf needs maps on the same domain"));
    }
    if samples == 0 {
        return Err(Error::out_of_range("samples must be at least 1"));
    }
    let domain = f.domain();
    let gap = |x: &ModelPoint| distance(&f.apply(x)?, &g.apply(x)?);
    let sampled = par_chunks(samples, seed, |rng, _, len| -> Result<f64> {
        let mut best = 0.0f64;
        for _ in 0..len {
            best = best.max(gap(&domain.sample(rng))?);
        }
        Ok(best)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let grid = domain.grid_with_count(samples)?;
    let extrema = grid.par_extrema(gap)?;
    let lower = max_of(sampled).unwrap_or(0.0).max(extrema.max);
    let nonexpansive = f.certified_lipschitz() <= 1.0 && g.certified_lipschitz() <= 1.0;
    Ok(DistInf {
        lower,
        certified_upper: nonexpansive.then(|| extrema.max + 2.0 * grid.covering_radius()),
        mesh: grid.covering_radius(),
        grid_points: extrema.count,
    })
}

/// Draws a pair: even indices are independent uniform pairs, odd indices pair
/// a uniform point with a nearby one.
pub(crate) fn sample_pair(
    domain: &Domain,
    index: usize,
    rng: &mut SampleRng,
) -> Option<(ModelPoint, ModelPoint)> {
    let y = domain.sample(rng);
    if index.is_multiple_of(2) {
        return Some((y, domain.sample(rng)));
    }
    // Offsets stay in [radius / 2, radius) so that round-off in the ratio
    // stays near 1e-10 even at the smallest scale.
    let radius = 0.5 * domain.diameter() * 10f64.powf(LOCAL_MIN_EXP * rng.random::<f64>());
    let z = domain.sample_at_offset(&y, 0.5 * radius, radius, rng)?;
    Some((y, z))
}

fn ratio(f: &MapExpr, y: &ModelPoint, z: &ModelPoint) -> Result<Option<f64>> {
    let d = distance(y, z)?;
    if d <= 0.0 {
        return Ok(None);
    }
    Ok(Some(distance(&f.apply(y)?, &f.apply(z)?)? / d))
}

/// Largest ratio `d(f(y), f(z)) / d(y, z)` over `samples` sampled pairs.
pub fn lip_global(f: &MapExpr, samples: usize, seed: u64) -> Result<f64> {
    let domain = f.domain();
    if domain.diameter() <= 0.0 {
        return Ok(0.0);
    }
    let per_chunk = par_chunks(samples, seed, |rng, chunk, len| -> Result<f64> {
        let mut best = 0.0f64;
        for j in 0..len {
            if let Some((y, z)) = sample_pair(domain, chunk * crate::sampling::CHUNK + j, rng) {
                if let Some(r) = ratio(f, &y, &z)? {
                    best = best.max(r);
                }
            }
        }
        Ok(best)
    });
    let maxima = per_chunk.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(max_of(maxima).unwrap_or(0.0))
}

/// Geometric radius schedule `r0 * 2^-j`, `j = 0..=levels`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusSweep {
    pub r0: f64,
    pub levels: usize,
    pub samples_per_radius: usize,
}

impl RadiusSweep {
    /// `r0 = diameter / 4`, 20 halvings, 64 samples per radius.
    pub fn default_for(domain: &Domain) -> Self {
        RadiusSweep {
            r0: domain.diameter() / 4.0,
            levels: 20,
            samples_per_radius: 64,
        }
    }

    pub fn radius(&self, level: usize) -> f64 {
        self.r0 * 0.5f64.powi(level as i32)
    }
}

/// Ratios at `x` from points drawn in the shrinking balls; one maximum per
/// radius, truncated at the first radius with no admissible point.
fn local_sweep(f: &MapExpr, x: &ModelPoint, sweep: &RadiusSweep, seed: u64) -> Result<Vec<f64>> {
    let domain = f.domain();
    let fx = f.apply(x)?;
    let mut out = Vec::with_capacity(sweep.levels + 1);
    for level in 0..=sweep.levels {
        let mut rng = stream_rng(seed, level as u64);
        let r = sweep.radius(level);
        let mut best: Option<f64> = None;
        for _ in 0..sweep.samples_per_radius {
            let Some(y) = domain.sample_near(x, r, &mut rng) else {
                continue;
            };
            let d = distance(&y, x)?;
            if d > 0.0 {
                let q = distance(&f.apply(&y)?, &fx)? / d;
                best = Some(best.map_or(q, |b| b.max(q)));
            }
        }
        match best {
            Some(b) => out.push(b),
            None => break,
        }
    }
    Ok(out)
}

fn uniform_probe(f: &MapExpr, x: &ModelPoint, samples: usize, seed: u64) -> Result<f64> {
    let domain = f.domain();
    let fx = f.apply(x)?;
    let per_chunk = par_chunks(samples, seed, |rng, _, len| -> Result<f64> {
        let mut best = 0.0f64;
        for _ in 0..len {
            let y = domain.sample(rng);
            let d = distance(&y, x)?;
            if d > 0.0 {
                best = best.max(distance(&f.apply(&y)?, &fx)? / d);
            }
        }
        Ok(best)
    });
    Ok(max_of(per_chunk.into_iter().collect::<Result<Vec<_>>>()?).unwrap_or(0.0))
}

fn check_member(f: &MapExpr, x: &ModelPoint) -> Result<()> {
    if f.domain().contains(x) {
        Ok(())
    } else {
        Err(Error::OutsideDomain)
    }
}

/// Finite-radius proxy for `lip(f, x)`: the maximal ratio over each ball of
/// the sweep. The last entry is the point estimate.
pub fn lip_at(f: &MapExpr, x: &ModelPoint, sweep: &RadiusSweep, seed: u64) -> Result<Vec<f64>> {
    check_member(f, x)?;
    local_sweep(f, x, sweep, derive_seed(seed, 1))
}

/// Sampled proxy for `lip_hat(f, x)`, the supremum of
/// `d(f(y), f(x)) / d(y, x)` over all `y != x`.
pub fn lip_hat_at(f: &MapExpr, x: &ModelPoint, samples: usize, seed: u64) -> Result<f64> {
    check_member(f, x)?;
    let sweep = RadiusSweep::default_for(f.domain());
    let local = local_sweep(f, x, &sweep, derive_seed(seed, 1))?;
    let uniform = uniform_probe(f, x, samples, derive_seed(seed, 2))?;
    Ok(max_of(local).unwrap_or(0.0).max(uniform))
}

/// The three Lipschitz quantities at `x`, estimated on nested samples so that
/// `lip_at <= lip_hat <= lip_global` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzChain {
    pub lip_at_sequence: Vec<f64>,
    pub lip_at: f64,
    pub lip_hat: f64,
    pub lip_global: f64,
}

pub fn lipschitz_chain(
    f: &MapExpr,
    x: &ModelPoint,
    sweep: &RadiusSweep,
    samples: usize,
    seed: u64,
) -> Result<LipschitzChain> {
    check_member(f, x)?;
    let sequence = local_sweep(f, x, sweep, derive_seed(seed, 1))?;
    let lip_at = sequence.last().copied().unwrap_or(0.0);
    let lip_hat = max_of(sequence.iter().copied())
        .unwrap_or(0.0)
        .max(uniform_probe(f, x, samples, derive_seed(seed, 2))?);
    let lip_global = lip_hat.max(lip_global(f, samples, derive_seed(seed, 3))?);
    Ok(LipschitzChain {
        lip_at_sequence: sequence,
        lip_at,
        lip_hat,
        lip_global,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessParams {
    pub threshold: f64,
    pub sweep: Option<RadiusSweep>,
    /// Uniform probes per grid point for `lip_hat`.
    pub samples: usize,
    pub seed: u64,
}

impl WitnessParams {
    pub fn new(threshold: f64, samples: usize, seed: u64) -> Self {
        WitnessParams {
            threshold,
            sweep: None,
            samples,
            seed,
        }
    }
}

/// Threshold proxies of `R(f) = {lip(f, x) = 1}` and
/// `R_hat(f) = {lip_hat(f, x) = 1}` on a finite grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSets {
    /// Indices into the grid.
    pub r_est: Vec<usize>,
    pub r_hat_est: Vec<usize>,
    pub lip_at: Vec<f64>,
    pub lip_hat: Vec<f64>,
}

pub fn witness_sets(f: &MapExpr, grid: &[ModelPoint], params: &WitnessParams) -> Result<WitnessSets> {
    if !(params.threshold > 0.0 && params.threshold < 1.0) {
        return Err(Error::out_of_range(format!(
            "threshold {} not in (0, 1)",
            params.threshold
        )));
    }
    let sweep = params.sweep.unwrap_or_else(|| RadiusSweep::default_for(f.domain()));
    let values = grid
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<(f64, f64)> {
            check_member(f, x)?;
            let seed = derive_seed(params.seed, i as u64);
            let sequence = local_sweep(f, x, &sweep, derive_seed(seed, 1))?;
            let at = sequence.last().copied().unwrap_or(0.0);
            // The local samples are part of the lip_hat sample set, which
            // keeps lip_at <= lip_hat and hence R_est inside R_hat_est.
            let hat = max_of(sequence)
                .unwrap_or(0.0)
                .max(uniform_probe(f, x, params.samples, derive_seed(seed, 2))?);
            Ok((at, hat))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lip_at, lip_hat): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
    let r_hat_est: Vec<usize> = (0..grid.len())
        .filter(|&i| lip_hat[i] >= params.threshold)
        .collect();
    let r_est: Vec<usize> = (0..grid.len())
        .filter(|&i| lip_at[i] >= params.threshold && lip_hat[i] >= params.threshold)
        .collect();
    Ok(WitnessSets {
        r_est,
        r_hat_est,
        lip_at,
        lip_hat,
    })
}

/// Step-function estimate of the Rakotch modulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RakotchModulusEstimate {
    /// `(t_i, phi_hat(t_i))` with `t_i = i * diameter / buckets`,
    /// `i = 0..buckets`.
    pub grid: Vec<(f64, f64)>,
    /// Buckets with no sampled pair at distance `>= t_i`; they report zero.
    pub empty: Vec<bool>,
    pub sample_count: usize,
}

/// `phi_hat(t_i)` is the largest sampled ratio over pairs at distance at
/// least `t_i`, followed by a running maximum from the right.
pub fn rakotch_modulus(
    f: &MapExpr,
    buckets: usize,
    samples: usize,
    seed: u64,
) -> Result<RakotchModulusEstimate> {
    if buckets == 0 {
        return Err(Error::out_of_range("need at least one bucket"));
    }
    let domain = f.domain();
    let diam = domain.diameter();
    let threshold = |i: usize| diam * i as f64 / buckets as f64;
    // Index of the largest threshold not exceeding d.
    let bucket_of = |d: f64| -> usize {
        let mut m = ((d / diam) * buckets as f64).floor().clamp(0.0, buckets as f64) as usize;
        while m < buckets && threshold(m + 1) <= d {
            m += 1;
        }
        while m > 0 && threshold(m) > d {
            m -= 1;
        }
        m
    };
    let per_chunk = par_chunks(samples, seed, |rng, _, len| -> Result<Vec<f64>> {
        let mut best = vec![f64::NEG_INFINITY; buckets + 1];
        for _ in 0..len {
            let (y, z) = (domain.sample(rng), domain.sample(rng));
            let d = distance(&y, &z)?;
            if d <= 0.0 {
                continue;
            }
            let q = distance(&f.apply(&y)?, &f.apply(&z)?)? / d;
            let m = bucket_of(d);
            best[m] = best[m].max(q);
        }
        Ok(best)
    });
    let mut best = vec![f64::NEG_INFINITY; buckets + 1];
    for chunk in per_chunk {
        for (b, v) in best.iter_mut().zip(chunk?) {
            *b = b.max(v);
        }
    }
    let mut grid = vec![(0.0, 0.0); buckets];
    let mut empty = vec![true; buckets];
    // best[buckets] holds pairs at exactly the diameter.
    let mut running = best[buckets];
    for i in (0..buckets).rev() {
        running = running.max(best[i]);
        empty[i] = running == f64::NEG_INFINITY;
        let phi = if empty[i] { 0.0 } else { running.clamp(0.0, 1.0) };
        grid[i] = (threshold(i), phi);
    }
    Ok(RakotchModulusEstimate {
        grid,
        empty,
        sample_count: samples,
    })
}
