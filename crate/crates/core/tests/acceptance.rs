//! Acceptance suite: one line per criterion, exit status 1 if any fails.
//!
//! Reference values are recomputed here from their closed forms rather than
//! read back from the library.

use std::f64::consts::{FRAC_PI_6, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use catkappa::contraction::{certify_star_contraction, sin_pow_convexity_margin};
use catkappa::experiments::{
    run_counterexample, run_lemma_contraction, run_theorem_witness, CounterexampleConfig,
    LemmaContractionConfig, TheoremWitnessConfig,
};
use catkappa::geometry::distance;
use catkappa::mapping::{rakotch_modulus, witness_sets, Analytic1d, WitnessParams};
use catkappa::obstruction::{
    find_fixed_point_continuous, random_composite, ContinuousSelfMap, SearchOptions,
    Stereographic,
};
use catkappa::rakotch::{picard_orbit, picard_solve, random_starts, regularize};
use catkappa::sampling::stream_rng;
use catkappa::{Curvature, Domain, ExperimentReport, MapExpr, ModelPoint};
use rand::Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(budget: Option<f64>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    match budget {
        Some(b) => check(
            out.pass && secs < b,
            format!("{}; {secs:.2} s (budget {b} s)", out.detail),
        ),
        None => check(out.pass, format!("{}; {secs:.2} s", out.detail)),
    }
}

fn f64_at(row: &serde_json::Map<String, Value>, key: &str) -> f64 {
    row.get(key).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

fn smallest_k(kappa: f64, radius: f64) -> u32 {
    if kappa <= 0.0 {
        return 1;
    }
    let tan = (kappa.sqrt() * radius).tan();
    ((1.0 + tan * tan).ceil() as u32).max(2)
}

fn sphere_cap(radius: f64) -> (Domain, ModelPoint) {
    let x = ModelPoint::base(Curvature::new(1.0).unwrap());
    (Domain::spherical_cap(x.clone(), radius).unwrap(), x)
}

fn criterion_1(report: &ExperimentReport) -> Outcome {
    let mut valid = 0;
    let mut worst = f64::INFINITY;
    let mut bad = Vec::new();
    for row in &report.rows {
        if row["valid"] != Value::Bool(true) {
            continue;
        }
        valid += 1;
        let (kappa, radius, t) = (f64_at(row, "kappa"), f64_at(row, "radius"), f64_at(row, "t"));
        // Oracle bound from the exponent formula, not the library certificate.
        let bound = t.powf(1.0 / smallest_k(kappa, radius) as f64);
        let margin = bound - f64_at(row, "empirical");
        worst = worst.min(margin);
        if margin < -1e-9 {
            bad.push(format!("({kappa},{radius},{t})"));
        }
    }
    let expected_valid = [-1.0f64, 0.0, 1.0, 4.0]
        .iter()
        .flat_map(|&k| [0.3, 0.6, 1.0, 1.4].map(move |r| (k, r)))
        .filter(|&(k, r)| k <= 0.0 || r < PI / k.sqrt() / 2.0)
        .count()
        * 9;
    check(
        bad.is_empty() && valid == expected_valid,
        format!(
            "{valid}/{expected_valid} valid cells, worst margin {worst:.3e} (tol 1e-9){}",
            if bad.is_empty() { String::new() } else { format!(", violations {bad:?}") }
        ),
    )
}

fn criterion_2() -> Outcome {
    let worst = (1..=1000)
        .map(|i| sin_pow_convexity_margin(4, i as f64 / 1000.0).unwrap())
        .fold(f64::INFINITY, f64::min);
    let m3 = sin_pow_convexity_margin(3, 1.0).unwrap();
    let bracket = 2.0 / 1.0f64.tan().powi(2) - 1.0;
    let oracle = 3.0 * 1.0f64.sin().powi(3) * bracket;
    check(
        worst >= -1e-12 && m3 < 0.0 && (m3 - oracle).abs() < 1e-12 && (bracket + 0.1754).abs() < 1e-4,
        format!("min margin(4, tau) = {worst:.3e}, margin(3, 1) = {m3:.6} (bracket {bracket:.4})"),
    )
}

fn criterion_3(report: &ExperimentReport) -> Outcome {
    let mut bad = Vec::new();
    let mut per_n = std::collections::BTreeMap::new();
    let k = smallest_k(1.0, 1.0);
    let root = 0.75f64.powf(1.0 / k as f64);
    for row in &report.rows {
        let n = f64_at(row, "n");
        *per_n.entry(n as u32).or_insert(0) += 1;
        let alpha = (1.0 - root) / (4.0 * n);
        let beta = (1.0 + root) / 2.0;
        let ok = f64_at(row, "gamma") == 0.25
            && (f64_at(row, "alpha") - alpha).abs() <= 1e-12
            && (f64_at(row, "beta") - beta).abs() <= 1e-12
            && row["kn_pass"] == Value::Bool(true)
            && f64_at(row, "worst_ratio") <= beta + 1e-9
            && f64_at(row, "dist_to_f_certified") <= 1.0;
        if !ok {
            bad.push(format!("n={n} p={}", row["perturbation"]));
        }
    }
    let counts_ok = per_n.len() == 3 && per_n.values().all(|&c| c == 64);
    let worst = report.rows.iter().map(|r| f64_at(r, "dist_to_f_certified")).fold(0.0, f64::max);
    check(
        bad.is_empty() && counts_ok && report.pass,
        format!(
            "gamma 0.25, k {k}, perturbations per n {per_n:?}, max certified d(g, f) {worst:.4} <= 1{}",
            if bad.is_empty() { String::new() } else { format!(", failures {bad:?}") }
        ),
    )
}

fn criterion_4() -> Outcome {
    let (cap, x) = sphere_cap(1.0);
    let fg = regularize(&MapExpr::identity(&cap), 0.25).unwrap();
    let cert = certify_star_contraction(&x, 1.0, 0.75).unwrap();
    let lip = 0.75f64.powf(0.25);
    let mut worst_residual = 0.0f64;
    let mut ok = (cert.lip_bound - lip).abs() < 1e-15;
    for x0 in random_starts(&cap, 10, 4) {
        let r = picard_solve(&fg, &x0, 1e-10, 10_000, Some(&cert)).unwrap();
        let bound = r.apriori_bound.unwrap();
        let err = distance(&r.fixed_point, &x).unwrap();
        worst_residual = worst_residual.max(r.residual);
        ok &= r.converged && r.residual <= 1e-10 && r.residual <= bound + 1e-12 && err <= bound + 1e-12;
    }
    check(ok, format!("10 starts, worst residual {worst_residual:.2e}, L = {lip:.6}"))
}

fn criterion_5() -> Outcome {
    let unit = Domain::euclidean_interval(0.0, 1.0).unwrap();
    let f = MapExpr::analytic_1d(&unit, Analytic1d::XMinusHalfXSquared).unwrap();
    let orbit = picard_orbit(&f, &ModelPoint::euclidean(&[1.0]).unwrap(), 10_000).unwrap();
    let mut x = 1.0f64;
    let mut ok = true;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (j, p) in orbit.iter().enumerate().skip(1) {
        x -= 0.5 * x * x;
        ok &= p.coords()[0] == x;
        if j >= 100 {
            let scaled = j as f64 * x;
            lo = lo.min(scaled);
            hi = hi.max(scaled);
        }
    }
    ok &= lo >= 1.8 && hi <= 2.2;
    let m = rakotch_modulus(&f, 10, 1_000_000, 5).unwrap();
    let mut worst = 0.0f64;
    for &(t, phi) in &m.grid[1..] {
        worst = worst.max((phi - (1.0 - t / 2.0)).abs());
    }
    check(
        ok && worst <= 0.02 && m.grid.len() == 10,
        format!("j x_j in [{lo:.4}, {hi:.4}] for j in [100, 1e4]; max |phi_hat - (1 - t/2)| = {worst:.4}"),
    )
}

fn random_composition(cap: &Domain, x: &ModelPoint, rng: &mut impl Rng) -> MapExpr {
    let mut f = MapExpr::identity(cap);
    for _ in 0..rng.random_range(1..=3) {
        let g = match rng.random_range(0..4) {
            0 => MapExpr::rotation_about(cap, x, rng.random_range(-PI..PI)).unwrap(),
            1 => MapExpr::star_contraction(cap, x, 1.0, rng.random_range(0.2..1.0)).unwrap(),
            2 => MapExpr::constant(cap, cap.sample(rng)).unwrap(),
            _ => MapExpr::identity(cap),
        };
        f = MapExpr::compose(&g, &f).unwrap();
    }
    f
}

fn criterion_6() -> Outcome {
    let unit = Domain::euclidean_interval(0.0, 1.0).unwrap();
    let grid: Vec<ModelPoint> = (0..=20)
        .map(|i| ModelPoint::euclidean(&[i as f64 * 0.05]).unwrap())
        .collect();
    let params = WitnessParams::new(0.98, 4096, 6);
    let f = MapExpr::analytic_1d(&unit, Analytic1d::XMinusHalfXSquared).unwrap();
    let w = witness_sets(&f, &grid, &params).unwrap();
    let analytic_ok = w.r_est == [0] && w.r_hat_est == [0];
    let id = witness_sets(&MapExpr::identity(&unit), &grid, &params).unwrap();
    let all: Vec<usize> = (0..grid.len()).collect();
    let identity_ok = id.r_est == all && id.r_hat_est == all;

    let (cap, x) = sphere_cap(1.0);
    let cap_grid = cap.grid_with_count(40).unwrap().points();
    let mut rng = stream_rng(6, 0);
    let mut nested = 0;
    for i in 0..50 {
        let g = random_composition(&cap, &x, &mut rng);
        let s = witness_sets(&g, &cap_grid, &WitnessParams::new(0.98, 256, i)).unwrap();
        if s.r_est.iter().all(|j| s.r_hat_est.contains(j)) {
            nested += 1;
        }
    }
    check(
        analytic_ok && identity_ok && nested == 50,
        format!(
            "analytic R_est = {:?}, R_hat_est = {:?}; identity full grid: {identity_ok}; nested {nested}/50",
            w.r_est, w.r_hat_est
        ),
    )
}

fn criterion_7(report: &ExperimentReport) -> Outcome {
    let eps_oracle = 2.0 * (FRAC_PI_6.sin() * 0.25f64.sin()).asin();
    let cert = &report.rows[0];
    let eps = f64_at(cert, "epsilon");
    let radius = f64_at(cert, "radius");
    let family: Vec<_> = report.rows.iter().filter(|r| r["kind"] == "exclusion").collect();
    let min_d = family.iter().map(|r| f64_at(r, "distance_lower")).fold(f64::INFINITY, f64::min);
    let ok = (eps - eps_oracle).abs() <= 1e-6
        && radius >= 0.123
        && !family.is_empty()
        && family.iter().all(|r| f64_at(r, "distance_lower") >= radius);
    check(
        ok,
        format!(
            "epsilon {eps:.9} (closed form {eps_oracle:.9}), radius {radius:.6}, {} strict contractions, min d_inf {min_d:.4}",
            family.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let (cap, x) = sphere_cap(2.0);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in 0..20 {
        let f = random_composite(&cap, 800 + seed).unwrap();
        match find_fixed_point_continuous(&f, 1e-8, &SearchOptions::default()) {
            Ok(r) => {
                let d = distance(&r.point, &f.map_point(&r.point).unwrap()).unwrap();
                worst = worst.max(d);
                if d > 1e-8 || !cap.contains(&r.point) {
                    failures.push(f.describe());
                }
            }
            Err(e) => failures.push(format!("{}: {e}", f.describe())),
        }
    }
    let chart = Stereographic::new(&x, 2.0).unwrap();
    let mut rng = stream_rng(8, 0);
    let mut round_trip = 0.0f64;
    for _ in 0..10_000 {
        let p = cap.sample(&mut rng);
        let q = chart.h_inverse(chart.h(&p).unwrap());
        round_trip = round_trip.max(distance(&p, &q).unwrap());
    }
    check(
        failures.is_empty() && round_trip <= 1e-10,
        format!(
            "20 composites, worst displacement {worst:.2e}; round-trip error {round_trip:.2e}{}",
            if failures.is_empty() { String::new() } else { format!(", failures {failures:?}") }
        ),
    )
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_9(baseline: &[(&str, String)]) -> Outcome {
    let mut mismatched = Vec::new();
    for threads in [1, 4] {
        let reruns = in_pool(threads, || {
            [
                run_lemma_contraction(&LemmaContractionConfig::default()).unwrap().to_csv().unwrap(),
                run_theorem_witness(&TheoremWitnessConfig::default()).unwrap().to_csv().unwrap(),
                run_counterexample(&CounterexampleConfig::default()).unwrap().to_csv().unwrap(),
            ]
        });
        for ((name, base), rerun) in baseline.iter().zip(reruns) {
            if base.as_bytes() != rerun.as_bytes() {
                mismatched.push(format!("{name}@{threads}"));
            }
        }
    }
    check(
        mismatched.is_empty(),
        format!(
            "criteria 1, 3, 7 CSV identical on default, 1- and 4-thread pools ({} bytes){}",
            baseline.iter().map(|(_, s)| s.len()).sum::<usize>(),
            if mismatched.is_empty() { String::new() } else { format!(", mismatches {mismatched:?}") }
        ),
    )
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report_line = |n: usize, name: &'static str, out: Outcome| {
        println!(
            "criterion {n} [{}] {name}: {}",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
        results.push((n, name, out));
    };

    let mut lemma = None;
    report_line(1, "contraction bound suite", timed(Some(60.0), || {
        let r = run_lemma_contraction(&LemmaContractionConfig::default()).unwrap();
        let out = criterion_1(&r);
        lemma = Some(r);
        out
    }));
    report_line(2, "convexity exponent sharpness", timed(Some(1.0), criterion_2));
    let mut witness = None;
    report_line(3, "porosity witness chain", timed(Some(120.0), || {
        let r = run_theorem_witness(&TheoremWitnessConfig::default()).unwrap();
        let out = criterion_3(&r);
        witness = Some(r);
        out
    }));
    report_line(4, "Banach certificate on f_gamma", timed(Some(5.0), criterion_4));
    report_line(5, "Rakotch without Banach", timed(None, criterion_5));
    report_line(6, "witness sets", timed(None, criterion_6));
    let mut counter = None;
    report_line(7, "annulus rotation certificate", timed(Some(60.0), || {
        let r = run_counterexample(&CounterexampleConfig::default()).unwrap();
        let out = criterion_7(&r);
        counter = Some(r);
        out
    }));
    report_line(8, "fixed points on a wide cap", timed(None, criterion_8));
    let baseline = [
        ("lemma_contraction", lemma.unwrap().to_csv().unwrap()),
        ("theorem_witness", witness.unwrap().to_csv().unwrap()),
        ("counterexample", counter.unwrap().to_csv().unwrap()),
    ];
    report_line(9, "reproducibility", timed(None, || criterion_9(&baseline)));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    let elapsed = Duration::from_secs_f64(total.elapsed().as_secs_f64());
    println!(
        "acceptance: {}/{} criteria pass in {:.1} s",
        results.len() - failed.len(),
        results.len(),
        elapsed.as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
