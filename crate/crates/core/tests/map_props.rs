use std::f64::consts::{FRAC_PI_6, PI};

use catkappa::contraction::{certify_star_contraction, sin_scaling_bound_check, star_contraction};
use catkappa::geometry::distance;
use catkappa::mapping::{dist_inf, lip_global, lipschitz_chain, rakotch_modulus, witness_sets, Analytic1d, RadiusSweep, WitnessParams};
use catkappa::obstruction::{annulus_rotation, rotation_displacement, ContinuousSelfMap, Stereographic};
use catkappa::rakotch::{kn_membership, make_witness, picard_orbit, regularize};
use catkappa::sampling::stream_rng;
use catkappa::{Curvature, Domain, MapExpr, ModelPoint};
use rand::Rng;

fn cap(kappa: f64, radius: f64) -> (Domain, ModelPoint) {
    let x = ModelPoint::base(Curvature::new(kappa).unwrap());
    (Domain::ball(x.clone(), radius).unwrap(), x)
}

fn max_pair_ratio(f: &MapExpr, pairs: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let p = f.domain().sample(&mut rng);
        let q = f.domain().sample(&mut rng);
        let d = distance(&p, &q).unwrap();
        if d < 1e-6 {
            continue;
        }
        let fd = distance(&f.evaluate(&p).unwrap(), &f.evaluate(&q).unwrap()).unwrap();
        worst = worst.max(fd / d);
    }
    worst
}

fn constructor_zoo() -> Vec<MapExpr> {
    let (s, x) = cap(1.0, 1.0);
    let (h, y) = cap(-1.0, 1.5);
    let (e, z) = cap(0.0, 2.0);
    let unit = Domain::euclidean_interval(0.0, 1.0).unwrap();
    let rot = MapExpr::rotation_about(&s, &x, 1.1).unwrap();
    let star = MapExpr::star_contraction(&s, &x, 1.0, 0.4).unwrap();
    vec![
        MapExpr::identity(&s),
        MapExpr::constant(&s, x.polar_offset(0.5, 0.3).unwrap()).unwrap(),
        rot.clone(),
        star.clone(),
        MapExpr::compose(&rot, &star).unwrap(),
        MapExpr::star_contraction(&h, &y, 1.5, 0.6).unwrap(),
        MapExpr::star_contraction(&e, &z, 2.0, 0.3).unwrap(),
        MapExpr::analytic_1d(&unit, Analytic1d::XMinusHalfXSquared).unwrap(),
        annulus_rotation(&x, FRAC_PI_6, 1.3, 0.5).unwrap(),
    ]
}

#[test]
fn every_constructor_is_nonexpansive() {
    for (i, f) in constructor_zoo().iter().enumerate() {
        let est = lip_global(f, 100_000, i as u64).unwrap();
        assert!(est <= 1.0 + 1e-9, "{f}: lip_global {est}");
        assert!(est <= f.certified_lipschitz() + 1e-9, "{f}: {est} > {}", f.certified_lipschitz());
        let direct = max_pair_ratio(f, 20_000, 100 + i as u64);
        assert!(direct <= f.certified_lipschitz() + 1e-9, "{f}: direct ratio {direct}");
    }
}

#[test]
fn star_certificate_is_sound_across_models() {
    for (k, radius) in [(-1.0, 1.4), (0.0, 1.0), (1.0, 1.0), (4.0, 0.6)] {
        for t in [0.1, 0.5, 0.9] {
            let (_, x) = cap(k, radius);
            let f = star_contraction(&x, radius, t).unwrap();
            let est = lip_global(&f, 20_000, 7).unwrap();
            assert!(est <= f.certified_lipschitz() + 1e-9, "kappa {k} R {radius} t {t}: {est}");
        }
    }
}

#[test]
fn certificate_monotone_and_endpoints() {
    let x = ModelPoint::base(Curvature::new(1.0).unwrap());
    let mut last = 0.0;
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        let c = certify_star_contraction(&x, 1.0, t).unwrap();
        assert!(c.lip_bound >= last);
        last = c.lip_bound;
        assert_eq!(c.is_strict(), t < 1.0);
    }
    assert_eq!(certify_star_contraction(&x, 1.0, 0.0).unwrap().lip_bound, 0.0);
    assert_eq!(certify_star_contraction(&x, 1.0, 1.0).unwrap().lip_bound, 1.0);
    let mut rng = stream_rng(3, 0);
    for _ in 0..10_000 {
        let d = rng.random_range(0.0..1.0f64);
        let t = rng.random_range(0.0..1.0f64);
        assert!(sin_scaling_bound_check(d, t, 4));
    }
}

#[test]
fn chain_inequality_at_random_points() {
    let (s, x) = cap(1.0, 1.0);
    let f = MapExpr::compose(
        &MapExpr::rotation_about(&s, &x, 0.7).unwrap(),
        &MapExpr::star_contraction(&s, &x, 1.0, 0.8).unwrap(),
    )
    .unwrap();
    let sweep = RadiusSweep { levels: 8, samples_per_radius: 16, ..RadiusSweep::default_for(&s) };
    let mut rng = stream_rng(21, 0);
    for i in 0..100 {
        let p = s.sample(&mut rng);
        let c = lipschitz_chain(&f, &p, &sweep, 512, i).unwrap();
        assert!(c.lip_at <= c.lip_hat && c.lip_hat <= c.lip_global, "{c:?}");
        assert!(c.lip_global <= 1.0 + 1e-9);
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn estimators_ignore_thread_count() {
    let zoo = constructor_zoo();
    let run = || {
        let unit = Domain::euclidean_interval(0.0, 1.0).unwrap();
        let grid: Vec<ModelPoint> = (0..=10).map(|i| ModelPoint::euclidean(&[i as f64 / 10.0]).unwrap()).collect();
        let g = MapExpr::analytic_1d(&unit, Analytic1d::XMinusHalfXSquared).unwrap();
        (
            lip_global(&zoo[4], 30_000, 1).unwrap(),
            dist_inf(&zoo[2], &zoo[3], 10_000, 2).unwrap(),
            rakotch_modulus(&g, 10, 30_000, 3).unwrap(),
            witness_sets(&g, &grid, &WitnessParams::new(0.98, 512, 4)).unwrap(),
        )
    };
    let one = in_pool(1, run);
    let four = in_pool(4, run);
    assert_eq!(one.0.to_bits(), four.0.to_bits());
    assert_eq!(one.1, four.1);
    assert_eq!(one.2, four.2);
    assert_eq!(one.3, four.3);
}

#[test]
fn witness_invariants_on_random_parameters() {
    let mut rng = stream_rng(31, 0);
    for _ in 0..100 {
        let k: f64 = [-1.0, 0.0, 1.0, 4.0][rng.random_range(0..4)];
        let limit = if k > 0.0 { 0.49 * PI / k.sqrt() } else { 3.0 };
        let radius = rng.random_range(0.05..limit);
        let r = rng.random_range(0.01..=1.0);
        let n = rng.random_range(1..50u32);
        let (d, _) = cap(k, radius);
        let w = make_witness(&d, &MapExpr::identity(&d), r, n).unwrap();
        for (ok, lhs, rhs) in w.check_invariants() {
            assert!(ok, "{w:?}: {lhs} vs {rhs}");
        }
        assert!(w.gamma > 0.0 && w.gamma < 0.5);
        assert!(w.alpha > 0.0 && w.beta > 0.5 && w.beta < 1.0);
        let gamma = r / (2.0 * (radius + 1.0));
        assert!((w.gamma - gamma).abs() <= 1e-15 * gamma.max(1.0));
    }
}

#[test]
fn regularized_maps_meet_their_certificate() {
    let (s, x) = cap(1.0, 1.0);
    let bound = 0.75f64.powf(0.25);
    for f in [
        MapExpr::identity(&s),
        MapExpr::rotation_about(&s, &x, 2.0).unwrap(),
        MapExpr::constant(&s, x.polar_offset(0.9, 1.0).unwrap()).unwrap(),
    ] {
        let g = regularize(&f, 0.25).unwrap();
        assert!(g.certified_lipschitz() <= bound + 1e-15);
        let est = lip_global(&g, 100_000, 41).unwrap();
        assert!(est <= bound + 1e-9, "{g}: {est}");
    }
}

#[test]
fn regularized_maps_contract_far_pairs() {
    let (s, x) = cap(1.0, 1.0);
    for n in [1, 2, 4] {
        let w = make_witness(&s, &MapExpr::identity(&s), 1.0, n).unwrap();
        for f in [MapExpr::identity(&s), MapExpr::rotation_about(&s, &x, 0.3).unwrap()] {
            let g = regularize(&f, w.gamma).unwrap();
            let rep = kn_membership(&g, n, w.beta, 10_000, n as u64).unwrap();
            assert!(rep.pass && !rep.vacuous && rep.worst_ratio <= w.beta + 1e-9, "{rep:?}");
        }
    }
}

#[test]
fn picard_steps_shrink() {
    let (s, x) = cap(1.0, 1.0);
    let g = regularize(&MapExpr::rotation_about(&s, &x, 1.0).unwrap(), 0.25).unwrap();
    let lip = g.certified_lipschitz();
    let mut rng = stream_rng(51, 0);
    for _ in 0..20 {
        let orbit = picard_orbit(&g, &s.sample(&mut rng), 200).unwrap();
        let steps: Vec<f64> = orbit.windows(2).map(|w| distance(&w[0], &w[1]).unwrap()).collect();
        for w in steps.windows(2) {
            assert!(w[1] <= lip * w[0] + 1e-14, "{} after {}", w[1], w[0]);
        }
    }
}

#[test]
fn annulus_rotation_is_an_isometry_with_known_displacement() {
    let unit = Curvature::new(1.0).unwrap();
    let x = ModelPoint::base(unit);
    let f = annulus_rotation(&x, FRAC_PI_6, 1.3, 0.5).unwrap();
    let mut rng = stream_rng(61, 0);
    for _ in 0..100_000 {
        let p = f.domain().sample(&mut rng);
        let q = f.domain().sample(&mut rng);
        let before = distance(&p, &q).unwrap();
        let after = distance(&f.evaluate(&p).unwrap(), &f.evaluate(&q).unwrap()).unwrap();
        assert!((before - after).abs() <= 1e-10);
    }
    for _ in 0..10_000 {
        let p = f.domain().sample(&mut rng);
        let a = distance(&x, &p).unwrap();
        let moved = distance(&p, &f.evaluate(&p).unwrap()).unwrap();
        assert!((moved - rotation_displacement(unit, a, 0.5)).abs() <= 1e-10);
    }
}

#[test]
fn stereographic_conjugation_both_directions() {
    let x = ModelPoint::base(Curvature::new(1.0).unwrap());
    let s = Domain::spherical_cap(x.clone(), 2.0).unwrap();
    let chart = Stereographic::for_cap(&s).unwrap();
    let f = MapExpr::rotation_about(&s, &x, 0.9).unwrap();
    let mut rng = stream_rng(71, 0);
    for _ in 0..10_000 {
        let p = s.sample(&mut rng);
        let back = chart.h_inverse(chart.h(&p).unwrap());
        assert!(distance(&p, &back).unwrap() <= 1e-10);

        let rho = chart.disc_radius() * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..2.0 * PI);
        let w = [rho * phi.cos(), rho * phi.sin()];
        let w2 = chart.h(&chart.h_inverse(w)).unwrap();
        assert!((w[0] - w2[0]).hypot(w[1] - w2[1]) <= 1e-10 * (1.0 + rho));

        // h f h^-1 applied in the plane agrees with f applied on the sphere.
        let via_plane = chart.h_inverse(chart.h(&f.map_point(&chart.h_inverse(w)).unwrap()).unwrap());
        let direct = f.evaluate(&chart.h_inverse(w)).unwrap();
        assert!(distance(&via_plane, &direct).unwrap() <= 1e-10);
    }
}
