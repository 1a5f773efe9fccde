use catkappa::geometry::{comparison_triangle, distance, geodesic_point, haversine_third_side};
use catkappa::sampling::stream_rng;
use catkappa::{Curvature, ModelPoint};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_point(kappa: Curvature, rng: &mut impl Rng) -> ModelPoint {
    let k = kappa.value();
    if k > 0.0 {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        ModelPoint::spherical(kappa, v).unwrap()
    } else if k < 0.0 {
        ModelPoint::hyperbolic(kappa, [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .unwrap()
    } else {
        ModelPoint::euclidean(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).unwrap()
    }
}

const KAPPAS: [f64; 4] = [-1.0, 0.0, 1.0, 4.0];

#[test]
fn metric_axioms() {
    for (s, &k) in KAPPAS.iter().enumerate() {
        let kappa = Curvature::new(k).unwrap();
        let mut rng = stream_rng(11, s as u64);
        for _ in 0..10_000 {
            let [p, q, r] = std::array::from_fn(|_| random_point(kappa, &mut rng));
            let pq = distance(&p, &q).unwrap();
            assert_eq!(pq, distance(&q, &p).unwrap(), "symmetry, kappa {k}");
            assert!(pq >= 0.0);
            assert!(distance(&p, &p).unwrap() <= 1e-7);
            let pr = distance(&p, &r).unwrap();
            let qr = distance(&q, &r).unwrap();
            assert!(pr <= pq + qr + 1e-10, "triangle inequality, kappa {k}: {pr} > {pq} + {qr}");
        }
    }
}

#[test]
fn geodesic_consistency() {
    for (s, &k) in KAPPAS.iter().enumerate() {
        let kappa = Curvature::new(k).unwrap();
        let mut rng = stream_rng(12, s as u64);
        let mut checked = 0;
        while checked < 2_000 {
            let p = random_point(kappa, &mut rng);
            let q = random_point(kappa, &mut rng);
            let d = distance(&p, &q).unwrap();
            if d > 0.999 * kappa.diameter_bound() {
                continue;
            }
            let lambda: f64 = rng.random();
            let z = geodesic_point(&p, &q, lambda).unwrap();
            let dz = distance(&p, &z).unwrap();
            assert!((dz - lambda * d).abs() <= 1e-9, "kappa {k}: {dz} vs {}", lambda * d);
            assert!((distance(&z, &q).unwrap() - (1.0 - lambda) * d).abs() <= 1e-9);
            checked += 1;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tangent_toward(c: &[f64], a: &[f64]) -> [f64; 3] {
    let ca = dot(c, a);
    let t: [f64; 3] = std::array::from_fn(|i| a[i] - ca * c[i]);
    let n = dot(&t, &t).sqrt();
    t.map(|x| x / n)
}

#[test]
fn haversine_matches_vector_oracle() {
    let unit = Curvature::new(1.0).unwrap();
    let mut rng = stream_rng(13, 0);
    let mut checked = 0;
    while checked < 10_000 {
        let [a, b, c] = std::array::from_fn(|_| random_point(unit, &mut rng));
        let (a, b, c) = (a.coords(), b.coords(), c.coords());
        let side_ca = dot(c, a).clamp(-1.0, 1.0).acos();
        let side_cb = dot(c, b).clamp(-1.0, 1.0).acos();
        let side_ab = dot(a, b).clamp(-1.0, 1.0).acos();
        if [side_ca, side_cb, side_ab].iter().any(|s| *s < 1e-3 || *s > std::f64::consts::PI - 1e-3) {
            continue;
        }
        let angle = dot(&tangent_toward(c, a), &tangent_toward(c, b)).clamp(-1.0, 1.0).acos();
        let got = haversine_third_side(side_ca, side_cb, angle).unwrap();
        assert!((got - side_ab).abs() <= 1e-10, "{got} vs {side_ab}");
        checked += 1;
    }
}

#[test]
fn distance_scales_with_curvature() {
    let unit = Curvature::new(1.0).unwrap();
    let mut rng = stream_rng(14, 0);
    for _ in 0..10_000 {
        let u: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let d1 = distance(&ModelPoint::spherical(unit, u).unwrap(), &ModelPoint::spherical(unit, v).unwrap()).unwrap();
        for k in [0.25, 4.0, 9.0] {
            let kappa = Curvature::new(k).unwrap();
            let dk = distance(&ModelPoint::spherical(kappa, u).unwrap(), &ModelPoint::spherical(kappa, v).unwrap())
                .unwrap();
            assert!((dk - d1 / k.sqrt()).abs() <= 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn comparison_triangle_realizes_sides(
        k in prop::sample::select(KAPPAS.to_vec()),
        a in 0.05f64..0.7,
        b in 0.05f64..0.7,
        w in 0.0f64..1.0,
    ) {
        // Third side anywhere strictly inside the triangle-inequality range.
        let c = (a - b).abs() + w * (a + b - (a - b).abs()) * 0.98 + 0.01 * (a + b - (a - b).abs());
        let kappa = Curvature::new(k).unwrap();
        let t = comparison_triangle(a, b, c, kappa).unwrap();
        let [v1, v2, v3] = &t.vertices;
        prop_assert!((distance(v1, v2).unwrap() - a).abs() <= 1e-9);
        prop_assert!((distance(v1, v3).unwrap() - b).abs() <= 1e-9);
        prop_assert!((distance(v2, v3).unwrap() - c).abs() <= 1e-9);
    }
}
