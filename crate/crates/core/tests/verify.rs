use std::f64::consts::PI;

use dvnn_core::geometry::Domain;
use dvnn_core::math::{add, dot, norm, pow_abs, scale, sub};
use dvnn_core::rng::{stream, Stream};
use dvnn_core::verify::*;
use dvnn_core::Vec3;

fn rng() -> dvnn_core::rng::Rng {
    stream(11, Stream::Verify)
}

fn ratio(t: &PairTerms, which: VectorInequality) -> Option<f64> {
    let k = VectorInequality::ALL.iter().position(|&i| i == which).unwrap();
    t.ratios[k]
}

#[test]
fn quadratic_ratios_are_one() {
    let t = pair_terms(2.0, &[0.3, -2.0, 5.0], &[1e-3, 4.0, 0.2]);
    for r in t.ratios {
        assert!((r.unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(quadratic_identity_deviation(2000, &mut rng()) <= IDENTITY_TOL);
}

#[test]
fn equal_pair_has_no_ratio() {
    let x = [0.4, 0.1, -0.7];
    let t = pair_terms(3.0, &x, &x);
    assert_eq!(t.monotone, 0.0);
    assert!(t.ratios.iter().all(Option::is_none));
}

#[test]
fn cubic_unit_pair() {
    let t = pair_terms(3.0, &[1.0, 0.0, 0.0], &[0.0; 3]);
    assert!((ratio(&t, VectorInequality::MonotoneSuper).unwrap() - 1.0).abs() < 1e-15);
    assert!((ratio(&t, VectorInequality::LipschitzSuper).unwrap() - 1.0).abs() < 1e-15);
    assert!(ratio(&t, VectorInequality::MonotoneSub).is_none());
}

#[test]
fn ratios_are_scale_invariant() {
    let (x, y) = ([0.3, -0.2, 0.9], [-0.5, 0.1, 0.4]);
    for p in [1.1, 1.5, 3.0, 10.0] {
        let a = pair_terms(p, &x, &y);
        let b = pair_terms(p, &scale(&x, 1e3), &scale(&y, 1e3));
        for (ra, rb) in a.ratios.iter().zip(&b.ratios) {
            assert_eq!(ra.is_some(), rb.is_some());
            if let (Some(ra), Some(rb)) = (ra, rb) {
                assert!((ra - rb).abs() <= 1e-12 * ra.abs());
            }
        }
    }
}

#[test]
fn ratios_match_unscaled_formulae() {
    let (x, y): (Vec3, Vec3) = ([0.3, -0.2, 0.9], [-0.5, 0.1, 0.4]);
    let a = |v: &Vec3, p: f64| scale(v, pow_abs(norm(v), p - 2.0));
    for p in [1.5, 3.0] {
        let da = sub(&a(&x, p), &a(&y, p));
        let d = norm(&sub(&x, &y));
        let s = norm(&x) + norm(&y);
        let mono = dot(&da, &sub(&x, &y));
        let t = pair_terms(p, &x, &y);
        let expected = if p < 2.0 {
            [mono / (d * d * s.powf(p - 2.0)), norm(&da) / d.powf(p - 1.0)]
        } else {
            [mono / d.powf(p), norm(&da) / (d * s.powf(p - 2.0))]
        };
        let got: Vec<f64> = t.ratios.iter().flatten().copied().collect();
        assert_eq!(got.len(), 2);
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12 * e.abs(), "p {p}: {g} vs {e}");
        }
    }
}

#[test]
fn monotone_over_many_pairs() {
    let mut r = rng();
    for p in DEFAULT_EXPONENTS {
        let rep = check_vector_inequalities(p, 100_000, &mut r).unwrap();
        assert_eq!(rep.monotone_violations, 0, "p = {p}");
        assert!(rep.min_monotone >= -MONOTONE_SLACK);
        assert!(rep.holds(), "{rep:?}");
        let expected = if p == 2.0 { 4 } else { 2 };
        assert_eq!(rep.ranges.len(), expected);
    }
}

#[test]
fn invalid_exponent() {
    assert!(check_vector_inequalities(1.0, 10, &mut rng()).is_err());
    assert!(check_convexity_bounds(0.5, &[1.0], &[[0.0; 3]], &[[0.0; 3]]).is_err());
    assert!(check_convexity_bounds(2.0, &[1.0], &[], &[[0.0; 3]]).is_err());
}

#[test]
fn gauss_legendre_is_exact_for_polynomials() {
    let v = gauss_legendre_01(1, |t| t.powi(15));
    assert!((v - 1.0 / 16.0).abs() < 1e-15);
    let v = gauss_legendre_01(4, |t| (3.0 * t).sin());
    assert!((v - (1.0 - 3f64.cos()) / 3.0).abs() < 1e-14);
}

#[test]
fn quadratic_convexity_constants() {
    let (w, u, v) = random_fields(20, &mut rng());
    let r = check_convexity_bounds(2.0, &w, &u, &v).unwrap();
    assert!((r.s - 0.5).abs() < 1e-14);
    let half = 0.5 * r.distance * r.distance;
    assert!((r.gap - half).abs() < 1e-12 * half);
    assert!((r.lower_constant().unwrap() - 0.5).abs() < 1e-12);
    assert!((r.upper_constant().unwrap() - 1.0).abs() < 1e-12);
    // From below, the correction carries S = ½, so the constant is one.
    let r = check_convexity_bounds(2.0 - 1e-9, &w, &u, &v).unwrap();
    assert!((r.lower_constant().unwrap() - 1.0).abs() < 1e-6);
    assert!((r.upper_constant().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn equal_fields_are_degenerate() {
    let (w, u, _) = random_fields(10, &mut rng());
    for q in [1.5, 2.0, 4.0] {
        let r = check_convexity_bounds(q, &w, &u, &u).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.lower_term, 0.0);
        assert_eq!(r.upper_term, 0.0);
        assert!(r.lower_constant().is_none());
        assert!(r.holds());
    }
}

/// `J(u) - J(v) - J'(v)(u-v) = ∫₀¹ (J'(v+tw) - J'(v)) w dt`, integrated
/// with a fine midpoint rule.
fn gap_by_path(q: f64, w: &[f64], u: &[Vec3], v: &[Vec3]) -> f64 {
    let d: Vec<Vec3> = u.iter().zip(v).map(|(a, b)| sub(a, b)).collect();
    let a = |x: &Vec3| scale(x, pow_abs(norm(x), q - 2.0));
    let deriv = |t: f64| -> f64 {
        w.iter()
            .zip(v)
            .zip(&d)
            .map(|((c, b), e)| c * dot(&sub(&a(&add(b, &scale(e, t))), &a(b)), e))
            .sum()
    };
    let n = 20_000;
    (0..n).map(|k| deriv((k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
}

#[test]
fn gap_matches_path_integral() {
    let mut r = rng();
    for q in [1.5, 3.0, 4.0] {
        let (w, u, v) = random_fields(8, &mut r);
        let rep = check_convexity_bounds(q, &w, &u, &v).unwrap();
        let oracle = gap_by_path(q, &w, &u, &v);
        assert!((rep.gap - oracle).abs() < 1e-7 * oracle.abs().max(1e-3), "q {q}: {} vs {oracle}", rep.gap);
    }
}

#[test]
fn s_quadrature_converges() {
    let mut r = rng();
    for q in [1.5, 3.0, 4.0] {
        let (w, u, v) = random_fields(16, &mut r);
        let a = s_functional(q, &w, &u, &v, S_PANELS);
        let b = s_functional(q, &w, &u, &v, 2 * S_PANELS);
        assert!((a - b).abs() < 1e-8, "q {q}: {a} vs {b}");
    }
}

#[test]
fn random_instances_satisfy_bounds() {
    let mut r = rng();
    for q in [1.5, 4.0] {
        let s = convexity_summary(q, 100, 24, &mut r).unwrap();
        assert!(s.holds(), "{s:?}");
        assert!(s.min_lower > 0.0 && s.max_upper < f64::INFINITY);
    }
}

#[test]
fn suite_passes() {
    let rep = run_suite(&DEFAULT_EXPONENTS, 2000, &mut rng()).unwrap();
    assert!(rep.holds(), "{rep}");
    let text = rep.to_string();
    assert!(text.contains("p = 500"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn mc_constant_on_ball_is_exact() {
    let (est, se) = mc_integrate(|_| 1.0, Domain::UnitBall, 100, &mut rng()).unwrap();
    assert!((est - 4.0 * PI / 3.0).abs() < 1e-12);
    assert_eq!(se, 0.0);
    assert_eq!(mc_integrate(|_| 0.0, Domain::Cube, 50, &mut rng()).unwrap(), (0.0, 0.0));
    assert!(mc_integrate(|_| 1.0, Domain::Cube, 1, &mut rng()).is_err());
}

#[test]
fn mc_second_moment() {
    let (est, se) = mc_integrate(|x| x[0] * x[0], Domain::UnitBall, 1_000_000, &mut rng()).unwrap();
    assert!((est - 4.0 * PI / 15.0).abs() < 3.0 * se, "{est} ± {se}");
    let (est, se) = mc_integrate(|x| x[0] * x[0], Domain::Cube, 200_000, &mut rng()).unwrap();
    assert!((est - 8.0 / 3.0).abs() < 3.0 * se);
}
