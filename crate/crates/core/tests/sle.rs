mod common;

use std::f64::consts::PI;

use saw_sle::sle::*;

use common::{phi, phi_prime_numeric};

#[test]
fn xe_matches_high_precision_values() {
    // 40-digit evaluations of 1 - (W / (W + 1))^{5/8} with W the principal
    // Lambert W of exp(-pi t - 1)
    let table = [
        (-100.0, 0.0020276187646899399435),
        (-10.0, 0.022380200091091710787),
        (-1.0, 0.25690712162438949351),
        (-0.3, 0.4779973488962596114),
        (0.0, 0.61425459625025071997),
        (0.5, 0.816264173852097631),
        (1.0, 0.92631698418968813653),
        (3.0, 0.99851971898424580136),
    ];
    for (t, want) in table {
        let got = cdf_xe(t);
        assert!((got - want).abs() <= 1e-13 * want, "t={t}: {got} vs {want}");
    }
}

#[test]
fn closed_forms_at_special_points() {
    assert!((cdf_ye(1.0).unwrap() - (1.0 - 2f64.powf(-5.0 / 16.0))).abs() < 1e-15);
    assert_eq!(cdf_ye(0.0).unwrap(), 0.0);
    assert_eq!(pass_right_prob(PI / 2.0).unwrap(), 0.5);
    assert_eq!(pass_right_prob(0.0).unwrap(), 0.0);
    assert_eq!(pass_right_prob(PI).unwrap(), 1.0);
    assert!((cdf_theta_e(0.5, 0.0).unwrap() - (1.0 - 0.5f64.powf(1.25))).abs() < 1e-15);
    for d in [0.0, 0.5, 0.9] {
        assert_eq!(cdf_theta_e(0.0, d).unwrap(), 0.0);
        assert_eq!(cdf_theta_e(1.0, d).unwrap(), 1.0);
    }
    assert_eq!(ref_x(0.0), 0.5);
    assert_eq!(ref_x(1.0), 0.5 * (1.16f64.tanh() + 1.0));
    assert!((ref_y(1.0) - (1.0 - 2f64.powf(-5.0 / 16.0))).abs() < 1e-15);
    assert!((ref_theta(0.25) - (0.25 - 0.12)).abs() < 1e-15);
}

#[test]
fn theta_law_is_one_minus_a_numerical_derivative_power() {
    for d in [0.0, 0.5, 0.9] {
        for k in 1..=9 {
            let t = k as f64 / 10.0;
            let s = (1.0 + (PI * t).cos()) / 2.0;
            let h = 1e-3 * (1.0 - d);
            let numeric = 1.0 - phi_prime_numeric(-d, s, h).powf(5.0 / 8.0);
            let closed = cdf_theta_e(t, d).unwrap();
            assert!((numeric - closed).abs() < 1e-8, "t={t} d={d}: {numeric} vs {closed}");
        }
    }
    // the map fixes the arc's base points' images: phi(-d) stays in (0, 1)
    assert!(phi(-0.5, 0.3) > 0.0 && phi(-0.5, 0.3) < 1.0);
}

#[test]
fn laws_are_monotone_with_correct_limits() {
    let pts = 10_000;
    let check = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
        let mut prev = f(lo);
        for k in 1..=pts {
            let v = f(lo + (hi - lo) * k as f64 / pts as f64);
            assert!(v >= prev, "decrease at {k}");
            prev = v;
        }
    };
    check(&cdf_xe, -50.0, 10.0);
    check(&|t| cdf_ye(t).unwrap(), 0.0, 100.0);
    for d in [-0.5, 0.0, 0.5, 0.9] {
        check(&|t| cdf_theta_e(t, d).unwrap(), 0.0, 1.0);
    }
    check(&|t| pass_right_prob(t).unwrap(), 0.0, PI);
    assert!(cdf_xe(-1e6) < 1e-5);
    assert!(1.0 - cdf_xe(10.0) < 1e-6);
    assert!(cdf_ye(-0.1).is_err());
    assert!(cdf_theta_e(1.5, 0.0).is_err());
    assert!(cdf_theta_e(0.5, 1.0).is_err());
    assert!(pass_right_prob(4.0).is_err());
}

#[test]
fn g_inv_round_trips_over_twelve_decades() {
    for k in 0..=1200 {
        let x = 10f64.powf(-6.0 + k as f64 / 100.0);
        let back = g_inv(g(x).unwrap());
        assert!((back - x).abs() / x < 1e-12, "x={x}: {back}");
    }
    assert!(g(0.0).is_err());
    assert_eq!(g_inv(1.0), 1.0);
}

#[test]
fn exact_laws_evaluate_through_the_enum() {
    assert_eq!(ExactCdf::PassRight.eval(0.5).unwrap(), 0.5);
    assert_eq!(ExactCdf::ThetaE { d: 0.5 }.eval(0.3).unwrap(), cdf_theta_e(0.3, 0.5).unwrap());
    assert_eq!(ExactCdf::Xe.eval(-2.0).unwrap(), cdf_xe(-2.0));
    assert_eq!(ReferenceFn::Y.eval(2.0), ref_y(2.0));
}
