//! Exact SLE(8/3) hitting distributions in the half-plane and the ad hoc
//! reference curves used for the first-crossing observables.
//!
//! Every CDF here has the form `1 - Phi'(0)^{5/8}` for the uniformizing map of
//! the half-plane minus a hull: a leftward horizontal ray (`cdf_xe`), a
//! vertical slit (`cdf_ye`) or a circular arc (`cdf_theta_e`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Restriction exponent for kappa = 8/3.
pub const RESTRICTION_EXPONENT: f64 = 5.0 / 8.0;

/// Relative tolerance for the Newton iteration in [`g_inv`].
pub const G_INV_RTOL: f64 = 1e-16;

const G_INV_MAX_ITER: usize = 200;

/// `g(x) = x + ln x` on `x > 0`.
pub fn g(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x + x.ln())
    } else {
        Err(Error::OutOfDomain {
            what: "x",
            value: x,
            range: "(0, inf)",
        })
    }
}

/// Inverse of `g`, i.e. the positive root of `x + ln x = y`. Equal to the
/// Wright omega function.
pub fn g_inv(y: f64) -> f64 {
    assert!(!y.is_nan(), "g_inv of NaN");
    if y == f64::NEG_INFINITY {
        return 0.0;
    }
    if y == f64::INFINITY {
        return f64::INFINITY;
    }
    if y < -40.0 {
        // x = e^{y - x} and x < 1e-17, so one fixed-point step is exact
        let x0 = y.exp();
        return (y - x0).exp();
    }
    let (mut lo, mut hi) = if y >= 1.0 {
        (0.5 * y, y)
    } else {
        ((y - 1.0).exp(), y.exp().max(1.0))
    };
    let mut x = if y >= 1.0 { y - y.ln() } else { y.exp() };
    x = x.clamp(lo, hi);
    for _ in 0..G_INV_MAX_ITER {
        let r = x + x.ln() - y;
        if r == 0.0 {
            return x;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = r * x / (x + 1.0);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= G_INV_RTOL * x || hi - lo <= G_INV_RTOL * lo {
            return next;
        }
        x = next;
    }
    x
}

/// `P(X_e <= t)` for chordal SLE(8/3) in the half-plane.
pub fn cdf_xe(t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    let u = g_inv(-PI * t - 1.0);
    // 1 - (u / (u + 1))^{5/8}, written to keep precision in both tails
    -(-RESTRICTION_EXPONENT * (1.0 / u).ln_1p()).exp_m1()
}

/// `P(Y_e <= t) = 1 - (1 + t^2)^{-5/16}`.
pub fn cdf_ye(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::OutOfDomain {
            what: "t",
            value: t,
            range: "[0, inf)",
        });
    }
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(-(-(5.0 / 16.0) * (t * t).ln_1p()).exp_m1())
}

/// `s = (1 + cos(pi t)) / 2`, the natural variable for the arc of angle `pi t`.
pub fn arc_s(t: f64) -> f64 {
    let c = (FRAC_PI_2 * t).cos();
    c * c
}

/// Uniformizing map of the half-plane minus the unit arc `{e^{i theta}: theta <= pi t}`,
/// restricted to the real segment `-1 < x < 1` and normalized at infinity.
pub fn arc_map(x: f64, s: f64) -> f64 {
    2.0 * s / (1.0 + (1.0 - 4.0 * x * s / ((x + 1.0) * (x + 1.0))).sqrt())
}

/// Closed form of `d/dx arc_map(x, s)` at `x = -d`.
pub fn arc_map_derivative(d: f64, s: f64) -> f64 {
    let one_minus_d = 1.0 - d;
    let r = one_minus_d * one_minus_d + 4.0 * d * s;
    let root = r.sqrt();
    let lead = one_minus_d + root;
    4.0 * s * s * (1.0 + d) / (lead * lead * root)
}

/// `P(Theta_e <= t)` for the semicircle of radius 1 centred at `d`.
pub fn cdf_theta_e(t: f64, d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfDomain {
            what: "t",
            value: t,
            range: "[0, 1]",
        });
    }
    if !(d > -1.0 && d < 1.0) {
        return Err(Error::OutOfDomain {
            what: "d",
            value: d,
            range: "(-1, 1)",
        });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(1.0);
    }
    let deriv = arc_map_derivative(d, arc_s(t));
    Ok(-(RESTRICTION_EXPONENT * deriv.ln()).exp_m1())
}

/// Probability that the curve passes to the right of a point with polar angle `theta`.
pub fn pass_right_prob(theta: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::OutOfDomain {
            what: "theta",
            value: theta,
            range: "[0, pi]",
        });
    }
    // near pi/2, cos(theta) = sin(pi/2 - theta) and the difference is exact
    let cos = if (theta - FRAC_PI_2).abs() <= FRAC_PI_4 {
        (FRAC_PI_2 - theta).sin()
    } else {
        theta.cos()
    };
    Ok(0.5 - 0.5 * cos)
}

/// Reference curve for `X_f`.
pub fn ref_x(t: f64) -> f64 {
    0.5 * ((1.16 * t).tanh() + 1.0)
}

/// Reference curve for `Y_f`: the `Y_e` law.
pub fn ref_y(t: f64) -> f64 {
    1.0 - (1.0 + t * t).powf(-5.0 / 16.0)
}

/// Reference curve for `Theta_f`.
pub fn ref_theta(t: f64) -> f64 {
    t - 0.12 * (2.0 * PI * t).sin() - 0.009 * (4.0 * PI * t).sin()
}

/// An exact SLE(8/3) law. `PassRight` is parametrized by `theta / pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExactCdf {
    Xe,
    Ye,
    ThetaE { d: f64 },
    PassRight,
}

impl ExactCdf {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match *self {
            ExactCdf::Xe => Ok(cdf_xe(t)),
            ExactCdf::Ye => cdf_ye(t),
            ExactCdf::ThetaE { d } => cdf_theta_e(t, d),
            ExactCdf::PassRight => pass_right_prob(PI * t),
        }
    }
}

/// The ad hoc comparison curves for first-crossing observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceFn {
    X,
    Y,
    Theta,
}

impl ReferenceFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ReferenceFn::X => ref_x(t),
            ReferenceFn::Y => ref_y(t),
            ReferenceFn::Theta => ref_theta(t),
        }
    }
}
