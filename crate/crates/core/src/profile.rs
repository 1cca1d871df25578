//! The approximating-domain profile: a smooth transition glued from a bump
//! cutoff and the pure power t^{1/alpha},
//!
//! ```text
//! f(t)   = eta(t) + (1 - eta(t)) t^{1/alpha},
//! f_n(t) = f(n t) n^{-1/(2 alpha)},
//! ```
//!
//! with eta = 1 on [0, 1/2], eta = 0 on [1, inf). The defining property
//! `f_n(t) - alpha t f_n'(t) >= 0` makes the excised sleeve around the flat
//! crack star-shaped enough for the boundary term of the Rellich-Necas
//! integral to carry a sign.

use crate::error::{Error, Result};

/// Result of a profile evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ProfileData {
    pub value: f64,
    pub derivative: f64,
    /// f_n(t) - alpha t f_n'(t); nonnegative up to roundoff.
    pub property_residual: f64,
}

fn bump(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn bump_prime(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp() / (s * s)
    }
}

/// Smooth step: 0 at u <= 0, 1 at u >= 1.
pub fn smooth_step(u: f64) -> f64 {
    let a = bump(u);
    let b = bump(1.0 - u);
    a / (a + b)
}

fn smooth_step_prime(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let a = bump(u);
    let b = bump(1.0 - u);
    let ap = bump_prime(u);
    let bp = -bump_prime(1.0 - u);
    (ap * (a + b) - a * (ap + bp)) / ((a + b) * (a + b))
}

/// eta(t): 1 for t <= 1/2, 0 for t >= 1, smooth and nonincreasing between.
pub fn eta(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        smooth_step(2.0 * (1.0 - t))
    }
}

pub fn eta_prime(t: f64) -> f64 {
    if t <= 0.5 || t >= 1.0 {
        0.0
    } else {
        -2.0 * smooth_step_prime(2.0 * (1.0 - t))
    }
}

fn f_and_prime(t: f64, alpha: f64) -> (f64, f64) {
    if t <= 0.5 {
        return (1.0, 0.0);
    }
    let pow = t.powf(1.0 / alpha);
    if t >= 1.0 {
        return (pow, pow / (alpha * t));
    }
    let e = eta(t);
    let ep = eta_prime(t);
    let value = e + (1.0 - e) * pow;
    let derivative = ep * (1.0 - pow) + (1.0 - e) * pow / (alpha * t);
    (value, derivative)
}

/// f_n and its exact derivative at t >= 0, with the star-shapedness residual.
pub fn approx_profile(n: u32, alpha: f64, t: f64) -> Result<ProfileData> {
    if n < 1 {
        return Err(Error::Precondition("profile index n must be >= 1".into()));
    }
    if !(alpha > 1.0) {
        return Err(Error::Precondition("profile exponent alpha must exceed 1".into()));
    }
    if t < 0.0 {
        return Err(Error::Precondition("profile argument t must be nonnegative".into()));
    }
    let nf = n as f64;
    let scale = nf.powf(-1.0 / (2.0 * alpha));
    let (f, fp) = f_and_prime(nf * t, alpha);
    let value = f * scale;
    let derivative = nf * fp * scale;
    Ok(ProfileData { value, derivative, property_residual: value - alpha * t * derivative })
}

/// Even extension f~_n(t) = f_n(|t|) together with its (odd) derivative.
pub fn approx_profile_even(n: u32, alpha: f64, t: f64) -> Result<ProfileData> {
    let base = approx_profile(n, alpha, t.abs())?;
    Ok(ProfileData {
        value: base.value,
        derivative: t.signum() * base.derivative,
        property_residual: base.property_residual,
    })
}
