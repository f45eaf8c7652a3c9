//! Complex special-function kernels.
//!
//! The incomplete Beta function is evaluated through
//!
//! ```text
//! B_z(p, q) = ∫₀^z t^{p−1} (1−t)^{q−1} dt = (z^p / p) · ₂F₁(p, 1−q; p+1; z)
//! ```
//!
//! with the Gauss series summed directly, so it is confined to |z| < 1.
//! Powers of `z` always go through [`UnwoundPoint`], which remembers how many
//! times the time path has wound around the origin; `(1−z)^b` uses the
//! principal branch (exact integer powers when `b` is an integer).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol::{EPS_SERIES, SERIES_MAX_TERMS};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A nonzero complex number stored as modulus and *unwrapped* angle.
///
/// `angle` is not reduced modulo 2π, so `z^μ` evaluated from it is continuous
/// along a path that circles the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnwoundPoint {
    modulus: f64,
    angle: f64,
}

impl UnwoundPoint {
    pub fn new(modulus: f64, angle: f64) -> Result<Self> {
        if !(modulus > 0.0) || !modulus.is_finite() || !angle.is_finite() {
            return Err(Error::domain(format!(
                "unwound point needs finite modulus > 0 and finite angle, got ({modulus}, {angle})"
            )));
        }
        Ok(Self { modulus, angle })
    }

    /// Principal-branch representation of `z`.
    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.norm(), z.arg())
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.angle)
    }

    /// ln z on the sheet selected by the unwrapped angle.
    pub fn ln(&self) -> Complex64 {
        Complex64::new(self.modulus.ln(), self.angle)
    }

    pub fn powc(&self, mu: Complex64) -> Complex64 {
        unwound_power(*self, mu)
    }
}

/// `exp(μ·(ln|z| + i·angle))`, never snapped to the principal branch.
pub fn unwound_power(pt: UnwoundPoint, mu: Complex64) -> Complex64 {
    (mu * pt.ln()).exp()
}

fn is_nonpositive_integer(c: Complex64) -> bool {
    c.im.abs() <= 1e-14 * (1.0 + c.re.abs()) && c.re <= 0.5 && (c.re - c.re.round()).abs() <= 1e-14 * (1.0 + c.re.abs())
}

fn as_integer(b: Complex64) -> Option<i32> {
    let r = b.re.round();
    if b.im == 0.0 && b.re == r && r.abs() < i32::MAX as f64 {
        Some(r as i32)
    } else {
        None
    }
}

/// (1 − z)^b on the principal branch, exact for integer `b`.
pub fn one_minus_pow(z: Complex64, b: Complex64) -> Complex64 {
    let w = ONE - z;
    match as_integer(b) {
        Some(n) => w.powi(n),
        None => w.powc(b),
    }
}

/// Gauss hypergeometric function ₂F₁(p1, p2; p3; z) by its defining series.
///
/// Requires |z| < 1 and `p3 ∉ {0, −1, −2, …}`.
pub fn hyp2f1(p1: Complex64, p2: Complex64, p3: Complex64, z: Complex64) -> Result<Complex64> {
    if is_nonpositive_integer(p3) {
        return Err(Error::parameter(format!("₂F₁ lower parameter {p3} is a non-positive integer")));
    }
    if !(z.norm() < 1.0) {
        return Err(Error::domain(format!("₂F₁ series needs |z| < 1, got |z| = {}", z.norm())));
    }
    let mut term = ONE;
    let mut sum = ONE;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= (p1 + kf) * (p2 + kf) / ((p3 + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.norm() <= EPS_SERIES * sum.norm() {
            return Ok(sum);
        }
    }
    Err(Error::Convergence(format!("₂F₁({p1}, {p2}; {p3}; {z}) not converged after {SERIES_MAX_TERMS} terms")))
}

/// Incomplete Beta function B_z(p, q) with the z-power taken on the sheet of `pt`.
pub fn inc_beta_unwound(p: Complex64, q: Complex64, pt: UnwoundPoint) -> Result<Complex64> {
    if p.norm() == 0.0 || is_nonpositive_integer(p) {
        return Err(Error::parameter(format!("B_z(p, q) undefined for p = {p}")));
    }
    let z = pt.to_complex();
    if !(z.norm() < 1.0) {
        return Err(Error::domain(format!("incomplete Beta series needs |z| < 1, got |z| = {}", z.norm())));
    }
    let f = hyp2f1(p, ONE - q, p + 1.0, z)?;
    Ok(pt.powc(p) / p * f)
}

/// Incomplete Beta function B_z(p, q) on the principal branch.
pub fn inc_beta(p: Complex64, q: Complex64, z: Complex64) -> Result<Complex64> {
    if z.norm() == 0.0 {
        if p.re > 0.0 && !is_nonpositive_integer(p) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(Error::parameter(format!("B_0(p, q) undefined for p = {p}")));
    }
    inc_beta_unwound(p, q, UnwoundPoint::from_complex(z)?)
}

/// d/dz B_z(p, q) = z^{p−1} (1−z)^{q−1}.
pub fn inc_beta_derivative(p: Complex64, q: Complex64, pt: UnwoundPoint) -> Complex64 {
    pt.powc(p - 1.0) * one_minus_pow(pt.to_complex(), q - 1.0)
}

/// One step of the neighbour recurrence
/// `B_z(c, b) = (z^c / c)(1−z)^b + ((b+c)/c) · B_z(c+1, b)`
/// given the upper neighbour `upper = B_z(c+1, b)`.
pub fn neighbour_step(c: Complex64, b: Complex64, pt: UnwoundPoint, upper: Complex64) -> Result<Complex64> {
    if c.norm() == 0.0 {
        return Err(Error::parameter("neighbour recurrence needs c ≠ 0"));
    }
    let z = pt.to_complex();
    Ok(pt.powc(c) / c * one_minus_pow(z, b) + (b + c) / c * upper)
}

/// B_z(c, b) obtained from B_z(c+1, b) through the neighbour recurrence.
pub fn beta_step(c: Complex64, b: Complex64, z: Complex64) -> Result<Complex64> {
    if c.norm() == 0.0 {
        return Err(Error::parameter("neighbour recurrence needs c ≠ 0"));
    }
    let pt = UnwoundPoint::from_complex(z)?;
    // (b+c) = 0 kills the upper term; skip evaluating it (it may be undefined).
    let upper = if (b + c).norm() == 0.0 { Complex64::new(0.0, 0.0) } else { inc_beta_unwound(c + 1.0, b, pt)? };
    neighbour_step(c, b, pt, upper)
}

/// A finite sum Σₙ kₙ B_z(c₀+n, b) rewritten with the neighbour recurrence
/// as `base · B_z(c₀, b) + (1−z)^b z^{c₀} Σₘ eₘ z^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedBetaSum {
    pub c0: Complex64,
    pub b: Complex64,
    /// Remaining coefficient of B_z(c₀, b).
    pub base: Complex64,
    /// Coefficients eₘ of the elementary remainder.
    pub elementary: Vec<Complex64>,
    /// Σ|kₙ| of the input, the scale for judging `base ≈ 0`.
    pub scale: f64,
}

impl FoldedBetaSum {
    /// Folds `Σ coeffs[n] · B_z(c0 + n, b)` down onto the lowest index.
    pub fn new(coeffs: &[Complex64], c0: Complex64, b: Complex64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::parameter("empty Beta sum"));
        }
        let mut k: Vec<Complex64> = coeffs.to_vec();
        let mut elementary = vec![Complex64::new(0.0, 0.0); coeffs.len().saturating_sub(1)];
        for n in (1..k.len()).rev() {
            let c = c0 + (n as f64 - 1.0);
            let denom = b + c;
            if denom.norm() <= 1e-14 * (1.0 + c.norm()) {
                return Err(Error::parameter(format!("cannot fold B_z({}, {b}) downward: b + c = 0", c + 1.0)));
            }
            let kn = k[n];
            k[n - 1] += kn * c / denom;
            elementary[n - 1] -= kn / denom;
        }
        Ok(Self { c0, b, base: k[0], elementary, scale: coeffs.iter().map(|c| c.norm()).sum() })
    }

    /// Whether the Beta term dropped out, leaving a purely elementary function.
    pub fn is_elementary(&self, rel_tol: f64) -> bool {
        self.base.norm() <= rel_tol * self.scale
    }

    /// The elementary remainder (1−z)^b z^{c₀} Σ eₘ z^m.
    pub fn elementary_part(&self, pt: UnwoundPoint) -> Complex64 {
        let z = pt.to_complex();
        let poly = self.elementary.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, e| acc * z + e);
        one_minus_pow(z, self.b) * pt.powc(self.c0) * poly
    }

    /// Full value. The Beta term is only evaluated when it has not cancelled,
    /// which needs |z| < 1.
    pub fn eval(&self, pt: UnwoundPoint, rel_tol: f64) -> Result<Complex64> {
        let rest = self.elementary_part(pt);
        if self.is_elementary(rel_tol) {
            Ok(rest)
        } else {
            Ok(self.base * inc_beta_unwound(self.c0, self.b, pt)? + rest)
        }
    }
}

/// Reduces an angle to (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}
