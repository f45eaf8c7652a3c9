//! Driving-field configurations.
//!
//! All families share a constant Rabi frequency U₀ and a 2π/Δ-periodic
//! detuning. The general six-parameter family is
//!
//! ```text
//! δ_t(t) = Δ₁ + (1 − a) Δ₂ / (1 + a − 2√a cos(Δ(t − t₀)))
//! ```
//!
//! and the exactly solvable N = 2 member fixes Δ₂ = 2Δ and
//! a = (Δ₁/Δ + 1)/(Δ₁/Δ − 1).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::oracle::Drive;
use crate::tol::{CROSSING_SAMPLES_PER_PERIOD, GLANCING_TOL, ROOT_TIME_TOL};
use crate::Sign;

/// Physical parameters of the general constant-amplitude family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig {
    pub u0: f64,
    pub a: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta: f64,
    pub t0: f64,
}

/// The same family in scaled time τ = Δ(t − t₀), where Δ = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledField {
    pub u0: f64,
    pub a: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl FieldConfig {
    pub fn new(u0: f64, a: f64, delta1: f64, delta2: f64, delta: f64, t0: f64) -> Result<Self> {
        let cfg = Self { u0, a, delta1, delta2, delta, t0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.u0, self.a, self.delta1, self.delta2, self.delta, self.t0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::parameter("field parameters must be finite"));
        }
        if !(self.u0 > 0.0) {
            return Err(Error::parameter(format!("U0 must be > 0, got {}", self.u0)));
        }
        if !(self.a > 0.0) || self.a == 1.0 {
            return Err(Error::parameter(format!("a must be > 0 and ≠ 1, got {}", self.a)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::parameter(format!("Δ must be > 0, got {}", self.delta)));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.delta
    }

    pub fn scaled(&self) -> ScaledField {
        ScaledField {
            u0: self.u0 / self.delta,
            a: self.a,
            delta1: self.delta1 / self.delta,
            delta2: self.delta2 / self.delta,
        }
    }

    /// Scaled time τ = Δ(t − t₀).
    pub fn tau(&self, t: f64) -> f64 {
        self.delta * (t - self.t0)
    }
}

/// δ_t(t) of the general family.
pub fn detuning_general(cfg: &FieldConfig, t: f64) -> f64 {
    let sa = cfg.a.sqrt();
    cfg.delta1 + (1.0 - cfg.a) * cfg.delta2 / (1.0 + cfg.a - 2.0 * sa * cfg.tau(t).cos())
}

/// dδ_t/dt of the general family.
pub fn detuning_general_rate(cfg: &FieldConfig, t: f64) -> f64 {
    let sa = cfg.a.sqrt();
    let theta = cfg.tau(t);
    let den = 1.0 + cfg.a - 2.0 * sa * theta.cos();
    -(1.0 - cfg.a) * cfg.delta2 * 2.0 * sa * theta.sin() * cfg.delta / (den * den)
}

/// Accumulated phase δ(t) = ∫_{t₀}^t δ_t dt' of the general family, in
/// closed form and continuous across periods.
pub fn phase_general(cfg: &FieldConfig, t: f64) -> f64 {
    // ∫₀^τ dθ/(1 + a − 2√a cos θ) = 2/|1 − a| · (kπ + atan2(c sin s, cos s)),
    // τ/2 = kπ + s with s ∈ [−π/2, π/2), c = (1 + √a)/|1 − √a|.
    let sa = cfg.a.sqrt();
    let half = 0.5 * cfg.tau(t);
    let k = (half / PI + 0.5).floor();
    let s = half - k * PI;
    let c = (1.0 + sa) / (1.0 - sa).abs();
    let unwrapped = k * PI + (c * s.sin()).atan2(s.cos());
    cfg.delta1 * (t - cfg.t0) + (1.0 - cfg.a).signum() * 2.0 * cfg.delta2 / cfg.delta * unwrapped
}

/// The unconditionally solvable configuration: U₀, Δ₁ with |Δ₁/Δ| > 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct N2Config {
    pub u0: f64,
    pub delta1: f64,
    pub delta: f64,
    pub t0: f64,
}

impl N2Config {
    pub fn new(u0: f64, delta1: f64, delta: f64, t0: f64) -> Result<Self> {
        let cfg = Self { u0, delta1, delta, t0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Δ = 1, t₀ = 0.
    pub fn scaled_unit(u0: f64, delta1: f64) -> Result<Self> {
        Self::new(u0, delta1, 1.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.u0, self.delta1, self.delta, self.t0].iter().all(|v| v.is_finite()) {
            return Err(Error::parameter("field parameters must be finite"));
        }
        if !(self.u0 > 0.0) {
            return Err(Error::parameter(format!("U0 must be > 0, got {}", self.u0)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::parameter(format!("Δ must be > 0, got {}", self.delta)));
        }
        if !(self.scaled_delta1().abs() > 1.0) {
            return Err(Error::domain(format!("N = 2 model needs |Δ1/Δ| > 1, got {}", self.scaled_delta1())));
        }
        Ok(())
    }

    pub fn scaled_delta1(&self) -> f64 {
        self.delta1 / self.delta
    }

    pub fn scaled_u0(&self) -> f64 {
        self.u0 / self.delta
    }

    /// Heun singular point a = (Δ₁ + 1)/(Δ₁ − 1) in scaled units.
    pub fn a(&self) -> f64 {
        let d1 = self.scaled_delta1();
        (d1 + 1.0) / (d1 - 1.0)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.delta
    }

    pub fn tau(&self, t: f64) -> f64 {
        self.delta * (t - self.t0)
    }

    /// The equivalent member of the general family (Δ₂ = 2Δ).
    pub fn to_field_config(&self) -> FieldConfig {
        FieldConfig {
            u0: self.u0,
            a: self.a(),
            delta1: self.delta1,
            delta2: 2.0 * self.delta,
            delta: self.delta,
            t0: self.t0,
        }
    }
}

/// δ_t(t) = Δ₁ − 2Δ / (Δ₁/Δ − s√((Δ₁/Δ)² − 1) cos(Δ(t − t₀))) with s = sign(Δ₁).
///
/// For Δ₁ > 0 this is the familiar form with a minus sign in the
/// denominator; for Δ₁ < −1 the sign follows from a < 1, which keeps the
/// function identical to the general family at a = (Δ₁+1)/(Δ₁−1).
pub fn detuning_n2(cfg: &N2Config, t: f64) -> f64 {
    let d1 = cfg.scaled_delta1();
    let b = d1.signum() * (d1 * d1 - 1.0).sqrt();
    cfg.delta1 - 2.0 * cfg.delta / (d1 - b * cfg.tau(t).cos())
}

/// Heun singular point of the N = 2 model, a = (Δ₁ + 1)/(Δ₁ − 1), Δ₁ in scaled units.
pub fn a_from_delta1(delta1: f64) -> Result<f64> {
    if delta1 == 1.0 || !delta1.is_finite() {
        return Err(Error::domain(format!("a(Δ1) is singular at Δ1 = {delta1}")));
    }
    Ok((delta1 + 1.0) / (delta1 - 1.0))
}

fn n3_rabi_root(u0: f64, delta1: f64, branch: Sign) -> Result<f64> {
    let rr = u0 * u0 + delta1 * delta1 - 1.0;
    if rr < 0.0 {
        return Err(Error::domain(format!("N = 3 model needs U0² + Δ1² ≥ 1, got {}", rr + 1.0)));
    }
    if rr == 0.0 {
        return Err(Error::domain("N = 3 model is undefined at U0² + Δ1² = 1 (R = 0)"));
    }
    Ok(branch.factor() * rr.sqrt())
}

/// The conditionally solvable N = 3 detuning (Δ = 1, t₀ = 0), evaluated as
///
/// ```text
/// δ_t = Δ₁ + (9 − 3√3 R − 9Δ₁)
///            / ( (√3 − R) R + 3(Δ₁ − 1)Δ₁
///                + √(1 − 6/(3 + √3 R − 3Δ₁)) · (R² − 3(Δ₁ − 1)²) · cos t ),
/// R = ±√(U₀² + Δ₁² − 1).
/// ```
pub fn detuning_n3(u0: f64, delta1: f64, branch: Sign, t: f64) -> Result<f64> {
    let r = n3_rabi_root(u0, delta1, branch)?;
    let s3 = 3f64.sqrt();
    let inner_den = 3.0 + s3 * r - 3.0 * delta1;
    if inner_den == 0.0 {
        return Err(Error::domain("N = 3 model: 3 + √3R − 3Δ1 vanishes"));
    }
    let inner = 1.0 - 6.0 / inner_den;
    if inner < 0.0 {
        return Err(Error::domain(format!("N = 3 model: negative radicand {inner}")));
    }
    let num = 9.0 - 3.0 * s3 * r - 9.0 * delta1;
    let den =
        (s3 - r) * r + 3.0 * (delta1 - 1.0) * delta1 + inner.sqrt() * (r * r - 3.0 * (delta1 - 1.0).powi(2)) * t.cos();
    if den == 0.0 {
        return Err(Error::domain("N = 3 detuning denominator vanishes"));
    }
    Ok(delta1 + num / den)
}

/// The radicand 1 − 6/(3 + √3R − 3Δ₁) of the N = 3 formula. When the
/// formula is a member of the general family with Δ₂ = 3 this is its `a`.
pub fn n3_singular_point(u0: f64, delta1: f64, branch: Sign) -> Result<f64> {
    let r = n3_rabi_root(u0, delta1, branch)?;
    let inner_den = 3.0 + 3f64.sqrt() * r - 3.0 * delta1;
    if inner_den == 0.0 {
        return Err(Error::domain("N = 3 model: 3 + √3R − 3Δ1 vanishes"));
    }
    Ok(1.0 - 6.0 / inner_den)
}

/// The N = 3 detuning as a drive for the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct N3Config {
    pub u0: f64,
    pub delta1: f64,
    pub branch: Sign,
}

impl N3Config {
    /// Fails if the formula is not real and finite over a full period.
    pub fn new(u0: f64, delta1: f64, branch: Sign) -> Result<Self> {
        if !(u0 > 0.0) {
            return Err(Error::parameter(format!("U0 must be > 0, got {u0}")));
        }
        let a = n3_singular_point(u0, delta1, branch)?;
        if !(a > 0.0) || (a - 1.0).abs() < 1e-12 {
            return Err(Error::domain(format!("N = 3 model degenerate: radicand {a}")));
        }
        detuning_n3(u0, delta1, branch, 0.0)?;
        detuning_n3(u0, delta1, branch, PI)?;
        Ok(Self { u0, delta1, branch })
    }

    pub fn period(&self) -> f64 {
        2.0 * PI
    }
}

/// The two Δ₁/Δ₂ ratios at which the detuning only touches resonance:
/// ((√a + 1)/(√a − 1), (√a − 1)/(√a + 1)).
pub fn glancing_ratios(a: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || a == 1.0 {
        return Err(Error::domain(format!("glancing ratios need a > 0, a ≠ 1, got {a}")));
    }
    let s = a.sqrt();
    Ok(((s + 1.0) / (s - 1.0), (s - 1.0) / (s + 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    Crossing,
    Glancing,
    NonCrossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    pub kind: CrossingKind,
    /// Resonance instants in the window, ascending.
    pub times: Vec<f64>,
    /// Whether Δ₁/Δ₂ matches one of the glancing ratios.
    pub glancing_ratio_match: bool,
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    // Run to floating-point adjacency; the time tolerance is then met with room to spare.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    debug_assert!(hi - lo <= ROOT_TIME_TOL);
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Zeros of δ_t in `window` for the general family: transversal crossings by
/// sign-change bracketing on a dense grid plus bisection, and tangential
/// touches (glancing) tested directly at the extrema of cos(Δ(t − t₀)).
pub fn classify_crossings(cfg: &FieldConfig, window: (f64, f64)) -> Result<CrossingReport> {
    cfg.validate()?;
    let (lo, hi) = window;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::parameter(format!("empty crossing window [{lo}, {hi}]")));
    }
    let f = |t: f64| detuning_general(cfg, t);
    let period = cfg.period();

    let mut glancing = Vec::new();
    let k_lo = ((lo - cfg.t0) / (0.5 * period)).ceil() as i64;
    let k_hi = ((hi - cfg.t0) / (0.5 * period)).floor() as i64;
    for k in k_lo..=k_hi {
        let t = cfg.t0 + k as f64 * 0.5 * period;
        if t < lo || t > hi {
            continue;
        }
        if f(t).abs() < GLANCING_TOL && detuning_general_rate(cfg, t).abs() < GLANCING_TOL {
            glancing.push(t);
        }
    }

    let n = ((CROSSING_SAMPLES_PER_PERIOD as f64) * (hi - lo) / period).ceil().max(1.0) as usize;
    let mut crossings = Vec::new();
    let mut t_prev = lo;
    let mut f_prev = f(lo);
    for i in 1..=n {
        let t = if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 };
        let ft = f(t);
        if (f_prev < 0.0 && ft > 0.0) || (f_prev > 0.0 && ft < 0.0) {
            let root = bisect(&f, t_prev, t);
            if !glancing.iter().any(|g| (g - root).abs() < 1e-6 * period) {
                crossings.push(root);
            }
        }
        t_prev = t;
        f_prev = ft;
    }

    let glancing_ratio_match = if cfg.delta2 == 0.0 {
        false
    } else {
        let (r1, r2) = glancing_ratios(cfg.a)?;
        let ratio = cfg.delta1 / cfg.delta2;
        (ratio - r1).abs() <= 1e-9 * r1.abs().max(1.0) || (ratio - r2).abs() <= 1e-9 * r2.abs().max(1.0)
    };

    let kind = if !crossings.is_empty() {
        CrossingKind::Crossing
    } else if !glancing.is_empty() {
        CrossingKind::Glancing
    } else {
        CrossingKind::NonCrossing
    };
    let mut times: Vec<f64> = crossings.into_iter().chain(glancing).collect();
    times.sort_by(f64::total_cmp);
    Ok(CrossingReport { kind, times, glancing_ratio_match })
}

impl Drive for FieldConfig {
    fn rabi(&self, _t: f64) -> f64 {
        self.u0
    }

    fn detuning(&self, t: f64) -> f64 {
        detuning_general(self, t)
    }
}

impl Drive for N2Config {
    fn rabi(&self, _t: f64) -> f64 {
        self.u0
    }

    fn detuning(&self, t: f64) -> f64 {
        detuning_n2(self, t)
    }
}

impl Drive for N3Config {
    fn rabi(&self, _t: f64) -> f64 {
        self.u0
    }

    fn detuning(&self, t: f64) -> f64 {
        // Admissibility was checked at construction; only cos t varies.
        detuning_n3(self.u0, self.delta1, self.branch, t).unwrap_or(f64::NAN)
    }
}
