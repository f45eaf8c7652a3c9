//! Numerical ground truth for the two-state system
//!
//! ```text
//! i da₁/dt = U(t) e^{−iδ(t)} a₂,    i da₂/dt = U(t) e^{+iδ(t)} a₁,    dδ/dt = δ_t(t)
//! ```
//!
//! integrated with an adaptive Dormand–Prince 5(4) pair on the real state
//! (Re a₁, Im a₁, Re a₂, Im a₂, δ). Field configurations enter only through
//! the [`Drive`] callbacks.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;
use crate::state::StateVector;
use crate::tol::{ODE_ATOL, ODE_MAX_STEPS, ODE_RTOL, QUAD_TOL};

/// Rabi frequency U(t) and detuning δ_t(t) of a driving field.
pub trait Drive {
    fn rabi(&self, t: f64) -> f64;
    fn detuning(&self, t: f64) -> f64;
}

/// A drive assembled from two closures.
pub struct FnDrive<U, D> {
    pub rabi: U,
    pub detuning: D,
}

impl<U: Fn(f64) -> f64, D: Fn(f64) -> f64> Drive for FnDrive<U, D> {
    fn rabi(&self, t: f64) -> f64 {
        (self.rabi)(t)
    }

    fn detuning(&self, t: f64) -> f64 {
        (self.detuning)(t)
    }
}

impl<T: Drive + ?Sized> Drive for &T {
    fn rabi(&self, t: f64) -> f64 {
        (**self).rabi(t)
    }

    fn detuning(&self, t: f64) -> f64 {
        (**self).detuning(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: ODE_RTOL, atol: ODE_ATOL, max_steps: ODE_MAX_STEPS, h_init: None }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

type Y = [f64; 5];

fn to_y(s: &StateVector) -> Y {
    [s.a1.re, s.a1.im, s.a2.re, s.a2.im, s.phase]
}

fn from_y(y: &Y) -> StateVector {
    StateVector::new(Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]), y[4])
}

fn rhs<D: Drive>(field: &D, t: f64, y: &Y) -> Y {
    let u = field.rabi(t);
    let (s, c) = y[4].sin_cos();
    // −i U e^{−iδ} a₂
    let (pr, pi) = (c * y[2] + s * y[3], c * y[3] - s * y[2]);
    // −i U e^{+iδ} a₁
    let (qr, qi) = (c * y[0] - s * y[1], c * y[1] + s * y[0]);
    [u * pi, -u * pr, u * qi, -u * qr, field.detuning(t)]
}

/// Dense-output segment covering one accepted step.
#[derive(Debug, Clone)]
struct Segment {
    t: f64,
    h: f64,
    r: [Y; 5],
}

impl Segment {
    fn eval(&self, t: f64) -> Y {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        std::array::from_fn(|i| r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i]))))
    }
}

/// States at accepted steps plus the continuous extension between them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Largest deviation of |a₁|² + |a₂|² from its initial value.
    pub norm_drift: f64,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> StateVector {
        *self.states.last().expect("trajectory is never empty")
    }

    /// State at any time inside the integrated span (4th-order dense output).
    pub fn at(&self, t: f64) -> Result<StateVector> {
        let (t0, t1) = (self.start(), self.end());
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if t < lo || t > hi {
            return Err(Error::domain(format!("t = {t} outside integrated span [{lo}, {hi}]")));
        }
        if self.segments.is_empty() {
            return Ok(self.states[0]);
        }
        let forward = t1 >= t0;
        let idx = self.times.partition_point(|&x| if forward { x <= t } else { x >= t });
        let seg = idx.saturating_sub(1).min(self.segments.len() - 1);
        Ok(from_y(&self.segments[seg].eval(t)))
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(y: &Y, h: f64, terms: &[(f64, &Y)]) -> Y {
    let mut out = *y;
    for i in 0..5 {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

fn err_norm(y: &Y, y_new: &Y, err: &Y, opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..5 {
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / 5.0).sqrt()
}

fn initial_step<D: Drive>(field: &D, t0: f64, y0: &Y, f0: &Y, dir: f64, opts: &OdeOptions) -> f64 {
    let sc = |i: usize| opts.atol + opts.rtol * y0[i].abs();
    let d0 = ((0..5).map(|i| (y0[i] / sc(i)).powi(2)).sum::<f64>() / 5.0).sqrt();
    let d1 = ((0..5).map(|i| (f0[i] / sc(i)).powi(2)).sum::<f64>() / 5.0).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y0, dir * h0, &[(1.0, f0)]);
    let f1 = rhs(field, t0 + dir * h0, &y1);
    let d2 = ((0..5).map(|i| ((f1[i] - f0[i]) / sc(i)).powi(2)).sum::<f64>() / 5.0).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

/// Integrates the two-state system from `state0` at `t_span.0` to `t_span.1`
/// (either direction). The phase δ is carried as the fifth component.
pub fn integrate<D: Drive>(
    field: &D,
    state0: StateVector,
    t_span: (f64, f64),
    opts: &OdeOptions,
) -> Result<Trajectory> {
    integrate_with_stops(field, state0, t_span, &[], opts)
}

/// As [`integrate`], but steps are shortened so that every time in `stops`
/// (which must lie inside the span) is hit exactly by an accepted step.
pub fn integrate_with_stops<D: Drive>(
    field: &D,
    state0: StateVector,
    t_span: (f64, f64),
    stops: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::parameter("integration span must be finite"));
    }
    if !(opts.rtol >= 1e-13) || !(opts.atol > 0.0) {
        return Err(Error::parameter(format!(
            "tolerances need rtol ≥ 1e-13 and atol > 0, got ({}, {})",
            opts.rtol, opts.atol
        )));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut stops: Vec<f64> = stops.iter().copied().filter(|s| dir * (s - t0) > 0.0 && dir * (t1 - s) > 0.0).collect();
    stops.sort_by(|a, b| (dir * a).total_cmp(&(dir * b)));
    stops.dedup();
    stops.push(t1);
    let mut next_stop = 0;

    let norm0 = state0.norm_sqr();
    let mut y = to_y(&state0);
    let mut t = t0;
    let mut traj = Trajectory { times: vec![t0], states: vec![state0], norm_drift: 0.0, segments: vec![] };
    if t0 == t1 {
        return Ok(traj);
    }

    let mut k1 = rhs(field, t, &y);
    let span = (t1 - t0).abs();
    let mut h = opts.h_init.map(f64::abs).unwrap_or_else(|| initial_step(field, t, &y, &k1, dir, opts)).min(span);
    let h_min = 1e-14 * span.max(t0.abs()).max(1.0);
    let mut rejected_last = false;

    for _ in 0..opts.max_steps {
        let target = stops[next_stop];
        let remaining = dir * (target - t);
        let mut clipped = false;
        if h >= remaining {
            h = remaining;
            clipped = true;
        }
        let hs = dir * h;
        let k2 = rhs(field, t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = rhs(field, t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(field, t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(field, t + C5 * hs, &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = rhs(field, t + hs, &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if clipped { target } else { t + hs };
        let k7 = rhs(field, t_new, &y_new);
        let mut err = [0.0; 5];
        for i in 0..5 {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = err_norm(&y, &y_new, &err, opts);
        if !en.is_finite() {
            return Err(Error::Integration(format!("non-finite state near t = {t}")));
        }

        if en <= 1.0 {
            let mut r = [[0.0; 5]; 5];
            for i in 0..5 {
                let dy = y_new[i] - y[i];
                let bspl = hs * k1[i] - dy;
                r[0][i] = y[i];
                r[1][i] = dy;
                r[2][i] = bspl;
                r[3][i] = dy - hs * k7[i] - bspl;
                r[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            traj.segments.push(Segment { t, h: hs, r });
            t = t_new;
            y = y_new;
            k1 = k7;
            let s = from_y(&y);
            traj.norm_drift = traj.norm_drift.max((s.norm_sqr() - norm0).abs());
            traj.times.push(t);
            traj.states.push(s);
            if clipped {
                next_stop += 1;
                if next_stop == stops.len() {
                    return Ok(traj);
                }
            }
            let mut fac = 0.9 * en.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            // A clipped step says nothing about the natural size; don't shrink for it.
            if !clipped || fac > 1.0 {
                h *= fac;
            }
            rejected_last = false;
        } else {
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            rejected_last = true;
            if h < h_min {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
    }
    Err(Error::Integration(format!("exceeded {} steps", opts.max_steps)))
}

/// One-period transfer matrix in the co-moving basis (a₁e^{iδ}, a₂), in
/// which the coefficients are periodic even when ⟨δ_t⟩T is not a multiple
/// of 2π. Columns are the images of the two basis states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyMatrix {
    pub entries: [[Complex64; 2]; 2],
}

impl MonodromyMatrix {
    pub fn det(&self) -> Complex64 {
        let m = &self.entries;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let m = &self.entries;
        let tr = m[0][0] + m[1][1];
        let disc = (tr * tr - 4.0 * self.det()).sqrt();
        [(tr + disc) * 0.5, (tr - disc) * 0.5]
    }
}

/// Monodromy matrix, its eigenvalues and the Floquet exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSpectrum {
    pub matrix: MonodromyMatrix,
    pub eigenvalues: [Complex64; 2],
    /// arg(μ)/T mapped to [−Δ/2, Δ/2), Δ = 2π/T.
    pub exponents: [f64; 2],
    /// The two exponents coincide modulo Δ (within 1e-6 Δ).
    pub degenerate: bool,
}

/// Reduces `x` to [−m/2, m/2).
pub fn reduce_mod(x: f64, m: f64) -> f64 {
    let r = (x + 0.5 * m).rem_euclid(m) - 0.5 * m;
    if r >= 0.5 * m {
        r - m
    } else {
        r
    }
}

/// Distance between `x` and `y` on the circle of circumference `m`.
pub fn circular_distance(x: f64, y: f64, m: f64) -> f64 {
    reduce_mod(x - y, m).abs()
}

/// Integrates both basis states across one period starting at `t_ref`.
pub fn monodromy<D: Drive>(field: &D, period: f64, t_ref: f64, opts: &OdeOptions) -> Result<FloquetSpectrum> {
    if !(period > 0.0) {
        return Err(Error::parameter(format!("period must be > 0, got {period}")));
    }
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut cols = [[zero; 2]; 2];
    for (j, s0) in [StateVector::new(one, zero, 0.0), StateVector::new(zero, one, 0.0)].into_iter().enumerate() {
        let end = integrate(field, s0, (t_ref, t_ref + period), opts)?.final_state();
        cols[j] = [end.a1 * Complex64::from_polar(1.0, end.phase), end.a2];
    }
    let matrix = MonodromyMatrix { entries: [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]] };
    let eigenvalues = matrix.eigenvalues();
    let omega = 2.0 * std::f64::consts::PI / period;
    let exponents = eigenvalues.map(|mu| reduce_mod(mu.arg() / period, omega));
    let degenerate = circular_distance(exponents[0], exponents[1], omega) < 1e-6 * omega;
    Ok(FloquetSpectrum { matrix, eigenvalues, exponents, degenerate })
}

/// Period average (1/T)∫ δ_t dt by adaptive quadrature.
pub fn mean_detuning<D: Drive>(field: &D, period: f64, t_ref: f64) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::parameter(format!("period must be > 0, got {period}")));
    }
    Ok(quad::integrate(|t| field.detuning(t), t_ref, t_ref + period, QUAD_TOL, QUAD_TOL)? / period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn constant(u0: f64, d1: f64) -> FnDrive<impl Fn(f64) -> f64, impl Fn(f64) -> f64> {
        FnDrive { rabi: move |_| u0, detuning: move |_| d1 }
    }

    #[test]
    fn decoupled_populations_are_frozen() {
        let s0 = StateVector::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8), 0.0);
        let traj = integrate(&constant(0.0, 1.7), s0, (0.0, 30.0), &OdeOptions::default()).unwrap();
        for s in &traj.states {
            assert!((s.population2() - 0.64).abs() < 1e-13);
        }
        assert!((traj.final_state().phase - 1.7 * 30.0).abs() < 1e-9);
    }

    #[test]
    fn rabi_formula_from_ground_state() {
        let (u0, d1) = (1.0_f64, 2.0_f64);
        let r = (4.0 * u0 * u0 + d1 * d1).sqrt();
        let opts = OdeOptions::with_tolerances(1e-12, 1e-14);
        let stops: Vec<f64> = (1..=200).map(|k| 0.1 * k as f64).collect();
        let traj = integrate_with_stops(&constant(u0, d1), StateVector::ground(), (0.0, 20.0), &stops, &opts).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let p = 4.0 * u0 * u0 / (r * r) * (0.5 * r * t).sin().powi(2);
            assert!((s.population2() - p).abs() < 1e-10, "t={t}");
        }
        assert!(traj.norm_drift < 1e-11);
    }

    #[test]
    fn stops_are_hit_and_dense_output_is_accurate() {
        let opts = OdeOptions::with_tolerances(1e-12, 1e-14);
        let drive = constant(0.7, -0.4);
        let traj = integrate_with_stops(&drive, StateVector::ground(), (0.0, 5.0), &[1.0, 2.5], &opts).unwrap();
        assert!(traj.times.contains(&1.0) && traj.times.contains(&2.5));
        let exact = integrate_with_stops(&drive, StateVector::ground(), (0.0, 5.0), &[3.3], &opts).unwrap();
        let i = exact.times.iter().position(|&t| t == 3.3).unwrap();
        let dense = traj.at(3.3).unwrap();
        assert!((dense.a2 - exact.states[i].a2).norm() < 1e-9);
        assert!(traj.at(5.5).is_err());
    }

    #[test]
    fn backward_integration_round_trip() {
        let drive = FnDrive { rabi: |_| 1.3, detuning: |t: f64| 0.5 + 2.0 * t.cos() };
        let opts = OdeOptions::with_tolerances(1e-12, 1e-14);
        let fwd = integrate(&drive, StateVector::ground(), (0.0, 2.0 * PI), &opts).unwrap();
        let back = integrate(&drive, fwd.final_state(), (2.0 * PI, 0.0), &opts).unwrap();
        let s = back.final_state();
        assert!((s.a1 - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(s.a2.norm() < 1e-9 && s.phase.abs() < 1e-9);
        assert!(back.at(1.0).is_ok());
    }

    #[test]
    fn rejects_bad_tolerances() {
        let opts = OdeOptions::with_tolerances(1e-15, 1e-16);
        assert!(integrate(&constant(1.0, 1.0), StateVector::ground(), (0.0, 1.0), &opts).is_err());
    }

    #[test]
    fn constant_field_monodromy() {
        // Constant field: exponents (Δ₁ ± R)/2 reduced modulo Δ.
        let (u0, d1) = (0.8_f64, 0.9_f64);
        let r = (4.0 * u0 * u0 + d1 * d1).sqrt();
        let period = 2.0 * PI / 1.0;
        let spec = monodromy(&constant(u0, d1), period, 0.3, &OdeOptions::with_tolerances(1e-12, 1e-14)).unwrap();
        for lam in [(d1 + r) / 2.0, (d1 - r) / 2.0] {
            let d = spec.exponents.iter().map(|e| circular_distance(*e, lam, 1.0)).fold(f64::MAX, f64::min);
            assert!(d < 1e-9, "λ={lam} {:?}", spec.exponents);
        }
        for mu in spec.eigenvalues {
            assert!((mu.norm() - 1.0).abs() < 1e-10);
        }
        assert!((spec.matrix.det().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reduce_mod_range() {
        assert_eq!(reduce_mod(0.5, 1.0), -0.5);
        assert!((reduce_mod(2.414_213_562, 1.0) - 0.414_213_562).abs() < 1e-12);
        assert!((reduce_mod(-0.414_213_562, 1.0) + 0.414_213_562).abs() < 1e-12);
        assert!((circular_distance(0.49, -0.49, 1.0) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn mean_of_constant_detuning() {
        assert!((mean_detuning(&constant(1.0, 0.37), 2.0 * PI, 0.0).unwrap() - 0.37).abs() < 1e-14);
    }
}
