//! Exact solution of the N = 2 model.
//!
//! With R = √(4U₀² + Δ₁²) and z = √a e^{iΔ(t−t₀)}, a = (Δ₁+1)/(Δ₁−1)
//! (scaled units), the excited-state amplitude
//!
//! ```text
//! a₂ = z^{(Δ₁+R)/2} [ (R − 1)(Δ₁ − 1) + 2(R + Δ₁)/(1 − z) ]
//! ```
//!
//! solves the two-state system; R → −R gives the second fundamental
//! solution. The bracket is periodic, so (Δ₁ ± R)/2 are the Floquet
//! exponents. Every power of z goes through [`UnwoundPoint`] so that the
//! phase keeps accumulating from one period to the next.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fields::{phase_general, FieldConfig, N2Config};
use crate::heun::{generalized_rabi, SeriesSolution};
use crate::oracle::{circular_distance, integrate_with_stops, monodromy, reduce_mod, Drive, OdeOptions};
use crate::specfun::{FoldedBetaSum, UnwoundPoint};
use crate::state::StateVector;
use crate::Sign;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// R = √(4U₀² + Δ₁²), which exceeds |Δ₁| whenever U₀ > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedRabi {
    r: f64,
}

impl GeneralizedRabi {
    pub fn new(u0: f64, delta1: f64) -> Result<Self> {
        if !(u0 > 0.0) || !delta1.is_finite() || !u0.is_finite() {
            return Err(Error::parameter(format!("need finite U0 > 0 and Δ1, got ({u0}, {delta1})")));
        }
        Ok(Self { r: generalized_rabi(u0, delta1) })
    }

    pub fn value(&self) -> f64 {
        self.r
    }
}

fn check_n2_scaled(delta1: f64, u0: f64) -> Result<f64> {
    if !(delta1.abs() > 1.0) {
        return Err(Error::domain(format!("N = 2 model needs |Δ1| > 1, got {delta1}")));
    }
    Ok(GeneralizedRabi::new(u0, delta1)?.value())
}

/// The Heun function of the N = 2 model as three incomplete Beta functions,
/// B_z(R, −1) + k₁B_z(R+1, −1) + k₂B_z(R+2, −1), folded to elementary form.
/// Scaled Δ₁ and U₀.
pub fn hg_three_beta(delta1: f64, u0: f64, pt: UnwoundPoint) -> Result<Complex64> {
    let r = check_n2_scaled(delta1, u0)?;
    let k1 = 2.0 * delta1 * (1.0 - r) / ((delta1 + 1.0) * r);
    let k2 = (delta1 - 1.0) * (r - 1.0) / ((delta1 + 1.0) * (r + 1.0));
    let coeffs = [Complex64::new(1.0, 0.0), Complex64::new(k1, 0.0), Complex64::new(k2, 0.0)];
    FoldedBetaSum::new(&coeffs, Complex64::new(r, 0.0), Complex64::new(-1.0, 0.0))?.eval(pt, 1e-10)
}

/// The same function as a quasi-polynomial,
/// z^R [(z−1)(1+RΔ₁) − (z+1)(R+Δ₁)] / [R(R+1)(Δ₁+1)(z−1)].
pub fn hg_quasipoly(delta1: f64, u0: f64, pt: UnwoundPoint) -> Result<Complex64> {
    let r = check_n2_scaled(delta1, u0)?;
    let z = pt.to_complex();
    if (z - 1.0).norm() == 0.0 {
        return Err(Error::Singular("quasi-polynomial at z = 1".into()));
    }
    let num = (z - 1.0) * (1.0 + r * delta1) - (z + 1.0) * (r + delta1);
    Ok(pt.powc(Complex64::new(r, 0.0)) * num / (r * (r + 1.0) * (delta1 + 1.0) * (z - 1.0)))
}

/// Floquet exponent (Δ₁ ± R)/2 of the fundamental solution, scaled units.
pub fn floquet_exponent(cfg: &N2Config, sign: Sign) -> f64 {
    let d1 = cfg.scaled_delta1();
    0.5 * (d1 + sign.factor() * generalized_rabi(cfg.scaled_u0(), d1))
}

/// (a₂, da₂/dt) of the fundamental solution with R replaced by ±R; C₀ = 1.
pub fn amplitude_n2(cfg: &N2Config, sign: Sign, t: f64) -> (Complex64, Complex64) {
    let d1 = cfg.scaled_delta1();
    let r = sign.factor() * generalized_rabi(cfg.scaled_u0(), d1);
    let lambda = Complex64::new(0.5 * (d1 + r), 0.0);
    let pt = UnwoundPoint::new(cfg.a().sqrt(), cfg.tau(t)).expect("a > 0 for |Δ1| > 1");
    let z = pt.to_complex();
    let w = 1.0 / (1.0 - z);
    let bracket = (r - 1.0) * (d1 - 1.0) + 2.0 * (r + d1) * w;
    let dbracket = 2.0 * (r + d1) * w * w;
    let zl = pt.powc(lambda);
    (zl * bracket, I * cfg.delta * zl * (lambda * bracket + z * dbracket))
}

/// δ(t) = ∫_{t₀}^t δ_t dt' for the N = 2 model.
pub fn phase_n2(cfg: &N2Config, t: f64) -> f64 {
    phase_general(&cfg.to_field_config(), t)
}

/// a₁ = i (da₂/dt) e^{−iδ} / U from the second equation of the system.
pub fn recover_a1(rabi: f64, a2_derivative: Complex64, phase: f64) -> Result<Complex64> {
    if rabi == 0.0 || !rabi.is_finite() {
        return Err(Error::Singular(format!("cannot recover a1 with U = {rabi}")));
    }
    Ok(I * a2_derivative * Complex64::from_polar(1.0, -phase) / rabi)
}

/// Two independent excited-state amplitudes of a constant-U field.
pub trait FundamentalSystem {
    /// Constant Rabi frequency U₀.
    fn rabi(&self) -> f64;
    /// (a₂, da₂/dt) of the member labelled by `sign`.
    fn amplitude(&self, sign: Sign, t: f64) -> Result<(Complex64, Complex64)>;
    /// δ(t), vanishing at the field's reference time t₀.
    fn phase(&self, t: f64) -> f64;
}

impl FundamentalSystem for N2Config {
    fn rabi(&self) -> f64 {
        self.u0
    }

    fn amplitude(&self, sign: Sign, t: f64) -> Result<(Complex64, Complex64)> {
        Ok(amplitude_n2(self, sign, t))
    }

    fn phase(&self, t: f64) -> f64 {
        phase_n2(self, t)
    }
}

/// Fundamental pair z^{α₁}u(z) built from Beta series, one per sign of α₁.
/// Only terminating members of the general family can be evaluated on the
/// physical circle |z| = √a, which lies outside the radius min(1, a) of an
/// untruncated series.
#[derive(Debug, Clone)]
pub struct SeriesSystem {
    pub plus: SeriesSolution,
    pub minus: SeriesSolution,
}

impl SeriesSystem {
    pub fn new(cfg: &FieldConfig, max_terms: usize) -> Result<Self> {
        Ok(Self {
            plus: SeriesSolution::new(cfg, Sign::Plus, max_terms)?,
            minus: SeriesSolution::new(cfg, Sign::Minus, max_terms)?,
        })
    }

    pub fn config(&self) -> &FieldConfig {
        &self.plus.cfg
    }
}

impl FundamentalSystem for SeriesSystem {
    fn rabi(&self) -> f64 {
        self.plus.cfg.u0
    }

    fn amplitude(&self, sign: Sign, t: f64) -> Result<(Complex64, Complex64)> {
        match sign {
            Sign::Plus => self.plus.amplitude(t),
            Sign::Minus => self.minus.amplitude(t),
        }
    }

    fn phase(&self, t: f64) -> f64 {
        phase_general(&self.plus.cfg, t)
    }
}

/// C₊·sol₊ + C₋·sol₋ fitted to a given state at `t_start`.
#[derive(Debug, Clone)]
pub struct MatchedSolution<S> {
    pub system: S,
    /// (C₊, C₋)
    pub coeffs: [Complex64; 2],
    pub t_start: f64,
    pub initial: StateVector,
    /// δ(t) = system.phase(t) + phase_offset reproduces `initial.phase`.
    pub phase_offset: f64,
    /// |det| of the fundamental matrix over the product of its column norms.
    pub wronskian: f64,
}

/// Column (a₁, a₂) of the fundamental matrix at t.
fn fundamental_column<S: FundamentalSystem>(sys: &S, sign: Sign, t: f64, phase: f64) -> Result<[Complex64; 2]> {
    let (a2, da2) = sys.amplitude(sign, t)?;
    Ok([recover_a1(sys.rabi(), da2, phase)?, a2])
}

/// Normalised Wronskian of the two fundamental solutions at t.
pub fn normalized_wronskian<S: FundamentalSystem>(sys: &S, t: f64) -> Result<f64> {
    let phase = sys.phase(t);
    let p = fundamental_column(sys, Sign::Plus, t, phase)?;
    let m = fundamental_column(sys, Sign::Minus, t, phase)?;
    let det = p[0] * m[1] - m[0] * p[1];
    let norms = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt() * (m[0].norm_sqr() + m[1].norm_sqr()).sqrt();
    Ok(det.norm() / norms)
}

/// Solves the 2×2 system that makes the fundamental combination equal
/// `state0` at `t_start`. The accumulated phase is anchored at
/// `state0.phase`, as the oracle does.
pub fn match_initial<S: FundamentalSystem>(system: S, state0: StateVector, t_start: f64) -> Result<MatchedSolution<S>> {
    let phase_offset = state0.phase - system.phase(t_start);
    let p = fundamental_column(&system, Sign::Plus, t_start, state0.phase)?;
    let m = fundamental_column(&system, Sign::Minus, t_start, state0.phase)?;
    let det = p[0] * m[1] - m[0] * p[1];
    let norms = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt() * (m[0].norm_sqr() + m[1].norm_sqr()).sqrt();
    let wronskian = det.norm() / norms;
    if !(wronskian > 1e-12) {
        return Err(Error::Singular(format!(
            "fundamental solutions are dependent (normalised Wronskian {wronskian:e})"
        )));
    }
    let c_plus = (state0.a1 * m[1] - m[0] * state0.a2) / det;
    let c_minus = (p[0] * state0.a2 - state0.a1 * p[1]) / det;
    Ok(MatchedSolution { system, coeffs: [c_plus, c_minus], t_start, initial: state0, phase_offset, wronskian })
}

impl<S: FundamentalSystem> MatchedSolution<S> {
    pub fn phase(&self, t: f64) -> f64 {
        self.system.phase(t) + self.phase_offset
    }

    /// (a₂, da₂/dt) of the matched combination.
    pub fn a2(&self, t: f64) -> Result<(Complex64, Complex64)> {
        let (p, dp) = self.system.amplitude(Sign::Plus, t)?;
        let (m, dm) = self.system.amplitude(Sign::Minus, t)?;
        Ok((self.coeffs[0] * p + self.coeffs[1] * m, self.coeffs[0] * dp + self.coeffs[1] * dm))
    }

    pub fn state(&self, t: f64) -> Result<StateVector> {
        let (a2, da2) = self.a2(t)?;
        let phase = self.phase(t);
        Ok(StateVector::new(recover_a1(self.system.rabi(), da2, phase)?, a2, phase))
    }
}

/// Matched analytic amplitude against the numerical oracle on a time grid.
#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub times: Vec<f64>,
    pub analytic: Vec<StateVector>,
    pub oracle: Vec<StateVector>,
    /// max |a₂,analytic − a₂,oracle|
    pub max_deviation: f64,
    pub norm_drift: f64,
}

/// Integrates `drive` from the matched initial state to `t_end` and compares
/// a₂ at `n_samples` equally spaced times (both ends included).
pub fn compare_with_oracle<S: FundamentalSystem, D: Drive>(
    matched: &MatchedSolution<S>,
    drive: &D,
    t_end: f64,
    n_samples: usize,
    opts: &OdeOptions,
) -> Result<OracleComparison> {
    if n_samples < 2 {
        return Err(Error::parameter("need at least two samples"));
    }
    let t0 = matched.t_start;
    let mut times: Vec<f64> = (0..n_samples).map(|k| t0 + (t_end - t0) * k as f64 / (n_samples - 1) as f64).collect();
    times[n_samples - 1] = t_end;
    let traj = integrate_with_stops(drive, matched.initial, (t0, t_end), &times, opts)?;
    let mut analytic = Vec::with_capacity(n_samples);
    let mut oracle = Vec::with_capacity(n_samples);
    let mut max_deviation = 0.0_f64;
    for &t in &times {
        let a = matched.state(t)?;
        let o = traj.at(t)?;
        max_deviation = max_deviation.max((a.a2 - o.a2).norm());
        analytic.push(a);
        oracle.push(o);
    }
    Ok(OracleComparison { times, analytic, oracle, max_deviation, norm_drift: traj.norm_drift })
}

/// Analytic Floquet exponents, optionally joined with the monodromy oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetReport {
    /// (Δ₁ − R)/2, scaled units.
    pub lambda1: f64,
    /// (Δ₁ + R)/2, scaled units.
    pub lambda2: f64,
    pub monodromy_eigs: Option<[Complex64; 2]>,
    /// Oracle exponents in scaled units, reduced to [−1/2, 1/2).
    pub oracle_exponents: Option<[f64; 2]>,
    /// Set distance between analytic and oracle exponents modulo 1 (scaled).
    pub residual_mod_delta: Option<f64>,
    /// max ||μ| − 1| over the monodromy eigenvalues.
    pub modulus_defect: Option<f64>,
}

pub fn floquet_analytic(cfg: &N2Config) -> FloquetReport {
    FloquetReport {
        lambda1: floquet_exponent(cfg, Sign::Minus),
        lambda2: floquet_exponent(cfg, Sign::Plus),
        monodromy_eigs: None,
        oracle_exponents: None,
        residual_mod_delta: None,
        modulus_defect: None,
    }
}

/// Distance between two unordered pairs on the circle of circumference `m`.
pub fn pair_distance(x: [f64; 2], y: [f64; 2], m: f64) -> f64 {
    let d = |p: f64, q: f64| circular_distance(p, q, m);
    (d(x[0], y[0]).max(d(x[1], y[1]))).min(d(x[0], y[1]).max(d(x[1], y[0])))
}

/// [`floquet_analytic`] plus the monodromy over [t_ref, t_ref + T].
pub fn floquet_report(cfg: &N2Config, t_ref: f64, opts: &OdeOptions) -> Result<FloquetReport> {
    let mut report = floquet_analytic(cfg);
    let spec = monodromy(cfg, cfg.period(), t_ref, opts)?;
    let scaled = spec.exponents.map(|e| reduce_mod(e / cfg.delta, 1.0));
    report.residual_mod_delta = Some(pair_distance([report.lambda1, report.lambda2], scaled, 1.0));
    report.modulus_defect = Some(spec.eigenvalues.iter().map(|mu| (mu.norm() - 1.0).abs()).fold(0.0, f64::max));
    report.monodromy_eigs = Some(spec.eigenvalues);
    report.oracle_exponents = Some(scaled);
    Ok(report)
}

/// Fourier coefficients of the periodic bracket of the fundamental solution.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicContent {
    /// Harmonic orders −n..=n; order k multiplies e^{ikΔ(t−t₀)}.
    pub orders: Vec<i64>,
    /// From an FFT of the sampled bracket.
    pub numeric: Vec<Complex64>,
    /// From the geometric series of 1/(1 − z) in the convergent direction.
    pub analytic: Vec<Complex64>,
}

impl HarmonicContent {
    pub fn numeric_at(&self, order: i64) -> Option<Complex64> {
        let idx = usize::try_from(order + (self.orders.len() as i64 - 1) / 2).ok()?;
        self.numeric.get(idx).copied()
    }

    pub fn analytic_at(&self, order: i64) -> Option<Complex64> {
        let idx = usize::try_from(order + (self.orders.len() as i64 - 1) / 2).ok()?;
        self.analytic.get(idx).copied()
    }
}

/// Analytic ladder: for |z| > 1, 1/(1 − z) = −Σ_{n≥1} z^{−n} occupies only
/// negative orders; for |z| < 1 it is Σ_{n≥0} zⁿ on the non-negative side.
pub fn harmonic_ladder(cfg: &N2Config, sign: Sign, order: i64) -> Complex64 {
    let d1 = cfg.scaled_delta1();
    let r = sign.factor() * generalized_rabi(cfg.scaled_u0(), d1);
    let a = cfg.a();
    let constant = (r - 1.0) * (d1 - 1.0);
    let k = 2.0 * (r + d1);
    let n = order.unsigned_abs() as f64;
    let v = if a > 1.0 {
        match order {
            0 => constant,
            o if o < 0 => -k * a.powf(-0.5 * n),
            _ => 0.0,
        }
    } else {
        match order {
            0 => constant + k,
            o if o > 0 => k * a.powf(0.5 * n),
            _ => 0.0,
        }
    };
    Complex64::new(v, 0.0)
}

pub fn harmonic_content(cfg: &N2Config, sign: Sign, n_harmonics: usize) -> Result<HarmonicContent> {
    if n_harmonics < 1 {
        return Err(Error::parameter("need at least one harmonic"));
    }
    let d1 = cfg.scaled_delta1();
    let r = sign.factor() * generalized_rabi(cfg.scaled_u0(), d1);
    let sa = cfg.a().sqrt();
    // Enough samples that the aliased tail (decaying like a^{−|k|/2}) is below 1e-17.
    let decay = sa.ln().abs();
    let needed = (4.0 * 39.2 / decay).min((1u64 << 22) as f64) as usize;
    let m = needed.max(4 * n_harmonics + 4).max(256).next_power_of_two();
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let z = Complex64::from_polar(sa, theta);
            (r - 1.0) * (d1 - 1.0) + 2.0 * (r + d1) / (1.0 - z)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let n = n_harmonics as i64;
    let orders: Vec<i64> = (-n..=n).collect();
    let numeric = orders.iter().map(|&k| buf[k.rem_euclid(m as i64) as usize] / m as f64).collect();
    let analytic = orders.iter().map(|&k| harmonic_ladder(cfg, sign, k)).collect();
    Ok(HarmonicContent { orders, numeric, analytic })
}
