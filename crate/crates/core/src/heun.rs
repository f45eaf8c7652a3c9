//! General Heun analytics for the constant-amplitude family.
//!
//! With z(τ) = √a e^{iτ} the excited-state amplitude is
//! a₂ = z^{α₁} u(z), where u solves the general Heun equation
//!
//! ```text
//! u'' + (γ/z + δ/(z−1) + ε/(z−a)) u' + (αβz − q)/(z(z−1)(z−a)) u = 0
//! ```
//!
//! with α = 0. That makes u expandable in incomplete Beta functions,
//! u = Σ cₙ B_z(1 − γ + n, 1 − δ), whose coefficients obey
//!
//! ```text
//! Rₙ cₙ + Qₙ₋₁ cₙ₋₁ + Pₙ₋₂ cₙ₋₂ = 0,
//! Rₙ = a n (n − γ),
//! Qₙ = −a n (n + 1 − γ − δ) − (n + ε)(n + 1 − γ) − q,
//! Pₙ = (n + 2 − γ − δ)(n + ε).
//! ```
//!
//! The series stops after cₙ when Pₙ = 0 (ε = −N or γ + δ − 2 = N) and the
//! q-equation c_{N+1} = 0 holds.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::FieldConfig;
use crate::poly::Poly;
use crate::specfun::{inc_beta_derivative, inc_beta_unwound, FoldedBetaSum, UnwoundPoint};
use crate::tol::{FUCHS_TOL, TERMINATION_REL, TRIVIAL_ROOT_TOL};
use crate::Sign;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Constants of the general Heun equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeunParams {
    pub a: f64,
    pub q: Complex64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub delta: Complex64,
    pub epsilon: Complex64,
}

impl HeunParams {
    /// |γ + δ + ε − α − β − 1|
    pub fn fuchs_residual(&self) -> f64 {
        (self.gamma + self.delta + self.epsilon - self.alpha - self.beta - 1.0).norm()
    }

    pub fn satisfies_fuchs(&self) -> bool {
        self.fuchs_residual() <= FUCHS_TOL * (1.0 + self.gamma.norm() + self.beta.norm())
    }

    /// Left-hand side of the Heun equation for given u, u', u'' at z.
    pub fn residual(&self, z: Complex64, u: Complex64, du: Complex64, d2u: Complex64) -> Complex64 {
        let a = re(self.a);
        d2u + (self.gamma / z + self.delta / (z - 1.0) + self.epsilon / (z - a)) * du
            + (self.alpha * self.beta * z - self.q) / (z * (z - 1.0) * (z - a)) * u
    }
}

/// Exponents of the prefactor z^{α₁}(z−1)^{α₂}(z−a)^{α₃}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefactorExponents {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub sign: Sign,
}

/// √(4U₀² + Δ₁²) in scaled units.
pub fn generalized_rabi(u0: f64, delta1: f64) -> f64 {
    (4.0 * u0 * u0 + delta1 * delta1).sqrt()
}

/// Heun constants for the field, in scaled time (Δ = 1):
/// (γ, δ, ε, α, β, q) = (1 ± R, Δ₂, −Δ₂, 0, ±R, (a − 1)Δ₂α₁) with
/// α₁ = Δ₁/2 ± √(U₀² + Δ₁²/4).
pub fn map_to_heun(cfg: &FieldConfig, sign: Sign) -> (HeunParams, PrefactorExponents) {
    let s = cfg.scaled();
    let r = sign.factor() * generalized_rabi(s.u0, s.delta1);
    let alpha1 = 0.5 * (s.delta1 + r);
    let hp = HeunParams {
        a: s.a,
        q: re((s.a - 1.0) * s.delta2 * alpha1),
        alpha: ZERO,
        beta: re(r),
        gamma: re(1.0 + r),
        delta: re(s.delta2),
        epsilon: re(-s.delta2),
    };
    (hp, PrefactorExponents { alpha1, alpha2: 0.0, alpha3: 0.0, sign })
}

/// (Rₙ, Qₙ, Pₙ) of the three-term recurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceCoeffs {
    pub r: Complex64,
    pub q: Complex64,
    pub p: Complex64,
}

pub fn recurrence_coeffs(hp: &HeunParams, n: usize) -> RecurrenceCoeffs {
    let nf = n as f64;
    let a = hp.a;
    let (g, d, e) = (hp.gamma, hp.delta, hp.epsilon);
    RecurrenceCoeffs {
        r: a * nf * (nf - g),
        q: -a * nf * (nf + 1.0 - g - d) - (nf + e) * (nf + 1.0 - g) - hp.q,
        p: (nf + 2.0 - g - d) * (nf + e),
    }
}

/// Expansion u = Σ cₙ B_z(γ₀ + n, δₙ) with γ₀ = 1 − γ and δₙ = 1 − δ.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSeries {
    pub gamma0: Complex64,
    pub delta_n: Complex64,
    /// c₀ = 1, c₁, …; for a terminated series this includes the two
    /// vanishing coefficients c_{N+1}, c_{N+2}.
    pub coeffs: Vec<Complex64>,
    pub terminated: bool,
    /// Index of the last retained coefficient when terminated.
    pub n_terminal: Option<usize>,
}

impl BetaSeries {
    /// Coefficients that take part in the sum.
    pub fn terms(&self) -> &[Complex64] {
        match self.n_terminal {
            Some(n) => &self.coeffs[..=n],
            None => &self.coeffs,
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Forward recursion from c₀ = 1 for up to `max_terms` further coefficients.
/// Stops early once two consecutive coefficients drop below
/// `TERMINATION_REL · max|cₙ|`.
pub fn expand(hp: &HeunParams, max_terms: usize) -> Result<BetaSeries> {
    if hp.alpha.norm() > 1e-12 {
        return Err(Error::domain(format!(
            "Beta expansion needs a zero exponent at infinity (α = 0), got α = {}",
            hp.alpha
        )));
    }
    let mut coeffs = vec![ONE];
    let mut max_c = 1.0_f64;
    let mut n_terminal = None;
    for n in 1..=max_terms {
        let rc = recurrence_coeffs(hp, n);
        let mut num = recurrence_coeffs(hp, n - 1).q * coeffs[n - 1];
        if n >= 2 {
            num += recurrence_coeffs(hp, n - 2).p * coeffs[n - 2];
        }
        let r_scale = hp.a.abs() * n as f64 * (n as f64 + hp.gamma.norm());
        let c = if rc.r.norm() <= 1e-14 * r_scale {
            if num.norm() > 1e-12 * max_c * (1.0 + r_scale) {
                return Err(Error::ResonantRecurrence { n });
            }
            ZERO
        } else {
            -num / rc.r
        };
        if !c.is_finite() {
            return Err(Error::Convergence(format!("Beta-series coefficient c_{n} overflowed")));
        }
        coeffs.push(c);
        max_c = max_c.max(c.norm());
        if n >= 2 && coeffs[n].norm() <= TERMINATION_REL * max_c && coeffs[n - 1].norm() <= TERMINATION_REL * max_c {
            n_terminal = Some(n - 2);
            break;
        }
    }
    Ok(BetaSeries {
        gamma0: ONE - hp.gamma,
        delta_n: ONE - hp.delta,
        coeffs,
        terminated: n_terminal.is_some(),
        n_terminal,
    })
}

/// Which factor of P_N is made to vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationBranch {
    /// ε = −N
    Epsilon,
    /// γ + δ − 2 = N
    GammaDelta,
}

/// Which termination precondition `hp` satisfies for index `n`, if any.
pub fn termination_branch(hp: &HeunParams, n: usize) -> Option<TerminationBranch> {
    let nf = n as f64;
    if (hp.epsilon + nf).norm() <= 1e-12 * (1.0 + nf) {
        Some(TerminationBranch::Epsilon)
    } else if (hp.gamma + hp.delta - 2.0 - nf).norm() <= 1e-12 * (1.0 + nf + hp.gamma.norm()) {
        Some(TerminationBranch::GammaDelta)
    } else {
        None
    }
}

/// Three-term determinant recursion Dₙ = Qₙ₋₁Dₙ₋₁ − Rₙ₋₁Pₙ₋₂Dₙ₋₂,
/// D₀ = 1, with entries supplied as polynomials. Returns D_{N+1}, which is
/// proportional to c_{N+1}: c_{N+1} = (−1)^{N+1} D_{N+1} / Π_{k≤N+1} R_k.
fn determinant<FR, FQ, FP>(n_terminal: usize, r: FR, q: FQ, p: FP) -> Poly
where
    FR: Fn(usize) -> Poly,
    FQ: Fn(usize) -> Poly,
    FP: Fn(usize) -> Poly,
{
    let mut d_prev = Poly::constant(ONE);
    let mut d = q(0);
    for n in 2..=n_terminal + 1 {
        let next = &(&q(n - 1) * &d) - &(&(&r(n - 1) * &p(n - 2)) * &d_prev);
        d_prev = d;
        d = next;
    }
    d
}

/// The q-equation c_{N+1} = 0 as a degree-(N+1) polynomial in the accessory
/// parameter q. The value of `hp.q` is ignored.
pub fn q_polynomial(hp: &HeunParams, n_terminal: usize) -> Result<Poly> {
    if termination_branch(hp, n_terminal).is_none() {
        return Err(Error::parameter(format!("q-equation for N = {n_terminal} needs ε = −N or γ + δ − 2 = N")));
    }
    let base = HeunParams { q: ZERO, ..*hp };
    Ok(determinant(
        n_terminal,
        |n| Poly::constant(recurrence_coeffs(&base, n).r),
        |n| Poly::linear(recurrence_coeffs(&base, n).q, -ONE),
        |n| Poly::constant(recurrence_coeffs(&base, n).p),
    ))
}

/// c_{N+1} = 0 for the physical parameterisation (scaled U₀, Δ₁, Δ₂, branch
/// `sign`) written as a polynomial in the singular point a, with
/// q = (a − 1)Δ₂α₁ substituted.
pub fn constraint_polynomial(u0: f64, delta1: f64, delta2: f64, sign: Sign, n_terminal: usize) -> Poly {
    let r = sign.factor() * generalized_rabi(u0, delta1);
    let g = 1.0 + r;
    let alpha1 = 0.5 * (delta1 + r);
    let (d, e) = (delta2, -delta2);
    let k = delta2 * alpha1;
    determinant(
        n_terminal,
        |n| {
            let nf = n as f64;
            Poly::linear(ZERO, re(nf * (nf - g)))
        },
        |n| {
            let nf = n as f64;
            Poly::linear(re(-(nf + e) * (nf + 1.0 - g) + k), re(-nf * (nf + 1.0 - g - d) - k))
        },
        |n| {
            let nf = n as f64;
            Poly::constant(re((nf + 2.0 - g - d) * (nf + e)))
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrability {
    /// Only a = 1 or Δ₂ = 0 survive: the constant-detuning Rabi model.
    Trivial,
    /// The constraint involves the detuning parameters only.
    Unconditional,
    /// The constraint moves with U₀.
    Conditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminationRecord {
    pub n: usize,
    pub integrability: Integrability,
    /// Roots of the a-constraint other than a = 1.
    pub constraint_roots: Vec<Complex64>,
    /// The real roots with a > 0, a ≠ 1.
    pub admissible_a: Vec<f64>,
    /// Largest displacement of a constraint root when U₀ is rescaled.
    pub u0_drift: f64,
    /// Admissible roots reached through γ + δ − 2 = N instead (both signs).
    pub gamma_delta_admissible: Vec<f64>,
}

fn nontrivial_roots(poly: &Poly) -> Result<Option<Vec<Complex64>>> {
    let p = poly.chop(1e-13);
    if p.is_zero() || p.norm() == 0.0 {
        return Ok(None);
    }
    let (rest, _) = p.strip_root(ONE, 1e-10);
    let mut roots = rest.chop(1e-13).roots()?;
    roots.retain(|r| (r - ONE).norm() > TRIVIAL_ROOT_TOL);
    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(Some(roots))
}

fn admissible(roots: &[Complex64]) -> Vec<f64> {
    let mut out: Vec<f64> =
        roots.iter().filter(|r| r.im.abs() <= 1e-9 * (1.0 + r.re.abs()) && r.re > 0.0).map(|r| r.re).collect();
    out.sort_by(f64::total_cmp);
    out
}

fn set_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let one_way = |x: &[Complex64], y: &[Complex64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm() / (1.0 + p.norm())).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// For each N ≤ `n_max`, imposes Δ₂ = N (ε = −N) and classifies the
/// remaining q-equation c_{N+1} = 0, read as a constraint on a, by how its
/// roots respond to changes in U₀. Only the scaled U₀ and Δ₁ of `cfg` are
/// used. The alternative γ + δ − 2 = N branch is probed as well.
pub fn termination_search(cfg: &FieldConfig, n_max: usize) -> Result<Vec<TerminationRecord>> {
    cfg.validate()?;
    let s = cfg.scaled();
    let (u0, d1) = (s.u0, s.delta1);
    let mut records = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let delta2 = n as f64;
        let base = nontrivial_roots(&constraint_polynomial(u0, d1, delta2, Sign::Minus, n))?;
        let (integrability, roots, drift) = match base {
            None => (Integrability::Trivial, vec![], 0.0),
            Some(roots) if roots.is_empty() => (Integrability::Trivial, roots, 0.0),
            Some(roots) => {
                let mut drift = 0.0_f64;
                for factor in [0.5, 1.7] {
                    let moved = nontrivial_roots(&constraint_polynomial(u0 * factor, d1, delta2, Sign::Minus, n))?
                        .unwrap_or_default();
                    drift = drift.max(set_distance(&roots, &moved));
                }
                let kind = if drift <= 1e-8 { Integrability::Unconditional } else { Integrability::Conditional };
                (kind, roots, drift)
            }
        };

        let mut gamma_delta_admissible = Vec::new();
        for sign in [Sign::Plus, Sign::Minus] {
            let gamma = 1.0 + sign.factor() * generalized_rabi(u0, d1);
            let delta2_alt = n as f64 + 2.0 - gamma;
            if let Some(r) = nontrivial_roots(&constraint_polynomial(u0, d1, delta2_alt, sign, n))? {
                gamma_delta_admissible.extend(admissible(&r));
            }
        }

        records.push(TerminationRecord {
            n,
            integrability,
            admissible_a: admissible(&roots),
            constraint_roots: roots,
            u0_drift: drift,
            gamma_delta_admissible,
        });
    }
    Ok(records)
}

/// Radius of convergence min(1, a) of an untruncated Beta series: the
/// recurrence coefficients grow like max(1, 1/a)ⁿ.
pub fn convergence_radius(hp: &HeunParams) -> f64 {
    hp.a.min(1.0)
}

/// Value of the Beta series at z. A terminated series is summed directly
/// for |z| < 1 and folded to elementary form elsewhere; an untruncated one
/// is only accepted inside its radius of convergence.
pub fn eval_series(bs: &BetaSeries, hp: &HeunParams, pt: UnwoundPoint) -> Result<Complex64> {
    if !bs.terminated && pt.modulus() >= convergence_radius(hp) {
        return Err(Error::domain(format!(
            "untruncated Beta series diverges at |z| = {} (radius {})",
            pt.modulus(),
            convergence_radius(hp)
        )));
    }
    if pt.modulus() < 1.0 {
        return bs
            .terms()
            .iter()
            .enumerate()
            .map(|(n, c)| Ok(c * inc_beta_unwound(bs.gamma0 + n as f64, bs.delta_n, pt)?))
            .sum();
    }
    FoldedBetaSum::new(bs.terms(), bs.gamma0, bs.delta_n)?.eval(pt, 1e-10)
}

/// du/dz of the Beta series (termwise, elementary).
pub fn eval_series_derivative(bs: &BetaSeries, pt: UnwoundPoint) -> Complex64 {
    bs.terms().iter().enumerate().map(|(n, c)| c * inc_beta_derivative(bs.gamma0 + n as f64, bs.delta_n, pt)).sum()
}

/// a₂(t) = z^{α₁} u(z) along z(t) = √a e^{iΔ(t − t₀)}.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    pub cfg: FieldConfig,
    pub params: HeunParams,
    pub prefactor: PrefactorExponents,
    pub series: BetaSeries,
}

impl SeriesSolution {
    pub fn new(cfg: &FieldConfig, sign: Sign, max_terms: usize) -> Result<Self> {
        cfg.validate()?;
        let (params, prefactor) = map_to_heun(cfg, sign);
        let series = expand(&params, max_terms)?;
        Ok(Self { cfg: *cfg, params, prefactor, series })
    }

    pub fn point(&self, t: f64) -> UnwoundPoint {
        UnwoundPoint::new(self.cfg.a.sqrt(), self.cfg.tau(t)).expect("a > 0 is validated")
    }

    /// (a₂, da₂/dt) at physical time t.
    pub fn amplitude(&self, t: f64) -> Result<(Complex64, Complex64)> {
        let pt = self.point(t);
        let u = eval_series(&self.series, &self.params, pt)?;
        let du = eval_series_derivative(&self.series, pt);
        let alpha1 = re(self.prefactor.alpha1);
        let zp = pt.powc(alpha1);
        let a2 = zp * u;
        let da2 = Complex64::new(0.0, self.cfg.delta) * zp * (alpha1 * u + pt.to_complex() * du);
        Ok((a2, da2))
    }
}
