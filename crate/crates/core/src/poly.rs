//! Dense univariate polynomials with complex coefficients.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients in ascending order: `coeffs[k]` multiplies x^k.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// c₀ + c₁ x
    pub fn linear(c0: Complex64, c1: Complex64) -> Self {
        Self::new(vec![c0, c1])
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| *c == ZERO) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Degree of the polynomial; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest coefficient modulus.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Drops coefficients below `rel_tol · norm()` from the top end.
    pub fn chop(&self, rel_tol: f64) -> Self {
        let cut = rel_tol * self.norm();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.norm() <= cut) {
            coeffs.pop();
        }
        Self::new(coeffs)
    }

    /// Synthetic division by (x − r); returns quotient and remainder.
    pub fn deflate(&self, r: Complex64) -> (Self, Complex64) {
        if self.coeffs.is_empty() {
            return (Self::zero(), ZERO);
        }
        let n = self.coeffs.len();
        let mut quotient = vec![ZERO; n - 1];
        let mut carry = ZERO;
        for k in (0..n).rev() {
            let v = self.coeffs[k] + carry * r;
            if k == 0 {
                return (Self::new(quotient), v);
            }
            quotient[k - 1] = v;
            carry = v;
        }
        unreachable!()
    }

    /// Removes the factor (x − r) as long as it divides within `rel_tol`;
    /// returns the reduced polynomial and the multiplicity removed.
    pub fn strip_root(&self, r: Complex64, rel_tol: f64) -> (Self, usize) {
        let mut p = self.clone();
        let mut mult = 0;
        while p.degree().is_some_and(|d| d > 0) {
            let scale: f64 = p.coeffs.iter().enumerate().map(|(k, c)| c.norm() * r.norm().powi(k as i32)).sum();
            let (q, rem) = p.deflate(r);
            if rem.norm() > rel_tol * scale {
                break;
            }
            p = q;
            mult += 1;
        }
        (p, mult)
    }

    /// All complex roots, from the eigenvalues of the companion matrix,
    /// each refined by a few Newton steps on the original polynomial.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let deg = self.degree().ok_or_else(|| Error::parameter("roots of the zero polynomial are undefined"))?;
        if deg == 0 {
            return Ok(vec![]);
        }
        let lead = self.coeffs[deg];
        let mut companion = DMatrix::<Complex64>::zeros(deg, deg);
        for i in 1..deg {
            companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..deg {
            companion[(i, deg - 1)] = -self.coeffs[i] / lead;
        }
        let eig =
            companion.schur().eigenvalues().ok_or_else(|| Error::Convergence("companion matrix eigenvalues".into()))?;
        let dp = self.derivative();
        Ok(eig.iter().map(|&r| self.polish(&dp, r)).collect())
    }

    fn polish(&self, dp: &Poly, mut r: Complex64) -> Complex64 {
        let mut best = (self.eval(r).norm(), r);
        for _ in 0..8 {
            let d = dp.eval(r);
            if d.norm() == 0.0 {
                break;
            }
            r -= self.eval(r) / d;
            let res = self.eval(r).norm();
            if !res.is_finite() {
                break;
            }
            if res < best.0 {
                best = (res, r);
            }
        }
        best.1
    }
}

impl Add for &Poly {
    type Output = Poly;

    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new(
            (0..n)
                .map(|k| self.coeffs.get(k).copied().unwrap_or(ZERO) + rhs.coeffs.get(k).copied().unwrap_or(ZERO))
                .collect(),
        )
    }
}

impl Neg for &Poly {
    type Output = Poly;

    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;

    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}
