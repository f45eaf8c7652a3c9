use num_complex::Complex64;

/// Probability amplitudes of the ground and excited levels together with the
/// accumulated phase δ(t) = ∫ δ_t dt of the frequency modulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub a1: Complex64,
    pub a2: Complex64,
    pub phase: f64,
}

impl StateVector {
    pub fn new(a1: Complex64, a2: Complex64, phase: f64) -> Self {
        Self { a1, a2, phase }
    }

    /// Everything in the lower level, zero phase.
    pub fn ground() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 0.0)
    }

    pub fn excited() -> Self {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), 0.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a1.norm_sqr() + self.a2.norm_sqr()
    }

    /// Excited-level population |a₂|².
    pub fn population2(&self) -> f64 {
        self.a2.norm_sqr()
    }
}
