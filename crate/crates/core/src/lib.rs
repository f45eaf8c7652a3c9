//! Periodic level-crossing two-state model of the general Heun class.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`specfun`] | ₂F₁, incomplete Beta, neighbour recurrence, branch-tracked powers |
//! | [`fields`] | detuning families, glancing ratios, crossing census |
//! | [`heun`] | Heun parameter map, Beta-series recurrence, termination, q-equation |
//! | [`closedform`] | exact N = 2 solution, initial-value matching, Floquet exponents |
//! | [`oracle`] | adaptive Dormand–Prince integration of the raw two-state system |
//!
//! All analytic formulas work in scaled time τ = Δ(t − t₀); the public
//! configuration types carry physical parameters and rescale internally.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod error;
pub mod fields;
pub mod heun;
pub mod oracle;
pub mod poly;
pub mod quad;
pub mod specfun;
pub mod state;
pub mod tol;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use state::StateVector;

/// Choice of square-root branch; selects one of the two fundamental solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        })
    }
}
