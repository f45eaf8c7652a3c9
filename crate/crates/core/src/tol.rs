//! Numerical thresholds shared by the library, its tests and the CLI.

/// Relative size of a ₂F₁ series term below which summation stops.
pub const EPS_SERIES: f64 = 1e-16;

/// Agreement required between two routes to the same special-function value.
pub const EPS_CHECK: f64 = 1e-11;

/// Hard cap on ₂F₁ series terms.
pub const SERIES_MAX_TERMS: usize = 10_000;

/// Two consecutive expansion coefficients below this fraction of max |cₙ|
/// mark a terminated Beta series.
pub const TERMINATION_REL: f64 = 1e-12;

/// Width in time to which crossing instants are bisected.
pub const ROOT_TIME_TOL: f64 = 1e-13;

/// Samples per drive period used to bracket crossings.
pub const CROSSING_SAMPLES_PER_PERIOD: usize = 4096;

/// |δ_t| and |dδ_t/dt| bound for a double root (level glancing).
pub const GLANCING_TOL: f64 = 1e-9;

/// Fuchs relation γ + δ + ε = α + β + 1.
pub const FUCHS_TOL: f64 = 1e-12;

/// Distance from a = 1 below which a constraint root counts as trivial.
pub const TRIVIAL_ROOT_TOL: f64 = 1e-6;

/// Default oracle tolerances.
pub const ODE_RTOL: f64 = 1e-10;
pub const ODE_ATOL: f64 = 1e-12;
pub const ODE_MAX_STEPS: usize = 10_000_000;

/// Tolerance of adaptive Gauss–Kronrod quadrature.
pub const QUAD_TOL: f64 = 1e-12;
