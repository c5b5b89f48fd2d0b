//! Numerical thresholds shared across modules.

/// Relative residual at which the conjugate-gradient solves stop.
pub const CG_RELATIVE_TOL: f64 = 1e-10;

/// Maximum CG iterations per grid node count along one axis.
pub const CG_ITERS_PER_NODE: usize = 50;

/// Max-norm below which a prestrain block is treated as identically zero.
pub const ZERO_BLOCK_TOL: f64 = 1e-12;

/// Relative threshold for deciding that an indicator does not vanish.
pub const INDICATOR_REL_TOL: f64 = 1e-8;

/// Tolerance for float equalities between exponents (α = 4, γ = α − 2, ...).
pub const EXPONENT_EQ_TOL: f64 = 1e-12;

/// Plate-limit energies at or below this value count as zero.
pub const VANISHING_ENERGY: f64 = 1e-8;

/// Two local minima count as distinct when their values differ by more.
pub const DISTINCT_MINIMA_GAP: f64 = 1e-6;

pub fn exp_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXPONENT_EQ_TOL
}

pub fn exp_lt(a: f64, b: f64) -> bool {
    a < b - EXPONENT_EQ_TOL
}

pub fn exp_le(a: f64, b: f64) -> bool {
    a <= b + EXPONENT_EQ_TOL
}
