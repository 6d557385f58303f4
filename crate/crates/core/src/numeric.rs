//! Shared numeric types and the tolerance policy.

use std::f64::consts::PI;

pub use num_complex::Complex64;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Every tolerance used across the crate, in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPolicy {
    /// Allowed deviation of `‖ψ‖` from 1.
    pub unit_norm: f64,
    /// Allowed elementwise deviation of `U†U` from the identity.
    pub unitarity: f64,
    /// Residual norm above which closure accepts a new direction.
    pub closure_accept: f64,
    /// Extra Gram–Schmidt passes after the first.
    pub reorth_passes: usize,
    /// Closure aborts past this many vectors.
    pub closure_cap: usize,
    /// `‖(I - Π) U v‖` allowed for a basis to count as invariant.
    pub invariance: f64,
    /// Eigenphases closer than this (radians) are merged.
    pub cluster: f64,
    /// Maximum `‖U v - λ v‖` accepted from the eigensolver.
    pub eig_residual: f64,
    /// Largest dimension materialized densely.
    pub dense_cap: usize,
    /// Eigenphase shifts below this are treated as exactly zero.
    pub shift_floor: f64,
    /// Overlap margin for branch matching.
    pub match_tol: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            unit_norm: 1e-10,
            unitarity: 1e-12,
            closure_accept: 1e-8,
            reorth_passes: 1,
            closure_cap: 200,
            invariance: 1e-9,
            cluster: 1e-6,
            eig_residual: 1e-8,
            dense_cap: 5000,
            shift_floor: 1e-13,
            match_tol: 0.1,
        }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let mut x = theta.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    // rem_euclid maps -π to π already; this catches rounding just below -π.
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Distance between two angles on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}
