//! Physical fields generated by a scalar moment trajectory.
//!
//! Given `α(t)`, `β(t)` and a compatible axisymmetric profile, the density,
//! pressure and entropy follow by transport along the linear
//! characteristics. This module builds the canonical profile family,
//! reconstructs the fields, evaluates pointwise residuals of the balance
//! laws and computes the integral functionals by polar quadrature.

mod profile;
mod quadrature;
mod reconstruct;
mod residual;

use thiserror::Error;

use crate::integrator::IntegrationError;

pub use profile::{canonical_profile, compatibility_residual, to_symmetric_vars, InitialProfile};
pub use quadrature::{
    conserved_quantities, functional_rates, functionals_at, Functionals, PolarQuadrature, QuadratureSpec, RelationCheck,
};
pub use reconstruct::{
    evaluate, FieldPoint, FieldSnapshot, FieldSource, Frame, PerturbedVelocity, ScalarSolution, UniformState,
};
pub use residual::{pde_residual, GridSpec, PdeResidual};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("profile exponent must exceed 3, got {0}")]
    ExponentTooSmall(f64),
    #[error("G1(0) must be positive, got {0}")]
    NonPositiveG1(f64),
    #[error("pressure must be non-negative, got {0}")]
    NegativePressure(f64),
    #[error("profile built for G1(0) = {profile} but the trajectory starts at {trajectory}")]
    ProfileMismatch { trajectory: f64, profile: f64 },
    #[error("truncation radius {radius} leaves a relative tail {tail:e} > {tol:e}")]
    TruncationTooTight { radius: f64, tail: f64, tol: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time {0} is negative")]
    NegativeTime(f64),
    #[error(transparent)]
    Trajectory(#[from] IntegrationError),
}
