//! Solutions of the two-dimensional compressible Euler equations with
//! Coriolis force and Rayleigh friction whose velocity is linear (affine)
//! in space.
//!
//! The crate integrates the moment ODE systems that govern these solutions,
//! evaluates the explicit frictionless solution by quadrature, predicts and
//! fits the large-time asymptotics, reconstructs the density, pressure and
//! entropy fields with pointwise PDE residuals, and checks the gauge
//! conditions that certify smooth interior solutions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod closedform;
pub mod exec;
pub mod fields;
pub mod integrator;
pub mod interior;
pub mod moments;
pub mod numeric;

pub use exec::Exec;
