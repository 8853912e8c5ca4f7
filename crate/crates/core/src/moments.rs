//! Model parameters and the moment ODE systems.
//!
//! For a velocity field linear in space, `V = A(t) r`, the Euler system
//! with force `L V` closes on finitely many moments. Two closures are
//! provided:
//!
//! * the axisymmetric (scalar) case `V = α r + β r⊥` with state
//!   `(G₁, α, β)`, where `G₁ = 1/G` is the inverse moment of inertia;
//! * the general matrix case with `A = ((a, b), (c, d))` and the scaled
//!   second moments `(G₁, G₂, G₃)`.
//!
//! The force matrix is `L = -μ I + l J` with `J = ((0, 1), (-1, 0))`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::OdeSystem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("adiabatic exponent must exceed 1, got {0}")]
    GammaOutOfRange(f64),
    #[error("friction coefficient must be non-negative, got {0}")]
    NegativeFriction(f64),
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("G1 must be positive, got {0}")]
    NonPositiveG1(f64),
    #[error("the reduced system requires l = 0, got l = {0}")]
    NonZeroCoriolis(f64),
    #[error("initial potential energy must be non-negative, got {0}")]
    NegativeEnergy(f64),
    #[error("invalid matrix moment state: {0}")]
    InvalidState(String),
    #[error("moment determinant is not positive: {0}")]
    DegenerateMoments(f64),
    #[error("state is not axisymmetric (symmetry defect {defect:e} > {tol:e})")]
    NotAxisymmetric { defect: f64, tol: f64 },
}

/// Physical constants of the model. Construct with [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    gamma: f64,
    mu: f64,
    l: f64,
}

/// Validates `γ > 1`, `μ ≥ 0` and finiteness.
pub fn validate_params(gamma: f64, mu: f64, l: f64) -> Result<ModelParams, MomentError> {
    for (name, v) in [("gamma", gamma), ("mu", mu), ("l", l)] {
        if !v.is_finite() {
            return Err(MomentError::NonFinite(name));
        }
    }
    if gamma <= 1.0 {
        return Err(MomentError::GammaOutOfRange(gamma));
    }
    if mu < 0.0 {
        return Err(MomentError::NegativeFriction(mu));
    }
    Ok(ModelParams { gamma, mu, l })
}

impl ModelParams {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// `L = ((-μ, l), (-l, -μ))`.
    pub fn force_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(-self.mu, self.l, -self.l, -self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMomentState {
    pub g1: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ScalarMomentState {
    pub fn new(g1: f64, alpha: f64, beta: f64) -> Self {
        Self { g1, alpha, beta }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.g1, self.alpha, self.beta]
    }

    pub fn from_array(y: [f64; 3]) -> Self {
        Self { g1: y[0], alpha: y[1], beta: y[2] }
    }

    /// `A = ((α, β), (-β, α))`, so that `A r = α r + β r⊥` with `r⊥ = (y, -x)`.
    pub fn velocity_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.alpha, self.beta, -self.beta, self.alpha)
    }
}

/// Constants of motion and fixed coefficients of the scalar system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarInvariants {
    /// `C = (2β(0) - l) / (2 G₁(0))`.
    pub c_rot: f64,
    /// Coefficient of `G₁^γ` under the square root of the explicit solution.
    pub k_quad: f64,
    /// `K' = (γ - 1) E_p(0) G₁(0)^{1-γ}`.
    pub k_force: f64,
    pub e_total: f64,
    pub ep0: f64,
    pub g1_0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy {
    pub total: f64,
    pub kinetic: f64,
    pub potential: f64,
}

fn check_g1(g1: f64) -> Result<(), MomentError> {
    if g1 > 0.0 && g1.is_finite() {
        Ok(())
    } else {
        Err(MomentError::NonPositiveG1(g1))
    }
}

pub fn scalar_invariants(
    params: &ModelParams,
    state0: &ScalarMomentState,
    ep0: f64,
) -> Result<ScalarInvariants, MomentError> {
    check_g1(state0.g1)?;
    if !(ep0 >= 0.0) || !ep0.is_finite() {
        return Err(MomentError::NegativeEnergy(ep0));
    }
    let (g, l) = (params.gamma, params.l);
    let g10 = state0.g1;
    let c_rot = (2.0 * state0.beta - l) / (2.0 * g10);
    let e_total = (state0.alpha.powi(2) + state0.beta.powi(2)) / g10 + ep0;
    let k_quad =
        (state0.alpha.powi(2) + c_rot.powi(2) * g10 * g10 - (e_total - l * c_rot) * g10 + 0.25 * l * l) / g10.powf(g);
    let k_force = (g - 1.0) * ep0 * g10.powf(1.0 - g);
    Ok(ScalarInvariants { c_rot, k_quad, k_force, e_total, ep0, g1_0: g10 })
}

/// `(G₁', α', β')` of the scalar system.
pub fn scalar_rhs(
    params: &ModelParams,
    inv: &ScalarInvariants,
    state: &ScalarMomentState,
) -> Result<[f64; 3], MomentError> {
    check_g1(state.g1)?;
    let ScalarMomentState { g1, alpha: a, beta: b } = *state;
    let (mu, l) = (params.mu, params.l);
    Ok([
        -2.0 * a * g1,
        -a * a + b * b - l * b - mu * a + inv.k_force * g1.powf(params.gamma),
        a * (l - 2.0 * b) - mu * b,
    ])
}

/// `(G₁', α')` of the non-autonomous reduction for `l = 0`, where `β` is
/// eliminated through `β = C G₁ e^{-μt}`.
pub fn reduced_rhs_l0(
    params: &ModelParams,
    inv: &ScalarInvariants,
    t: f64,
    state2: [f64; 2],
) -> Result<[f64; 2], MomentError> {
    if params.l != 0.0 {
        return Err(MomentError::NonZeroCoriolis(params.l));
    }
    let [g1, a] = state2;
    check_g1(g1)?;
    let c = inv.c_rot;
    Ok([
        -2.0 * a * g1,
        -a * a - params.mu * a + c * c * (-2.0 * params.mu * t).exp() * g1 * g1 + inv.k_force * g1.powf(params.gamma),
    ])
}

/// `β` recovered from the reduced state.
pub fn reduced_beta(params: &ModelParams, inv: &ScalarInvariants, t: f64, g1: f64) -> f64 {
    inv.c_rot * g1 * (-params.mu * t).exp()
}

pub fn scalar_energy(
    params: &ModelParams,
    inv: &ScalarInvariants,
    state: &ScalarMomentState,
) -> Result<Energy, MomentError> {
    check_g1(state.g1)?;
    let kinetic = (state.alpha.powi(2) + state.beta.powi(2)) / state.g1;
    let potential = inv.ep0 * (state.g1 / inv.g1_0).powf(params.gamma - 1.0);
    Ok(Energy { total: kinetic + potential, kinetic, potential })
}

/// Residual of the first integral for `β`: `β - C G₁ - l/2` when `μ = 0`,
/// `β - C G₁ e^{-μt}` when `l = 0`; `None` when both are non-zero.
pub fn beta_invariant_residual(
    params: &ModelParams,
    inv: &ScalarInvariants,
    t: f64,
    state: &ScalarMomentState,
) -> Option<f64> {
    if params.mu == 0.0 {
        Some(state.beta - inv.c_rot * state.g1 - 0.5 * params.l)
    } else if params.l == 0.0 {
        Some(state.beta - inv.c_rot * state.g1 * (-params.mu * t).exp())
    } else {
        None
    }
}

/// `α² + β² - E(0) G₁ + E_p(0) G₁(0)^{1-γ} G₁^γ`: zero for `μ = 0` and
/// non-positive whenever energy is dissipated.
pub fn bound_residual(params: &ModelParams, inv: &ScalarInvariants, state: &ScalarMomentState) -> f64 {
    state.alpha * state.alpha + state.beta * state.beta - inv.e_total * state.g1
        + inv.ep0 * inv.g1_0.powf(1.0 - params.gamma) * state.g1.powf(params.gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixMomentState {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub g1m: f64,
    pub g2m: f64,
    pub g3m: f64,
}

impl MatrixMomentState {
    /// Order `(G₁, G₂, G₃, a, b, c, d)`, matching [`matrix_rhs`].
    pub fn to_array(self) -> [f64; 7] {
        [self.g1m, self.g2m, self.g3m, self.a, self.b, self.c, self.d]
    }

    pub fn from_array(y: [f64; 7]) -> Self {
        Self { g1m: y[0], g2m: y[1], g3m: y[2], a: y[3], b: y[4], c: y[5], d: y[6] }
    }

    pub fn velocity_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a, self.b, self.c, self.d)
    }

    /// `G₁G₂ - G₃² = Δ^{-γ}`.
    pub fn moment_det(&self) -> f64 {
        self.g1m * self.g2m - self.g3m * self.g3m
    }

    pub fn validate(&self) -> Result<(), MomentError> {
        let all = self.to_array();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(MomentError::InvalidState("non-finite entry".into()));
        }
        if !(self.g1m > 0.0 && self.g2m > 0.0) {
            return Err(MomentError::InvalidState(format!(
                "moments must be positive, got G1 = {}, G2 = {}",
                self.g1m, self.g2m
            )));
        }
        let det = self.moment_det();
        if !(det > 0.0) {
            return Err(MomentError::DegenerateMoments(det));
        }
        Ok(())
    }
}

/// Scaled moments of the second-moment matrix `((G_x, G_xy), (G_xy, G_y))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixAux {
    pub delta: f64,
    pub g1m: f64,
    pub g2m: f64,
    pub g3m: f64,
    /// `Δ^{(γ-1)/2}`, the factor entering the pressure coefficient.
    pub k1_factor: f64,
}

pub fn matrix_aux(params: &ModelParams, gx: f64, gy: f64, gxy: f64) -> Result<MatrixAux, MomentError> {
    if !(gx > 0.0 && gy > 0.0) {
        return Err(MomentError::InvalidState(format!("second moments must be positive, got Gx = {gx}, Gy = {gy}")));
    }
    let delta = gx * gy - gxy * gxy;
    if !(delta > 0.0) {
        return Err(MomentError::DegenerateMoments(delta));
    }
    let g = params.gamma;
    let scale = delta.powf(-(g + 1.0) / 2.0);
    Ok(MatrixAux { delta, g1m: gx * scale, g2m: gy * scale, g3m: gxy * scale, k1_factor: delta.powf((g - 1.0) / 2.0) })
}

/// `K₁ = (γ-1)/2 · E_p(0) · Δ(0)^{(γ-1)/2}`.
pub fn k1_coefficient(params: &ModelParams, ep0: f64, delta0: f64) -> f64 {
    0.5 * (params.gamma - 1.0) * ep0 * delta0.powf(0.5 * (params.gamma - 1.0))
}

/// `Δ = (G₁G₂ - G₃²)^{-1/γ}`.
pub fn matrix_delta(params: &ModelParams, state: &MatrixMomentState) -> f64 {
    state.moment_det().powf(-1.0 / params.gamma)
}

/// Derivatives of `(G₁, G₂, G₃, a, b, c, d)`.
pub fn matrix_rhs(params: &ModelParams, k1: f64, state: &MatrixMomentState) -> Result<[f64; 7], MomentError> {
    state.validate()?;
    let MatrixMomentState { a, b, c, d, g1m, g2m, g3m } = *state;
    let (g, mu, l) = (params.gamma, params.mu, params.l);
    let tr = a + d;
    Ok([
        ((1.0 - g) * a - (1.0 + g) * d) * g1m + 2.0 * b * g3m,
        ((1.0 - g) * d - (1.0 + g) * a) * g2m + 2.0 * c * g3m,
        c * g1m + b * g2m - g * tr * g3m,
        -a * a - b * c + l * c - mu * a + k1 * g2m,
        -b * tr + l * d - mu * b - k1 * g3m,
        -c * tr - l * a - mu * c - k1 * g3m,
        -d * d - b * c - l * b - mu * d + k1 * g1m,
    ])
}

/// Unscaled second moments `(G_x, G_y, G_xy)` and `Δ` of a matrix state.
pub fn unscaled_moments(params: &ModelParams, state: &MatrixMomentState) -> (f64, f64, f64, f64) {
    let delta = matrix_delta(params, state);
    let s = delta.powf(0.5 * (params.gamma + 1.0));
    (state.g1m * s, state.g2m * s, state.g3m * s, delta)
}

/// Kinetic energy `tr(A M Aᵀ)` with `M` the second-moment matrix, and
/// potential energy `2K₁/(γ-1) · Δ^{(1-γ)/2}`.
pub fn matrix_energy(params: &ModelParams, k1: f64, state: &MatrixMomentState) -> Result<Energy, MomentError> {
    state.validate()?;
    let (gx, gy, gxy, delta) = unscaled_moments(params, state);
    let m = Matrix2::new(gx, gxy, gxy, gy);
    let a = state.velocity_matrix();
    let kinetic = (a * m * a.transpose()).trace();
    let potential = 2.0 * k1 / (params.gamma - 1.0) * delta.powf(0.5 * (1.0 - params.gamma));
    Ok(Energy { total: kinetic + potential, kinetic, potential })
}

/// Axisymmetric state as a matrix state: `a = d = α`, `b = -c = β`,
/// `G_x = G_y = 1/(2G₁)`, `G_xy = 0`.
pub fn embed_scalar(params: &ModelParams, state: &ScalarMomentState) -> Result<MatrixMomentState, MomentError> {
    check_g1(state.g1)?;
    let half_g = 0.5 / state.g1;
    let aux = matrix_aux(params, half_g, half_g, 0.0)?;
    Ok(MatrixMomentState {
        a: state.alpha,
        b: state.beta,
        c: -state.beta,
        d: state.alpha,
        g1m: aux.g1m,
        g2m: aux.g2m,
        g3m: aux.g3m,
    })
}

/// Largest deviation from the axisymmetric subclass; velocity and moment
/// defects are measured relative to their own magnitudes (floored at 1).
pub fn symmetry_defect(state: &MatrixMomentState) -> f64 {
    let vs = 1.0_f64.max(state.a.abs()).max(state.b.abs()).max(state.c.abs()).max(state.d.abs());
    let ms = 1.0_f64.max(state.g1m.abs()).max(state.g2m.abs());
    ((state.a - state.d).abs() / vs)
        .max((state.b + state.c).abs() / vs)
        .max((state.g1m - state.g2m).abs() / ms)
        .max(state.g3m.abs() / ms)
}

pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-9;

pub fn extract_scalar(params: &ModelParams, state: &MatrixMomentState) -> Result<ScalarMomentState, MomentError> {
    extract_scalar_with_tol(params, state, DEFAULT_SYMMETRY_TOL)
}

pub fn extract_scalar_with_tol(
    params: &ModelParams,
    state: &MatrixMomentState,
    tol: f64,
) -> Result<ScalarMomentState, MomentError> {
    state.validate()?;
    let defect = symmetry_defect(state);
    if defect > tol {
        return Err(MomentError::NotAxisymmetric { defect, tol });
    }
    let gm = 0.5 * (state.g1m + state.g2m);
    Ok(ScalarMomentState {
        g1: 0.5 * gm.powf(1.0 / params.gamma),
        alpha: 0.5 * (state.a + state.d),
        beta: 0.5 * (state.b - state.c),
    })
}

/// The scalar system as an [`OdeSystem`]; escape is measured on `(α, β)`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarSystem {
    pub params: ModelParams,
    pub inv: ScalarInvariants,
}

impl OdeSystem<3> for ScalarSystem {
    type Error = MomentError;

    fn rhs(&self, _t: f64, y: &[f64; 3]) -> Result<[f64; 3], MomentError> {
        scalar_rhs(&self.params, &self.inv, &ScalarMomentState::from_array(*y))
    }

    fn check_state(&self, _t: f64, y: &[f64; 3]) -> Result<(), String> {
        check_g1(y[0]).map_err(|e| e.to_string())
    }

    fn escape_norm(&self, y: &[f64; 3]) -> f64 {
        y[1].abs().max(y[2].abs())
    }
}

/// The `l = 0` reduction in `(G₁, α)`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSystem {
    pub params: ModelParams,
    pub inv: ScalarInvariants,
}

impl OdeSystem<2> for ReducedSystem {
    type Error = MomentError;

    fn rhs(&self, t: f64, y: &[f64; 2]) -> Result<[f64; 2], MomentError> {
        reduced_rhs_l0(&self.params, &self.inv, t, *y)
    }

    fn check_state(&self, _t: f64, y: &[f64; 2]) -> Result<(), String> {
        check_g1(y[0]).map_err(|e| e.to_string())
    }

    fn escape_norm(&self, y: &[f64; 2]) -> f64 {
        y[1].abs()
    }
}

/// The matrix system; escape is measured on the velocity entries.
#[derive(Debug, Clone, Copy)]
pub struct MatrixSystem {
    pub params: ModelParams,
    pub k1: f64,
}

impl OdeSystem<7> for MatrixSystem {
    type Error = MomentError;

    fn rhs(&self, _t: f64, y: &[f64; 7]) -> Result<[f64; 7], MomentError> {
        matrix_rhs(&self.params, self.k1, &MatrixMomentState::from_array(*y))
    }

    fn check_state(&self, _t: f64, y: &[f64; 7]) -> Result<(), String> {
        MatrixMomentState::from_array(*y).validate().map_err(|e| e.to_string())
    }

    fn escape_norm(&self, y: &[f64; 7]) -> f64 {
        y[3..].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(g: f64, mu: f64, l: f64) -> ModelParams {
        validate_params(g, mu, l).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(validate_params(1.4, 0.0, 0.0).is_ok());
        assert_eq!(validate_params(1.0, 0.0, 0.0), Err(MomentError::GammaOutOfRange(1.0)));
        assert_eq!(validate_params(2.0, -0.1, 0.5), Err(MomentError::NegativeFriction(-0.1)));
        assert_eq!(validate_params(f64::NAN, 0.0, 0.0), Err(MomentError::NonFinite("gamma")));
        assert_eq!(validate_params(2.0, 0.0, f64::INFINITY), Err(MomentError::NonFinite("l")));
        assert!(validate_params(2.0, 0.0, -3.0).is_ok());
    }

    #[test]
    fn scalar_rhs_trivial_cases() {
        let p = params(2.0, 0.0, 0.0);
        let s = ScalarMomentState::new(1.0, 0.0, 0.0);
        let inv = scalar_invariants(&p, &s, 0.0).unwrap();
        assert_eq!(scalar_rhs(&p, &inv, &s).unwrap(), [0.0, 0.0, 0.0]);
        let inv = scalar_invariants(&p, &s, 1.0).unwrap();
        assert_eq!(scalar_rhs(&p, &inv, &s).unwrap(), [0.0, 1.0, 0.0]);
        let bad = ScalarMomentState::new(0.0, 0.0, 0.0);
        assert_eq!(scalar_rhs(&p, &inv, &bad), Err(MomentError::NonPositiveG1(0.0)));
    }

    #[test]
    fn scalar_rhs_generic_value() {
        let p = params(1.4, 0.1, 0.5);
        let s0 = ScalarMomentState::new(1.0, 0.0, 0.0);
        let inv = scalar_invariants(&p, &s0, 1.0).unwrap();
        let d = scalar_rhs(&p, &inv, &ScalarMomentState::new(2.0, 0.3, -0.2)).unwrap();
        assert_relative_eq!(d[0], -1.2, max_relative = 1e-15);
        assert_relative_eq!(d[1], 1.075_606_328_618_315_4, max_relative = 1e-14);
        assert_relative_eq!(d[2], 0.29, max_relative = 1e-15);
    }

    #[test]
    fn invariants_constants() {
        let p = params(2.0, 0.0, 1.0);
        let inv = scalar_invariants(&p, &ScalarMomentState::new(1.0, 0.3, 0.5), 0.7).unwrap();
        assert_eq!(inv.c_rot, 0.0);
        let p = params(2.0, 0.0, 0.0);
        let inv = scalar_invariants(&p, &ScalarMomentState::new(1.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!((inv.c_rot, inv.e_total, inv.k_quad), (0.0, 1.0, -1.0));
        // K = -E_p(0) G1(0)^{1-γ} for every initial state
        let p = params(1.4, 0.2, 0.7);
        let s0 = ScalarMomentState::new(1.7, -0.4, 0.9);
        let inv = scalar_invariants(&p, &s0, 0.8).unwrap();
        assert_relative_eq!(inv.k_quad, -0.8 * 1.7f64.powf(-0.4), max_relative = 1e-13);
        assert!(matches!(scalar_invariants(&p, &s0, -1.0), Err(MomentError::NegativeEnergy(_))));
    }

    #[test]
    fn reduced_rhs_cases() {
        let p = params(1.4, 1.0, 0.0);
        let mut inv = scalar_invariants(&p, &ScalarMomentState::new(1.0, 0.0, 0.0), 0.0).unwrap();
        inv.c_rot = 1.0;
        inv.k_force = 1.0;
        assert_eq!(reduced_rhs_l0(&p, &inv, 0.0, [1.0, 0.0]).unwrap(), [0.0, 2.0]);
        let pl = params(1.4, 1.0, 0.3);
        assert_eq!(reduced_rhs_l0(&pl, &inv, 0.0, [1.0, 0.0]), Err(MomentError::NonZeroCoriolis(0.3)));

        let p = params(1.4, 0.3, 0.0);
        let inv = scalar_invariants(&p, &ScalarMomentState::new(1.2, 0.1, 0.84), 0.6).unwrap();
        assert_relative_eq!(inv.c_rot, 0.7, max_relative = 1e-15);
        let (t, g1, a) = (2.0, 1.5, -0.1);
        let beta = reduced_beta(&p, &inv, t, g1);
        let full = scalar_rhs(&p, &inv, &ScalarMomentState::new(g1, a, beta)).unwrap();
        let red = reduced_rhs_l0(&p, &inv, t, [g1, a]).unwrap();
        assert_relative_eq!(red[0], full[0], max_relative = 1e-15);
        assert_relative_eq!(red[1], full[1], max_relative = 1e-14);
    }

    #[test]
    fn energies() {
        let p = params(2.0, 0.0, 0.0);
        let s = ScalarMomentState::new(1.3, 0.0, 0.0);
        let inv = scalar_invariants(&p, &s, 0.4).unwrap();
        let e = scalar_energy(&p, &inv, &s).unwrap();
        assert_eq!((e.total, e.kinetic, e.potential), (0.4, 0.0, 0.4));
        let s = ScalarMomentState::new(1.0, 1.0, 1.0);
        let inv = scalar_invariants(&p, &s, 0.0).unwrap();
        let e = scalar_energy(&p, &inv, &s).unwrap();
        assert_eq!((e.total, e.kinetic, e.potential), (2.0, 2.0, 0.0));
    }

    #[test]
    fn matrix_aux_values() {
        let aux = matrix_aux(&params(2.0, 0.0, 0.0), 1.0, 1.0, 0.0).unwrap();
        assert_eq!((aux.delta, aux.g1m, aux.g2m, aux.g3m), (1.0, 1.0, 1.0, 0.0));
        assert!(matches!(matrix_aux(&params(2.0, 0.0, 0.0), 1.0, 1.0, 1.0), Err(MomentError::DegenerateMoments(_))));
        let aux = matrix_aux(&params(1.4, 0.0, 0.0), 2.0, 3.0, 1.0).unwrap();
        assert_relative_eq!(aux.delta, 5.0, max_relative = 1e-15);
        assert_relative_eq!(aux.g1m, 0.289_911_865_471_078_2, max_relative = 1e-14);
        assert_relative_eq!(aux.g2m, 0.434_867_798_206_617_3, max_relative = 1e-14);
        assert_relative_eq!(aux.g3m, 0.144_955_932_735_539_1, max_relative = 1e-14);
    }

    #[test]
    fn matrix_rhs_values() {
        let p = params(1.4, 0.1, 0.2);
        let zero = MatrixMomentState { a: 0.0, b: 0.0, c: 0.0, d: 0.0, g1m: 1.3, g2m: 0.8, g3m: 0.2 };
        assert!(matrix_rhs(&p, 0.0, &zero).unwrap().iter().all(|&v| v == 0.0));
        let s = MatrixMomentState { a: 0.1, b: 0.2, c: -0.3, d: 0.05, g1m: 1.0, g2m: 1.2, g3m: 0.1 };
        let got = matrix_rhs(&p, 0.5, &s).unwrap();
        let want = [-0.12, -0.372, -0.081, 0.58, -0.09, 0.005, 0.5125];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-15, "{got:?}");
        }
        let bad = MatrixMomentState { g3m: 2.0, ..s };
        assert!(matches!(matrix_rhs(&p, 0.5, &bad), Err(MomentError::DegenerateMoments(_))));
    }

    #[test]
    fn embedding_round_trip_and_rhs_equivalence() {
        let p = params(1.4, 0.1, 0.5);
        let s = ScalarMomentState::new(0.8, 0.3, -0.2);
        let m = embed_scalar(&p, &s).unwrap();
        let back = extract_scalar(&p, &m).unwrap();
        assert_relative_eq!(back.g1, s.g1, max_relative = 1e-14);
        assert_eq!((back.alpha, back.beta), (s.alpha, s.beta));

        let rest = embed_scalar(&p, &ScalarMomentState::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((rest.a, rest.b, rest.c, rest.d), (0.0, 0.0, 0.0, 0.0));

        let inv = scalar_invariants(&p, &ScalarMomentState::new(1.1, 0.0, 0.0), 0.9).unwrap();
        let m0 = embed_scalar(&p, &ScalarMomentState::new(1.1, 0.0, 0.0)).unwrap();
        let k1 = k1_coefficient(&p, 0.9, matrix_delta(&p, &m0));
        let ds = scalar_rhs(&p, &inv, &s).unwrap();
        let dm = matrix_rhs(&p, k1, &m).unwrap();
        // d/dt of the embedding: G1m = (2 G1)^γ
        let dg1m = p.gamma() * (2.0 * s.g1).powf(p.gamma() - 1.0) * 2.0 * ds[0];
        assert_relative_eq!(dm[0], dg1m, max_relative = 1e-13);
        assert_eq!(dm[0], dm[1]);
        assert_eq!(dm[2], 0.0);
        assert_relative_eq!(dm[3], ds[1], max_relative = 1e-13);
        assert_relative_eq!(dm[6], ds[1], max_relative = 1e-13);
        assert_relative_eq!(dm[4], ds[2], max_relative = 1e-13);
        assert_relative_eq!(dm[5], -ds[2], max_relative = 1e-13);
        // the axisymmetric subclass is preserved exactly
        assert_eq!(dm[3], dm[6]);
        assert_eq!(dm[4], -dm[5]);
    }

    #[test]
    fn extract_rejects_asymmetric_state() {
        let p = params(1.4, 0.0, 0.0);
        let s = MatrixMomentState { a: 0.1, b: 0.2, c: -0.3, d: 0.05, g1m: 1.0, g2m: 1.2, g3m: 0.1 };
        assert!(matches!(extract_scalar(&p, &s), Err(MomentError::NotAxisymmetric { .. })));
    }

    #[test]
    fn matrix_energy_matches_scalar_energy_on_embedding() {
        let p = params(1.6, 0.0, 0.4);
        let s0 = ScalarMomentState::new(0.9, 0.2, 0.1);
        let inv = scalar_invariants(&p, &s0, 0.7).unwrap();
        let m0 = embed_scalar(&p, &s0).unwrap();
        let k1 = k1_coefficient(&p, 0.7, matrix_delta(&p, &m0));
        let s = ScalarMomentState::new(1.3, -0.4, 0.6);
        let es = scalar_energy(&p, &inv, &s).unwrap();
        let em = matrix_energy(&p, k1, &embed_scalar(&p, &s).unwrap()).unwrap();
        assert_relative_eq!(es.kinetic, em.kinetic, max_relative = 1e-13);
        assert_relative_eq!(es.potential, em.potential, max_relative = 1e-13);
    }

    #[test]
    fn force_matrix_orientation() {
        let l = params(1.4, 0.3, 0.5).force_matrix();
        assert_eq!(l, Matrix2::new(-0.3, 0.5, -0.5, -0.3));
    }
}
