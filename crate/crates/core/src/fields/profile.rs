use serde::Serialize;

use super::FieldError;
use crate::moments::ModelParams;

/// Axisymmetric initial data
/// `p₀ = (1+r²)^{-a}`, `ρ₀ = c (1+r²)^{-k}`, `S₀ = ln p₀ - γ ln ρ₀`.
///
/// The canonical family has `k = a + 1` and `c = 2a / ((γ-1) G₁(0) E_p(0))`,
/// which makes `∇p₀ = -(γ-1) G₁(0) E_p(0) ρ₀ r` hold exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialProfile {
    pub gamma: f64,
    pub a_exp: f64,
    pub g1_0: f64,
    pub ep0: f64,
    pub rho_coef: f64,
    pub rho_power: f64,
}

pub fn canonical_profile(params: &ModelParams, a_exp: f64, g1_0: f64) -> Result<InitialProfile, FieldError> {
    if !(a_exp > 3.0) {
        return Err(FieldError::ExponentTooSmall(a_exp));
    }
    if !(g1_0 > 0.0) || !g1_0.is_finite() {
        return Err(FieldError::NonPositiveG1(g1_0));
    }
    let g = params.gamma();
    let ep0 = std::f64::consts::PI / ((g - 1.0) * (a_exp - 1.0));
    Ok(InitialProfile {
        gamma: g,
        a_exp,
        g1_0,
        ep0,
        rho_coef: 2.0 * a_exp / ((g - 1.0) * g1_0 * ep0),
        rho_power: a_exp + 1.0,
    })
}

impl InitialProfile {
    /// Same pressure with the density coefficient rebuilt for another
    /// `E_p(0)`; used for mismatch controls.
    pub fn with_density_for_ep0(mut self, ep0: f64) -> Self {
        self.rho_coef = 2.0 * self.a_exp / ((self.gamma - 1.0) * self.g1_0 * ep0);
        self
    }

    /// Same pressure with an arbitrary density `c (1+r²)^{-k}`.
    pub fn with_density(mut self, rho_coef: f64, rho_power: f64) -> Self {
        self.rho_coef = rho_coef;
        self.rho_power = rho_power;
        self
    }

    pub fn p0(&self, r: f64) -> f64 {
        (1.0 + r * r).powf(-self.a_exp)
    }

    /// `dp₀/dr`.
    pub fn dp0(&self, r: f64) -> f64 {
        -2.0 * self.a_exp * r * (1.0 + r * r).powf(-self.a_exp - 1.0)
    }

    pub fn rho0(&self, r: f64) -> f64 {
        self.rho_coef * (1.0 + r * r).powf(-self.rho_power)
    }

    pub fn drho0(&self, r: f64) -> f64 {
        -2.0 * self.rho_power * r * self.rho_coef * (1.0 + r * r).powf(-self.rho_power - 1.0)
    }

    /// Coefficient of `ln(1+r²)` in `S₀`.
    pub fn entropy_slope(&self) -> f64 {
        self.gamma * self.rho_power - self.a_exp
    }

    pub fn s0(&self, r: f64) -> f64 {
        self.entropy_slope() * (r * r).ln_1p() - self.gamma * self.rho_coef.ln()
    }

    pub fn ds0(&self, r: f64) -> f64 {
        2.0 * self.entropy_slope() * r / (1.0 + r * r)
    }

    /// Mass `∫ρ₀ dx = π c / (k - 1)`.
    pub fn mass(&self) -> f64 {
        std::f64::consts::PI * self.rho_coef / (self.rho_power - 1.0)
    }

    /// Upper bound on the relative tail `∫_{|x|>R}` of every functional
    /// evaluated here (the slowest integrand decays like `r³ (1+r²)^{-a-1}`).
    pub fn tail_fraction(&self, radius: f64) -> f64 {
        (1.0 + radius * radius).powf(1.0 - self.a_exp.min(self.rho_power - 1.0))
    }

    /// Smallest radius whose tail fraction is below `tol`.
    pub fn truncation_radius(&self, tol: f64) -> f64 {
        let k = self.a_exp.min(self.rho_power - 1.0);
        (tol.powf(-1.0 / (k - 1.0)) - 1.0).max(0.0).sqrt()
    }
}

/// `sup_r |p₀'(r) + (γ-1) G₁(0) E_p(0) ρ₀(r) r| / sup_r |p₀'(r)|` over a
/// radial grid covering the bulk of the profile.
pub fn compatibility_residual(profile: &InitialProfile, params: &ModelParams, g1_0: f64, ep0: f64) -> f64 {
    let coef = (params.gamma() - 1.0) * g1_0 * ep0;
    let n = 4000;
    let r_max = 50.0;
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 0..=n {
        // quadratic clustering towards the origin, where p₀' peaks
        let s = i as f64 / n as f64;
        let r = r_max * s * s;
        let dp = profile.dp0(r);
        worst = worst.max((dp + coef * profile.rho0(r) * r).abs());
        scale = scale.max(dp.abs());
    }
    worst / scale
}

/// `Π = κ (p/2)^{(γ-1)/(2γ)}`, `κ = 2√γ / (γ-1)`.
pub fn to_symmetric_vars(params: &ModelParams, p: f64) -> Result<f64, FieldError> {
    if !(p >= 0.0) {
        return Err(FieldError::NegativePressure(p));
    }
    let g = params.gamma();
    let kappa = 2.0 * g.sqrt() / (g - 1.0);
    Ok(kappa * (0.5 * p).powf((g - 1.0) / (2.0 * g)))
}
