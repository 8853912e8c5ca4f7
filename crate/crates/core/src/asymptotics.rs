//! Large-time behaviour: leading-term predictors for the scalar regimes,
//! power-law fitting, and the symmetrized form of the matrix system.

use serde::Serialize;
use thiserror::Error;

use crate::integrator::{IntegrationError, Trajectory};
use crate::moments::{matrix_delta, MatrixMomentState, ModelParams, ScalarInvariants};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("regime {regime:?} does not match mu = {mu}, l = {l}")]
    RegimeMismatch { regime: Regime, mu: f64, l: f64 },
    #[error("the leading term needs a positive pressure coefficient")]
    ZeroPressure,
    #[error("leading terms are defined for t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("power-law fit needs at least 8 samples in the window, got {0}")]
    TooFewSamples(usize),
    #[error("samples change sign or vanish at t = {0}")]
    SignChange(f64),
    #[error(transparent)]
    Trajectory(#[from] IntegrationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    MuPosLPos,
    MuPosLZero,
    MuZeroLZero,
}

impl Regime {
    /// `None` for `μ = 0, l ≠ 0`, where orbits stay periodic.
    pub fn of(params: &ModelParams) -> Option<Regime> {
        match (params.mu() > 0.0, params.l() != 0.0) {
            (true, true) => Some(Regime::MuPosLPos),
            (true, false) => Some(Regime::MuPosLZero),
            (false, false) => Some(Regime::MuZeroLZero),
            (false, true) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeadingTerm {
    pub alpha: f64,
    pub beta: f64,
    pub g1: f64,
}

/// Leading terms of `(α, β, G₁)` at large `t`.
pub fn leading_term(
    params: &ModelParams,
    inv: &ScalarInvariants,
    regime: Regime,
    t: f64,
) -> Result<LeadingTerm, AsymptoticsError> {
    if Regime::of(params) != Some(regime) {
        return Err(AsymptoticsError::RegimeMismatch { regime, mu: params.mu(), l: params.l() });
    }
    if !(t > 0.0) {
        return Err(AsymptoticsError::NonPositiveTime(t));
    }
    let (g, mu, l) = (params.gamma(), params.mu(), params.l());
    let k = inv.k_force;
    match regime {
        Regime::MuPosLPos | Regime::MuPosLZero if !(k > 0.0) => Err(AsymptoticsError::ZeroPressure),
        Regime::MuPosLPos => Ok(LeadingTerm {
            alpha: 1.0 / (2.0 * g * t),
            beta: l / (2.0 * g * mu * t),
            g1: ((mu * mu + l * l) / (2.0 * k * g * mu)).powf(1.0 / g) * t.powf(-1.0 / g),
        }),
        Regime::MuPosLZero => {
            let g1 = (mu / (2.0 * k * g)).powf(1.0 / g) * t.powf(-1.0 / g);
            Ok(LeadingTerm { alpha: 1.0 / (2.0 * g * t), beta: inv.c_rot * g1 * (-mu * t).exp(), g1 })
        }
        Regime::MuZeroLZero => {
            let e = inv.e_total;
            let alpha = 1.0 / (1.0 / (e * inv.g1_0).sqrt() + t);
            let g1 = alpha * alpha / e;
            Ok(LeadingTerm { alpha, beta: inv.c_rot * g1, g1 })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub coefficient: f64,
    /// `max |v / (c t^p) - 1|` over the fitted samples.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares line through `(ln t, ln |v|)` for samples with
/// `t ∈ [t_lo, t_hi]`. The coefficient carries the common sign.
pub fn fit_power_law(samples: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit, AsymptoticsError> {
    let pts: Vec<(f64, f64)> = samples.iter().copied().filter(|&(t, _)| t >= window.0 && t <= window.1).collect();
    if pts.len() < 8 {
        return Err(AsymptoticsError::TooFewSamples(pts.len()));
    }
    let sign = pts[0].1.signum();
    for &(t, v) in &pts {
        if v == 0.0 || v.signum() != sign || !v.is_finite() {
            return Err(AsymptoticsError::SignChange(t));
        }
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let exponent = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - exponent * mx;
    let coefficient = sign * intercept.exp();
    let residual = pts.iter().map(|&(t, v)| (v / (coefficient * t.powf(exponent)) - 1.0).abs()).fold(0.0, f64::max);
    Ok(PowerLawFit { exponent, coefficient, residual, samples: pts.len() })
}

/// `a₁ = a-d, b₁ = b+c, c₁ = b-c, d₁ = a+d, G₄ = G₁+G₂, G₅ = G₁-G₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetrizedMatrixState {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub d1: f64,
    pub g3: f64,
    pub g4: f64,
    pub g5: f64,
}

pub fn symmetrize(s: &MatrixMomentState) -> SymmetrizedMatrixState {
    SymmetrizedMatrixState {
        a1: s.a - s.d,
        b1: s.b + s.c,
        c1: s.b - s.c,
        d1: s.a + s.d,
        g3: s.g3m,
        g4: s.g1m + s.g2m,
        g5: s.g1m - s.g2m,
    }
}

pub fn desymmetrize(s: &SymmetrizedMatrixState) -> MatrixMomentState {
    MatrixMomentState {
        a: 0.5 * (s.d1 + s.a1),
        b: 0.5 * (s.b1 + s.c1),
        c: 0.5 * (s.b1 - s.c1),
        d: 0.5 * (s.d1 - s.a1),
        g1m: 0.5 * (s.g4 + s.g5),
        g2m: 0.5 * (s.g4 - s.g5),
        g3m: s.g3,
    }
}

/// The matrix system in symmetrized variables. At `μ = l = 0` these are the
/// classical seven equations; the friction and rotation terms follow from
/// the same linear map.
pub fn symmetrized_rhs(params: &ModelParams, k1: f64, s: &SymmetrizedMatrixState) -> SymmetrizedMatrixState {
    let SymmetrizedMatrixState { a1, b1, c1, d1, g3, g4, g5 } = *s;
    let (g, mu, l) = (params.gamma(), params.mu(), params.l());
    SymmetrizedMatrixState {
        a1: -a1 * d1 - k1 * g5 + l * b1 - mu * a1,
        b1: -b1 * d1 - 2.0 * k1 * g3 - l * a1 - mu * b1,
        c1: -c1 * d1 + l * d1 - mu * c1,
        d1: -0.5 * (a1 * a1 + d1 * d1) - 0.5 * (b1 * b1 - c1 * c1) + k1 * g4 - l * c1 - mu * d1,
        g3: -g * d1 * g3 + 0.5 * b1 * g4 - 0.5 * c1 * g5,
        g4: -g * d1 * g4 + a1 * g5 + 2.0 * b1 * g3,
        g5: -g * d1 * g5 + a1 * g4 + 2.0 * c1 * g3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixAsymptote {
    /// Coefficient of `d₁ ~ L₄ t^{-1}`.
    pub l4_estimate: f64,
    pub d1_fit: PowerLawFit,
    /// `sup (|a₁| + |b₁| + |c₁|) / |d₁|` over the window.
    pub isotropy_defect: f64,
    /// Fitted exponent of `Δ`.
    pub delta_exponent: f64,
}

/// Tail diagnostics of a matrix trajectory on `window`, sampled on
/// `n_samples` log-uniform times.
pub fn matrix_asymptote(
    params: &ModelParams,
    traj: &Trajectory<7>,
    window: (f64, f64),
    n_samples: usize,
) -> Result<MatrixAsymptote, AsymptoticsError> {
    let n = n_samples.max(8);
    let (l0, l1) = (window.0.ln(), window.1.ln());
    let mut d1 = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut defect = 0.0_f64;
    for i in 0..n {
        let t = (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp().clamp(window.0, window.1);
        let s = MatrixMomentState::from_array(traj.sample(t)?);
        let y = symmetrize(&s);
        d1.push((t, y.d1));
        delta.push((t, matrix_delta(params, &s)));
        defect = defect.max((y.a1.abs() + y.b1.abs() + y.c1.abs()) / y.d1.abs());
    }
    let d1_fit = fit_power_law(&d1, window)?;
    let delta_fit = fit_power_law(&delta, window)?;
    Ok(MatrixAsymptote {
        l4_estimate: d1_fit.coefficient,
        d1_fit,
        isotropy_defect: defect,
        delta_exponent: delta_fit.exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{embed_scalar, matrix_rhs, scalar_invariants, validate_params, ScalarMomentState};
    use approx::assert_relative_eq;

    fn inv_for(p: &ModelParams, s0: (f64, f64, f64), ep0: f64) -> ScalarInvariants {
        scalar_invariants(p, &ScalarMomentState::new(s0.0, s0.1, s0.2), ep0).unwrap()
    }

    #[test]
    fn leading_terms() {
        let p = validate_params(2.0, 1.0, 1.0).unwrap();
        let inv = inv_for(&p, (1.0, 0.0, 0.0), 1.0);
        let lt = leading_term(&p, &inv, Regime::MuPosLPos, 1000.0).unwrap();
        assert_relative_eq!(lt.alpha, 2.5e-4, max_relative = 1e-15);
        // ((1+1)/(2·1·2·1))^{1/2} = √(1/2)
        assert_relative_eq!(lt.g1 * 1000f64.sqrt(), 0.707_106_781_186_547_5, max_relative = 1e-14);
        assert!(matches!(
            leading_term(&p, &inv, Regime::MuZeroLZero, 1.0),
            Err(AsymptoticsError::RegimeMismatch { .. })
        ));

        let p = validate_params(1.4, 0.5, 0.0).unwrap();
        let inv = inv_for(&p, (1.0, 0.1, 0.3), 0.8);
        for t in [1.0, 10.0, 40.0] {
            let lt = leading_term(&p, &inv, Regime::MuPosLZero, t).unwrap();
            assert_relative_eq!(lt.beta / lt.g1, inv.c_rot * (-0.5 * t).exp(), max_relative = 1e-14);
        }

        let p = validate_params(2.0, 0.0, 0.0).unwrap();
        let inv = inv_for(&p, (1.0, 0.0, 0.0), 1.0);
        let lt = leading_term(&p, &inv, Regime::MuZeroLZero, 1e6).unwrap();
        assert_relative_eq!(lt.alpha * 1e6, 1.0, max_relative = 1e-5);
        assert_relative_eq!(lt.g1, lt.alpha * lt.alpha, max_relative = 1e-15);
    }

    #[test]
    fn power_law_fits() {
        let samples: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let t = 10f64.powf(1.0 + 0.2 * i as f64);
                (t, 3.0 * t.powi(-2))
            })
            .collect();
        let fit = fit_power_law(&samples, (0.0, f64::INFINITY)).unwrap();
        assert_relative_eq!(fit.exponent, -2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficient, 3.0, max_relative = 1e-12);
        assert!(fit.residual <= 1e-12);

        let flat: Vec<(f64, f64)> = (1..12).map(|i| (i as f64, -4.0)).collect();
        let fit = fit_power_law(&flat, (0.0, 100.0)).unwrap();
        assert_eq!(fit.exponent, 0.0);
        assert_relative_eq!(fit.coefficient, -4.0, max_relative = 1e-15);

        assert!(matches!(fit_power_law(&flat, (0.0, 3.0)), Err(AsymptoticsError::TooFewSamples(3))));
        let mut mixed = flat.clone();
        mixed[5].1 = 1.0;
        assert!(matches!(fit_power_law(&mixed, (0.0, 100.0)), Err(AsymptoticsError::SignChange(_))));
    }

    #[test]
    fn symmetrized_variables() {
        let p = validate_params(1.4, 0.0, 0.0).unwrap();
        let m = embed_scalar(&p, &ScalarMomentState::new(0.7, 0.3, -0.4)).unwrap();
        let s = symmetrize(&m);
        assert_eq!((s.a1, s.b1, s.g5, s.g3), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((s.c1, s.d1), (-0.8, 0.6));
        // exact for dyadic entries; rounding-level otherwise
        let m = MatrixMomentState { a: 0.125, b: 0.25, c: -0.375, d: 0.0625, g1m: 1.0, g2m: 1.25, g3m: 0.5 };
        assert_eq!(desymmetrize(&symmetrize(&m)), m);
    }

    #[test]
    fn symmetrized_rhs_is_the_pushed_forward_matrix_rhs() {
        for (mu, l) in [(0.0, 0.0), (0.1, 0.2), (0.0, -0.7)] {
            let p = validate_params(1.4, mu, l).unwrap();
            let m = MatrixMomentState { a: 0.1, b: 0.2, c: -0.3, d: 0.05, g1m: 1.0, g2m: 1.2, g3m: 0.1 };
            let dm = MatrixMomentState::from_array(matrix_rhs(&p, 0.5, &m).unwrap());
            let want = symmetrize(&dm);
            let got = symmetrized_rhs(&p, 0.5, &symmetrize(&m));
            for (g, w) in [
                (got.a1, want.a1),
                (got.b1, want.b1),
                (got.c1, want.c1),
                (got.d1, want.d1),
                (got.g3, want.g3),
                (got.g4, want.g4),
                (got.g5, want.g5),
            ] {
                assert!((g - w).abs() < 1e-15, "mu={mu} l={l}: {got:?} vs {want:?}");
            }
        }
    }
}
