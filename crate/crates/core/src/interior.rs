//! Numerical certification of interior solutions.
//!
//! A solution with velocity `V = A(t) r` is interior when a gauge
//! `(λ, q, U_φ)` exists such that `∫λ` and `∫λ^q ξ^{1/n}` converge
//! (`ξ = det A`) and the three gauge expressions
//!
//! * `Q₁ R`,
//! * `Q₂ - λ⁻¹ (A L A⁻¹ - U_φ)`,
//! * `(ln R)'`
//!
//! stay bounded, where
//! `Q₁ = λ⁻¹((γ-1)/2 tr A + q (ln λ)')`,
//! `Q₂ = λ⁻¹((ln λ)' E + A((A⁻¹)' + E))`,
//! `R = λ^{2q-2} (det A)^{2/n}` and `B = A Aᵀ (det A)^{-2/n}`, with `n = 2`.
//!
//! Boundedness on `[t₀, ∞)` cannot be proved from samples. A
//! [`Verdict::CertifiedInterior`] means: all checks pass on the scanned
//! horizon, the integrals converge with a small fitted tail, and the
//! suprema do not grow from one decade of `1 + t` to the next.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::exec::Exec;
use crate::integrator::{IntegrationError, Trajectory};
use crate::moments::{
    matrix_rhs, scalar_rhs, MatrixMomentState, ModelParams, MomentError, ScalarInvariants, ScalarMomentState,
};
use crate::numeric::{compensated_sum, integrate};

const DIM: f64 = 2.0;
/// Relative size of the fitted tail below which an integral is converged.
pub const TAIL_REL_TOL: f64 = 1e-6;
/// Admitted growth of the supremum from the previous decade to the last.
pub const GROWTH_TOL: f64 = 0.1;
pub const MIN_SCAN_NODES: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InteriorError {
    #[error("det A({t}) = {det} is not positive")]
    SingularA { t: f64, det: f64 },
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("this gauge needs positive friction, got mu = {0}")]
    FrictionRequired(f64),
    #[error("invalid gauge: {0}")]
    InvalidGauge(String),
    #[error("invalid scan grid: {0}")]
    InvalidGrid(String),
    #[error("integrand of condition {which} seems not integrable (fitted exponent {exponent})")]
    DivergenceSuspected { which: Condition, exponent: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error(transparent)]
    Trajectory(#[from] IntegrationError),
    #[error(transparent)]
    Moment(#[from] MomentError),
}

/// `λ(t) = s (1+t)^p e^{-ν t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lambda {
    pub scale: f64,
    pub power: f64,
    pub rate: f64,
}

impl Lambda {
    pub fn at(&self, t: f64) -> f64 {
        self.scale * (1.0 + t).powf(self.power) * (-self.rate * t).exp()
    }

    pub fn ln_at(&self, t: f64) -> f64 {
        self.scale.ln() + self.power * (1.0 + t).ln() - self.rate * t
    }

    /// `(ln λ)'`.
    pub fn log_derivative(&self, t: f64) -> f64 {
        self.power / (1.0 + t) - self.rate
    }
}

/// `U_φ(t) = (u₀ + u₁/(1+t)) J`; every skew 2×2 matrix is a multiple of `J`,
/// so antisymmetry holds exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewGauge {
    pub constant: f64,
    pub decaying: f64,
}

impl SkewGauge {
    pub const ZERO: Self = Self { constant: 0.0, decaying: 0.0 };

    pub fn at(&self, t: f64) -> Matrix2<f64> {
        let u = self.constant + self.decaying / (1.0 + t);
        Matrix2::new(0.0, u, -u, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeChoice {
    pub lambda: Lambda,
    pub q_exp: f64,
    pub u_phi: SkewGauge,
    pub t0: f64,
    /// `f_V` of the force; constant for `f = L V`.
    #[serde(serialize_with = "serialize_matrix")]
    pub force_matrix: Matrix2<f64>,
}

fn serialize_matrix<S: serde::Serializer>(m: &Matrix2<f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&[m[(0, 0)], m[(0, 1)]])?;
    seq.serialize_element(&[m[(1, 0)], m[(1, 1)]])?;
    seq.end()
}

impl GaugeChoice {
    pub fn new(
        lambda: Lambda,
        q_exp: f64,
        u_phi: SkewGauge,
        t0: f64,
        force_matrix: Matrix2<f64>,
    ) -> Result<Self, InteriorError> {
        let finite = [lambda.scale, lambda.power, lambda.rate, q_exp, u_phi.constant, u_phi.decaying, t0]
            .iter()
            .chain(force_matrix.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(InteriorError::InvalidGauge("non-finite coefficient".into()));
        }
        if !(lambda.scale > 0.0) {
            return Err(InteriorError::InvalidGauge(format!("lambda scale must be positive, got {}", lambda.scale)));
        }
        if !(t0 >= 0.0) {
            return Err(InteriorError::InvalidGauge(format!("t0 must be non-negative, got {t0}")));
        }
        Ok(Self { lambda, q_exp, u_phi, t0, force_matrix })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GaugeKind {
    /// `λ = (1+t)^{-2}`, `q = n(γ-1)/4`, `U_φ = 0`.
    Serre,
    /// `λ = (1+t)^{-(δ+1)}`, `q = 3/2 - (n+1)/(2(δ+1))`, `U_φ = 0`.
    Cor21 { delta: f64 },
    /// `λ = (1+t)^{-(δ+1)} e^{-μt}`, `q = 3/2`, `U_φ = U₁ - U₂/(1+t)` with
    /// `U₁ = l J`, `U₂ = (δ l / μ) J`; for `A = (δE + U₂)/(1+t)` this
    /// makes the second expression vanish identically.
    Cor22 { delta: f64 },
}

pub fn gauge_preset(params: &ModelParams, kind: GaugeKind) -> Result<GaugeChoice, InteriorError> {
    let force = params.force_matrix();
    let check_delta = |d: f64| if d > 0.0 && d.is_finite() { Ok(d) } else { Err(InteriorError::BadDelta(d)) };
    match kind {
        GaugeKind::Serre => GaugeChoice::new(
            Lambda { scale: 1.0, power: -2.0, rate: 0.0 },
            DIM * (params.gamma() - 1.0) / 4.0,
            SkewGauge::ZERO,
            0.0,
            force,
        ),
        GaugeKind::Cor21 { delta } => {
            let d = check_delta(delta)?;
            GaugeChoice::new(
                Lambda { scale: 1.0, power: -(d + 1.0), rate: 0.0 },
                1.5 - (DIM + 1.0) / (2.0 * (d + 1.0)),
                SkewGauge::ZERO,
                0.0,
                force,
            )
        }
        GaugeKind::Cor22 { delta } => {
            let d = check_delta(delta)?;
            let mu = params.mu();
            if !(mu > 0.0) {
                return Err(InteriorError::FrictionRequired(mu));
            }
            let l = params.l();
            GaugeChoice::new(
                Lambda { scale: 1.0, power: -(d + 1.0), rate: mu },
                1.5,
                SkewGauge { constant: l, decaying: -d * l / mu },
                0.0,
                force,
            )
        }
    }
}

/// A velocity matrix `A(t)` with its derivative.
pub trait VelocityMatrix: Sync {
    fn matrix(&self, t: f64) -> Result<Matrix2<f64>, InteriorError>;

    /// Fourth-order central difference with a step scaled to `1 + |t|`.
    fn derivative(&self, t: f64) -> Result<Matrix2<f64>, InteriorError> {
        let h = 1e-3 * (1.0 + t.abs());
        let m2 = self.matrix(t - 2.0 * h)?;
        let m1 = self.matrix(t - h)?;
        let p1 = self.matrix(t + h)?;
        let p2 = self.matrix(t + 2.0 * h)?;
        Ok((m2 - p2 + (p1 - m1) * 8.0) / (12.0 * h))
    }

    /// Relative accuracy of the values returned by [`VelocityMatrix::matrix`].
    fn relative_accuracy(&self) -> f64 {
        f64::EPSILON
    }
}

/// Closure-backed matrix function; the derivative is by finite differences.
pub struct FnVelocity<F>(pub F);

impl<F: Fn(f64) -> Matrix2<f64> + Sync> VelocityMatrix for FnVelocity<F> {
    fn matrix(&self, t: f64) -> Result<Matrix2<f64>, InteriorError> {
        Ok((self.0)(t))
    }
}

/// `A(t) = A₀ / (1 + t)`.
#[derive(Debug, Clone, Copy)]
pub struct LinearDecay {
    pub a0: Matrix2<f64>,
}

impl VelocityMatrix for LinearDecay {
    fn matrix(&self, t: f64) -> Result<Matrix2<f64>, InteriorError> {
        Ok(self.a0 / (1.0 + t))
    }

    fn derivative(&self, t: f64) -> Result<Matrix2<f64>, InteriorError> {
        Ok(-self.a0 / ((1.0 + t) * (1.0 + t)))
    }
}

/// `A(t)` of a scalar moment trajectory; `A'` comes from the right-hand side.
pub struct ScalarTrajectory<'a> {
    pub params: ModelParams,
    pub inv: ScalarInvariants,
    pub traj: &'a Trajectory<3>,
    /// Relative accuracy of the states, normally the integration `rtol`.
    pub accuracy: f64,
}

impl VelocityMatrix for ScalarTrajectory<'_> {
    fn matrix(&self, t: f64) -> Result<Matrix2<f64>, InteriorError> {
        Ok(ScalarMomentState::from_array(self.traj.sample(t)?).velocity_matrix())
    }

    fn derivative(&self, t: f64) -> Result<Matrix2<f64>, InteriorError> {
        let s = ScalarMomentState::from_array(self.traj.sample(t)?);
        let d = scalar_rhs(&self.params, &self.inv, &s)?;
        Ok(Matrix2::new(d[1], d[2], -d[2], d[1]))
    }

    fn relative_accuracy(&self) -> f64 {
        self.accuracy.max(f64::EPSILON)
    }
}

/// `A(t)` of a matrix moment trajectory.
pub struct MatrixTrajectory<'a> {
    pub params: ModelParams,
    pub k1: f64,
    pub traj: &'a Trajectory<7>,
    pub accuracy: f64,
}

impl VelocityMatrix for MatrixTrajectory<'_> {
    fn matrix(&self, t: f64) -> Result<Matrix2<f64>, InteriorError> {
        Ok(MatrixMomentState::from_array(self.traj.sample(t)?).velocity_matrix())
    }

    fn derivative(&self, t: f64) -> Result<Matrix2<f64>, InteriorError> {
        let s = MatrixMomentState::from_array(self.traj.sample(t)?);
        let d = matrix_rhs(&self.params, self.k1, &s)?;
        Ok(Matrix2::new(d[3], d[4], d[5], d[6]))
    }

    fn relative_accuracy(&self) -> f64 {
        self.accuracy.max(f64::EPSILON)
    }
}

/// The gauge quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValues {
    pub t: f64,
    pub q1: f64,
    pub q2: Matrix2<f64>,
    pub r: f64,
    pub b: Matrix2<f64>,
    pub xi: f64,
    pub dln_r: f64,
    /// `Q₁ R`.
    pub expr_q1r: f64,
    /// `Q₂ - λ⁻¹ (A L A⁻¹ - U_φ)`.
    pub expr_q2: Matrix2<f64>,
    /// Resolution of the three expressions: the rounding and data accuracy
    /// times the magnitudes of the terms that cancel in each of them.
    pub rounding: [f64; 3],
}

impl QValues {
    /// `(|Q₁R|, ‖expr_q2‖_F, |(ln R)'|)`.
    pub fn norms(&self) -> [f64; 3] {
        [self.expr_q1r.abs(), self.expr_q2.norm(), self.dln_r.abs()]
    }

    /// [`QValues::norms`] with the resolution removed; an expression that is
    /// zero up to cancellation and data error counts as zero.
    pub fn resolved_norms(&self) -> [f64; 3] {
        let n = self.norms();
        std::array::from_fn(|k| if n[k].is_nan() { n[k] } else { (n[k] - self.rounding[k]).max(0.0) })
    }
}

const ROUNDING_FACTOR: f64 = 64.0 * f64::EPSILON;

pub fn q_functions<A: VelocityMatrix + ?Sized>(
    gauge: &GaugeChoice,
    a_fn: &A,
    t: f64,
    gamma: f64,
) -> Result<QValues, InteriorError> {
    let a = a_fn.matrix(t)?;
    let xi = a.determinant();
    if !(xi > 0.0) {
        return Err(InteriorError::SingularA { t, det: xi });
    }
    let a_inv = a.try_inverse().ok_or(InteriorError::SingularA { t, det: xi })?;
    let da = a_fn.derivative(t)?;
    let eye = Matrix2::identity();
    let lam = gauge.lambda.at(t);
    let dln_lam = gauge.lambda.log_derivative(t);
    let q = gauge.q_exp;

    let q1 = (0.5 * (gamma - 1.0) * a.trace() + q * dln_lam) / lam;
    // (A⁻¹)' = -A⁻¹ A' A⁻¹
    let d_a_inv = -a_inv * da * a_inv;
    let q2 = (eye * dln_lam + a * (d_a_inv + eye)) / lam;
    let xi_n = xi.powf(2.0 / DIM);
    // λ^{2q-2} in log form so that e^{μt}-type gauges keep their range
    let r = ((2.0 * q - 2.0) * gauge.lambda.ln_at(t)).exp() * xi_n;
    let b = a * a.transpose() / xi_n;
    let dln_r = (2.0 * q - 2.0) * dln_lam + (2.0 / DIM) * (a_inv * da).trace();
    let conj = a * gauge.force_matrix * a_inv;
    let u = gauge.u_phi.at(t);
    let expr_q2 = q2 - (conj - u) / lam;
    let eps = ROUNDING_FACTOR + 4.0 * a_fn.relative_accuracy();
    let rounding = [
        eps * (0.5 * (gamma - 1.0) * a.trace().abs() + (q * dln_lam).abs()) * r / lam,
        eps * (dln_lam.abs() + a.norm() + (a * d_a_inv).norm() + conj.norm() + u.norm())
            * (1.0 + a.norm() * a_inv.norm())
            / lam,
        eps * (((2.0 * q - 2.0) * dln_lam).abs() + (a_inv * da).norm()),
    ];
    Ok(QValues { t, q1, q2, r, b, xi, dln_r, expr_q1r: q1 * r, expr_q2, rounding })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// `ξ = det A > 0`.
    XiPositive,
    /// `∫ λ < ∞`.
    IntegralC,
    /// `∫ λ^q ξ^{1/n} < ∞`.
    IntegralD,
    /// `Q₁ R` bounded.
    BoundedQ1R,
    /// `Q₂ - λ⁻¹(A L A⁻¹ - U_φ)` bounded.
    BoundedQ2,
    /// `(ln R)'` bounded.
    BoundedLogR,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Condition::XiPositive => "xi>0",
            Condition::IntegralC => "c",
            Condition::IntegralD => "d",
            Condition::BoundedQ1R => "Q1*R",
            Condition::BoundedQ2 => "Q2-gauge",
            Condition::BoundedLogR => "(ln R)'",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntegralStatus {
    Converged,
    DivergenceSuspected,
    /// Finite partial integral but the fitted tail is not yet small.
    Unresolved,
}

/// `∫_{t₀}^{horizon}` plus a fitted tail `∫_{horizon}^∞` of a positive integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralEstimate {
    pub partial: f64,
    pub quadrature_error: f64,
    pub tail: f64,
    /// Exponent `p` of the fit `f ≈ c (1+t)^p e^{-νt}` over the last decade.
    pub fitted_exponent: f64,
    pub fitted_rate: f64,
    pub status: IntegralStatus,
}

impl IntegralEstimate {
    pub fn total(&self) -> f64 {
        self.partial + self.tail
    }

    /// The estimated integral, or the divergence that was detected.
    pub fn value(&self, which: Condition) -> Result<f64, InteriorError> {
        match self.status {
            IntegralStatus::DivergenceSuspected => {
                Err(InteriorError::DivergenceSuspected { which, exponent: self.fitted_exponent })
            }
            _ => Ok(self.total()),
        }
    }
}

/// Log-uniform nodes in `1 + t` on `[t0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanGrid {
    pub t0: f64,
    pub horizon: f64,
    pub nodes: usize,
}

impl ScanGrid {
    pub fn validate(&self) -> Result<(), InteriorError> {
        if self.nodes < MIN_SCAN_NODES {
            return Err(InteriorError::InvalidGrid(format!(
                "at least {MIN_SCAN_NODES} nodes required, got {}",
                self.nodes
            )));
        }
        if !(self.t0 >= 0.0 && self.horizon.is_finite() && self.horizon > self.t0) {
            return Err(InteriorError::InvalidGrid(format!(
                "need 0 <= t0 < horizon, got [{}, {}]",
                self.t0, self.horizon
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let (lo, hi) = ((1.0 + self.t0).ln(), (1.0 + self.horizon).ln());
        let n = self.nodes;
        (0..n)
            .map(|i| match i {
                0 => self.t0,
                _ if i == n - 1 => self.horizon,
                _ => (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp() - 1.0,
            })
            .collect()
    }
}

const TAIL_SAMPLES: usize = 33;
const POWER_DIVERGENCE_MARGIN: f64 = 1e-3;

/// Least-squares fit of `ln f = c + p ln s - ν s` (`s = 1 + t`) over the
/// last decade of `s`; the exponential term is kept only when it changes
/// the integrand materially over the decade.
fn fit_tail(samples: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let fit = |with_rate: bool| -> Option<(f64, f64, f64)> {
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for &(s, f) in samples {
            let row = Vector3::new(1.0, s.ln(), if with_rate { -s } else { 0.0 });
            ata += row * row.transpose();
            atb += row * f.ln();
        }
        if !with_rate {
            ata[(2, 2)] = 1.0;
        }
        let x = ata.try_inverse()? * atb;
        Some((x[0], x[1], x[2]))
    };
    let (c, p, nu) = fit(true)?;
    let s_end = samples.last()?.0;
    let s_start = samples.first()?.0;
    if (nu * (s_end - s_start)).abs() > 1.0 {
        Some((c, p, nu))
    } else {
        fit(false)
    }
}

/// Integral of a positive integrand over `[t0, horizon]` with a fitted tail.
pub fn tail_integral<F: Fn(f64) -> f64 + Sync>(
    exec: Exec,
    f: F,
    t0: f64,
    horizon: f64,
) -> Result<IntegralEstimate, InteriorError> {
    let (s0, s1) = (1.0 + t0, 1.0 + horizon);
    // panels doubling in 1 + t
    let n_panels = ((s1 / s0).log2().ceil() as usize).max(1);
    let edges: Vec<f64> = (0..=n_panels)
        .map(|k| if k == n_panels { s1 } else { s0 * (s1 / s0).powf(k as f64 / n_panels as f64) })
        .collect();
    // absolute floor from the integrand scale, so panels far down a decaying
    // tail (or in the subnormal range) do not have to meet a relative target
    let scale = edges.iter().map(|&s| s * f(s - 1.0)).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let abs_tol = 1e-15 * scale;
    let panels = exec.map_range(n_panels, |k| {
        integrate(|s| f(s - 1.0), edges[k], edges[k + 1], abs_tol, 1e-13)
            .map_err(|e| InteriorError::Quadrature(e.to_string()))
    });
    let mut parts = Vec::with_capacity(n_panels);
    for p in panels {
        parts.push(p?);
    }
    let partial = compensated_sum(parts.iter().map(|q| q.value));
    let quadrature_error: f64 = parts.iter().map(|q| q.error).sum();

    let decade_start = (s1 / 10.0).max(s0);
    let samples: Vec<(f64, f64)> = (0..TAIL_SAMPLES)
        .map(|i| {
            let s = decade_start * (s1 / decade_start).powf(i as f64 / (TAIL_SAMPLES - 1) as f64);
            (s, f(s - 1.0))
        })
        .collect();
    let f_end = samples[TAIL_SAMPLES - 1].1;
    if samples.iter().any(|&(_, v)| !v.is_finite() || v < 0.0) {
        return Err(InteriorError::Quadrature(format!(
            "integrand is not positive on the last decade (f(horizon) = {f_end})"
        )));
    }
    let est = |tail, p, nu, status| IntegralEstimate {
        partial,
        quadrature_error,
        tail,
        fitted_exponent: p,
        fitted_rate: nu,
        status,
    };
    if f_end == 0.0 {
        // underflowed: the tail is below every representable bound
        return Ok(est(0.0, f64::NEG_INFINITY, 0.0, IntegralStatus::Converged));
    }
    let positive: Vec<(f64, f64)> = samples.into_iter().filter(|&(_, v)| v > 0.0).collect();
    let Some((_, p, nu)) = fit_tail(&positive) else {
        return Ok(est(f64::INFINITY, f64::NAN, f64::NAN, IntegralStatus::Unresolved));
    };
    let tail_and_status = if nu * (s1 - decade_start) > 1.0 {
        // ∫_{s₁}^∞ c s^p e^{-νs} ds ≈ f(s₁) / (ν - p/s₁) for ν s₁ ≫ |p|
        let denom = nu - p / s1;
        if denom > 0.0 {
            Some(f_end / denom)
        } else {
            None
        }
    } else if nu * (s1 - decade_start) < -1.0 {
        None
    } else if p < -1.0 - POWER_DIVERGENCE_MARGIN {
        Some(f_end * s1 / (-p - 1.0))
    } else {
        None
    };
    Ok(match tail_and_status {
        None => est(f64::INFINITY, p, nu, IntegralStatus::DivergenceSuspected),
        Some(tail) if tail < TAIL_REL_TOL * partial.abs() => est(tail, p, nu, IntegralStatus::Converged),
        Some(tail) => est(tail, p, nu, IntegralStatus::Unresolved),
    })
}

/// Conditions c) `∫λ` and d) `∫λ^q ξ^{1/n}` over `[t₀, horizon]` plus tails.
pub fn condition_integrals<A: VelocityMatrix + ?Sized>(
    exec: Exec,
    gauge: &GaugeChoice,
    a_fn: &A,
    horizon: f64,
) -> Result<(IntegralEstimate, IntegralEstimate), InteriorError> {
    if !(horizon > gauge.t0) {
        return Err(InteriorError::InvalidGrid(format!("horizon {horizon} must exceed t0 = {}", gauge.t0)));
    }
    let c = tail_integral(exec, |t| gauge.lambda.at(t), gauge.t0, horizon)?;
    let q = gauge.q_exp;
    let d = tail_integral(
        exec,
        |t| match a_fn.matrix(t) {
            // non-positive ξ makes the integrand undefined
            Ok(a) => (q * gauge.lambda.ln_at(t)).exp() * a.determinant().powf(1.0 / DIM),
            Err(_) => f64::NAN,
        },
        gauge.t0,
        horizon,
    )?;
    Ok((c, d))
}

/// Suprema of one expression, with its resolution removed, over the scan
/// and over its last two decades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupCheck {
    pub sup: f64,
    pub previous_decade: f64,
    pub last_decade: f64,
    pub growing: bool,
}

impl SupCheck {
    pub fn bounded(&self) -> bool {
        self.sup.is_finite() && !self.growing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Verdict {
    CertifiedInterior,
    ConditionFailed(Condition),
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorReport {
    pub gauge: GaugeChoice,
    pub grid: ScanGrid,
    pub xi_positive: bool,
    /// Smallest `det A` seen on the grid.
    pub xi_min: f64,
    pub integral_c: Option<IntegralEstimate>,
    pub integral_d: Option<IntegralEstimate>,
    pub sup_q1r: SupCheck,
    pub sup_q2: SupCheck,
    pub sup_log_r: SupCheck,
    pub verdict: Verdict,
}

fn sup_check(times: &[f64], values: &[f64], horizon: f64) -> SupCheck {
    let s_end = 1.0 + horizon;
    let s_first = 1.0 + times[0];
    // a decade of 1 + t, or a third of the scanned range when shorter
    let width = (s_end / s_first).ln().min(3.0 * std::f64::consts::LN_10) / 3.0;
    let width = width.max((s_end / s_first).ln() / 3.0).min(std::f64::consts::LN_10);
    let last_lo = s_end * (-width).exp();
    let prev_lo = s_end * (-2.0 * width).exp();
    let mut sup = 0.0_f64;
    let (mut prev, mut last) = (0.0_f64, 0.0_f64);
    for (&t, &v) in times.iter().zip(values) {
        // NaN is turned into +∞ so that it cannot be masked by max
        let v = if v.is_nan() { f64::INFINITY } else { v };
        sup = sup.max(v);
        let s = 1.0 + t;
        if s >= last_lo {
            last = last.max(v);
        } else if s >= prev_lo {
            prev = prev.max(v);
        }
    }
    let floor = 1e-12 * (1.0 + prev);
    let growing = !(last <= (1.0 + GROWTH_TOL) * prev + floor);
    SupCheck { sup, previous_decade: prev, last_decade: last, growing }
}

/// Runs every check of the interiority criterion on `grid` and assembles the
/// verdict. The condition integrals are taken over `[grid.t0, grid.horizon]`.
pub fn boundedness_scan<A: VelocityMatrix + ?Sized>(
    exec: Exec,
    gauge: &GaugeChoice,
    a_fn: &A,
    gamma: f64,
    grid: &ScanGrid,
) -> Result<InteriorReport, InteriorError> {
    grid.validate()?;
    if (grid.t0 - gauge.t0).abs() > 0.0 {
        return Err(InteriorError::InvalidGrid(format!("grid starts at {} but the gauge at {}", grid.t0, gauge.t0)));
    }
    let times = grid.times();
    let evaluated = exec.map_slice(&times, |&t| q_functions(gauge, a_fn, t, gamma));
    let mut values = Vec::with_capacity(times.len());
    let mut xi_min = f64::INFINITY;
    let mut xi_positive = true;
    for r in evaluated {
        match r {
            Ok(v) => {
                xi_min = xi_min.min(v.xi);
                values.push(v);
            }
            Err(InteriorError::SingularA { det, .. }) => {
                xi_positive = false;
                xi_min = xi_min.min(det);
            }
            Err(e) => return Err(e),
        }
    }

    let column = |k: usize| values.iter().map(|v| v.resolved_norms()[k]).collect::<Vec<_>>();
    let nan_check = SupCheck { sup: f64::NAN, previous_decade: f64::NAN, last_decade: f64::NAN, growing: true };
    let (sup_q1r, sup_q2, sup_log_r) = if xi_positive {
        (
            sup_check(&times, &column(0), grid.horizon),
            sup_check(&times, &column(1), grid.horizon),
            sup_check(&times, &column(2), grid.horizon),
        )
    } else {
        (nan_check, nan_check, nan_check)
    };

    let (integral_c, integral_d) = if xi_positive {
        let (c, d) = condition_integrals(exec, gauge, a_fn, grid.horizon)?;
        (Some(c), Some(d))
    } else {
        (None, None)
    };

    let status = |e: &Option<IntegralEstimate>| e.map(|e| e.status);
    let mut failed = None;
    let mut unresolved = false;
    let checks = [
        (Condition::XiPositive, Some(xi_positive)),
        (Condition::IntegralC, status(&integral_c).map(|s| s != IntegralStatus::DivergenceSuspected)),
        (Condition::IntegralD, status(&integral_d).map(|s| s != IntegralStatus::DivergenceSuspected)),
        (Condition::BoundedQ1R, Some(sup_q1r.bounded())),
        (Condition::BoundedQ2, Some(sup_q2.bounded())),
        (Condition::BoundedLogR, Some(sup_log_r.bounded())),
    ];
    for (cond, ok) in checks {
        if ok == Some(false) {
            failed = Some(cond);
            break;
        }
    }
    for e in [integral_c, integral_d].iter().flatten() {
        unresolved |= e.status == IntegralStatus::Unresolved;
    }
    let verdict = match (failed, unresolved) {
        (Some(c), _) => Verdict::ConditionFailed(c),
        (None, true) => Verdict::Inconclusive,
        (None, false) => Verdict::CertifiedInterior,
    };
    Ok(InteriorReport {
        gauge: *gauge,
        grid: *grid,
        xi_positive,
        xi_min,
        integral_c,
        integral_d,
        sup_q1r,
        sup_q2,
        sup_log_r,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::validate_params;
    use approx::assert_relative_eq;

    fn serre() -> (ModelParams, GaugeChoice, LinearDecay) {
        let p = validate_params(2.0, 0.0, 0.0).unwrap();
        let g = gauge_preset(&p, GaugeKind::Serre).unwrap();
        (p, g, LinearDecay { a0: Matrix2::identity() })
    }

    #[test]
    fn serre_gauge_quantities() {
        let (_, g, a) = serre();
        assert_eq!(g.q_exp, 0.5);
        for t in [0.0, 0.3, 1.0, 17.0, 1e3, 1e6] {
            let v = q_functions(&g, &a, t, 2.0).unwrap();
            assert!(v.q1.abs() <= 1e-12, "{t}: {}", v.q1);
            assert_relative_eq!(v.r, 1.0, max_relative = 1e-12);
            assert!(v.dln_r.abs() <= 1e-12 * (1.0 + t));
            assert!(v.q2.norm() <= 1e-12 * (1.0 + t).powi(2), "{t}: {}", v.q2);
            assert_relative_eq!(v.b.determinant(), 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn finite_difference_derivative_matches() {
        let a0 = Matrix2::new(0.7, 0.2, -0.1, 0.4);
        let exact = LinearDecay { a0 };
        let fd = FnVelocity(move |t: f64| a0 / (1.0 + t));
        for t in [0.5, 3.0, 40.0] {
            let d = exact.derivative(t).unwrap() - fd.derivative(t).unwrap();
            assert!(d.norm() < 1e-10 * exact.derivative(t).unwrap().norm(), "{t}");
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let (_, g, _) = serre();
        let a = FnVelocity(|_t: f64| Matrix2::new(1.0, 0.0, 0.0, -1.0));
        assert!(matches!(q_functions(&g, &a, 1.0, 2.0), Err(InteriorError::SingularA { .. })));
    }

    #[test]
    fn serre_integrals_are_one() {
        let (_, g, a) = serre();
        let (c, d) = condition_integrals(Exec::Sequential, &g, &a, 1e7).unwrap();
        assert_eq!(c.status, IntegralStatus::Converged);
        assert_eq!(d.status, IntegralStatus::Converged);
        assert!((c.total() - 1.0).abs() < 1e-8, "{c:?}");
        assert!((d.total() - 1.0).abs() < 1e-8, "{d:?}");
    }

    #[test]
    fn harmonic_and_constant_gauges_diverge() {
        let (p, _, a) = serre();
        let force = p.force_matrix();
        for power in [-1.0, 0.0, 0.5] {
            let g =
                GaugeChoice::new(Lambda { scale: 1.0, power, rate: 0.0 }, 0.5, SkewGauge::ZERO, 0.0, force).unwrap();
            let (c, _) = condition_integrals(Exec::Sequential, &g, &a, 1e6).unwrap();
            assert_eq!(c.status, IntegralStatus::DivergenceSuspected, "{power}");
            assert!(matches!(c.value(Condition::IntegralC), Err(InteriorError::DivergenceSuspected { .. })));
        }
    }

    #[test]
    fn exponential_tail_converges() {
        let est = tail_integral(Exec::Sequential, |t| (1.0 + t).powf(1.25) * (-t).exp(), 0.0, 60.0).unwrap();
        assert_eq!(est.status, IntegralStatus::Converged);
        // ∫₀^∞ (1+t)^{5/4} e^{-t} dt = e Γ(9/4, 1)
        assert_relative_eq!(est.total(), 2.459_184_978_176_329, max_relative = 1e-10);
    }

    #[test]
    fn subnormal_tail_panels_are_accepted() {
        let est =
            tail_integral(Exec::Sequential, |t| 83.36 * (1.0 + t).powf(0.43) * (-0.214 * t).exp(), 0.0, 1e5).unwrap();
        assert_eq!(est.status, IntegralStatus::Converged);
        assert!(est.total().is_finite() && est.total() > 0.0);
    }

    #[test]
    fn serre_certifies_and_constant_lambda_fails_c() {
        let (p, g, a) = serre();
        let grid = ScanGrid { t0: 0.0, horizon: 1e7, nodes: 400 };
        let rep = boundedness_scan(Exec::Parallel, &g, &a, 2.0, &grid).unwrap();
        assert_eq!(rep.verdict, Verdict::CertifiedInterior, "{rep:?}");
        assert!(rep.sup_q1r.sup <= 1e-12 && rep.sup_log_r.sup <= 1e-12);
        let flat = GaugeChoice { lambda: Lambda { scale: 1.0, power: 0.0, rate: 0.0 }, ..g };
        let rep = boundedness_scan(Exec::Parallel, &flat, &a, 2.0, &grid).unwrap();
        assert_eq!(rep.verdict, Verdict::ConditionFailed(Condition::IntegralC));
        assert!(gauge_preset(&p, GaugeKind::Cor21 { delta: 0.0 }).is_err());
    }

    #[test]
    fn cor22_gauge_cancels_for_linear_decay() {
        let p = validate_params(2.0, 1.0, 0.8).unwrap();
        let delta = 0.25;
        let g = gauge_preset(&p, GaugeKind::Cor22 { delta }).unwrap();
        assert_eq!(g.q_exp, 1.5);
        let u2 = delta * p.l() / p.mu();
        let a = LinearDecay { a0: Matrix2::new(delta, u2, -u2, delta) };
        for t in [0.0, 1.0, 10.0, 30.0] {
            let v = q_functions(&g, &a, t, 2.0).unwrap();
            let scale = 1.0 / g.lambda.at(t);
            assert!(v.expr_q2.norm() <= 1e-12 * scale, "{t}: {}", v.expr_q2);
            let u = g.u_phi.at(t);
            assert_eq!(u + u.transpose(), Matrix2::zeros());
        }
        let grid = ScanGrid { t0: 0.0, horizon: 300.0, nodes: 300 };
        let rep = boundedness_scan(Exec::Sequential, &g, &a, 2.0, &grid).unwrap();
        assert_eq!(rep.verdict, Verdict::CertifiedInterior, "{rep:?}");
    }

    #[test]
    fn cor21_at_delta_one_is_the_serre_gauge() {
        let p = validate_params(2.0, 0.0, 0.0).unwrap();
        let g = gauge_preset(&p, GaugeKind::Cor21 { delta: 1.0 }).unwrap();
        assert_eq!(g.lambda, Lambda { scale: 1.0, power: -2.0, rate: 0.0 });
        assert_eq!(g.q_exp, 0.75);
        assert!(matches!(gauge_preset(&p, GaugeKind::Cor22 { delta: 0.25 }), Err(InteriorError::FrictionRequired(_))));
    }
}
