//! The explicit frictionless (`μ = 0`) solution of the scalar system.
//!
//! With `μ = 0` the rotation rate is slaved to the inverse inertia moment,
//! `β = C G₁ + l/2`, and the orbit lies on the level set `α² = R(G₁)` with
//!
//! ```text
//! R(g) = K g^γ - C² g² + (E - lC) g - l²/4 .
//! ```
//!
//! For `γ > 1` and `K ≤ 0`, `R` is concave on `(0, ∞)`, so an orbit has at
//! most two turning points and `G₁(t)` oscillates between them (or escapes
//! to `0` or `∞` when a turning point is missing). Time along a monotone
//! branch is `t = -∫ dG₁ / (2 G₁ α(G₁))`.

use serde::Serialize;
use thiserror::Error;

use crate::exec::Exec;
use crate::moments::{ModelParams, ScalarInvariants, ScalarMomentState};
use crate::numeric::{bisect, compensated_sum, integrate, newton_bracketed, QuadratureError};

/// Radicand values within this distance of zero are treated as turning points.
pub const RADICAND_CLAMP: f64 = 1e-14;
const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("the explicit solution requires mu = 0, got mu = {0}")]
    FrictionPresent(f64),
    #[error("G1 must be positive, got {0}")]
    NonPositiveG1(f64),
    #[error("radicand {value:e} < 0 at G1 = {g1}: the point is off the orbit")]
    NegativeRadicand { g1: f64, value: f64 },
    #[error("the interval [{from}, {to}] crosses a turning point")]
    BranchCrossing { from: f64, to: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("the solution escapes at t = {escape_time}, before t = {t}")]
    BeyondEscape { t: f64, escape_time: f64 },
    #[error("negative time {0} requested")]
    NegativeTime(f64),
}

/// Sign of `α` on a monotone branch: `Plus` means `G₁` decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    fn flip(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

fn require_frictionless(params: &ModelParams) -> Result<(), ClosedFormError> {
    if params.mu() != 0.0 {
        return Err(ClosedFormError::FrictionPresent(params.mu()));
    }
    Ok(())
}

/// Coefficients of `R`, cached so repeated evaluation stays cheap.
#[derive(Debug, Clone, Copy)]
struct Radicand {
    gamma: f64,
    k: f64,
    c2: f64,
    lin: f64,
    cst: f64,
}

impl Radicand {
    fn new(params: &ModelParams, inv: &ScalarInvariants) -> Self {
        let l = params.l();
        Self {
            gamma: params.gamma(),
            k: inv.k_quad,
            c2: inv.c_rot * inv.c_rot,
            lin: inv.e_total - l * inv.c_rot,
            cst: -0.25 * l * l,
        }
    }

    fn at(&self, g: f64) -> f64 {
        compensated_sum([self.k * g.powf(self.gamma), -self.c2 * g * g, self.lin * g, self.cst])
    }

    fn deriv(&self, g: f64) -> f64 {
        self.gamma * self.k * g.powf(self.gamma - 1.0) - 2.0 * self.c2 * g + self.lin
    }

    /// `R(g + h) - R(g)` without cancellation for small `h`.
    fn increment(&self, g: f64, h: f64) -> f64 {
        let pow = self.k * g.powf(self.gamma) * (self.gamma * (h / g).ln_1p()).exp_m1();
        compensated_sum([pow, -self.c2 * h * (2.0 * g + h), self.lin * h])
    }

    /// `u² R(1/u²)`, finite as `u → 0` when `K = C = 0`.
    fn scaled_at_inverse(&self, u: f64) -> f64 {
        let u2 = u * u;
        compensated_sum([self.k * u2.powf(1.0 - self.gamma), -self.c2 / u2, self.lin, self.cst * u2])
    }

    fn clamped(&self, g: f64) -> Result<f64, ClosedFormError> {
        let v = self.at(g);
        if v < -RADICAND_CLAMP {
            Err(ClosedFormError::NegativeRadicand { g1: g, value: v })
        } else {
            Ok(v.max(0.0))
        }
    }

    fn bounded_above(&self) -> bool {
        self.k < 0.0 || self.c2 > 0.0
    }
}

/// `R(G₁)`; `α² = R(G₁)` along every frictionless orbit.
pub fn radicand(inv: &ScalarInvariants, params: &ModelParams, g1: f64) -> f64 {
    Radicand::new(params, inv).at(g1)
}

/// `α = ±√R(G₁)`.
pub fn alpha_of_g1(
    inv: &ScalarInvariants,
    params: &ModelParams,
    g1: f64,
    branch: Branch,
) -> Result<f64, ClosedFormError> {
    require_frictionless(params)?;
    if !(g1 > 0.0) {
        return Err(ClosedFormError::NonPositiveG1(g1));
    }
    Ok(branch.sign() * Radicand::new(params, inv).clamped(g1)?.sqrt())
}

/// `∫_a^b dg / (2 g √R(g))` for `0 < a < b` with `R ≥ 0` on `[a, b]`.
///
/// Each half is integrated with `g = end ± s²` when its outer end is close
/// to a root of `R` (removing the inverse square root singularity) and in
/// `ln g` otherwise.
fn passage_time(r: &Radicand, a: f64, b: f64) -> Result<f64, ClosedFormError> {
    if a == b {
        return Ok(0.0);
    }
    let m = if b > 4.0 * a { (a * b).sqrt() } else { 0.5 * (a + b) };
    let rm = r.at(m).max(0.0);
    let piece = |end: f64, inner: f64| -> Result<f64, ClosedFormError> {
        let r_end = r.at(end).max(0.0);
        if r_end < 1e-3 * rm {
            // g = end + dir s², dg = 2 s ds
            let dir = (inner - end).signum();
            let span = (inner - end).abs().sqrt();
            let f = |s: f64| {
                let h = dir * s * s;
                let g = end + h;
                let rv = (r_end + r.increment(end, h)).max(0.0);
                if rv == 0.0 {
                    // s → 0 at a simple root: s/√R → 1/√|R'|
                    1.0 / (g * r.deriv(end).abs().sqrt())
                } else {
                    s / (g * rv.sqrt())
                }
            };
            Ok(integrate(f, 0.0, span, QUAD_TOL, QUAD_TOL)?.value)
        } else {
            let (lo, hi) = if end < inner { (end, inner) } else { (inner, end) };
            let f = |x: f64| 0.5 / r.at(x.exp()).max(f64::MIN_POSITIVE).sqrt();
            Ok(integrate(f, lo.ln(), hi.ln(), QUAD_TOL, QUAD_TOL)?.value)
        }
    };
    Ok(piece(a, m)? + piece(b, m)?)
}

/// `∫_a^∞ dg / (2 g √R(g))` via `u = 1/√g`; finite only when `R` grows
/// linearly (no upper turning point).
fn passage_time_to_infinity(r: &Radicand, a: f64) -> Result<f64, ClosedFormError> {
    let f = |u: f64| 1.0 / r.scaled_at_inverse(u).max(f64::MIN_POSITIVE).sqrt();
    Ok(integrate(f, 0.0, 1.0 / a.sqrt(), QUAD_TOL, QUAD_TOL)?.value)
}

/// Signed time `-∫_{from}^{to} dG₁ / (2 G₁ α(G₁))` along `branch`.
///
/// Positive when the branch moves from `g1_from` towards `g1_to`.
pub fn time_of_g1(
    inv: &ScalarInvariants,
    params: &ModelParams,
    g1_from: f64,
    g1_to: f64,
    branch: Branch,
) -> Result<f64, ClosedFormError> {
    require_frictionless(params)?;
    for g in [g1_from, g1_to] {
        if !(g > 0.0) {
            return Err(ClosedFormError::NonPositiveG1(g));
        }
    }
    if g1_from == g1_to {
        return Ok(0.0);
    }
    let r = Radicand::new(params, inv);
    // R is concave, so non-negative endpoints imply a non-negative interval
    for g in [g1_from, g1_to] {
        if r.at(g) < -RADICAND_CLAMP {
            return Err(ClosedFormError::BranchCrossing { from: g1_from, to: g1_to });
        }
    }
    let (lo, hi) = if g1_from < g1_to { (g1_from, g1_to) } else { (g1_to, g1_from) };
    let tau = passage_time(&r, lo, hi)?;
    // dG₁/dt = -2 α G₁: decreasing on Plus
    let moving_down = g1_to < g1_from;
    Ok(if moving_down == (branch == Branch::Plus) { tau } else { -tau })
}

/// End of a monotone piece of the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SegmentEnd {
    Turning(f64),
    /// `G₁ → 0` as `t → ∞`.
    Vanishing,
    /// `G₁ → ∞` in finite time.
    Escape,
}

/// A frictionless orbit with its turning points, prepared for repeated
/// evaluation of the state at arbitrary times.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormOrbit {
    #[serde(skip)]
    params: ModelParams,
    #[serde(skip)]
    inv: ScalarInvariants,
    #[serde(skip)]
    r: Radicand,
    pub g_lower: Option<f64>,
    pub g_upper: Option<f64>,
    pub initial_branch: Branch,
    /// Duration of the first monotone piece (∞ for a vanishing orbit).
    pub first_leg: f64,
    /// Time between consecutive turning points, when both exist.
    pub half_period: Option<f64>,
    pub escape_time: Option<f64>,
    pub stationary: bool,
}

impl ClosedFormOrbit {
    /// Prepares the orbit through `(G₁(0), α0)`; `alpha0` only contributes
    /// its sign (its magnitude is fixed by the invariants). At a turning
    /// point (`α0 = 0`) the direction follows from `α' = -G₁ R'(G₁)`.
    pub fn new(params: &ModelParams, inv: &ScalarInvariants, alpha0: f64) -> Result<Self, ClosedFormError> {
        require_frictionless(params)?;
        let r = Radicand::new(params, inv);
        let g0 = inv.g1_0;
        r.clamped(g0)?;
        let scale = 1.0 + inv.e_total.abs() * g0 + 0.25 * params.l().powi(2);

        // maximum of R: R' decreases on (0, ∞)
        let g_max = if r.bounded_above() {
            let mut hi = g0.max(1.0);
            while r.deriv(hi) > 0.0 {
                hi *= 2.0;
            }
            if r.deriv(0.0) <= 0.0 {
                0.0
            } else {
                bisect(|g| r.deriv(g), 0.0, hi, 0.0).expect("R' changes sign")
            }
        } else {
            f64::INFINITY
        };
        let stationary = g_max.is_finite() && r.at(g_max) <= 1e-13 * scale;

        let mut g_lower = None;
        let mut g_upper = None;
        if !stationary {
            if params.l() != 0.0 {
                let top = if g_max.is_finite() { g_max } else { g0 };
                g_lower = Some(bisect(|g| r.at(g), 0.0, top, 0.0).expect("R(0) < 0 < R(top)"));
            }
            if g_max.is_finite() {
                let mut hi = 2.0 * g_max.max(g0);
                while r.at(hi) >= 0.0 {
                    hi *= 2.0;
                }
                g_upper = Some(bisect(|g| r.at(g), g_max, hi, 0.0).expect("R(max) > 0 > R(hi)"));
            }
        }

        let initial_branch =
            if alpha0 < 0.0 || (alpha0 == 0.0 && r.deriv(g0) > 0.0) { Branch::Minus } else { Branch::Plus };

        let mut orbit = Self {
            params: *params,
            inv: *inv,
            r,
            g_lower,
            g_upper,
            initial_branch,
            first_leg: 0.0,
            half_period: None,
            escape_time: None,
            stationary,
        };
        if stationary {
            orbit.first_leg = f64::INFINITY;
            return Ok(orbit);
        }
        let g0c = g0.clamp(g_lower.unwrap_or(0.0), g_upper.unwrap_or(f64::INFINITY));
        orbit.first_leg = match orbit.end_of(initial_branch) {
            SegmentEnd::Turning(g) => passage_time(&r, g0c.min(g), g0c.max(g))?,
            SegmentEnd::Vanishing => f64::INFINITY,
            SegmentEnd::Escape => {
                let t = passage_time_to_infinity(&r, g0c)?;
                orbit.escape_time = Some(t);
                t
            }
        };
        if let (Some(lo), Some(hi)) = (g_lower, g_upper) {
            orbit.half_period = Some(passage_time(&r, lo, hi)?);
        } else if let (Branch::Plus, Some(lo), None) = (initial_branch, g_lower, g_upper) {
            // bounces off the lower turning point, then escapes
            orbit.escape_time = Some(orbit.first_leg + passage_time_to_infinity(&r, lo)?);
        }
        Ok(orbit)
    }

    fn end_of(&self, branch: Branch) -> SegmentEnd {
        match branch {
            Branch::Plus => self.g_lower.map_or(SegmentEnd::Vanishing, SegmentEnd::Turning),
            Branch::Minus => self.g_upper.map_or(SegmentEnd::Escape, SegmentEnd::Turning),
        }
    }

    /// Full period of an oscillating orbit.
    pub fn period(&self) -> Option<f64> {
        self.half_period.map(|h| 2.0 * h)
    }

    fn state_from(&self, g: f64, branch: Branch) -> ScalarMomentState {
        let alpha = branch.sign() * self.r.at(g).max(0.0).sqrt();
        ScalarMomentState::new(g, alpha, self.inv.c_rot * g + 0.5 * self.params.l())
    }

    /// `G₁` reached after time `tau` on `branch` starting from `g_start`.
    fn invert(&self, g_start: f64, branch: Branch, tau: f64) -> Result<f64, ClosedFormError> {
        let r = &self.r;
        if tau == 0.0 {
            return Ok(g_start);
        }
        let rate = |g: f64| 0.5 / (g * r.at(g).max(f64::MIN_POSITIVE).sqrt());
        let tol = 1e-15 * g_start;
        match (branch, self.end_of(branch)) {
            (Branch::Plus, SegmentEnd::Turning(g_end)) => {
                // x = -g increases with time
                let f = |x: f64| passage_time(r, -x, g_start).map_or(f64::NAN, |v| v) - tau;
                let x = newton_bracketed(f, |x| rate(-x), -g_start, -g_end, tol);
                Ok(-x)
            }
            (Branch::Minus, SegmentEnd::Turning(g_end)) => {
                let f = |g: f64| passage_time(r, g_start, g).map_or(f64::NAN, |v| v) - tau;
                Ok(newton_bracketed(f, rate, g_start, g_end, tol))
            }
            (Branch::Plus, _) => {
                // x = ln(g_start / g) on (0, ∞)
                let g_of = |x: f64| g_start * (-x).exp();
                let f = |x: f64| passage_time(r, g_of(x), g_start).map_or(f64::NAN, |v| v) - tau;
                let mut hi = 1.0;
                while f(hi) < 0.0 {
                    hi *= 2.0;
                }
                let x = newton_bracketed(f, |x| 0.5 / r.at(g_of(x)).max(f64::MIN_POSITIVE).sqrt(), 0.0, hi, 1e-15);
                Ok(g_of(x))
            }
            (Branch::Minus, _) => {
                let f = |g: f64| passage_time(r, g_start, g).map_or(f64::NAN, |v| v) - tau;
                let mut hi = 2.0 * g_start;
                while f(hi) < 0.0 {
                    hi *= 2.0;
                }
                Ok(newton_bracketed(f, rate, g_start, hi, tol))
            }
        }
    }

    /// State at time `t ≥ 0`.
    pub fn state_at(&self, t: f64) -> Result<ScalarMomentState, ClosedFormError> {
        if t < 0.0 {
            return Err(ClosedFormError::NegativeTime(t));
        }
        let g0 = self.inv.g1_0;
        if t == 0.0 || self.stationary {
            let alpha = self.initial_branch.sign() * self.r.at(g0).max(0.0).sqrt();
            let alpha = if self.stationary { 0.0 } else { alpha };
            return Ok(ScalarMomentState::new(g0, alpha, self.inv.c_rot * g0 + 0.5 * self.params.l()));
        }
        if let Some(te) = self.escape_time {
            if t >= te {
                return Err(ClosedFormError::BeyondEscape { t, escape_time: te });
            }
        }
        if t <= self.first_leg {
            let g = self.invert(g0, self.initial_branch, t)?;
            return Ok(self.state_from(g, self.initial_branch));
        }
        let t_rest = t - self.first_leg;
        let branch = self.initial_branch.flip();
        let start = match self.end_of(self.initial_branch) {
            SegmentEnd::Turning(g) => g,
            _ => unreachable!("infinite first legs are handled above"),
        };
        match self.half_period {
            Some(hp) => {
                let k = (t_rest / hp).floor();
                let within = t_rest - k * hp;
                let (branch, start) = if (k as u64).is_multiple_of(2) {
                    (branch, start)
                } else {
                    let other = match self.end_of(branch) {
                        SegmentEnd::Turning(g) => g,
                        _ => unreachable!("oscillating orbits have two turning points"),
                    };
                    (branch.flip(), other)
                };
                let g = self.invert(start, branch, within)?;
                Ok(self.state_from(g, branch))
            }
            None => {
                let g = self.invert(start, branch, t_rest)?;
                Ok(self.state_from(g, branch))
            }
        }
    }
}

/// States of the frictionless orbit through `(G₁(0), α0)` on `t_grid`.
pub fn trajectory_mu0(
    inv: &ScalarInvariants,
    params: &ModelParams,
    alpha0: f64,
    t_grid: &[f64],
) -> Result<Vec<ScalarMomentState>, ClosedFormError> {
    trajectory_mu0_with(Exec::default(), inv, params, alpha0, t_grid)
}

pub fn trajectory_mu0_with(
    exec: Exec,
    inv: &ScalarInvariants,
    params: &ModelParams,
    alpha0: f64,
    t_grid: &[f64],
) -> Result<Vec<ScalarMomentState>, ClosedFormError> {
    let orbit = ClosedFormOrbit::new(params, inv, alpha0)?;
    exec.map_slice(t_grid, |&t| orbit.state_at(t)).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Center,
    EllipticSaddle,
    Knot,
    Focus,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhasePlane {
    /// `(G₁, α)` with `β = C G₁ + l/2` substituted.
    G1Alpha,
    /// `(α, β)` in the limit `G₁ → 0`.
    AlphaBeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub plane: PhasePlane,
    pub point: (f64, f64),
    pub jacobian: [[f64; 2]; 2],
    /// `(re, im)` pairs.
    pub eigenvalues: [(f64, f64); 2],
    pub classification: Classification,
    /// Max-norm of the planar right-hand side at `point`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePortrait {
    pub gamma: f64,
    pub mu: f64,
    pub l: f64,
    pub c_rot: f64,
    pub k_force: f64,
    pub equilibria: Vec<Equilibrium>,
}

const ZERO_THRESHOLD: f64 = 1e-10;

fn eigen2(j: &[[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [(0.5 * tr - s, 0.0), (0.5 * tr + s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(0.5 * tr, -s), (0.5 * tr, s)]
    }
}

fn classify(j: &[[f64; 2]; 2], ev: &[(f64, f64); 2]) -> Classification {
    if j.iter().flatten().all(|v| v.abs() <= ZERO_THRESHOLD) {
        return Classification::EllipticSaddle;
    }
    let complex = ev[0].1.abs() > ZERO_THRESHOLD;
    if complex {
        if ev[0].0.abs() <= ZERO_THRESHOLD {
            Classification::Center
        } else {
            Classification::Focus
        }
    } else if ev[0].0 * ev[1].0 < 0.0 {
        Classification::Saddle
    } else {
        Classification::Knot
    }
}

fn equilibrium(plane: PhasePlane, point: (f64, f64), jacobian: [[f64; 2]; 2], residual: f64) -> Equilibrium {
    let eigenvalues = eigen2(&jacobian);
    Equilibrium { plane, point, jacobian, classification: classify(&jacobian, &eigenvalues), eigenvalues, residual }
}

/// Rest points of the planar reductions and their linear type.
pub fn equilibria(inv: &ScalarInvariants, params: &ModelParams) -> PhasePortrait {
    let (g, mu, l) = (params.gamma(), params.mu(), params.l());
    let (c, kf) = (inv.c_rot, inv.k_force);
    let mut eqs = Vec::new();
    if mu == 0.0 {
        // (G₁, α) plane: G₁' = -2αG₁, α' = -α² + C²G₁² + K'G₁^γ - l²/4
        let planar = |g1: f64, a: f64| {
            let d1 = -2.0 * a * g1;
            let d2 = -a * a + c * c * g1 * g1 + kf * g1.powf(g) - 0.25 * l * l;
            d1.abs().max(d2.abs())
        };
        if l != 0.0 {
            let h = |g1: f64| c * c * g1 * g1 + kf * g1.powf(g) - 0.25 * l * l;
            if c != 0.0 || kf > 0.0 {
                let mut hi = 1.0;
                while h(hi) < 0.0 {
                    hi *= 2.0;
                }
                let gs = bisect(h, 0.0, hi, 0.0).expect("h(0) < 0 <= h(hi)");
                let jac = [[0.0, -2.0 * gs], [2.0 * c * c * gs + g * kf * gs.powf(g - 1.0), 0.0]];
                eqs.push(equilibrium(PhasePlane::G1Alpha, (gs, 0.0), jac, planar(gs, 0.0)));
            }
        } else {
            eqs.push(equilibrium(PhasePlane::G1Alpha, (0.0, 0.0), [[0.0; 2]; 2], planar(0.0, 0.0)));
        }
    } else {
        // (α, β) plane at G₁ = 0
        let jac = [[-mu, -l], [l, -mu]];
        eqs.push(equilibrium(PhasePlane::AlphaBeta, (0.0, 0.0), jac, 0.0));
    }
    PhasePortrait { gamma: g, mu, l, c_rot: c, k_force: kf, equilibria: eqs }
}
