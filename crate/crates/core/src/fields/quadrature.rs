use serde::{Deserialize, Serialize};

use super::reconstruct::{FieldSource, Frame, ScalarSolution};
use super::FieldError;
use crate::exec::Exec;
use crate::numeric::{compensated_sum, gauss_legendre};

const N_FUNCTIONALS: usize = 11;

/// Tensor-product rule on a disc: Gauss–Legendre panels on geometrically
/// refined radial intervals times the uniform (trapezoidal) angular rule.
#[derive(Debug, Clone)]
pub struct PolarQuadrature {
    radial: Vec<(f64, f64)>,
    n_theta: usize,
}

impl PolarQuadrature {
    /// Breakpoints `0, R/2^{panels-1}, ..., R/2, R`.
    pub fn new(radius: f64, panels: usize, order: usize, n_theta: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        let mut radial = Vec::with_capacity(panels * order);
        let mut lo = 0.0;
        for k in 1..=panels {
            let hi = radius * 0.5_f64.powi((panels - k) as i32);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (x, w) in nodes.iter().zip(&weights) {
                let r = mid + half * x;
                // area element r dr dθ
                radial.push((r, w * half * r));
            }
            lo = hi;
        }
        Self { radial, n_theta: n_theta.max(1) }
    }

    /// `∫ f dx` component-wise; the reduction order is fixed.
    pub fn integrate<const K: usize, F>(&self, exec: Exec, f: F) -> [f64; K]
    where
        F: Fn(f64, f64) -> [f64; K] + Sync + Send,
    {
        let dtheta = std::f64::consts::TAU / self.n_theta as f64;
        let rings = exec.map_slice(&self.radial, |&(r, w)| {
            let mut acc = [0.0; K];
            for j in 0..self.n_theta {
                let th = j as f64 * dtheta;
                let v = f(r * th.cos(), r * th.sin());
                for k in 0..K {
                    acc[k] += v[k];
                }
            }
            acc.map(|a| a * w * dtheta)
        });
        std::array::from_fn(|k| compensated_sum(rings.iter().map(|ring| ring[k])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Admissible relative tail beyond the truncation radius.
    pub tail_tol: f64,
    /// Fixed truncation radius in the coordinates of the initial profile;
    /// chosen from `tail_tol` when absent.
    pub radius: Option<f64>,
    pub panels: usize,
    pub order: usize,
    pub n_theta: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { tail_tol: 1e-8, radius: None, panels: 14, order: 20, n_theta: 16 }
    }
}

/// Integral functionals of a solution at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Functionals {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// `∫ρ((V⊥, r) + (l/2)|r|²)` with `V⊥ = (V_y, -V_x)`.
    pub j: f64,
    /// `½∫ρ|r|²`.
    pub g: f64,
    pub f1: f64,
    pub f2: f64,
    pub gx: f64,
    pub gy: f64,
    pub gxy: f64,
}

fn functionals_of_frame(
    exec: Exec,
    frame: &Frame<'_>,
    gamma: f64,
    l: f64,
    quad: &PolarQuadrature,
    t: f64,
) -> Functionals {
    let v: [f64; N_FUNCTIONALS] = quad.integrate(exec, |x, y| {
        let q = frame.point(x, y);
        let r2 = x * x + y * y;
        let v2 = q.vx * q.vx + q.vy * q.vy;
        [
            q.rho,
            0.5 * q.rho * v2,
            q.p / (gamma - 1.0),
            q.rho * (q.vy * x - q.vx * y + 0.5 * l * r2),
            0.5 * q.rho * r2,
            q.rho * (q.vx * x + q.vy * y),
            q.rho * (q.vx * y - q.vy * x),
            0.5 * q.rho * x * x,
            0.5 * q.rho * y * y,
            0.5 * q.rho * x * y,
            0.0,
        ]
    });
    Functionals {
        t,
        mass: v[0],
        energy: v[1] + v[2],
        kinetic: v[1],
        potential: v[2],
        j: v[3],
        g: v[4],
        f1: v[5],
        f2: v[6],
        gx: v[7],
        gy: v[8],
        gxy: v[9],
    }
}

/// Functionals of `sol` at time `t`; the truncation radius follows the
/// self-similar spreading `e^{Iα(t)}` of the profile.
pub fn functionals_at(
    exec: Exec,
    sol: &ScalarSolution<'_>,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<Functionals, FieldError> {
    let frame = sol.frame(t)?;
    let r0 = match spec.radius {
        Some(r) => {
            let tail = sol.profile.tail_fraction(r);
            if tail > spec.tail_tol {
                return Err(FieldError::TruncationTooTight { radius: r, tail, tol: spec.tail_tol });
            }
            r
        }
        None => sol.profile.truncation_radius(spec.tail_tol),
    };
    let quad = PolarQuadrature::new(r0 * frame.i_alpha.exp(), spec.panels, spec.order, spec.n_theta);
    Ok(functionals_of_frame(exec, &frame, sol.params.gamma(), sol.params.l(), &quad, t))
}

/// Time series of [`Functionals`].
pub fn conserved_quantities(
    exec: Exec,
    sol: &ScalarSolution<'_>,
    times: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<Functionals>, FieldError> {
    times.iter().map(|&t| functionals_at(exec, sol, t, spec)).collect()
}

/// Centered-difference rates of the functionals next to the right-hand
/// sides they must match:
/// `G' = F₁`, `F₂' = lF₁ - μF₂`, `F₁' = 2(γ-1)E_p + 2E_k - lF₂ - μF₁`,
/// `E' = -2μE_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelationCheck {
    pub t: f64,
    pub g_rate: f64,
    pub g_rhs: f64,
    pub f1_rate: f64,
    pub f1_rhs: f64,
    pub f2_rate: f64,
    pub f2_rhs: f64,
    pub e_rate: f64,
    pub e_rhs: f64,
}

impl RelationCheck {
    /// Largest mismatch, each relative to the scale of its right-hand side
    /// (floored by the magnitudes of the functionals involved).
    pub fn max_relative_error(&self, scale: f64) -> f64 {
        [
            (self.g_rate - self.g_rhs).abs(),
            (self.f1_rate - self.f1_rhs).abs(),
            (self.f2_rate - self.f2_rhs).abs(),
            (self.e_rate - self.e_rhs).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
            / scale
    }
}

pub fn functional_rates(
    exec: Exec,
    sol: &ScalarSolution<'_>,
    t: f64,
    dt: f64,
    spec: &QuadratureSpec,
) -> Result<RelationCheck, FieldError> {
    if t - dt < 0.0 {
        return Err(FieldError::NegativeTime(t - dt));
    }
    let (g, mu, l) = (sol.params.gamma(), sol.params.mu(), sol.params.l());
    let m = functionals_at(exec, sol, t - dt, spec)?;
    let c = functionals_at(exec, sol, t, spec)?;
    let p = functionals_at(exec, sol, t + dt, spec)?;
    let rate = |f: fn(&Functionals) -> f64| (f(&p) - f(&m)) / (2.0 * dt);
    Ok(RelationCheck {
        t,
        g_rate: rate(|q| q.g),
        g_rhs: c.f1,
        f1_rate: rate(|q| q.f1),
        f1_rhs: 2.0 * (g - 1.0) * c.potential + 2.0 * c.kinetic - l * c.f2 - mu * c.f1,
        f2_rate: rate(|q| q.f2),
        f2_rhs: l * c.f1 - mu * c.f2,
        e_rate: rate(|q| q.energy),
        e_rhs: -2.0 * mu * c.kinetic,
    })
}
