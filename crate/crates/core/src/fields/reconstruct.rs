use serde::Serialize;

use super::profile::InitialProfile;
use super::FieldError;
use crate::exec::Exec;
use crate::integrator::{CumulativeIntegral, Trajectory};
use crate::moments::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldPoint {
    pub rho: f64,
    pub p: f64,
    pub s: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, Copy)]
enum Thermo<'a> {
    Profile(&'a InitialProfile),
    Uniform { rho: f64, p: f64, s: f64 },
}

/// Fields at one instant: `V = α r + β r⊥` and the thermodynamic fields
/// pulled back along the characteristics, `ρ = e^{-2Iα} ρ₀(|r| e^{-Iα})`,
/// `p = e^{-2γIα} p₀(|r| e^{-Iα})`, `S = S₀(|r| e^{-Iα})`.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub alpha: f64,
    pub beta: f64,
    pub i_alpha: f64,
    pub i_beta: f64,
    thermo: Thermo<'a>,
}

impl Frame<'_> {
    pub fn point(&self, x: f64, y: f64) -> FieldPoint {
        let vx = self.alpha * x + self.beta * y;
        let vy = self.alpha * y - self.beta * x;
        match self.thermo {
            Thermo::Uniform { rho, p, s } => FieldPoint { rho, p, s, vx, vy },
            Thermo::Profile(prof) => {
                // the profiles are axisymmetric, so the angular shift by Iβ is void
                let rs = x.hypot(y) * (-self.i_alpha).exp();
                FieldPoint {
                    rho: (-2.0 * self.i_alpha).exp() * prof.rho0(rs),
                    p: (-2.0 * prof.gamma * self.i_alpha).exp() * prof.p0(rs),
                    s: prof.s0(rs),
                    vx,
                    vy,
                }
            }
        }
    }
}

/// Anything that can produce a [`Frame`] at time `t`.
pub trait FieldSource: Sync {
    fn frame(&self, t: f64) -> Result<Frame<'_>, FieldError>;
    fn gamma(&self) -> f64;
}

type Phase<'a> = CumulativeIntegral<'a, 3, fn(&[f64; 3]) -> f64>;

fn alpha_of(y: &[f64; 3]) -> f64 {
    y[1]
}

fn beta_of(y: &[f64; 3]) -> f64 {
    y[2]
}

/// The exact solution generated by a scalar moment trajectory and a
/// compatible axisymmetric profile.
pub struct ScalarSolution<'a> {
    pub params: ModelParams,
    pub profile: InitialProfile,
    traj: &'a Trajectory<3>,
    i_alpha: Phase<'a>,
    i_beta: Phase<'a>,
}

impl<'a> ScalarSolution<'a> {
    pub fn new(params: ModelParams, traj: &'a Trajectory<3>, profile: InitialProfile) -> Result<Self, FieldError> {
        let g10 = traj.states()[0][0];
        if (g10 - profile.g1_0).abs() > 1e-12 * g10 {
            return Err(FieldError::ProfileMismatch { trajectory: g10, profile: profile.g1_0 });
        }
        Ok(Self {
            params,
            profile,
            traj,
            i_alpha: traj.cumulative(alpha_of as fn(&[f64; 3]) -> f64),
            i_beta: traj.cumulative(beta_of as fn(&[f64; 3]) -> f64),
        })
    }

    pub fn trajectory(&self) -> &Trajectory<3> {
        self.traj
    }

    /// `Iα` from `G₁' = -2αG₁`, i.e. `-½ ln(G₁(t)/G₁(0))`; an independent
    /// check on the quadrature of the dense output.
    pub fn i_alpha_from_g1(&self, t: f64) -> Result<f64, FieldError> {
        let g1 = self.traj.sample(t)?[0];
        Ok(-0.5 * (g1 / self.profile.g1_0).ln())
    }
}

impl FieldSource for ScalarSolution<'_> {
    fn frame(&self, t: f64) -> Result<Frame<'_>, FieldError> {
        let y = self.traj.sample(t)?;
        Ok(Frame {
            alpha: y[1],
            beta: y[2],
            i_alpha: self.i_alpha.at(t)?,
            i_beta: self.i_beta.at(t)?,
            thermo: Thermo::Profile(&self.profile),
        })
    }

    fn gamma(&self) -> f64 {
        self.params.gamma()
    }
}

/// Fluid at rest with constant density and pressure.
#[derive(Debug, Clone, Copy)]
pub struct UniformState {
    pub gamma: f64,
    pub rho: f64,
    pub p: f64,
}

impl FieldSource for UniformState {
    fn frame(&self, _t: f64) -> Result<Frame<'_>, FieldError> {
        Ok(Frame {
            alpha: 0.0,
            beta: 0.0,
            i_alpha: 0.0,
            i_beta: 0.0,
            thermo: Thermo::Uniform { rho: self.rho, p: self.p, s: self.p.ln() - self.gamma * self.rho.ln() },
        })
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Another source with `δβ r⊥` added to the velocity only (not a solution).
pub struct PerturbedVelocity<S> {
    pub inner: S,
    pub delta_beta: f64,
}

impl<S: FieldSource> FieldSource for PerturbedVelocity<S> {
    fn frame(&self, t: f64) -> Result<Frame<'_>, FieldError> {
        let mut f = self.inner.frame(t)?;
        f.beta += self.delta_beta;
        Ok(f)
    }

    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSnapshot {
    pub time: f64,
    pub alpha: f64,
    pub beta: f64,
    pub i_alpha: f64,
    pub i_beta: f64,
    pub points: Vec<(f64, f64)>,
    pub values: Vec<FieldPoint>,
}

/// Fields of `source` at time `t` on `points`.
pub fn evaluate<S: FieldSource>(
    exec: Exec,
    source: &S,
    t: f64,
    points: &[(f64, f64)],
) -> Result<FieldSnapshot, FieldError> {
    let frame = source.frame(t)?;
    let values = exec.map_slice(points, |&(x, y)| frame.point(x, y));
    Ok(FieldSnapshot {
        time: t,
        alpha: frame.alpha,
        beta: frame.beta,
        i_alpha: frame.i_alpha,
        i_beta: frame.i_beta,
        points: points.to_vec(),
        values,
    })
}
