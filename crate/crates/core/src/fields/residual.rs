use serde::{Deserialize, Serialize};

use super::reconstruct::{FieldPoint, FieldSource};
use super::FieldError;
use crate::exec::Exec;
use crate::moments::ModelParams;

/// Uniform Cartesian grid `[x_min, x_max] × [y_min, y_max]` with `nx × ny`
/// nodes (endpoints included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self { x_min: -half_width, x_max: half_width, y_min: -half_width, y_max: half_width, nx: n, ny: n }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let ok = self.nx >= 1
            && self.ny >= 1
            && self.x_min.is_finite()
            && self.y_min.is_finite()
            && self.x_max >= self.x_min
            && self.y_max >= self.y_min
            && self.x_max.is_finite()
            && self.y_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(FieldError::InvalidGrid(format!("{self:?}")))
        }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let step = |lo: f64, hi: f64, n: usize, i: usize| {
            if n == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                pts.push((step(self.x_min, self.x_max, self.nx, i), step(self.y_min, self.y_max, self.ny, j)));
            }
        }
        pts
    }
}

/// Discrete max norms of the four balance laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeResidual {
    pub mass: f64,
    pub momentum_x: f64,
    pub momentum_y: f64,
    /// `ρ (∂_t S + V·∇S)`.
    pub entropy: f64,
    pub pressure: f64,
}

impl PdeResidual {
    pub fn momentum(&self) -> f64 {
        self.momentum_x.max(self.momentum_y)
    }

    /// Components in the order mass, momentum x, momentum y, entropy, pressure.
    pub fn components(&self) -> [f64; 5] {
        [self.mass, self.momentum_x, self.momentum_y, self.entropy, self.pressure]
    }
}

/// Residuals of mass, momentum (conservative form with force `L V`),
/// entropy transport and pressure transport, by second-order centered
/// differences with spacing `h` in space and `dt` in time.
pub fn pde_residual<S: FieldSource>(
    exec: Exec,
    source: &S,
    params: &ModelParams,
    t: f64,
    grid: &GridSpec,
    h: f64,
    dt: f64,
) -> Result<PdeResidual, FieldError> {
    grid.validate()?;
    if !(h > 0.0 && dt > 0.0) {
        return Err(FieldError::InvalidGrid(format!("steps must be positive, got h = {h}, dt = {dt}")));
    }
    if t - dt < 0.0 {
        return Err(FieldError::NegativeTime(t - dt));
    }
    let now = source.frame(t)?;
    let before = source.frame(t - dt)?;
    let after = source.frame(t + dt)?;
    let gamma = source.gamma();
    let l_mat = params.force_matrix();
    let pts = grid.points();

    let local = exec.map_slice(&pts, |&(x, y)| {
        let c = now.point(x, y);
        let (xm, xp) = (now.point(x - h, y), now.point(x + h, y));
        let (ym, yp) = (now.point(x, y - h), now.point(x, y + h));
        let (tm, tp) = (before.point(x, y), after.point(x, y));
        let ddx = |f: fn(&FieldPoint) -> f64| (f(&xp) - f(&xm)) / (2.0 * h);
        let ddy = |f: fn(&FieldPoint) -> f64| (f(&yp) - f(&ym)) / (2.0 * h);
        let ddt = |f: fn(&FieldPoint) -> f64| (f(&tp) - f(&tm)) / (2.0 * dt);

        let mass = ddt(|q| q.rho) + ddx(|q| q.rho * q.vx) + ddy(|q| q.rho * q.vy);

        let fx = l_mat[(0, 0)] * c.vx + l_mat[(0, 1)] * c.vy;
        let fy = l_mat[(1, 0)] * c.vx + l_mat[(1, 1)] * c.vy;
        let mom_x = ddt(|q| q.rho * q.vx) + ddx(|q| q.rho * q.vx * q.vx) + ddy(|q| q.rho * q.vy * q.vx) + ddx(|q| q.p)
            - c.rho * fx;
        let mom_y = ddt(|q| q.rho * q.vy) + ddx(|q| q.rho * q.vx * q.vy) + ddy(|q| q.rho * q.vy * q.vy) + ddy(|q| q.p)
            - c.rho * fy;

        let entropy = c.rho * (ddt(|q| q.s) + c.vx * ddx(|q| q.s) + c.vy * ddy(|q| q.s));
        let div_v = ddx(|q| q.vx) + ddy(|q| q.vy);
        let pressure = ddt(|q| q.p) + c.vx * ddx(|q| q.p) + c.vy * ddy(|q| q.p) + gamma * c.p * div_v;
        [mass.abs(), mom_x.abs(), mom_y.abs(), entropy.abs(), pressure.abs()]
    });

    let mut out = [0.0_f64; 5];
    for r in &local {
        for k in 0..5 {
            // NaN propagates as a failure instead of being skipped by max
            out[k] = if r[k].is_nan() || out[k].is_nan() { f64::NAN } else { out[k].max(r[k]) };
        }
    }
    Ok(PdeResidual { mass: out[0], momentum_x: out[1], momentum_y: out[2], entropy: out[3], pressure: out[4] })
}
