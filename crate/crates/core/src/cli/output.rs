use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::asymptotics::symmetrize;
use crate::fields::{Functionals, PdeResidual};
use crate::integrator::Trajectory;
use crate::moments::{
    beta_invariant_residual, bound_residual, matrix_delta, scalar_energy, MatrixMomentState, ModelParams,
    ScalarInvariants, ScalarMomentState,
};

pub const TRAJECTORY_HEADER: [&str; 9] =
    ["t", "g1", "alpha", "beta", "E", "Ek", "Ep", "inv_beta_residual", "bound_residual"];
pub const MATRIX_HEADER: [&str; 10] = ["t", "a", "b", "c", "d", "g1m", "g2m", "g3m", "delta", "d1"];
pub const FIELDS_AUDIT_HEADER: [&str; 7] = ["t", "m", "E", "J", "G", "F1", "F2"];
pub const RESIDUAL_HEADER: [&str; 7] = ["h", "dt", "res_mass", "res_momx", "res_momy", "res_entropy", "res_pressure"];

/// Shortest representation that parses back to the same `f64`; exponent
/// notation outside `[1e-5, 1e16)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Header plus rows of floats, `\n`-terminated.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row.iter().map(|&x| format_float(x)))?;
    }
    w.flush()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn trajectory_row(params: &ModelParams, inv: &ScalarInvariants, t: f64, y: [f64; 3]) -> Vec<f64> {
    let s = ScalarMomentState::from_array(y);
    let (total, kinetic, potential) = match scalar_energy(params, inv, &s) {
        Ok(e) => (e.total, e.kinetic, e.potential),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    };
    vec![
        t,
        s.g1,
        s.alpha,
        s.beta,
        total,
        kinetic,
        potential,
        beta_invariant_residual(params, inv, t, &s).unwrap_or(f64::NAN),
        bound_residual(params, inv, &s),
    ]
}

pub fn matrix_row(params: &ModelParams, t: f64, y: [f64; 7]) -> Vec<f64> {
    let s = MatrixMomentState::from_array(y);
    vec![t, s.a, s.b, s.c, s.d, s.g1m, s.g2m, s.g3m, matrix_delta(params, &s), symmetrize(&s).d1]
}

pub fn functionals_row(f: &Functionals) -> Vec<f64> {
    vec![f.t, f.mass, f.energy, f.j, f.g, f.f1, f.f2]
}

/// One refinement level of the residual audit.
pub fn residual_row(h: f64, dt: f64, r: &PdeResidual) -> Vec<f64> {
    vec![h, dt, r.mass, r.momentum_x, r.momentum_y, r.entropy, r.pressure]
}

/// `(t, state)` pairs at the accepted steps, or at `samples + 1` uniform
/// times when requested.
pub fn output_states<const N: usize>(traj: &Trajectory<N>, samples: Option<usize>) -> Vec<(f64, [f64; N])> {
    match samples {
        None => traj.times().iter().copied().zip(traj.states().iter().copied()).collect(),
        Some(n) => {
            let (t0, t1) = (traj.t_start(), traj.t_final());
            (0..=n)
                .map(|i| {
                    let t = if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 };
                    (t, traj.sample(t).expect("time inside the trajectory"))
                })
                .collect()
        }
    }
}

/// Files written so far, relative to the output directory.
#[derive(Debug, Default)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir, files: Vec::new() }
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }
}
