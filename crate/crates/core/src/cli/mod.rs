//! Batch front-end.
//!
//! `affine-euler <command> --config FILE [--out DIR]` reads a TOML
//! configuration, runs one stage (or all of them) and writes CSV/JSON
//! reports plus `manifest.json` into the output directory. The directory is
//! taken from `--out`, then the `OUT_DIR` environment variable, then
//! `[output] directory`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure
//! (blow-up, suspected divergence, failed evaluation), 3 I/O error.

mod config;
mod output;

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use config::{
    parse_config, AsymptoticsSection, Config, ConfigError, FieldsSection, InitialSection, IntegrationSection,
    InteriorSection, ModelSection, OutputSection, Preset,
};
pub use output::{format_float, write_csv, FIELDS_AUDIT_HEADER, MATRIX_HEADER, RESIDUAL_HEADER, TRAJECTORY_HEADER};

use crate::asymptotics::{fit_power_law, leading_term, matrix_asymptote, PowerLawFit, Regime};
use crate::closedform::{equilibria, ClosedFormOrbit};
use crate::exec::Exec;
use crate::fields::{
    canonical_profile, compatibility_residual, conserved_quantities, evaluate, functional_rates, pde_residual,
    GridSpec, PdeResidual, PerturbedVelocity, ScalarSolution,
};
use crate::integrator::{integrate, EventKind, IntegrationConfig, Termination, Trajectory};
use crate::interior::{boundedness_scan, Condition, IntegralStatus, ScalarTrajectory, ScanGrid, Verdict};
use crate::moments::{
    beta_invariant_residual, bound_residual, MatrixSystem, ModelParams, ScalarInvariants, ScalarMomentState,
    ScalarSystem,
};
use output::{functionals_row, matrix_row, output_states, residual_row, trajectory_row, write_json, Outputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "affine-euler", version, about = "Affine-velocity Euler solutions: simulation and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides OUT_DIR and the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run the data-parallel loops sequentially.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Integrate the moment system and write the trajectory.
    Simulate,
    /// Evaluate the explicit frictionless solution (mu = 0).
    ClosedForm,
    /// Fit the large-time behaviour and compare with the leading terms.
    Asymptotics,
    /// Reconstruct the fields and audit the integral functionals.
    Fields,
    /// Check the interiority conditions along the trajectory.
    Interior,
    /// Residuals of the balance laws under refinement and invariant drifts.
    Audit,
    /// simulate, asymptotics, fields and interior in sequence.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ClosedForm => "closed-form",
            Command::Asymptotics => "asymptotics",
            Command::Fields => "fields",
            Command::Interior => "interior",
            Command::Audit => "audit",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

fn numerical<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Numerical(format!("{context}: {e}"))
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    command: &'static str,
    config_path: Option<String>,
    config: Option<&'a Config>,
    parallel: bool,
    outputs: &'a [String],
    exit_code: i32,
    status: &'static str,
    message: Option<String>,
}

/// Output directory by precedence `--out`, `OUT_DIR`, configuration.
fn resolve_out_dir(cli: &Cli, cfg: Option<&Config>) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("OUT_DIR").filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.map(|c| PathBuf::from(&c.output.directory)))
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let loaded = load_config(&cli);
    let cfg = loaded.as_ref().ok();
    let Some(dir) = resolve_out_dir(&cli, cfg) else {
        let e = loaded.err().unwrap_or_else(|| CliError::Usage("no output directory".into()));
        eprintln!("error: {e}");
        return e.exit_code();
    };
    let mut outputs = Outputs::new(dir.clone());
    let result = match (&loaded, fs::create_dir_all(&dir)) {
        (_, Err(e)) => Err(CliError::Io(e)),
        (Err(_), _) => Err(loaded.as_ref().err().map(clone_error).expect("error branch")),
        (Ok(cfg), Ok(())) => {
            let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
            dispatch(cli.command, cfg, exec, &mut outputs)
        }
    };
    let (code, message) = match &result {
        Ok(()) => (EXIT_OK, None),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), Some(e.to_string()))
        }
    };
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        config: cfg,
        parallel: cfg!(feature = "parallel") && !cli.sequential,
        outputs: &outputs.files,
        exit_code: code,
        status: if code == EXIT_OK { "ok" } else { "error" },
        message,
    };
    if dir.is_dir() {
        if let Err(e) = write_json(&dir.join("manifest.json"), &manifest) {
            eprintln!("error: cannot write manifest: {e}");
            return if code == EXIT_OK { EXIT_IO } else { code };
        }
    }
    code
}

fn clone_error(e: &CliError) -> CliError {
    match e {
        CliError::Config(c) => CliError::Config(c.clone()),
        CliError::Usage(s) => CliError::Usage(s.clone()),
        CliError::Numerical(s) => CliError::Numerical(s.clone()),
        CliError::Io(io) => CliError::Io(io::Error::new(io.kind(), io.to_string())),
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config FILE is required".into()))?;
    let text = fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

fn dispatch(cmd: Command, cfg: &Config, exec: Exec, out: &mut Outputs) -> Result<(), CliError> {
    match cmd {
        Command::Simulate => simulate(cfg, out),
        Command::ClosedForm => closed_form(cfg, exec, out),
        Command::Asymptotics => asymptotics(cfg, out),
        Command::Fields => fields(cfg, exec, out),
        Command::Interior => interior(cfg, exec, out),
        Command::Audit => audit(cfg, exec, out),
        Command::All => {
            simulate(cfg, out)?;
            if Regime::of(&params(cfg)?).is_some() {
                asymptotics(cfg, out)?;
            }
            fields(cfg, exec, out)?;
            interior(cfg, exec, out)
        }
    }
}

fn params(cfg: &Config) -> Result<ModelParams, CliError> {
    cfg.params().map_err(|e| CliError::Usage(e.to_string()))
}

fn invariants(cfg: &Config) -> Result<ScalarInvariants, CliError> {
    cfg.invariants().map_err(|e| CliError::Usage(e.to_string()))
}

fn solve_scalar(
    p: ModelParams,
    inv: ScalarInvariants,
    s0: ScalarMomentState,
    icfg: &IntegrationConfig,
) -> Result<Trajectory<3>, CliError> {
    integrate(&ScalarSystem { params: p, inv }, s0.to_array(), 0.0, icfg).map_err(numerical("integration"))
}

/// Turns an early termination into a numerical failure naming the bracket.
fn check_termination<const N: usize>(traj: &Trajectory<N>, what: &str) -> Result<(), CliError> {
    match traj.termination() {
        Termination::ReachedHorizon => Ok(()),
        _ => {
            let msg = match traj.events().last() {
                Some(ev) => match &ev.kind {
                    EventKind::BlowUp { cause, upper } => {
                        format!("{what}: blow-up ({cause:?}) at t in [{}, {}]", ev.time, upper)
                    }
                    EventKind::InvariantViolation { message } => {
                        format!("{what}: invariant violated at t = {}: {message}", ev.time)
                    }
                },
                None => format!("{what}: stopped at t = {}", traj.t_final()),
            };
            Err(CliError::Numerical(msg))
        }
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    termination: Termination,
    events: Vec<crate::integrator::Event>,
    t_final: f64,
    accepted_steps: usize,
    rhs_evaluations: usize,
    invariants: ScalarInvariants,
    max_abs_inv_beta_residual: Option<f64>,
    max_bound_residual: f64,
    relative_energy_drift: f64,
    matrix: Option<MatrixSummary>,
}

#[derive(Serialize)]
struct MatrixSummary {
    termination: Termination,
    t_final: f64,
    k1: f64,
}

fn simulate(cfg: &Config, out: &mut Outputs) -> Result<(), CliError> {
    let (p, inv, s0) = (params(cfg)?, invariants(cfg)?, cfg.initial_state());
    let icfg = cfg.integration_config(cfg.integration.t_end);
    let traj = solve_scalar(p, inv, s0, &icfg)?;

    let rows: Vec<Vec<f64>> = output_states(&traj, cfg.integration.samples)
        .into_iter()
        .map(|(t, y)| trajectory_row(&p, &inv, t, y))
        .collect();
    if cfg.output.csv() {
        write_csv(&out.path("trajectory.csv"), &TRAJECTORY_HEADER, rows)?;
    }

    let mut inv_res: Option<f64> = None;
    let mut bound = f64::NEG_INFINITY;
    let mut drift = 0.0_f64;
    for (&t, y) in traj.times().iter().zip(traj.states()) {
        let s = ScalarMomentState::from_array(*y);
        if let Some(r) = beta_invariant_residual(&p, &inv, t, &s) {
            inv_res = Some(inv_res.unwrap_or(0.0).max(r.abs()));
        }
        bound = bound.max(bound_residual(&p, &inv, &s));
        if let Ok(e) = crate::moments::scalar_energy(&p, &inv, &s) {
            drift = drift.max((e.total - inv.e_total).abs() / inv.e_total.abs().max(f64::MIN_POSITIVE));
        }
    }

    let matrix = match cfg.matrix_start().map_err(|(k, m)| CliError::Usage(format!("initial.{k}: {m}")))? {
        None => None,
        Some(start) => {
            let sys = MatrixSystem { params: p, k1: start.k1 };
            let mtraj = integrate(&sys, start.state.to_array(), 0.0, &icfg).map_err(numerical("matrix integration"))?;
            if cfg.output.csv() {
                let rows =
                    output_states(&mtraj, cfg.integration.samples).into_iter().map(|(t, y)| matrix_row(&p, t, y));
                write_csv(&out.path("matrix_trajectory.csv"), &MATRIX_HEADER, rows)?;
            }
            Some((mtraj.termination(), mtraj.t_final(), start.k1, mtraj))
        }
    };

    let summary = SimulationSummary {
        termination: traj.termination(),
        events: traj.events().to_vec(),
        t_final: traj.t_final(),
        accepted_steps: traj.times().len() - 1,
        rhs_evaluations: traj.rhs_evaluations(),
        invariants: inv,
        max_abs_inv_beta_residual: inv_res,
        max_bound_residual: bound,
        relative_energy_drift: if p.mu() == 0.0 { drift } else { f64::NAN },
        matrix: matrix.as_ref().map(|(term, tf, k1, _)| MatrixSummary { termination: *term, t_final: *tf, k1: *k1 }),
    };
    if cfg.output.json() {
        write_json(&out.path("simulation.json"), &summary)?;
    }
    check_termination(&traj, "scalar trajectory")?;
    if let Some((_, _, _, mtraj)) = &matrix {
        check_termination(mtraj, "matrix trajectory")?;
    }
    Ok(())
}

fn closed_form(cfg: &Config, exec: Exec, out: &mut Outputs) -> Result<(), CliError> {
    let (p, inv) = (params(cfg)?, invariants(cfg)?);
    if p.mu() != 0.0 {
        return Err(CliError::Usage(format!("closed-form requires model.mu = 0, got {}", p.mu())));
    }
    let orbit = ClosedFormOrbit::new(&p, &inv, cfg.initial.alpha0).map_err(numerical("closed form"))?;
    let t_end = cfg.integration.t_end;
    let t_stop = orbit.escape_time.map_or(t_end, |te| te.min(t_end));
    let n = cfg.integration.samples.unwrap_or(1000);
    // the escape time itself is excluded
    let times: Vec<f64> =
        (0..=n).map(|i| t_stop * i as f64 / n as f64).filter(|&t| orbit.escape_time.is_none_or(|te| t < te)).collect();
    let states: Result<Vec<_>, _> = exec.map_slice(&times, |&t| orbit.state_at(t)).into_iter().collect();
    let states = states.map_err(numerical("closed form"))?;
    if cfg.output.csv() {
        let rows = times.iter().zip(&states).map(|(&t, s)| trajectory_row(&p, &inv, t, s.to_array()));
        write_csv(&out.path("closed_form.csv"), &TRAJECTORY_HEADER, rows)?;
    }
    if cfg.output.json() {
        write_json(&out.path("orbit.json"), &json!({ "orbit": orbit, "phase_portrait": equilibria(&inv, &p) }))?;
    }
    match orbit.escape_time {
        Some(te) if te <= t_end => Err(CliError::Numerical(format!("closed form: the solution escapes at t = {te}"))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct FitReport {
    fit: PowerLawFit,
    predicted_exponent: f64,
    predicted_coefficient: f64,
}

fn asymptotics(cfg: &Config, out: &mut Outputs) -> Result<(), CliError> {
    let (p, inv, s0) = (params(cfg)?, invariants(cfg)?, cfg.initial_state());
    let Some(regime) = Regime::of(&p) else {
        return Err(CliError::Usage("no decaying regime for mu = 0, l != 0 (orbits are periodic)".into()));
    };
    let t_end = cfg.asymptotics.t_end;
    let traj = solve_scalar(p, inv, s0, &cfg.integration_config(t_end))?;
    check_termination(&traj, "asymptotic run")?;
    let (lo, hi) = cfg.asymptotic_window();
    let n = cfg.asymptotics.samples;
    let mut alpha = Vec::with_capacity(n);
    let mut g1 = Vec::with_capacity(n);
    for i in 0..n {
        let t = (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp().clamp(lo, hi);
        let y = traj.sample(t).map_err(numerical("sampling"))?;
        g1.push((t, y[0]));
        alpha.push((t, y[1]));
    }
    let g1_exponent = if regime == Regime::MuZeroLZero { -2.0 } else { -1.0 / p.gamma() };
    let lead = leading_term(&p, &inv, regime, hi).map_err(numerical("leading term"))?;
    let report = |samples: &[(f64, f64)], exponent: f64, value_at_hi: f64| -> Result<FitReport, CliError> {
        Ok(FitReport {
            fit: fit_power_law(samples, (lo, hi)).map_err(numerical("power-law fit"))?,
            predicted_exponent: exponent,
            predicted_coefficient: value_at_hi * hi.powf(-exponent),
        })
    };
    let alpha_fit = report(&alpha, -1.0, lead.alpha)?;
    let g1_fit = report(&g1, g1_exponent, lead.g1)?;

    let matrix = match cfg.matrix_start().map_err(|(k, m)| CliError::Usage(format!("initial.{k}: {m}")))? {
        None => None,
        Some(start) => {
            let sys = MatrixSystem { params: p, k1: start.k1 };
            let mtraj = integrate(&sys, start.state.to_array(), 0.0, &cfg.integration_config(t_end))
                .map_err(numerical("matrix integration"))?;
            check_termination(&mtraj, "matrix asymptotic run")?;
            Some(matrix_asymptote(&p, &mtraj, (lo, hi), n).map_err(numerical("matrix asymptote"))?)
        }
    };
    if cfg.output.json() {
        write_json(
            &out.path("asymptotics.json"),
            &json!({
                "regime": regime,
                "window": [lo, hi],
                "leading_term_at_window_end": lead,
                "alpha": alpha_fit,
                "g1": g1_fit,
                "matrix": matrix,
                "phase_portrait": equilibria(&inv, &p),
            }),
        )?;
    }
    Ok(())
}

fn fields(cfg: &Config, exec: Exec, out: &mut Outputs) -> Result<(), CliError> {
    let p = params(cfg)?;
    let f = &cfg.fields;
    let profile = canonical_profile(&p, f.a_exp, cfg.initial.g1_0).map_err(numerical("profile"))?;
    let s0 = cfg.initial_state();
    // the profile fixes E_p(0)
    let inv = crate::moments::scalar_invariants(&p, &s0, profile.ep0).map_err(numerical("invariants"))?;
    let t_end = cfg.integration.t_end;
    let traj = solve_scalar(p, inv, s0, &cfg.integration_config(t_end))?;
    check_termination(&traj, "field trajectory")?;
    let sol = ScalarSolution::new(p, &traj, profile).map_err(numerical("fields"))?;
    let spec = cfg.quadrature_spec();
    let times: Vec<f64> = (0..f.audit_times).map(|i| t_end * i as f64 / (f.audit_times - 1) as f64).collect();
    let series = conserved_quantities(exec, &sol, &times, &spec).map_err(numerical("quadrature"))?;
    if cfg.output.csv() {
        write_csv(&out.path("fields_audit.csv"), &FIELDS_AUDIT_HEADER, series.iter().map(functionals_row))?;
        let grid = GridSpec::square(f.snapshot_half_width, f.snapshot_nodes);
        let snap = evaluate(exec, &sol, t_end, &grid.points()).map_err(numerical("snapshot"))?;
        let rows = snap.points.iter().zip(&snap.values).map(|(&(x, y), v)| vec![x, y, v.rho, v.p, v.s, v.vx, v.vy]);
        write_csv(&out.path("fields_snapshot.csv"), &["x", "y", "rho", "p", "s", "vx", "vy"], rows)?;
    }
    let first = &series[0];
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut drift = json!({});
    let mut g1_err = 0.0_f64;
    let mut f_err = 0.0_f64;
    for s in &series {
        let y = traj.sample(s.t).map_err(numerical("sampling"))?;
        g1_err = g1_err.max(rel(1.0 / s.g, y[0]));
        f_err = f_err.max(rel(s.f1, 2.0 * y[1] * s.g).max(rel(s.f2, 2.0 * y[2] * s.g)));
    }
    drift["mass"] = series.iter().map(|s| rel(s.mass, first.mass)).fold(0.0, f64::max).into();
    // energy and J are conserved only without friction
    if p.mu() == 0.0 {
        drift["energy"] = series.iter().map(|s| rel(s.energy, first.energy)).fold(0.0, f64::max).into();
        drift["j"] = series.iter().map(|s| rel(s.j, first.j)).fold(0.0, f64::max).into();
    }
    let mid = 0.5 * t_end;
    let rates = functional_rates(exec, &sol, mid, 1e-3 * t_end.min(1.0), &spec).map_err(numerical("rates"))?;
    if cfg.output.json() {
        write_json(
            &out.path("fields.json"),
            &json!({
                "profile": profile,
                "ep0_quadrature": first.potential,
                "ep0_exact": profile.ep0,
                "relative_drift": drift,
                "max_relative_error_g1": g1_err,
                "max_relative_error_f1_f2": f_err,
                "relations_at_mid_time": rates,
            }),
        )?;
    }
    Ok(())
}

/// `log₂` ratios of successive levels, per component.
fn observed_orders(levels: &[PdeResidual]) -> Vec<[f64; 5]> {
    levels
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].components(), w[1].components());
            std::array::from_fn(|k| (a[k] / b[k]).log2())
        })
        .collect()
}

fn audit(cfg: &Config, exec: Exec, out: &mut Outputs) -> Result<(), CliError> {
    let p = params(cfg)?;
    let f = &cfg.fields;
    let profile = canonical_profile(&p, f.a_exp, cfg.initial.g1_0).map_err(numerical("profile"))?;
    let s0 = cfg.initial_state();
    let inv = crate::moments::scalar_invariants(&p, &s0, profile.ep0).map_err(numerical("invariants"))?;
    let t_res = f.residual_time;
    let t_end = cfg.integration.t_end.max(t_res + f.residual_dt);
    let traj = solve_scalar(p, inv, s0, &cfg.integration_config(t_end))?;
    check_termination(&traj, "audit trajectory")?;
    let sol = ScalarSolution::new(p, &traj, profile).map_err(numerical("fields"))?;
    let perturbed = PerturbedVelocity {
        inner: ScalarSolution::new(p, &traj, profile).map_err(numerical("fields"))?,
        delta_beta: f.perturbation,
    };
    let grid = GridSpec::square(f.residual_half_width, f.residual_nodes);

    let mut levels = Vec::with_capacity(f.residual_levels);
    let mut controls = Vec::with_capacity(f.residual_levels);
    let mut rows = Vec::with_capacity(f.residual_levels);
    for k in 0..f.residual_levels {
        let scale = 0.5_f64.powi(k as i32);
        let (h, dt) = (f.residual_h * scale, f.residual_dt * scale);
        let r = pde_residual(exec, &sol, &p, t_res, &grid, h, dt).map_err(numerical("residual"))?;
        let c = pde_residual(exec, &perturbed, &p, t_res, &grid, h, dt).map_err(numerical("residual"))?;
        rows.push(residual_row(h, dt, &r));
        levels.push(r);
        controls.push(c);
    }
    if cfg.output.csv() {
        write_csv(&out.path("residual.csv"), &RESIDUAL_HEADER, rows)?;
    }
    let times = [0.0, traj.t_final()];
    let ends = conserved_quantities(exec, &sol, &times, &cfg.quadrature_spec()).map_err(numerical("quadrature"))?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    if cfg.output.json() {
        write_json(
            &out.path("audit.json"),
            &json!({
                "compatibility_residual": compatibility_residual(&profile, &p, profile.g1_0, profile.ep0),
                "entropy_slope": profile.entropy_slope(),
                "expected_entropy_slope": f.a_exp * (p.gamma() - 1.0) + p.gamma(),
                "residual_time": t_res,
                "residual_levels": levels,
                "observed_orders": observed_orders(&levels),
                "perturbed_control": controls,
                "mass_drift": rel(ends[1].mass, ends[0].mass),
                "j_drift": (p.mu() == 0.0).then(|| rel(ends[1].j, ends[0].j)),
                "energy_drift": (p.mu() == 0.0).then(|| rel(ends[1].energy, ends[0].energy)),
            }),
        )?;
    }
    Ok(())
}

fn interior(cfg: &Config, exec: Exec, out: &mut Outputs) -> Result<(), CliError> {
    let (p, inv, s0) = (params(cfg)?, invariants(cfg)?, cfg.initial_state());
    let int = &cfg.interior;
    let gauge = cfg.gauge().map_err(|e| CliError::Usage(e.to_string()))?;
    let icfg =
        IntegrationConfig::new(int.horizon).with_tolerances(int.rtol, int.atol).with_min_step(cfg.integration.min_step);
    let traj = solve_scalar(p, inv, s0, &icfg)?;
    check_termination(&traj, "interior trajectory")?;
    let a = ScalarTrajectory { params: p, inv, traj: &traj, accuracy: int.rtol };
    let grid = ScanGrid { t0: gauge.t0, horizon: int.horizon, nodes: int.nodes };
    let report = boundedness_scan(exec, &gauge, &a, p.gamma(), &grid).map_err(numerical("interior scan"))?;
    if cfg.output.json() {
        write_json(
            &out.path("interior_report.json"),
            &json!({ "preset": int.preset, "kind": cfg.gauge_kind(), "report": report }),
        )?;
    }
    let diverged = |e: &Option<crate::interior::IntegralEstimate>| {
        e.is_some_and(|e| e.status == IntegralStatus::DivergenceSuspected)
    };
    match report.verdict {
        Verdict::ConditionFailed(c @ (Condition::IntegralC | Condition::IntegralD))
            if diverged(&report.integral_c) || diverged(&report.integral_d) =>
        {
            Err(CliError::Numerical(format!("divergence suspected for condition {c}")))
        }
        _ => Ok(()),
    }
}
