use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{canonical_profile, QuadratureSpec};
use crate::integrator::IntegrationConfig;
use crate::interior::{gauge_preset, GaugeChoice, GaugeKind, MIN_SCAN_NODES};
use crate::moments::{
    k1_coefficient, matrix_aux, scalar_invariants, validate_params, MatrixMomentState, ModelParams, ScalarInvariants,
    ScalarMomentState,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}invalid `{key}`: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation { key: String, line: Option<usize>, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub gamma: f64,
    pub mu: f64,
    pub l: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { gamma: 2.0, mu: 0.0, l: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub g1_0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub ep0: f64,
    /// Optional general initial data for the matrix system; all seven
    /// entries or none.
    pub a0: Option<f64>,
    pub b0: Option<f64>,
    pub c0: Option<f64>,
    pub d0: Option<f64>,
    pub gx0: Option<f64>,
    pub gy0: Option<f64>,
    pub gxy0: Option<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            g1_0: 1.0,
            alpha0: 0.0,
            beta0: 0.0,
            ep0: 1.0,
            a0: None,
            b0: None,
            c0: None,
            d0: None,
            gx0: None,
            gy0: None,
            gxy0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationSection {
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_step: Option<f64>,
    pub blowup_norm: f64,
    /// Uniform output times instead of the accepted steps.
    pub samples: Option<usize>,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        let d = IntegrationConfig::new(10.0);
        Self {
            t_end: d.t_end,
            rtol: d.rtol,
            atol: d.atol,
            min_step: d.min_step,
            max_step: None,
            blowup_norm: d.blowup_norm_threshold,
            samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldsSection {
    pub a_exp: f64,
    pub radial_panels: usize,
    pub radial_order: usize,
    pub angular: usize,
    pub tail_tol: f64,
    pub audit_times: usize,
    pub snapshot_half_width: f64,
    pub snapshot_nodes: usize,
    pub residual_time: f64,
    pub residual_half_width: f64,
    pub residual_nodes: usize,
    pub residual_h: f64,
    pub residual_dt: f64,
    pub residual_levels: usize,
    /// `δβ` of the perturbed control in the residual audit.
    pub perturbation: f64,
}

impl Default for FieldsSection {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        Self {
            a_exp: 4.0,
            radial_panels: q.panels,
            radial_order: q.order,
            angular: q.n_theta,
            tail_tol: q.tail_tol,
            audit_times: 11,
            snapshot_half_width: 5.0,
            snapshot_nodes: 41,
            residual_time: 1.0,
            residual_half_width: 2.0,
            residual_nodes: 9,
            residual_h: 0.04,
            residual_dt: 0.04,
            residual_levels: 3,
            perturbation: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsSection {
    pub t_end: f64,
    /// Fit window; `[t_end/100, t_end]` when absent.
    pub window_lo: Option<f64>,
    pub window_hi: Option<f64>,
    pub samples: usize,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        Self { t_end: 1e5, window_lo: None, window_hi: None, samples: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Serre,
    Cor21,
    Cor22,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteriorSection {
    pub preset: Preset,
    /// Defaults: 1 for `cor21`, `1/(2γ)` for `cor22`.
    pub delta: Option<f64>,
    pub horizon: f64,
    pub nodes: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for InteriorSection {
    fn default() -> Self {
        Self { preset: Preset::Serre, delta: None, horizon: 1e7, nodes: 400, rtol: 1e-12, atol: 1e-30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    /// Subset of `csv`, `json`; the manifest is always written.
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: "out".into(), formats: vec!["csv".into(), "json".into()] }
    }
}

impl OutputSection {
    pub fn csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }

    pub fn json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub initial: InitialSection,
    pub integration: IntegrationSection,
    pub fields: FieldsSection,
    pub asymptotics: AsymptoticsSection,
    pub interior: InteriorSection,
    pub output: OutputSection,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, if the key is spelled out.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Parses and validates a configuration, filling in defaults.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    cfg.validate(text)?;
    Ok(cfg)
}

/// Initial data for the matrix system with its pressure coefficient.
#[derive(Debug, Clone, Copy)]
pub struct MatrixStart {
    pub state: MatrixMomentState,
    pub k1: f64,
}

impl Config {
    /// Re-validates every invariant the run depends on; `text` is only used
    /// to attach line numbers.
    pub fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let err = |section: &str, key: &str, message: String| ConfigError::Validation {
            key: format!("{section}.{key}"),
            line: line_of_key(text, section, key),
            message,
        };
        let params = self.params().map_err(|e| {
            let key = match e {
                crate::moments::MomentError::GammaOutOfRange(_) => "gamma",
                crate::moments::MomentError::NegativeFriction(_) => "mu",
                crate::moments::MomentError::NonFinite(name) => name,
                _ => "gamma",
            };
            err("model", key, e.to_string())
        })?;
        self.invariants().map_err(|e| {
            let key = if self.initial.g1_0 > 0.0 { "ep0" } else { "g1_0" };
            err("initial", key, e.to_string())
        })?;
        for (key, v) in [("alpha0", self.initial.alpha0), ("beta0", self.initial.beta0)] {
            if !v.is_finite() {
                return Err(err("initial", key, format!("must be finite, got {v}")));
            }
        }
        self.matrix_start().map_err(|(key, m)| err("initial", key, m))?;

        let i = &self.integration;
        self.integration_config(i.t_end).validate().map_err(|e| {
            let key = match &e {
                crate::integrator::IntegrationError::InvalidConfig { name, .. } => match *name {
                    "blowup_norm_threshold" => "blowup_norm",
                    other => other,
                },
                _ => "t_end",
            };
            err("integration", key, e.to_string())
        })?;
        if i.samples == Some(0) {
            return Err(err("integration", "samples", "must be at least 1".into()));
        }

        let f = &self.fields;
        canonical_profile(&params, f.a_exp, self.initial.g1_0).map_err(|e| err("fields", "a_exp", e.to_string()))?;
        for (key, n, min) in [
            ("radial_panels", f.radial_panels, 1),
            ("radial_order", f.radial_order, 1),
            ("angular", f.angular, 1),
            ("audit_times", f.audit_times, 2),
            ("snapshot_nodes", f.snapshot_nodes, 1),
            ("residual_nodes", f.residual_nodes, 1),
            ("residual_levels", f.residual_levels, 2),
        ] {
            if n < min {
                return Err(err("fields", key, format!("must be at least {min}, got {n}")));
            }
        }
        for (key, v) in [
            ("tail_tol", f.tail_tol),
            ("snapshot_half_width", f.snapshot_half_width),
            ("residual_half_width", f.residual_half_width),
            ("residual_h", f.residual_h),
            ("residual_dt", f.residual_dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err("fields", key, format!("must be positive, got {v}")));
            }
        }
        if !(f.residual_time >= f.residual_dt && f.residual_time.is_finite()) {
            return Err(err(
                "fields",
                "residual_time",
                format!("must be at least residual_dt = {}, got {}", f.residual_dt, f.residual_time),
            ));
        }
        if !f.perturbation.is_finite() {
            return Err(err("fields", "perturbation", "must be finite".into()));
        }

        let a = &self.asymptotics;
        if !(a.t_end > 0.0 && a.t_end.is_finite()) {
            return Err(err("asymptotics", "t_end", format!("must be positive, got {}", a.t_end)));
        }
        let (lo, hi) = self.asymptotic_window();
        if !(lo > 0.0 && hi > lo && hi <= a.t_end) {
            return Err(err("asymptotics", "window_lo", format!("need 0 < lo < hi <= t_end, got [{lo}, {hi}]")));
        }
        if a.samples < 8 {
            return Err(err("asymptotics", "samples", format!("must be at least 8, got {}", a.samples)));
        }

        let int = &self.interior;
        self.gauge().map_err(|e| err("interior", "delta", e.to_string()))?;
        if !(int.horizon > 0.0 && int.horizon.is_finite()) {
            return Err(err("interior", "horizon", format!("must be positive, got {}", int.horizon)));
        }
        if int.nodes < MIN_SCAN_NODES {
            return Err(err("interior", "nodes", format!("must be at least {MIN_SCAN_NODES}, got {}", int.nodes)));
        }
        IntegrationConfig::new(int.horizon)
            .with_tolerances(int.rtol, int.atol)
            .validate()
            .map_err(|e| err("interior", "rtol", e.to_string()))?;

        for fmt in &self.output.formats {
            if fmt != "csv" && fmt != "json" {
                return Err(err("output", "formats", format!("unknown format `{fmt}` (expected csv or json)")));
            }
        }
        if self.output.directory.is_empty() {
            return Err(err("output", "directory", "must not be empty".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, crate::moments::MomentError> {
        validate_params(self.model.gamma, self.model.mu, self.model.l)
    }

    pub fn initial_state(&self) -> ScalarMomentState {
        ScalarMomentState::new(self.initial.g1_0, self.initial.alpha0, self.initial.beta0)
    }

    pub fn invariants(&self) -> Result<ScalarInvariants, crate::moments::MomentError> {
        scalar_invariants(&self.params()?, &self.initial_state(), self.initial.ep0)
    }

    /// Matrix initial data, when given; errors name the offending key.
    pub fn matrix_start(&self) -> Result<Option<MatrixStart>, (&'static str, String)> {
        let i = &self.initial;
        let entries =
            [("a0", i.a0), ("b0", i.b0), ("c0", i.c0), ("d0", i.d0), ("gx0", i.gx0), ("gy0", i.gy0), ("gxy0", i.gxy0)];
        let given = entries.iter().filter(|(_, v)| v.is_some()).count();
        if given == 0 {
            return Ok(None);
        }
        if let Some((key, _)) = entries.iter().find(|(_, v)| v.is_none()) {
            return Err((key, "matrix initial data needs all of a0, b0, c0, d0, gx0, gy0, gxy0".into()));
        }
        let v: Vec<f64> = entries.iter().map(|(_, v)| v.unwrap_or(f64::NAN)).collect();
        if let Some((key, _)) = entries.iter().zip(&v).find(|(_, x)| !x.is_finite()).map(|(e, x)| (e.0, x)) {
            return Err((key, "must be finite".into()));
        }
        let params = self.params().map_err(|e| ("gx0", e.to_string()))?;
        let aux = matrix_aux(&params, v[4], v[5], v[6]).map_err(|e| ("gxy0", e.to_string()))?;
        let state = MatrixMomentState { a: v[0], b: v[1], c: v[2], d: v[3], g1m: aux.g1m, g2m: aux.g2m, g3m: aux.g3m };
        Ok(Some(MatrixStart { state, k1: k1_coefficient(&params, self.initial.ep0, aux.delta) }))
    }

    pub fn integration_config(&self, t_end: f64) -> IntegrationConfig {
        let i = &self.integration;
        let mut c = IntegrationConfig::new(t_end).with_tolerances(i.rtol, i.atol).with_min_step(i.min_step);
        if let Some(h) = i.max_step {
            c = c.with_max_step(h);
        }
        c.blowup_norm_threshold = i.blowup_norm;
        c
    }

    pub fn asymptotic_window(&self) -> (f64, f64) {
        let a = &self.asymptotics;
        (a.window_lo.unwrap_or(a.t_end / 100.0), a.window_hi.unwrap_or(a.t_end))
    }

    pub fn gauge_kind(&self) -> GaugeKind {
        let d = self.interior.delta;
        match self.interior.preset {
            Preset::Serre => GaugeKind::Serre,
            Preset::Cor21 => GaugeKind::Cor21 { delta: d.unwrap_or(1.0) },
            Preset::Cor22 => GaugeKind::Cor22 { delta: d.unwrap_or(1.0 / (2.0 * self.model.gamma)) },
        }
    }

    pub fn gauge(&self) -> Result<GaugeChoice, crate::interior::InteriorError> {
        let params = self.params()?;
        gauge_preset(&params, self.gauge_kind())
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        let f = &self.fields;
        QuadratureSpec {
            tail_tol: f.tail_tol,
            radius: None,
            panels: f.radial_panels,
            order: f.radial_order,
            n_theta: f.angular,
        }
    }
}
