//! Explicit embedded Runge–Kutta integration (Dormand–Prince 5(4)) with
//! adaptive step control, 4th-order continuous output and blow-up /
//! invariant events.
//!
//! The integrator is generic over fixed-size states `[f64; N]`; the moment
//! systems in [`crate::moments`] implement [`OdeSystem`] for it.

use serde::Serialize;
use thiserror::Error;

use crate::numeric::{compensated_sum, gauss_legendre};

/// A right-hand side `y' = f(t, y)` together with the state constraints the
/// integrator must honor.
pub trait OdeSystem<const N: usize> {
    type Error: std::fmt::Display;

    fn rhs(&self, t: f64, y: &[f64; N]) -> Result<[f64; N], Self::Error>;

    /// State invariants, checked on every accepted step.
    fn check_state(&self, _t: f64, _y: &[f64; N]) -> Result<(), String> {
        Ok(())
    }

    /// Magnitude compared against
    /// [`IntegrationConfig::blowup_norm_threshold`]. Defaults to the max norm
    /// of the full state.
    fn escape_norm(&self, y: &[f64; N]) -> f64 {
        y.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Adapter turning a closure into an [`OdeSystem`] without invariants.
pub struct FnSystem<F>(pub F);

impl<const N: usize, F> OdeSystem<N> for FnSystem<F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    type Error = std::convert::Infallible;

    fn rhs(&self, t: f64, y: &[f64; N]) -> Result<[f64; N], Self::Error> {
        Ok((self.0)(t, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrationConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Steps are additionally allowed to grow up to `max_step_relative * |t|`.
    pub max_step_relative: Option<f64>,
    pub min_step: f64,
    pub t_end: f64,
    pub blowup_norm_threshold: f64,
    pub max_steps: usize,
}

impl IntegrationConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_step_relative: None,
            min_step: 1e-12,
            t_end,
            blowup_norm_threshold: 1e12,
            max_steps: 50_000_000,
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn with_min_step(mut self, min_step: f64) -> Self {
        self.min_step = min_step;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        let check = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(IntegrationError::InvalidConfig { name, value: v })
            }
        };
        check("rtol", self.rtol)?;
        check("atol", self.atol)?;
        check("min_step", self.min_step)?;
        check("t_end", self.t_end)?;
        check("blowup_norm_threshold", self.blowup_norm_threshold)?;
        if !(self.max_step > 0.0) {
            return Err(IntegrationError::InvalidConfig { name: "max_step", value: self.max_step });
        }
        if let Some(rel) = self.max_step_relative {
            check("max_step_relative", rel)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("integration setting `{name}` must be positive and finite, got {value}")]
    InvalidConfig { name: &'static str, value: f64 },
    #[error("initial state violates the system invariants: {0}")]
    InvalidInitialState(String),
    #[error("initial time {t0} is not before the horizon {t_end}")]
    EmptyInterval { t0: f64, t_end: f64 },
    #[error("step budget of {0} steps exhausted")]
    StepLimit(usize),
    #[error("time {t} outside the trajectory range [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    ReachedHorizon,
    BlowUp,
    InvariantViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlowUpCause {
    StepUnderflow,
    NormEscape,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EventKind {
    /// The escape time lies in `[time, upper]` of the enclosing [`Event`].
    BlowUp {
        cause: BlowUpCause,
        upper: f64,
    },
    InvariantViolation {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone)]
struct DenseStep<const N: usize> {
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    fn eval(&self, theta: f64) -> [f64; N] {
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        let omt = 1.0 - theta;
        std::array::from_fn(|i| r1[i] + theta * (r2[i] + omt * (r3[i] + theta * (r4[i] + omt * r5[i]))))
    }
}

/// Numerical solution with dense output. Immutable once built.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    times: Vec<f64>,
    states: Vec<[f64; N]>,
    dense: Vec<DenseStep<N>>,
    events: Vec<Event>,
    termination: Termination,
    rhs_evaluations: usize,
}

impl<const N: usize> Trajectory<N> {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[[f64; N]] {
        &self.states
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn rhs_evaluations(&self) -> usize {
        self.rhs_evaluations
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial state")
    }

    pub fn final_state(&self) -> [f64; N] {
        *self.states.last().expect("trajectory holds the initial state")
    }

    pub fn blowup(&self) -> Option<&Event> {
        self.events.iter().find(|e| matches!(e.kind, EventKind::BlowUp { .. }))
    }

    fn locate(&self, t: f64) -> Result<usize, IntegrationError> {
        let (t0, t1) = (self.t_start(), self.t_final());
        if !(t >= t0 && t <= t1) {
            return Err(IntegrationError::OutOfRange { t, t0, t1 });
        }
        let idx = self.times.partition_point(|&s| s <= t);
        Ok(idx.saturating_sub(1).min(self.dense.len().saturating_sub(1)))
    }

    /// Dense-output state at `t`; stored states are returned exactly.
    pub fn sample(&self, t: f64) -> Result<[f64; N], IntegrationError> {
        let i = self.locate(t)?;
        if t == self.times[i] {
            return Ok(self.states[i]);
        }
        if t == self.t_final() {
            return Ok(self.final_state());
        }
        let h = self.times[i + 1] - self.times[i];
        Ok(self.dense[i].eval((t - self.times[i]) / h))
    }

    /// Prefix integrals of `f(y(t))` over the accepted steps, for fast
    /// repeated evaluation of `∫_{t0}^{t} f(y) dτ`.
    ///
    /// Each step is integrated with a 5-point Gauss–Legendre rule on the
    /// continuous extension, which is exact for functionals linear in `y`.
    pub fn cumulative<F: Fn(&[f64; N]) -> f64>(&self, f: F) -> CumulativeIntegral<'_, N, F> {
        let (nodes, weights) = gauss_legendre(5);
        let mut prefix = Vec::with_capacity(self.times.len());
        prefix.push(0.0);
        let mut acc = 0.0;
        for (i, step) in self.dense.iter().enumerate() {
            let h = self.times[i + 1] - self.times[i];
            let s = compensated_sum(nodes.iter().zip(&weights).map(|(x, w)| w * f(&step.eval(0.5 * (x + 1.0)))));
            acc += 0.5 * h * s;
            prefix.push(acc);
        }
        CumulativeIntegral { traj: self, f, prefix, nodes, weights }
    }
}

pub struct CumulativeIntegral<'a, const N: usize, F> {
    traj: &'a Trajectory<N>,
    f: F,
    prefix: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl<const N: usize, F: Fn(&[f64; N]) -> f64> CumulativeIntegral<'_, N, F> {
    /// `∫_{t0}^{t} f(y(τ)) dτ`.
    pub fn at(&self, t: f64) -> Result<f64, IntegrationError> {
        let i = self.traj.locate(t)?;
        let t_i = self.traj.times[i];
        if t == t_i || self.traj.dense.is_empty() {
            return Ok(self.prefix[i]);
        }
        let h = self.traj.times[i + 1] - t_i;
        let frac = (t - t_i) / h;
        let step = &self.traj.dense[i];
        let s = compensated_sum(
            self.nodes.iter().zip(&self.weights).map(|(x, w)| w * (self.f)(&step.eval(0.5 * frac * (x + 1.0)))),
        );
        Ok(self.prefix[i] + 0.5 * frac * h * s)
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

struct StepOutcome<const N: usize> {
    y1: [f64; N],
    k7: [f64; N],
    err: f64,
    dense: DenseStep<N>,
}

fn dp5_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    cfg: &IntegrationConfig,
    evals: &mut usize,
) -> Result<StepOutcome<N>, String> {
    let f = |tt: f64, yy: &[f64; N], evals: &mut usize| {
        *evals += 1;
        sys.rhs(tt, yy).map_err(|e| e.to_string())
    };
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]), evals)?;
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]), evals)?;
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]), evals)?;
    let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]), evals)?;
    let k6 = f(t + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]), evals)?;
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y1, evals)?;

    let mut sq = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = cfg.atol + cfg.rtol * y[i].abs().max(y1[i].abs());
        sq += (e / sc) * (e / sc);
    }
    let err = (sq / N as f64).sqrt();

    let r2: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
    let r3: [f64; N] = std::array::from_fn(|i| h * k1[i] - r2[i]);
    let r4: [f64; N] = std::array::from_fn(|i| r2[i] - h * k7[i] - r3[i]);
    let r5: [f64; N] =
        std::array::from_fn(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]));
    Ok(StepOutcome { y1, k7, err, dense: DenseStep { coeffs: [*y, r2, r3, r4, r5] } })
}

fn initial_step<const N: usize>(y0: &[f64; N], f0: &[f64; N], cfg: &IntegrationConfig, span: f64) -> f64 {
    // Hairer–Nørsett–Wanner starting-step heuristic (first-derivative form)
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = cfg.atol + cfg.rtol * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(cfg.max_step).min(span).max(cfg.min_step)
}

/// Integrates `sys` from `(t0, y0)` up to `cfg.t_end` or the first event.
pub fn integrate<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    y0: [f64; N],
    t0: f64,
    cfg: &IntegrationConfig,
) -> Result<Trajectory<N>, IntegrationError> {
    cfg.validate()?;
    if !(t0 < cfg.t_end) {
        return Err(IntegrationError::EmptyInterval { t0, t_end: cfg.t_end });
    }
    sys.check_state(t0, &y0).map_err(IntegrationError::InvalidInitialState)?;
    let mut evals = 1;
    let mut k1 = sys.rhs(t0, &y0).map_err(|e| IntegrationError::InvalidInitialState(e.to_string()))?;

    let mut times = vec![t0];
    let mut states = vec![y0];
    let mut dense = Vec::new();
    let mut events = Vec::new();

    let mut t = t0;
    let mut y = y0;
    let mut h = initial_step(&y0, &k1, cfg, cfg.t_end - t0);
    let mut rejected_last = false;

    let termination = loop {
        if t >= cfg.t_end {
            break Termination::ReachedHorizon;
        }
        if dense.len() >= cfg.max_steps {
            return Err(IntegrationError::StepLimit(cfg.max_steps));
        }
        let cap = match cfg.max_step_relative {
            Some(rel) => cfg.max_step.max(rel * t.abs()),
            None => cfg.max_step,
        };
        h = h.min(cap);
        let mut last = false;
        if t + h >= cfg.t_end || t + 1.01 * h >= cfg.t_end {
            h = cfg.t_end - t;
            last = true;
        }
        // no representable progress is possible below this step
        let floor = cfg.min_step.max(4.0 * f64::EPSILON * t.abs());
        if h < floor && !last {
            events.push(Event {
                time: t,
                kind: EventKind::BlowUp { cause: BlowUpCause::StepUnderflow, upper: t + floor },
            });
            break Termination::BlowUp;
        }

        let outcome = dp5_step(sys, t, &y, &k1, h, cfg, &mut evals);
        let (accepted, err) = match outcome {
            Ok(step) if step.err.is_finite() && step.err <= 1.0 => {
                let t_new = if last { cfg.t_end } else { t + h };
                match sys.check_state(t_new, &step.y1) {
                    Ok(()) => (Some((t_new, step)), 0.0),
                    Err(msg) => {
                        if h * 0.5 < floor {
                            events.push(Event { time: t, kind: EventKind::InvariantViolation { message: msg } });
                            break Termination::InvariantViolation;
                        }
                        (None, f64::INFINITY)
                    }
                }
            }
            Ok(step) => (None, step.err),
            Err(msg) => {
                if h * 0.5 < floor {
                    events.push(Event { time: t, kind: EventKind::InvariantViolation { message: msg } });
                    break Termination::InvariantViolation;
                }
                (None, f64::INFINITY)
            }
        };

        match accepted {
            Some((t_new, step)) => {
                let err = step.err;
                let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
                let fac = if rejected_last { fac.min(1.0) } else { fac };
                rejected_last = false;
                let non_finite = step.y1.iter().any(|v| !v.is_finite());
                if non_finite {
                    events.push(Event {
                        time: t,
                        kind: EventKind::BlowUp { cause: BlowUpCause::NonFinite, upper: t_new },
                    });
                    break Termination::BlowUp;
                }
                t = t_new;
                y = step.y1;
                k1 = step.k7;
                times.push(t);
                states.push(y);
                dense.push(step.dense);
                if sys.escape_norm(&y) > cfg.blowup_norm_threshold {
                    events.push(Event {
                        time: t,
                        kind: EventKind::BlowUp { cause: BlowUpCause::NormEscape, upper: t + h * fac },
                    });
                    break Termination::BlowUp;
                }
                h *= fac;
            }
            None => {
                rejected_last = true;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.5 };
                h *= fac;
            }
        }
    };

    Ok(Trajectory { times, states, dense, events, termination, rhs_evaluations: evals })
}

/// Fixed-step DP5 propagation (no error control), used for order studies.
pub fn integrate_fixed<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    y0: [f64; N],
    t0: f64,
    t_end: f64,
    steps: usize,
) -> Result<[f64; N], String> {
    let cfg = IntegrationConfig::new(t_end);
    let h = (t_end - t0) / steps as f64;
    let mut evals = 0;
    let mut y = y0;
    let mut k1 = sys.rhs(t0, &y0).map_err(|e| e.to_string())?;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let step = dp5_step(sys, t, &y, &k1, h, &cfg, &mut evals)?;
        y = step.y1;
        k1 = step.k7;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn decay() -> FnSystem<impl Fn(f64, &[f64; 1]) -> [f64; 1]> {
        FnSystem(|_t: f64, y: &[f64; 1]| [-y[0]])
    }

    #[test]
    fn linear_test_equation() {
        let traj = integrate(&decay(), [1.0], 0.0, &IntegrationConfig::new(1.0)).unwrap();
        assert_eq!(traj.termination(), Termination::ReachedHorizon);
        assert_eq!(traj.t_final(), 1.0);
        assert!((traj.final_state()[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn sample_endpoints_are_exact() {
        let traj = integrate(&decay(), [1.0], 0.0, &IntegrationConfig::new(2.0)).unwrap();
        assert_eq!(traj.sample(0.0).unwrap(), [1.0]);
        assert_eq!(traj.sample(2.0).unwrap(), traj.final_state());
        assert!(traj.sample(2.5).is_err());
        assert!(traj.sample(-0.1).is_err());
    }

    #[test]
    fn dense_output_between_steps() {
        let cfg = IntegrationConfig::new(3.0).with_tolerances(1e-8, 1e-10);
        let traj = integrate(&decay(), [1.0], 0.0, &cfg).unwrap();
        for k in 0..300 {
            let t = 0.01 * k as f64 + 0.003;
            let y = traj.sample(t).unwrap()[0];
            assert!((y - (-t).exp()).abs() < 10.0 * (1e-8 * y.abs() + 1e-10), "t={t}");
        }
    }

    #[test]
    fn cumulative_integral_of_exponential() {
        let cfg = IntegrationConfig::new(2.0);
        let traj = integrate(&decay(), [1.0], 0.0, &cfg).unwrap();
        let cum = traj.cumulative(|y| y[0]);
        for t in [0.0, 0.37, 1.0, 1.999, 2.0] {
            assert_relative_eq!(cum.at(t).unwrap(), 1.0 - (-t).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn quadratic_blowup_is_bracketed() {
        let sys = FnSystem(|_t: f64, y: &[f64; 1]| [-y[0] * y[0]]);
        let cfg = IntegrationConfig::new(5.0);
        let traj = integrate(&sys, [-1.0], 0.0, &cfg).unwrap();
        assert_eq!(traj.termination(), Termination::BlowUp);
        let ev = traj.blowup().unwrap();
        assert!((ev.time - 1.0).abs() <= 1e-6, "blow-up reported at {}", ev.time);
        if let EventKind::BlowUp { upper, .. } = ev.kind {
            assert!(upper >= ev.time);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = IntegrationConfig::new(1.0).with_tolerances(-1.0, 1e-12);
        assert!(matches!(
            integrate(&decay(), [1.0], 0.0, &cfg),
            Err(IntegrationError::InvalidConfig { name: "rtol", .. })
        ));
    }

    #[test]
    fn invariant_violation_stops_integration() {
        struct Positive;
        impl OdeSystem<1> for Positive {
            type Error = std::convert::Infallible;
            fn rhs(&self, _t: f64, _y: &[f64; 1]) -> Result<[f64; 1], Self::Error> {
                Ok([-1.0])
            }
            fn check_state(&self, _t: f64, y: &[f64; 1]) -> Result<(), String> {
                if y[0] > 0.0 {
                    Ok(())
                } else {
                    Err(format!("y = {} is not positive", y[0]))
                }
            }
        }
        let traj = integrate(&Positive, [1.0], 0.0, &IntegrationConfig::new(3.0)).unwrap();
        assert_eq!(traj.termination(), Termination::InvariantViolation);
        assert!(traj.t_final() < 1.0 && traj.t_final() > 1.0 - 1e-9);
        assert!(traj.states().iter().all(|y| y[0] > 0.0));
    }

    #[test]
    fn fixed_step_order_is_five() {
        let sys = decay();
        let err = |n| (integrate_fixed(&sys, [1.0], 0.0, 1.0, n).unwrap()[0] - (-1.0f64).exp()).abs();
        let (e1, e2, e3) = (err(10), err(20), err(40));
        let p1 = (e1 / e2).log2();
        let p2 = (e2 / e3).log2();
        assert!((p1 - 5.0).abs() < 0.5 && (p2 - 5.0).abs() < 0.5, "orders {p1} {p2}");
    }
}
