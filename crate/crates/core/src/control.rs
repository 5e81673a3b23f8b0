//! Discrete PID, pure-integral and fuzzy-integral controllers driving a
//! quantized step attenuator.
//!
//! All three laws produce an attenuation command in dB. Integration is
//! conditional: the accumulator is frozen whenever the unsaturated command
//! lies beyond an actuator bound and the error pushes further past it.

use std::fmt;
use std::str::FromStr;

use crate::error::{ConfigError, ControlError};
use crate::fuzzy::FuzzyEngine;

/// Default controller sampling period (s).
pub const DEFAULT_TS_S: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Sampling period (s).
    pub ts: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64, ts: f64) -> Result<Self, ConfigError> {
        let g = PidGains { kp, ki, kd, ts };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(ConfigError::new(format!(
                "sampling period must be positive, got {}",
                self.ts
            )));
        }
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ConfigError::new(format!(
                    "gain {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Digital step attenuator: range, LSB and optional per-sample slew limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorModel {
    pub min_db: f64,
    pub max_db: f64,
    pub step_db: f64,
    pub slew_db: Option<f64>,
}

impl Default for ActuatorModel {
    /// 6-bit attenuator with a 0.5 dB LSB.
    fn default() -> Self {
        ActuatorModel {
            min_db: 0.0,
            max_db: 31.5,
            step_db: 0.5,
            slew_db: None,
        }
    }
}

impl ActuatorModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.min_db.is_finite() && self.max_db.is_finite() && self.min_db <= self.max_db) {
            return Err(ConfigError::new(format!(
                "attenuator range [{}, {}] is invalid",
                self.min_db, self.max_db
            )));
        }
        if !(self.step_db.is_finite() && self.step_db > 0.0) {
            return Err(ConfigError::new("attenuator step must be positive"));
        }
        let n = (self.max_db - self.min_db) / self.step_db;
        if (n - n.round()).abs() > 1e-6 {
            return Err(ConfigError::new(
                "attenuator range must be a whole number of steps",
            ));
        }
        if let Some(s) = self.slew_db {
            if !(s.is_finite() && s >= self.step_db) {
                return Err(ConfigError::new(
                    "slew limit must be at least one attenuator step",
                ));
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        ((self.max_db - self.min_db) / self.step_db).round() as usize + 1
    }

    pub fn level(&self, n: usize) -> f64 {
        self.min_db + n as f64 * self.step_db
    }

    /// Grid index of the level nearest `u`; ties go to the lower attenuation.
    fn nearest_index(&self, u: f64) -> usize {
        let x = (u - self.min_db) / self.step_db;
        let n = (x - 0.5).ceil().max(0.0) as usize;
        n.min(self.levels() - 1)
    }
}

/// Clamp, round to the attenuator grid and apply the slew limit.
pub fn quantize_command(u_raw: f64, act: &ActuatorModel, prev_applied: Option<f64>) -> f64 {
    let clamped = if u_raw.is_nan() {
        act.min_db
    } else {
        u_raw.clamp(act.min_db, act.max_db)
    };
    let mut n = act.nearest_index(clamped);
    if let (Some(slew), Some(prev)) = (act.slew_db, prev_applied) {
        let p = act.nearest_index(prev);
        let max_steps = (slew / act.step_db + 1e-9).floor() as usize;
        n = n.clamp(p.saturating_sub(max_steps), p + max_steps);
    }
    act.level(n)
}

/// τ = 1 / (α·Ki): closed-loop time constant of an integral loop around a static gain.
pub fn analytic_time_constant(alpha: f64, ki: f64) -> Result<f64, ConfigError> {
    if !(alpha.is_finite() && alpha > 0.0 && ki.is_finite() && ki > 0.0) {
        return Err(ConfigError::new(format!(
            "time constant needs alpha > 0 and ki > 0, got alpha={alpha}, ki={ki}"
        )));
    }
    Ok(1.0 / (alpha * ki))
}

/// Integrator memory shared by the three laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    /// Accumulated integral term (dB). For the incremental laws this is u[k-1].
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub prev_command: f64,
    pub k: u64,
}

impl ControllerState {
    /// State of a loop already holding `u0`.
    pub fn with_command(u0: f64) -> Self {
        ControllerState {
            integral: u0,
            prev_error: None,
            prev_command: u0,
            k: 0,
        }
    }
}

impl Default for ControllerState {
    fn default() -> Self {
        Self::with_command(0.0)
    }
}

fn check_input(e: f64) -> Result<(), ControlError> {
    if e.is_finite() {
        Ok(())
    } else {
        Err(ControlError::NonFiniteInput(e))
    }
}

/// True when integrating would push an already out-of-range command further out.
fn winding_up(unsaturated: f64, e: f64, bounds: (f64, f64)) -> bool {
    (unsaturated > bounds.1 && e > 0.0) || (unsaturated < bounds.0 && e < 0.0)
}

fn rate(state: &ControllerState, e: f64, ts: f64) -> f64 {
    state.prev_error.map_or(0.0, |p| (e - p) / ts)
}

fn finish(state: &mut ControllerState, e: f64, u: f64) -> f64 {
    state.prev_error = Some(e);
    state.prev_command = u;
    state.k += 1;
    u
}

/// Positional PID: `u = Kp·e + Ki·Σe·Ts + Kd·(e - e_prev)/Ts`, before quantization.
///
/// The derivative term is zero on the first sample.
pub fn pid_step(
    state: &mut ControllerState,
    gains: &PidGains,
    bounds: (f64, f64),
    e: f64,
) -> Result<f64, ControlError> {
    check_input(e)?;
    let p = gains.kp * e;
    let d = gains.kd * rate(state, e, gains.ts);
    let candidate = state.integral + gains.ki * e * gains.ts;
    if !winding_up(p + candidate + d, e, bounds) {
        state.integral = candidate;
    }
    let u = p + state.integral + d;
    Ok(finish(state, e, u))
}

/// Incremental integral law `u[k] = u[k-1] + Ki·e·Ts`.
pub fn integral_step(
    state: &mut ControllerState,
    ki: f64,
    ts: f64,
    bounds: (f64, f64),
    e: f64,
) -> Result<f64, ControlError> {
    check_input(e)?;
    let candidate = state.integral + ki * e * ts;
    if !winding_up(candidate, e, bounds) {
        state.integral = candidate;
    }
    let u = state.integral;
    Ok(finish(state, e, u))
}

/// Fuzzy-integral law `u[k] = u[k-1] + Ki·du(e, de)·Ts`, `de` by backward difference.
pub fn fi_step(
    state: &mut ControllerState,
    engine: &FuzzyEngine,
    ki: f64,
    ts: f64,
    bounds: (f64, f64),
    e: f64,
) -> Result<f64, ControlError> {
    check_input(e)?;
    let de = rate(state, e, ts);
    let du = engine.fuzzy_step(e, de)?;
    let candidate = state.integral + ki * du * ts;
    if !winding_up(candidate, e, bounds) {
        state.integral = candidate;
    }
    let u = state.integral;
    Ok(finish(state, e, u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Pid,
    Integral,
    FuzzyIntegral,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Pid => "pid",
            ControllerKind::Integral => "i",
            ControllerKind::FuzzyIntegral => "fi",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pid" => Ok(ControllerKind::Pid),
            "i" | "integral" => Ok(ControllerKind::Integral),
            "fi" | "fuzzy-integral" | "fuzzy" => Ok(ControllerKind::FuzzyIntegral),
            other => Err(ConfigError::new(format!(
                "unknown controller `{other}` (expected pid, i or fi)"
            ))),
        }
    }
}

/// Controller selection and tuning as read from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub actuator: ActuatorModel,
    /// Attenuation held before the first sample (dB).
    pub initial_atten_db: f64,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec {
            kind: ControllerKind::FuzzyIntegral,
            kp: 0.0,
            ki: 2.0,
            kd: 0.0,
            actuator: ActuatorModel::default(),
            initial_atten_db: 10.0,
        }
    }
}

impl ControllerSpec {
    pub fn with_kind(mut self, kind: ControllerKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn label(&self) -> String {
        match self.kind {
            ControllerKind::Pid => format!("pid(kp={},ki={},kd={})", self.kp, self.ki, self.kd),
            ControllerKind::Integral => format!("i(ki={})", self.ki),
            ControllerKind::FuzzyIntegral => format!("fi(ki={})", self.ki),
        }
    }

    pub fn build(&self, ts: f64, engine: &FuzzyEngine) -> Result<Controller, ConfigError> {
        self.actuator.validate()?;
        let gains = PidGains::new(self.kp, self.ki, self.kd, ts)?;
        if !self.initial_atten_db.is_finite() {
            return Err(ConfigError::new("initial attenuation must be finite"));
        }
        let law = match self.kind {
            ControllerKind::Pid => Law::Pid(gains),
            ControllerKind::Integral => Law::Integral { ki: self.ki, ts },
            ControllerKind::FuzzyIntegral => Law::FuzzyIntegral {
                ki: self.ki,
                ts,
                engine: Box::new(engine.clone()),
            },
        };
        let applied = quantize_command(self.initial_atten_db, &self.actuator, None);
        Ok(Controller {
            law,
            state: ControllerState::with_command(applied),
            actuator: self.actuator,
            last_applied: applied,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Pid(PidGains),
    Integral { ki: f64, ts: f64 },
    FuzzyIntegral { ki: f64, ts: f64, engine: Box<FuzzyEngine> },
}

/// Raw law output and the level actually applied to the attenuator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub raw: f64,
    pub applied: f64,
}

/// A control law bound to its state and actuator.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    law: Law,
    state: ControllerState,
    actuator: ActuatorModel,
    last_applied: f64,
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        match self.law {
            Law::Pid(_) => ControllerKind::Pid,
            Law::Integral { .. } => ControllerKind::Integral,
            Law::FuzzyIntegral { .. } => ControllerKind::FuzzyIntegral,
        }
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn applied(&self) -> f64 {
        self.last_applied
    }

    pub fn step(&mut self, e: f64) -> Result<Command, ControlError> {
        let bounds = (self.actuator.min_db, self.actuator.max_db);
        let raw = match &self.law {
            Law::Pid(g) => pid_step(&mut self.state, g, bounds, e)?,
            Law::Integral { ki, ts } => integral_step(&mut self.state, *ki, *ts, bounds, e)?,
            Law::FuzzyIntegral { ki, ts, engine } => {
                fi_step(&mut self.state, engine, *ki, *ts, bounds, e)?
            }
        };
        let applied = quantize_command(raw, &self.actuator, Some(self.last_applied));
        self.last_applied = applied;
        Ok(Command { raw, applied })
    }
}
