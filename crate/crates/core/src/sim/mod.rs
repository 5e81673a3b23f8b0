//! Fixed-step closed-loop simulation and transient scoring.
//!
//! Each sample: the plant advances one period holding the previous
//! attenuation, the sensor estimates output power, and the controller turns
//! the error into a new attenuation. Attenuation lowers power, so the loop is
//! reverse-acting and controllers are fed `P_est - P_ref`; traces report the
//! conventional error `P_ref - P_est`.

mod metrics;
mod search;

pub use metrics::{
    compute_metrics, compute_series_metrics, detect_limit_cycle, settling_time, LimitCycle,
    MetricsSpec, TransientMetrics, LIMIT_CYCLE_MIN_SAMPLES,
};
pub use search::{
    compare_controllers, find_unstable_pid, fi_gain_sweep, ComparisonEntry, ComparisonReport,
    GainPoint, GridAxis, PidGrid, PidSearchReport,
};

use thiserror::Error;

use crate::error::{ConfigError, ControlError, MetricsError};
use crate::plant::Plant;
use crate::scenario::Scenario;
use crate::sensing::Sensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t_s: f64,
    pub p_rf_dbm: f64,
    pub p_est_dbm: f64,
    pub e_db: f64,
    pub u_raw_db: f64,
    pub u_applied_db: f64,
    pub link_atten_db: f64,
    pub saturated: bool,
}

/// A run that stopped early.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimFault {
    #[error("controller failed at t = {t_s} s: {source}")]
    Controller { t_s: f64, source: ControlError },
    #[error("non-finite plant output at t = {t_s} s")]
    NonFinite { t_s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub ts_s: f64,
    pub p_ref_dbm: f64,
    pub records: Vec<TraceRecord>,
    /// Set when the run was cut short; `records` holds the samples before it.
    pub fault: Option<SimFault>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn p_rf(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p_rf_dbm).collect()
    }

    pub fn saturated_samples(&self) -> usize {
        self.records.iter().filter(|r| r.saturated).count()
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Fault(#[from] SimFault),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Run the scenario for `round(duration / Ts) + 1` samples starting at t = 0.
///
/// Configuration problems are returned as errors; a controller failure part
/// way through ends the run and is recorded in [`SimTrace::fault`].
pub fn run_scenario(sc: &Scenario) -> Result<SimTrace, ConfigError> {
    sc.validate()?;
    let ts = sc.run.ts_s;
    let mut controller = sc.controller.build(ts, &sc.fuzzy)?;
    let mut plant = Plant::new(sc.plant.clone(), sc.disturbances.clone(), controller.applied())?;
    let mut sensor = Sensor::matched(sc.detector, sc.adc, sc.run.seed)?;

    let n = sc.run.samples();
    let mut records = Vec::with_capacity(n + 1);
    let mut fault = None;
    for k in 0..=n {
        let t_s = k as f64 * ts;
        let p_rf = if k == 0 {
            plant.output_dbm()
        } else {
            plant.step(controller.applied(), ts)
        };
        if !p_rf.is_finite() {
            fault = Some(SimFault::NonFinite { t_s });
            break;
        }
        let m = sensor.measure(p_rf);
        let e = sc.run.p_ref_dbm - m.p_est_dbm;
        let cmd = match controller.step(-e) {
            Ok(c) => c,
            Err(source) => {
                fault = Some(SimFault::Controller { t_s, source });
                break;
            }
        };
        records.push(TraceRecord {
            t_s,
            p_rf_dbm: p_rf,
            p_est_dbm: m.p_est_dbm,
            e_db: e,
            u_raw_db: cmd.raw,
            u_applied_db: cmd.applied,
            link_atten_db: plant.state().link_atten_db,
            saturated: m.saturated,
        });
    }
    if let Some(f) = &fault {
        log::warn!("{f}");
    }
    let sat = records.iter().filter(|r| r.saturated).count();
    if sat > 0 {
        log::debug!("{sat} samples outside the detector range or ADC span");
    }
    Ok(SimTrace {
        ts_s: ts,
        p_ref_dbm: sc.run.p_ref_dbm,
        records,
        fault,
    })
}

/// Run and score in one go; a mid-run fault is an error here.
pub fn run_and_score(sc: &Scenario) -> Result<(SimTrace, TransientMetrics), HarnessError> {
    let trace = run_scenario(sc)?;
    if let Some(f) = &trace.fault {
        return Err(f.clone().into());
    }
    let metrics = compute_metrics(&trace, &MetricsSpec::for_scenario(sc))?;
    Ok((trace, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControllerKind;
    use crate::plant::DisturbanceSchedule;

    #[test]
    fn quiet_loop_holds_reference() {
        let sc = Scenario {
            disturbances: DisturbanceSchedule::default(),
            ..Scenario::default()
        };
        let trace = run_scenario(&sc).unwrap();
        assert_eq!(trace.len(), 801);
        assert!(trace.fault.is_none());
        for r in &trace.records {
            assert!((r.p_rf_dbm + 30.0).abs() < 0.01);
            assert_eq!(r.u_applied_db, 10.0);
        }
    }

    #[test]
    fn step_is_rejected_by_every_law() {
        for kind in [ControllerKind::Integral, ControllerKind::FuzzyIntegral] {
            let mut sc = Scenario::default();
            sc.controller.kind = kind;
            let (trace, m) = run_and_score(&sc).unwrap();
            assert_eq!(trace.records.last().unwrap().u_applied_db, 15.0, "{kind}");
            assert!(m.steady_state_error_db.abs() < 0.1);
            assert!(m.settling_s.is_some());
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mut sc = Scenario::default();
        sc.detector.noise_v = 0.002;
        let a = run_scenario(&sc).unwrap();
        assert_eq!(a, run_scenario(&sc).unwrap());
        sc.run.seed += 1;
        assert_ne!(a, run_scenario(&sc).unwrap());
    }

    #[test]
    fn bad_scenario_is_rejected() {
        let mut sc = Scenario::default();
        sc.run.ts_s = 0.0;
        assert!(run_scenario(&sc).is_err());
    }
}
