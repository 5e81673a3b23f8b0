//! Fixed-step model of the transmit chain: IF drive, stage gains, the
//! controllable attenuator, a link-attenuation disturbance, thermal gain drift,
//! a Rapp-compressed PA and a first-order output lag.
//!
//! Powers are dBm and gains dB everywhere except inside [`pa_amam`], which works
//! on linear amplitudes (`v = 10^(P/20)`, i.e. square-root milliwatts).

use crate::error::ConfigError;

/// Mixer output products `(2·f_LO + f_IF, 2·f_LO - f_IF)` of the sub-harmonic mixer (GHz).
pub fn rf_frequencies(f_lo_ghz: f64, f_if_ghz: f64) -> Result<(f64, f64), ConfigError> {
    if !(f_lo_ghz.is_finite() && f_lo_ghz > 0.0) {
        return Err(ConfigError::new(format!("LO frequency must be positive, got {f_lo_ghz}")));
    }
    if !(f_if_ghz.is_finite() && f_if_ghz >= 0.0) {
        return Err(ConfigError::new(format!("IF frequency must be non-negative, got {f_if_ghz}")));
    }
    Ok((2.0 * f_lo_ghz + f_if_ghz, 2.0 * f_lo_ghz - f_if_ghz))
}

pub fn db_to_amplitude(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 20.0)
}

pub fn amplitude_to_db(v: f64) -> f64 {
    20.0 * v.log10()
}

/// Rapp AM/AM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaParams {
    /// Small-signal gain (dB).
    pub gain_db: f64,
    /// Saturated output power (dBm).
    pub psat_dbm: f64,
    /// Smoothness exponent p; larger is a sharper knee.
    pub smoothness: f64,
}

impl Default for PaParams {
    fn default() -> Self {
        PaParams {
            gain_db: 20.0,
            psat_dbm: -22.0,
            smoothness: 2.0,
        }
    }
}

impl PaParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gain_db.is_finite() && self.psat_dbm.is_finite()) {
            return Err(ConfigError::new("PA gain and saturation must be finite"));
        }
        if !(self.smoothness.is_finite() && self.smoothness >= 1.0) {
            return Err(ConfigError::new(format!(
                "PA smoothness must be >= 1, got {}",
                self.smoothness
            )));
        }
        Ok(())
    }

    pub fn gain_lin(&self) -> f64 {
        db_to_amplitude(self.gain_db)
    }

    pub fn v_sat(&self) -> f64 {
        db_to_amplitude(self.psat_dbm)
    }

    /// Input amplitude at which the gain has dropped by `compression_db`.
    pub fn compression_input(&self, compression_db: f64) -> f64 {
        let two_p = 2.0 * self.smoothness;
        let r = (10f64.powf(two_p * compression_db / 20.0) - 1.0).powf(1.0 / two_p);
        r * self.v_sat() / self.gain_lin()
    }

    /// Output power (dBm) for an input power (dBm).
    pub fn output_dbm(&self, p_in_dbm: f64) -> f64 {
        amplitude_to_db(pa_amam(db_to_amplitude(p_in_dbm), self))
    }

    /// Inverse of [`PaParams::output_dbm`]; `None` at or above saturation.
    pub fn input_for_output_dbm(&self, p_out_dbm: f64) -> Option<f64> {
        let y = db_to_amplitude(p_out_dbm) / self.v_sat();
        if y >= 1.0 {
            return None;
        }
        let two_p = 2.0 * self.smoothness;
        let y2p = y.powf(two_p);
        let x = (y2p / (1.0 - y2p)).powf(1.0 / two_p);
        Some(amplitude_to_db(x * self.v_sat() / self.gain_lin()))
    }
}

/// Rapp model: `G·v / (1 + (G·v / v_sat)^(2p))^(1/2p)`.
pub fn pa_amam(v_in: f64, pa: &PaParams) -> f64 {
    let vs = pa.v_sat();
    let x = pa.gain_lin() * v_in.max(0.0) / vs;
    let two_p = 2.0 * pa.smoothness;
    let y = if x <= 1.0 {
        x / (1.0 + x.powf(two_p)).powf(1.0 / two_p)
    } else {
        1.0 / (x.powf(-two_p) + 1.0).powf(1.0 / two_p)
    };
    vs * y
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disturbance {
    /// Link attenuation changes by `delta_db` at `at_s`.
    LinkStep { at_s: f64, delta_db: f64 },
    /// Chain gain drifts at `rate_db_per_s` for `duration_s`, starting at `at_s`.
    TemperatureRamp {
        at_s: f64,
        rate_db_per_s: f64,
        duration_s: f64,
    },
}

impl Disturbance {
    pub fn at_s(&self) -> f64 {
        match *self {
            Disturbance::LinkStep { at_s, .. } | Disturbance::TemperatureRamp { at_s, .. } => at_s,
        }
    }

    /// Total change in output (dB, linear region) once the event has completed.
    pub fn magnitude_db(&self) -> f64 {
        match *self {
            Disturbance::LinkStep { delta_db, .. } => -delta_db,
            Disturbance::TemperatureRamp {
                rate_db_per_s,
                duration_s,
                ..
            } => rate_db_per_s * duration_s,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisturbanceSchedule {
    events: Vec<Disturbance>,
}

impl DisturbanceSchedule {
    pub fn new(events: Vec<Disturbance>) -> Result<Self, ConfigError> {
        for w in events.windows(2) {
            if w[1].at_s() < w[0].at_s() {
                return Err(ConfigError::new("disturbance times must be non-decreasing"));
            }
        }
        for ev in &events {
            let ok = match *ev {
                Disturbance::LinkStep { at_s, delta_db } => at_s.is_finite() && delta_db.is_finite(),
                Disturbance::TemperatureRamp {
                    at_s,
                    rate_db_per_s,
                    duration_s,
                } => {
                    at_s.is_finite()
                        && rate_db_per_s.is_finite()
                        && duration_s.is_finite()
                        && duration_s >= 0.0
                }
            };
            if !ok {
                return Err(ConfigError::new(format!("invalid disturbance {ev:?}")));
            }
        }
        Ok(DisturbanceSchedule { events })
    }

    /// A single link step, the building block of the rejection experiments.
    pub fn link_step(at_s: f64, delta_db: f64) -> Self {
        DisturbanceSchedule {
            events: vec![Disturbance::LinkStep { at_s, delta_db }],
        }
    }

    pub fn events(&self) -> &[Disturbance] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_onset(&self) -> Option<f64> {
        self.events.first().map(Disturbance::at_s)
    }
}

/// Static and dynamic chain parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    pub if_drive_dbm: f64,
    pub stage_gains_db: Vec<f64>,
    pub pa: PaParams,
    pub compression: bool,
    /// Output dB per dB of attenuation in the linear region.
    pub alpha: f64,
    /// First-order output lag (s); zero disables it.
    pub lag_tau_s: f64,
    /// Link attenuation at t = 0 (dB).
    pub link_atten_db: f64,
    pub f_lo_ghz: f64,
    pub f_if_ghz: f64,
}

impl Default for PlantConfig {
    /// Synthetic chain: VGA +12 dB, mixer -6 dB, 20 dB PA saturating at -22 dBm.
    /// The drive puts -30 dBm at 10 dB attenuation with 10 dB of link loss.
    fn default() -> Self {
        PlantConfig {
            if_drive_dbm: -35.945,
            stage_gains_db: vec![12.0, -6.0],
            pa: PaParams::default(),
            compression: true,
            alpha: 1.0,
            lag_tau_s: 0.001,
            link_atten_db: 10.0,
            f_lo_ghz: 9.6,
            f_if_ghz: 5.0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pa.validate()?;
        if !self.if_drive_dbm.is_finite() || self.stage_gains_db.iter().any(|g| !g.is_finite()) {
            return Err(ConfigError::new("drive and stage gains must be finite"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ConfigError::new(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.lag_tau_s.is_finite() && self.lag_tau_s >= 0.0) {
            return Err(ConfigError::new("plant time constant must be >= 0"));
        }
        if !self.link_atten_db.is_finite() {
            return Err(ConfigError::new("link attenuation must be finite"));
        }
        rf_frequencies(self.f_lo_ghz, self.f_if_ghz)?;
        Ok(())
    }

    pub fn total_stage_gain_db(&self) -> f64 {
        self.stage_gains_db.iter().sum()
    }

    /// PA input power for a given attenuation, link loss and thermal offset.
    pub fn pa_input_dbm(&self, atten_db: f64, link_db: f64, thermal_db: f64) -> f64 {
        self.if_drive_dbm + self.total_stage_gain_db() - self.alpha * atten_db - link_db
            + thermal_db
    }

    pub fn pa_output_dbm(&self, p_in_dbm: f64) -> f64 {
        if self.compression {
            self.pa.output_dbm(p_in_dbm)
        } else {
            p_in_dbm + self.pa.gain_db
        }
    }

    /// Settled output power (no lag).
    pub fn static_output_dbm(&self, atten_db: f64, link_db: f64, thermal_db: f64) -> f64 {
        self.pa_output_dbm(self.pa_input_dbm(atten_db, link_db, thermal_db))
    }

    /// Attenuation that places the PA input at `p_in_dbm` with the initial link loss.
    pub fn attenuation_for_pa_input(&self, p_in_dbm: f64) -> f64 {
        (self.if_drive_dbm + self.total_stage_gain_db() - self.link_atten_db - p_in_dbm)
            / self.alpha
    }

    pub fn rf_frequencies(&self) -> (f64, f64) {
        rf_frequencies(self.f_lo_ghz, self.f_if_ghz).unwrap_or((f64::NAN, f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub link_atten_db: f64,
    pub thermal_offset_db: f64,
    pub lag_dbm: f64,
    pub time_s: f64,
    next_event: usize,
}

/// Event times are matched within this tolerance to absorb step-sum rounding.
const TIME_EPS: f64 = 1e-9;

impl PlantState {
    /// Settled state at t = 0 holding attenuation `u0`; events at t <= 0 already applied.
    pub fn settled(config: &PlantConfig, schedule: &DisturbanceSchedule, u0: f64) -> Self {
        let mut s = PlantState {
            link_atten_db: config.link_atten_db,
            thermal_offset_db: 0.0,
            lag_dbm: 0.0,
            time_s: 0.0,
            next_event: 0,
        };
        s.apply_steps(schedule, 0.0);
        s.lag_dbm = config.static_output_dbm(u0, s.link_atten_db, s.thermal_offset_db);
        s
    }

    fn apply_steps(&mut self, schedule: &DisturbanceSchedule, t: f64) {
        while let Some(ev) = schedule.events.get(self.next_event) {
            if ev.at_s() > t + TIME_EPS {
                break;
            }
            if let Disturbance::LinkStep { delta_db, .. } = *ev {
                self.link_atten_db += delta_db;
            }
            self.next_event += 1;
        }
    }
}

/// Advance the plant by `dt` holding `u_applied`, returning the lagged output (dBm).
pub fn plant_step(
    state: &mut PlantState,
    config: &PlantConfig,
    schedule: &DisturbanceSchedule,
    u_applied: f64,
    dt: f64,
) -> f64 {
    let t0 = state.time_s;
    let t1 = t0 + dt;
    for ev in schedule.events() {
        if let Disturbance::TemperatureRamp {
            at_s,
            rate_db_per_s,
            duration_s,
        } = *ev
        {
            let overlap = (t1.min(at_s + duration_s) - t0.max(at_s)).max(0.0);
            state.thermal_offset_db += rate_db_per_s * overlap;
        }
    }
    state.apply_steps(schedule, t1);
    state.time_s = t1;

    let target = config.static_output_dbm(u_applied, state.link_atten_db, state.thermal_offset_db);
    if config.lag_tau_s > 0.0 {
        let a = 1.0 - (-dt / config.lag_tau_s).exp();
        state.lag_dbm += a * (target - state.lag_dbm);
    } else {
        state.lag_dbm = target;
    }
    state.lag_dbm
}

/// A plant instance: configuration, disturbance schedule and evolving state.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    config: PlantConfig,
    schedule: DisturbanceSchedule,
    state: PlantState,
}

impl Plant {
    pub fn new(
        config: PlantConfig,
        schedule: DisturbanceSchedule,
        u0: f64,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        let state = PlantState::settled(&config, &schedule, u0);
        Ok(Plant {
            config,
            schedule,
            state,
        })
    }

    pub fn output_dbm(&self) -> f64 {
        self.state.lag_dbm
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn step(&mut self, u_applied: f64, dt: f64) -> f64 {
        plant_step(&mut self.state, &self.config, &self.schedule, u_applied, dt)
    }
}

/// Small-signal slope of output power against attenuation at an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedGain {
    pub alpha_effective: f64,
    /// Set when the operating point is so deep in compression that the slope is < 0.1·α.
    pub saturated: bool,
}

/// Central difference (δ = 0.01 dB) of output power w.r.t. attenuation at `atten_db`.
pub fn linearize(config: &PlantConfig, atten_db: f64) -> LinearizedGain {
    const DELTA: f64 = 0.01;
    let p = |u: f64| config.static_output_dbm(u, config.link_atten_db, 0.0);
    let alpha_effective = -(p(atten_db + DELTA) - p(atten_db - DELTA)) / (2.0 * DELTA);
    let saturated = alpha_effective < 0.1 * config.alpha;
    if saturated {
        log::warn!(
            "operating point at {atten_db} dB attenuation is in saturation (slope {alpha_effective:.4})"
        );
    }
    LinearizedGain {
        alpha_effective,
        saturated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> PlantConfig {
        PlantConfig {
            compression: false,
            lag_tau_s: 0.0,
            ..PlantConfig::default()
        }
    }

    #[test]
    fn frequency_plan() {
        let (up, lo) = rf_frequencies(9.6, 5.0).unwrap();
        assert!((up - 24.2).abs() < 1e-12 && (lo - 14.2).abs() < 1e-12);
        assert_eq!(rf_frequencies(7.0, 0.0).unwrap(), (14.0, 14.0));
        assert_eq!(rf_frequencies(10.0, 4.0).unwrap(), (24.0, 16.0));
        assert!(rf_frequencies(0.0, 4.0).is_err());
        assert!(rf_frequencies(9.6, -1.0).is_err());
    }

    #[test]
    fn rapp_limits() {
        let pa = PaParams::default();
        let v = 1e-8;
        assert!((pa_amam(v, &pa) / v - pa.gain_lin()).abs() / pa.gain_lin() < 1e-9);
        assert!((pa_amam(1e6, &pa) - pa.v_sat()).abs() / pa.v_sat() < 1e-9);
        assert!(pa_amam(1e300, &pa) <= pa.v_sat());
        assert_eq!(pa_amam(0.0, &pa), 0.0);
    }

    #[test]
    fn one_db_compression_by_bisection() {
        let pa = PaParams::default();
        let gain_drop = |v: f64| 20.0 * (pa.gain_lin() * v / pa_amam(v, &pa)).log10();
        let (mut lo, mut hi) = (1e-6, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gain_drop(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let closed = pa.compression_input(1.0);
        assert!((lo - closed).abs() / closed < 1e-9, "{lo} vs {closed}");
    }

    #[test]
    fn inverse_output() {
        let pa = PaParams::default();
        for p_out in [-60.0, -30.0, -23.0] {
            let p_in = pa.input_for_output_dbm(p_out).unwrap();
            assert!((pa.output_dbm(p_in) - p_out).abs() < 1e-9);
        }
        assert!(pa.input_for_output_dbm(-21.0).is_none());
    }

    #[test]
    fn default_chain_sits_at_reference() {
        let cfg = PlantConfig::default();
        let p = cfg.static_output_dbm(10.0, 10.0, 0.0);
        assert!((p + 30.0).abs() < 0.005, "{p}");
        let p = cfg.static_output_dbm(15.0, 5.0, 0.0);
        assert!((p + 30.0).abs() < 0.005, "{p}");
    }

    #[test]
    fn attenuation_is_db_for_db_in_linear_region() {
        let cfg = linear();
        let sched = DisturbanceSchedule::default();
        let mut st = PlantState::settled(&cfg, &sched, 10.0);
        let a = plant_step(&mut st, &cfg, &sched, 10.0, 0.01);
        let b = plant_step(&mut st, &cfg, &sched, 11.0, 0.01);
        assert!((a - b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn link_step_shows_on_the_same_sample() {
        let cfg = linear();
        let sched = DisturbanceSchedule::link_step(1.0, -5.0);
        let mut st = PlantState::settled(&cfg, &sched, 10.0);
        let mut out = Vec::new();
        for _ in 0..200 {
            out.push(plant_step(&mut st, &cfg, &sched, 10.0, 0.01));
        }
        // sample 99 ends at t = 1.0
        assert!((out[99] - out[98] - 5.0).abs() < 1e-9);
        assert!((out[150] - out[98] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn temperature_ramp_accumulates() {
        let cfg = linear();
        let sched = DisturbanceSchedule::new(vec![Disturbance::TemperatureRamp {
            at_s: 0.5,
            rate_db_per_s: -2.0,
            duration_s: 1.0,
        }])
        .unwrap();
        let mut st = PlantState::settled(&cfg, &sched, 10.0);
        let p0 = cfg.static_output_dbm(10.0, 10.0, 0.0);
        let mut last = p0;
        for _ in 0..300 {
            last = plant_step(&mut st, &cfg, &sched, 10.0, 0.01);
        }
        assert!((st.thermal_offset_db + 2.0).abs() < 1e-9);
        assert!((last - p0 + 2.0).abs() < 1e-9);
    }

    #[test]
    fn saturation_pins_output() {
        let cfg = PlantConfig {
            if_drive_dbm: 20.0,
            lag_tau_s: 0.0,
            ..PlantConfig::default()
        };
        let p = cfg.static_output_dbm(0.0, 0.0, 0.0);
        assert!(p <= cfg.pa.psat_dbm && p > cfg.pa.psat_dbm - 0.01);
    }

    #[test]
    fn linearization() {
        let cfg = PlantConfig::default();
        // deep linear region
        let deep = cfg.attenuation_for_pa_input(-90.0);
        assert!((linearize(&cfg, deep).alpha_effective - 1.0).abs() < 1e-3);
        // deep saturation
        let sat = cfg.attenuation_for_pa_input(-20.0);
        let g = linearize(&cfg, sat);
        assert!(g.alpha_effective < 0.1 && g.saturated);
        // 1 dB compression point
        let p1 = amplitude_to_db(cfg.pa.compression_input(1.0));
        let a = linearize(&cfg, cfg.attenuation_for_pa_input(p1)).alpha_effective;
        assert!(a > 0.5 && a < 1.0, "{a}");
    }

    #[test]
    fn schedule_must_be_ordered() {
        let ev = |t| Disturbance::LinkStep { at_s: t, delta_db: 1.0 };
        assert!(DisturbanceSchedule::new(vec![ev(2.0), ev(1.0)]).is_err());
        assert!(DisturbanceSchedule::new(vec![ev(1.0), ev(1.0)]).is_ok());
        assert!(DisturbanceSchedule::new(vec![Disturbance::LinkStep {
            at_s: 1.0,
            delta_db: f64::NAN
        }])
        .is_err());
    }
}
