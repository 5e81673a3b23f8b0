use crate::error::MetricsError;
use crate::scenario::Scenario;

use super::SimTrace;

/// Shortest series the limit-cycle detector accepts.
pub const LIMIT_CYCLE_MIN_SAMPLES: usize = 50;

/// Smallest autocorrelation peak accepted as periodic.
const ACF_PEAK: f64 = 0.5;

/// How a trace is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSpec {
    /// Disturbance onset (s); settling and overshoot are measured from here.
    pub onset_s: f64,
    /// Half-width of the settling band (dB).
    pub band_db: f64,
    /// Quantization ripple expected at rest (dB); oscillations above 4x this count as limit cycles.
    pub ripple_db: f64,
}

impl MetricsSpec {
    /// 2% band of the total disturbance magnitude, ripple of half an attenuator step.
    pub fn for_scenario(sc: &Scenario) -> Self {
        let magnitude: f64 = sc
            .disturbances
            .events()
            .iter()
            .map(|d| d.magnitude_db())
            .sum::<f64>()
            .abs();
        let ripple_db = 0.5 * sc.controller.actuator.step_db * sc.plant.alpha.abs();
        MetricsSpec {
            onset_s: sc.disturbances.first_onset().unwrap_or(0.0).max(0.0),
            band_db: if magnitude > 0.0 { 0.02 * magnitude } else { ripple_db },
            ripple_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCycle {
    pub detected: bool,
    /// Half the detrended peak-to-peak swing (dB).
    pub amplitude_db: f64,
    pub peak_to_peak_db: f64,
    /// Lag of the first autocorrelation peak, when there is one.
    pub period_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientMetrics {
    /// Time from onset until the output stays inside the band; `None` if it never does.
    pub settling_s: Option<f64>,
    /// Largest excursion past the final value on the recovery side (dB).
    pub overshoot_db: f64,
    /// `P_ref` minus the mean of the final 10% of the trace (dB).
    pub steady_state_error_db: f64,
    pub final_value_dbm: f64,
    /// `None` when the trace is too short to judge.
    pub limit_cycle: Option<LimitCycle>,
}

/// Score the RF output power column of a trace.
pub fn compute_metrics(trace: &SimTrace, spec: &MetricsSpec) -> Result<TransientMetrics, MetricsError> {
    compute_series_metrics(&trace.p_rf(), trace.ts_s, trace.p_ref_dbm, spec)
}

/// Score an arbitrary uniformly sampled series against a reference.
pub fn compute_series_metrics(
    y: &[f64],
    ts: f64,
    reference: f64,
    spec: &MetricsSpec,
) -> Result<TransientMetrics, MetricsError> {
    const NEEDED: usize = 10;
    if y.len() < NEEDED {
        return Err(MetricsError::TooShort {
            len: y.len(),
            needed: NEEDED,
        });
    }
    let window = y.len() / 10;
    let tail = &y[y.len() - window..];
    let final_value = tail.iter().sum::<f64>() / window as f64;
    let onset = ((spec.onset_s / ts - 1e-9).ceil().max(0.0) as usize).min(y.len() - 1);

    let settling_s = settling_time(y, ts, onset, spec.band_db, final_value);

    let after = &y[onset..];
    let peak = after
        .iter()
        .copied()
        .max_by(|a, b| (a - final_value).abs().total_cmp(&(b - final_value).abs()))
        .unwrap_or(final_value);
    let dir = (peak - final_value).signum();
    let overshoot_db = if peak == final_value {
        0.0
    } else {
        after
            .iter()
            .map(|v| -dir * (v - final_value))
            .fold(0.0, f64::max)
    };

    let limit_cycle = if y.len() >= LIMIT_CYCLE_MIN_SAMPLES {
        Some(detect_limit_cycle(y, ts, spec.ripple_db)?)
    } else {
        None
    };

    Ok(TransientMetrics {
        settling_s,
        overshoot_db,
        steady_state_error_db: reference - final_value,
        final_value_dbm: final_value,
        limit_cycle,
    })
}

/// Time from sample `onset` until `y` stays within `band` of `final_value`.
///
/// `None` when the series is still leaving the band inside its final 10%.
pub fn settling_time(y: &[f64], ts: f64, onset: usize, band: f64, final_value: f64) -> Option<f64> {
    let window = (y.len() / 10).max(1);
    let last_out = (onset..y.len())
        .rev()
        .find(|&i| (y[i] - final_value).abs() > band);
    match last_out {
        None => Some(0.0),
        Some(i) if i >= y.len() - window => None,
        Some(i) => Some((i + 1 - onset) as f64 * ts),
    }
}

/// Look for a sustained oscillation in the final half of `y`.
///
/// The window is linearly detrended; it is a limit cycle when the peak-to-peak
/// swing exceeds four times `ripple_db` and the autocorrelation has a local
/// maximum of at least 0.5 at some lag of two samples or more.
pub fn detect_limit_cycle(y: &[f64], ts: f64, ripple_db: f64) -> Result<LimitCycle, MetricsError> {
    if y.len() < LIMIT_CYCLE_MIN_SAMPLES {
        return Err(MetricsError::TooShort {
            len: y.len(),
            needed: LIMIT_CYCLE_MIN_SAMPLES,
        });
    }
    let x = detrend(&y[y.len() / 2..]);
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let ptp = hi - lo;
    let period_s = acf_peak_lag(&x).map(|lag| lag as f64 * ts);
    Ok(LimitCycle {
        detected: ptp > 4.0 * ripple_db && period_s.is_some(),
        amplitude_db: ptp / 2.0,
        peak_to_peak_db: ptp,
        period_s,
    })
}

fn detrend(w: &[f64]) -> Vec<f64> {
    let n = w.len() as f64;
    let mean_t = (n - 1.0) / 2.0;
    let mean_y = w.iter().sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (i, &v) in w.iter().enumerate() {
        let dt = i as f64 - mean_t;
        sty += dt * (v - mean_y);
        stt += dt * dt;
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    w.iter()
        .enumerate()
        .map(|(i, &v)| v - mean_y - slope * (i as f64 - mean_t))
        .collect()
}

fn acf_peak_lag(x: &[f64]) -> Option<usize> {
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy <= f64::EPSILON * x.len() as f64 {
        return None;
    }
    let max_lag = x.len() / 2;
    let r: Vec<f64> = (0..=max_lag + 1)
        .map(|l| x.iter().zip(&x[l.min(x.len())..]).map(|(a, b)| a * b).sum::<f64>() / energy)
        .collect();
    (2..=max_lag).find(|&l| r[l] >= ACF_PEAK && r[l] > r[l - 1] && r[l] >= r[l + 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(onset_s: f64, band_db: f64) -> MetricsSpec {
        MetricsSpec {
            onset_s,
            band_db,
            ripple_db: 0.25,
        }
    }

    #[test]
    fn flat_trace() {
        let y = vec![-30.0; 500];
        let m = compute_series_metrics(&y, 0.01, -30.0, &spec(0.0, 0.1)).unwrap();
        assert_eq!(m.settling_s, Some(0.0));
        assert_eq!(m.overshoot_db, 0.0);
        assert_eq!(m.steady_state_error_db, 0.0);
        assert!(!m.limit_cycle.unwrap().detected);
    }

    #[test]
    fn exponential_settles_near_four_tau() {
        let (tau, ts) = (0.1, 0.001);
        let y: Vec<f64> = (0..5000).map(|k| (-(k as f64) * ts / tau).exp()).collect();
        let t = settling_time(&y, ts, 0, 0.02, 0.0).unwrap();
        let expect = -(0.02f64).ln() * tau;
        assert!((t - expect).abs() <= 2.0 * ts, "{t} vs {expect}");
    }

    #[test]
    fn overshoot_on_recovery_side() {
        // jumps up by 5, then swings 1 dB below before settling
        let mut y = vec![0.0; 100];
        y.extend([5.0, 3.0, 1.0, -1.0, -0.5]);
        y.extend(vec![0.0; 200]);
        let m = compute_series_metrics(&y, 0.01, 0.0, &spec(1.0, 0.1)).unwrap();
        assert!((m.overshoot_db - 1.0).abs() < 1e-12);
        assert!((m.settling_s.unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_is_a_limit_cycle() {
        let ts = 0.01;
        let y: Vec<f64> = (0..800)
            .map(|k| -30.0 + (2.0 * std::f64::consts::PI * k as f64 * ts / 0.2 + 0.3).sin())
            .collect();
        let m = compute_series_metrics(&y, ts, -30.0, &spec(0.0, 0.1)).unwrap();
        assert_eq!(m.settling_s, None);
        let lc = m.limit_cycle.unwrap();
        assert!(lc.detected);
        assert!((lc.amplitude_db - 1.0).abs() < 0.05);
        assert!((lc.period_s.unwrap() - 0.2).abs() <= ts + 1e-12);
    }

    #[test]
    fn small_ripple_is_not_a_limit_cycle() {
        let y: Vec<f64> = (0..400).map(|k| if k % 2 == 0 { 0.2 } else { -0.2 }).collect();
        assert!(!detect_limit_cycle(&y, 0.01, 0.25).unwrap().detected);
    }

    #[test]
    fn ramp_is_not_a_limit_cycle() {
        let y: Vec<f64> = (0..400).map(|k| k as f64 * 0.1).collect();
        assert!(!detect_limit_cycle(&y, 0.01, 0.25).unwrap().detected);
    }

    #[test]
    fn too_short() {
        assert!(compute_series_metrics(&[0.0; 5], 0.01, 0.0, &spec(0.0, 0.1)).is_err());
        assert!(detect_limit_cycle(&[0.0; 49], 0.01, 0.25).is_err());
        let m = compute_series_metrics(&[0.0; 20], 0.01, 0.0, &spec(0.0, 0.1)).unwrap();
        assert!(m.limit_cycle.is_none());
    }
}
