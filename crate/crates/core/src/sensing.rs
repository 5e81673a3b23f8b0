//! RMS power detector, ADC and the calibration that inverts them.
//!
//! The detector is log-linear, `V = S·(P - P0)`. The control loop reads it
//! through the ADC and maps the code back to dBm with a calibrated (S, P0)
//! pair fitted by ordinary least squares over a power sweep.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CalibrationError, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// V/dB.
    pub slope_v_per_db: f64,
    /// Power at which the response crosses 0 V (dBm).
    pub intercept_dbm: f64,
    pub range_min_dbm: f64,
    pub range_max_dbm: f64,
    pub clamp_min_v: f64,
    pub clamp_max_v: f64,
    /// Additive Gaussian voltage noise (V); zero for a noiseless loop.
    pub noise_v: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            slope_v_per_db: 0.0275,
            intercept_dbm: -45.0,
            range_min_dbm: -40.0,
            range_max_dbm: 0.0,
            clamp_min_v: 0.0,
            clamp_max_v: 3.3,
            noise_v: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.slope_v_per_db.is_finite() && self.slope_v_per_db != 0.0) {
            return Err(ConfigError::new("detector slope must be finite and non-zero"));
        }
        if !self.intercept_dbm.is_finite() {
            return Err(ConfigError::new("detector intercept must be finite"));
        }
        if !(self.range_min_dbm < self.range_max_dbm) {
            return Err(ConfigError::new("detector range min must be below max"));
        }
        if !(self.clamp_min_v < self.clamp_max_v) {
            return Err(ConfigError::new("detector clamp min must be below max"));
        }
        if !(self.noise_v.is_finite() && self.noise_v >= 0.0) {
            return Err(ConfigError::new("detector noise must be >= 0"));
        }
        Ok(())
    }

    pub fn in_range(&self, p_dbm: f64) -> bool {
        (self.range_min_dbm..=self.range_max_dbm).contains(&p_dbm)
    }
}

/// Noiseless detector output: the log-linear law evaluated on the in-range power,
/// clamped to the output voltage limits.
pub fn detector_voltage(p_rf_dbm: f64, det: &DetectorModel) -> f64 {
    let p = p_rf_dbm.clamp(det.range_min_dbm, det.range_max_dbm);
    (det.slope_v_per_db * (p - det.intercept_dbm)).clamp(det.clamp_min_v, det.clamp_max_v)
}

/// Detector output with its Gaussian noise, as seen during characterization.
pub fn detector_voltage_noisy<R: Rng + ?Sized>(
    p_rf_dbm: f64,
    det: &DetectorModel,
    rng: &mut R,
) -> f64 {
    let v = detector_voltage(p_rf_dbm, det);
    if det.noise_v > 0.0 {
        let n = Normal::new(0.0, det.noise_v).expect("validated noise");
        (v + n.sample(rng)).clamp(det.clamp_min_v, det.clamp_max_v)
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcModel {
    pub bits: u32,
    pub full_scale_v: f64,
    /// Gaussian reference noise in codes.
    pub noise_codes: f64,
}

impl Default for AdcModel {
    fn default() -> Self {
        AdcModel {
            bits: 12,
            full_scale_v: 3.3,
            noise_codes: 0.0,
        }
    }
}

/// One ADC conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcReading {
    pub code: u32,
    pub saturated: bool,
}

impl AdcModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(8..=16).contains(&self.bits) {
            return Err(ConfigError::new(format!(
                "ADC resolution must be 8..=16 bits, got {}",
                self.bits
            )));
        }
        if !(self.full_scale_v.is_finite() && self.full_scale_v > 0.0) {
            return Err(ConfigError::new("ADC full scale must be positive"));
        }
        if !(self.noise_codes.is_finite() && self.noise_codes >= 0.0) {
            return Err(ConfigError::new("ADC noise must be >= 0"));
        }
        Ok(())
    }

    pub fn lsb_v(&self) -> f64 {
        self.full_scale_v / f64::from(1u32 << self.bits)
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Round to the nearest code; out-of-range inputs saturate and are flagged.
    pub fn convert(&self, v: f64, noise: f64) -> AdcReading {
        let x = (v / self.lsb_v() + noise).round();
        if x < 0.0 {
            AdcReading {
                code: 0,
                saturated: true,
            }
        } else if x > f64::from(self.max_code()) {
            AdcReading {
                code: self.max_code(),
                saturated: true,
            }
        } else {
            AdcReading {
                code: x as u32,
                saturated: false,
            }
        }
    }

    pub fn code_voltage(&self, code: u32) -> f64 {
        f64::from(code) * self.lsb_v()
    }
}

/// Fitted detector law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub slope_v_per_db: f64,
    pub intercept_dbm: f64,
    pub r_squared: f64,
}

impl CalibrationResult {
    /// Calibration that matches a detector exactly.
    pub fn exact(det: &DetectorModel) -> Self {
        CalibrationResult {
            slope_v_per_db: det.slope_v_per_db,
            intercept_dbm: det.intercept_dbm,
            r_squared: 1.0,
        }
    }

    pub fn power_dbm(&self, v: f64) -> f64 {
        v / self.slope_v_per_db + self.intercept_dbm
    }
}

/// OLS fit of voltage on power: `S` is the slope, `P0 = -intercept / S`.
pub fn calibrate(sweep: &[(f64, f64)]) -> Result<CalibrationResult, CalibrationError> {
    if sweep.len() < 3 {
        return Err(CalibrationError::TooFewPoints(sweep.len()));
    }
    if sweep.iter().any(|(p, v)| !p.is_finite() || !v.is_finite()) {
        return Err(CalibrationError::NonFinite);
    }
    let n = sweep.len() as f64;
    let mean_p = sweep.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_v = sweep.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(p, v) in sweep {
        let dp = p - mean_p;
        let dv = v - mean_v;
        sxx += dp * dp;
        sxy += dp * dv;
        syy += dv * dv;
    }
    if sxx <= f64::EPSILON * n * mean_p.abs().max(1.0) {
        return Err(CalibrationError::NoPowerVariance);
    }
    let slope = sxy / sxx;
    if slope == 0.0 {
        return Err(CalibrationError::ZeroSlope);
    }
    let intercept = mean_v - slope * mean_p;
    let ss_res: f64 = sweep
        .iter()
        .map(|&(p, v)| {
            let r = v - (intercept + slope * p);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(CalibrationResult {
        slope_v_per_db: slope,
        intercept_dbm: -intercept / slope,
        r_squared,
    })
}

/// Evenly spaced synthetic characterization sweep from `start` to `stop` dBm.
pub fn generate_sweep(
    det: &DetectorModel,
    points: usize,
    start_dbm: f64,
    stop_dbm: f64,
    seed: u64,
) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = if points > 1 {
        (stop_dbm - start_dbm) / (points - 1) as f64
    } else {
        0.0
    };
    (0..points)
        .map(|i| {
            let p = start_dbm + step * i as f64;
            (p, detector_voltage_noisy(p, det, &mut rng))
        })
        .collect()
}

/// Power estimate produced by the sensing chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub p_est_dbm: f64,
    /// Input outside the detector range or ADC code clipped.
    pub saturated: bool,
}

/// Noiseless detector -> optional ADC -> calibrated inverse map.
pub fn measure_power(
    p_rf_dbm: f64,
    det: &DetectorModel,
    adc: Option<&AdcModel>,
    cal: &CalibrationResult,
) -> Measurement {
    let v = detector_voltage(p_rf_dbm, det);
    finish_measurement(p_rf_dbm, v, det, adc, cal, 0.0)
}

fn finish_measurement(
    p_rf_dbm: f64,
    v: f64,
    det: &DetectorModel,
    adc: Option<&AdcModel>,
    cal: &CalibrationResult,
    code_noise: f64,
) -> Measurement {
    let mut saturated = !det.in_range(p_rf_dbm);
    let v_read = match adc {
        Some(adc) => {
            let reading = adc.convert(v, code_noise);
            saturated |= reading.saturated;
            adc.code_voltage(reading.code)
        }
        None => v,
    };
    Measurement {
        p_est_dbm: cal.power_dbm(v_read),
        saturated,
    }
}

/// Detector, ADC and calibration bundled for the control loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub detector: DetectorModel,
    pub adc: Option<AdcModel>,
    pub calibration: CalibrationResult,
    rng: ChaCha8Rng,
}

impl Sensor {
    pub fn new(
        detector: DetectorModel,
        adc: Option<AdcModel>,
        calibration: CalibrationResult,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        detector.validate()?;
        if let Some(a) = &adc {
            a.validate()?;
        }
        Ok(Sensor {
            detector,
            adc,
            calibration,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Sensor whose calibration matches the detector exactly.
    pub fn matched(detector: DetectorModel, adc: Option<AdcModel>, seed: u64) -> Result<Self, ConfigError> {
        Self::new(detector, adc, CalibrationResult::exact(&detector), seed)
    }

    /// Worst-case power error from ADC rounding (half an LSB through the slope).
    pub fn quantization_error_db(&self) -> f64 {
        self.adc
            .map_or(0.0, |a| a.lsb_v() / (2.0 * self.detector.slope_v_per_db.abs()))
    }

    pub fn measure(&mut self, p_rf_dbm: f64) -> Measurement {
        let v = detector_voltage_noisy(p_rf_dbm, &self.detector, &mut self.rng);
        let code_noise = match &self.adc {
            Some(a) if a.noise_codes > 0.0 => Normal::new(0.0, a.noise_codes)
                .expect("validated noise")
                .sample(&mut self.rng),
            _ => 0.0,
        };
        finish_measurement(
            p_rf_dbm,
            v,
            &self.detector,
            self.adc.as_ref(),
            &self.calibration,
            code_noise,
        )
    }
}
