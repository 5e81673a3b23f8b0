//! EVM of square-QAM symbols through the PA's AM/AM curve.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::EvmError;
use crate::plant::{amplitude_to_db, db_to_amplitude, pa_amam, PlantConfig};

/// Square QAM grid scaled to unit mean power over the alphabet.
pub fn qam_grid(order: usize) -> Result<Vec<Complex64>, EvmError> {
    let side = match order {
        16 => 4,
        64 => 8,
        256 => 16,
        other => return Err(EvmError::UnsupportedOrder(other)),
    };
    let levels: Vec<f64> = (0..side).map(|i| (2 * i) as f64 - (side - 1) as f64).collect();
    // mean |s|^2 of an M-QAM grid with odd-integer levels is 2(M-1)/3
    let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
    Ok(levels
        .iter()
        .flat_map(|&i| levels.iter().map(move |&q| Complex64::new(i, q) / norm))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationBatch {
    pub order: usize,
    pub symbols: Vec<Complex64>,
}

impl ConstellationBatch {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.symbols)
    }
}

fn mean_power(s: &[Complex64]) -> f64 {
    s.iter().map(|z| z.norm_sqr()).sum::<f64>() / s.len() as f64
}

/// `n` uniform draws from the grid, renormalized to unit average power.
pub fn generate_qam(order: usize, n: usize, seed: u64) -> Result<ConstellationBatch, EvmError> {
    let grid = qam_grid(order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut symbols: Vec<Complex64> = (0..n.max(1))
        .map(|_| grid[rng.random_range(0..grid.len())])
        .collect();
    let scale = mean_power(&symbols).sqrt();
    for s in &mut symbols {
        *s /= scale;
    }
    Ok(ConstellationBatch { order, symbols })
}

/// RMS EVM (%) after removing the least-squares complex gain between the batches.
pub fn compute_evm_rms(reference: &[Complex64], measured: &[Complex64]) -> Result<f64, EvmError> {
    if reference.len() != measured.len() {
        return Err(EvmError::LengthMismatch {
            reference: reference.len(),
            measured: measured.len(),
        });
    }
    let ref_power: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    if reference.is_empty() || ref_power == 0.0 {
        return Err(EvmError::ZeroReference);
    }
    let cross: Complex64 = reference
        .iter()
        .zip(measured)
        .map(|(r, m)| r.conj() * m)
        .sum();
    let gain = cross / ref_power;
    if gain.norm() == 0.0 {
        return Err(EvmError::ZeroGain);
    }
    let err: f64 = reference
        .iter()
        .zip(measured)
        .map(|(r, m)| (m / gain - r).norm_sqr())
        .sum();
    Ok(100.0 * (err / ref_power).sqrt())
}

/// Pass a unit-power batch through the PA at a mean input power.
/// Returns the output symbols and their mean power (dBm).
pub fn amplify(
    batch: &ConstellationBatch,
    config: &PlantConfig,
    p_in_dbm: f64,
) -> (Vec<Complex64>, f64) {
    let scale = db_to_amplitude(p_in_dbm);
    let out: Vec<Complex64> = if config.compression {
        batch
            .symbols
            .iter()
            .map(|s| {
                let a = s.norm() * scale;
                if a == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    s * (pa_amam(a, &config.pa) / s.norm())
                }
            })
            .collect()
    } else {
        let g = config.pa.gain_lin() * scale;
        batch.symbols.iter().map(|s| s * g).collect()
    };
    let p = amplitude_to_db(mean_power(&out).sqrt());
    (out, p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvmPoint {
    pub drive_dbm: f64,
    pub p_out_dbm: f64,
    pub evm_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvmCurve {
    pub atten_db: f64,
    pub points: Vec<EvmPoint>,
}

impl EvmCurve {
    /// Output power where EVM first rises through `threshold_pct`, linearly interpolated.
    pub fn knee_dbm(&self, threshold_pct: f64) -> Option<f64> {
        let first = self.points.first()?;
        if first.evm_pct > threshold_pct {
            return Some(first.p_out_dbm);
        }
        self.points.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            (a.evm_pct <= threshold_pct && b.evm_pct > threshold_pct).then(|| {
                let f = (threshold_pct - a.evm_pct) / (b.evm_pct - a.evm_pct);
                a.p_out_dbm + f * (b.p_out_dbm - a.p_out_dbm)
            })
        })
    }

    /// EVM interpolated at an output power inside the swept range.
    pub fn evm_at(&self, p_out_dbm: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            (a.p_out_dbm <= p_out_dbm && p_out_dbm <= b.p_out_dbm).then(|| {
                let f = (p_out_dbm - a.p_out_dbm) / (b.p_out_dbm - a.p_out_dbm);
                a.evm_pct + f * (b.evm_pct - a.evm_pct)
            })
        })
    }
}

/// Drive-level sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EvmSweep {
    pub order: usize,
    pub symbols: usize,
    pub attenuations_db: Vec<f64>,
    pub drive_start_dbm: f64,
    pub drive_stop_dbm: f64,
    pub drive_step_db: f64,
    /// Output power the EVM knee is expected at (dBm).
    pub knee_target_dbm: f64,
    pub threshold_pct: f64,
}

impl Default for EvmSweep {
    fn default() -> Self {
        EvmSweep {
            order: 64,
            symbols: 4096,
            attenuations_db: vec![0.0, 10.0, 20.0],
            drive_start_dbm: -70.0,
            drive_stop_dbm: 0.0,
            drive_step_db: 0.5,
            knee_target_dbm: -30.0,
            threshold_pct: 1.5,
        }
    }
}

impl EvmSweep {
    pub fn drives(&self) -> Vec<f64> {
        if !(self.drive_step_db > 0.0) || self.drive_stop_dbm < self.drive_start_dbm {
            return vec![self.drive_start_dbm];
        }
        let n = ((self.drive_stop_dbm - self.drive_start_dbm) / self.drive_step_db + 1e-9).floor()
            as usize;
        (0..=n)
            .map(|i| self.drive_start_dbm + i as f64 * self.drive_step_db)
            .collect()
    }
}

/// One curve per attenuation: the IF drive is swept and the batch is pushed
/// through the PA at the resulting operating point.
pub fn evm_vs_power_sweep(
    config: &PlantConfig,
    sweep: &EvmSweep,
    batch: &ConstellationBatch,
) -> Result<Vec<EvmCurve>, EvmError> {
    let drives = sweep.drives();
    sweep
        .attenuations_db
        .iter()
        .map(|&atten| {
            let points = drives
                .iter()
                .map(|&drive| {
                    let cfg = PlantConfig {
                        if_drive_dbm: drive,
                        ..config.clone()
                    };
                    let p_in = cfg.pa_input_dbm(atten, cfg.link_atten_db, 0.0);
                    let (out, p_out) = amplify(batch, &cfg, p_in);
                    let evm_pct = compute_evm_rms(&batch.symbols, &out)?;
                    Ok(EvmPoint {
                        drive_dbm: drive,
                        p_out_dbm: p_out,
                        evm_pct,
                    })
                })
                .collect::<Result<Vec<_>, EvmError>>()?;
            Ok(EvmCurve {
                atten_db: atten,
                points,
            })
        })
        .collect()
}
