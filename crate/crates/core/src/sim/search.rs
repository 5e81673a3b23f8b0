use rayon::prelude::*;

use crate::control::{ControllerKind, ControllerSpec};
use crate::scenario::Scenario;

use super::{run_and_score, HarnessError, LimitCycle, TransientMetrics};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub label: String,
    pub controller: ControllerSpec,
    pub metrics: TransientMetrics,
    /// Settling time of the first entry divided by this one's.
    pub speedup_vs_first: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub entries: Vec<ComparisonEntry>,
}

/// Run the same scenario under each controller; ratios are relative to the first.
pub fn compare_controllers(
    base: &Scenario,
    controllers: &[ControllerSpec],
) -> Result<ComparisonReport, HarnessError> {
    let metrics = controllers
        .par_iter()
        .map(|c| {
            let sc = Scenario {
                controller: c.clone(),
                ..base.clone()
            };
            run_and_score(&sc).map(|(_, m)| m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let first = metrics.first().and_then(|m| m.settling_s);
    let entries = controllers
        .iter()
        .zip(metrics)
        .map(|(c, m)| ComparisonEntry {
            label: c.label(),
            controller: c.clone(),
            speedup_vs_first: match (first, m.settling_s) {
                (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                _ => None,
            },
            metrics: m,
        })
        .collect();
    Ok(ComparisonReport { entries })
}

/// Evenly spaced values `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start {
            return vec![self.start];
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGrid {
    pub kp: GridAxis,
    pub kd: GridAxis,
}

impl Default for PidGrid {
    /// Kp 0..5 in 0.25 steps, Kd 0..1 in 0.05 steps.
    fn default() -> Self {
        PidGrid {
            kp: GridAxis {
                start: 0.0,
                stop: 5.0,
                step: 0.25,
            },
            kd: GridAxis {
                start: 0.0,
                stop: 1.0,
                step: 0.05,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPoint {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub limit_cycle: LimitCycle,
    pub settled: bool,
}

impl GainPoint {
    pub fn oscillates(&self) -> bool {
        self.limit_cycle.detected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PidSearchReport {
    pub points: Vec<GainPoint>,
    /// A quiet gain pair and a neighbour less than one unit away in both gains
    /// that limit-cycles. The closest such pair wins; ties go to the larger
    /// stable Kp so a plain integral loop is not picked when a true PID pair exists.
    pub demonstration: Option<(GainPoint, GainPoint)>,
}

fn classify(base: &Scenario, spec: ControllerSpec) -> Result<GainPoint, HarnessError> {
    let sc = Scenario {
        controller: spec.clone(),
        ..base.clone()
    };
    let (_, m) = run_and_score(&sc)?;
    let limit_cycle = m.limit_cycle.ok_or(crate::error::MetricsError::TooShort {
        len: sc.run.samples() + 1,
        needed: super::LIMIT_CYCLE_MIN_SAMPLES,
    })?;
    Ok(GainPoint {
        kp: spec.kp,
        ki: spec.ki,
        kd: spec.kd,
        limit_cycle,
        settled: m.settling_s.is_some(),
    })
}

/// Grid search over PID gains (Ki from the base scenario) for the edge of
/// quantization-driven limit cycling.
pub fn find_unstable_pid(base: &Scenario, grid: &PidGrid) -> Result<PidSearchReport, HarnessError> {
    let pairs: Vec<(f64, f64)> = grid
        .kp
        .values()
        .into_iter()
        .flat_map(|kp| grid.kd.values().into_iter().map(move |kd| (kp, kd)))
        .collect();
    let points = pairs
        .par_iter()
        .map(|&(kp, kd)| {
            let spec = ControllerSpec {
                kind: ControllerKind::Pid,
                kp,
                kd,
                ..base.controller.clone()
            };
            classify(base, spec)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut best: Option<(f64, (GainPoint, GainPoint))> = None;
    for s in points.iter().filter(|p| !p.oscillates()) {
        for u in points.iter().filter(|p| p.oscillates()) {
            let (dp, dd) = ((u.kp - s.kp).abs(), (u.kd - s.kd).abs());
            if dp >= 1.0 || dd >= 1.0 {
                continue;
            }
            let dist = dp.hypot(dd);
            let better = match &best {
                None => true,
                Some((d, (bs, _))) => dist < *d - 1e-12 || (dist <= *d + 1e-12 && s.kp > bs.kp),
            };
            if better {
                best = Some((dist, (*s, *u)));
            }
        }
    }
    Ok(PidSearchReport {
        points,
        demonstration: best.map(|(_, pair)| pair),
    })
}

/// Fuzzy-integral loop classified at each integral gain.
pub fn fi_gain_sweep(base: &Scenario, ki_values: &[f64]) -> Result<Vec<GainPoint>, HarnessError> {
    ki_values
        .par_iter()
        .map(|&ki| {
            let spec = ControllerSpec {
                kind: ControllerKind::FuzzyIntegral,
                ki,
                ..base.controller.clone()
            };
            classify(base, spec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values() {
        let a = GridAxis {
            start: 0.0,
            stop: 1.0,
            step: 0.05,
        };
        let v = a.values();
        assert_eq!(v.len(), 21);
        assert!((v[20] - 1.0).abs() < 1e-12);
        assert_eq!(PidGrid::default().kp.values().len(), 21);
    }

    #[test]
    fn comparison_ratios() {
        let base = Scenario::default();
        let specs = [
            base.controller.clone().with_kind(ControllerKind::Integral),
            base.controller.clone(),
        ];
        let r = compare_controllers(&base, &specs).unwrap();
        assert_eq!(r.entries[0].speedup_vs_first, Some(1.0));
        assert!(r.entries[1].speedup_vs_first.unwrap() > 1.0);
    }
}
