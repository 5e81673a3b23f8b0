use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use rfpc_core::evm::{evm_vs_power_sweep, generate_qam, EvmCurve};
use rfpc_core::io::{
    format_manifest, format_metrics, format_sig, read_calibration_csv, write_calibration_csv,
    write_evm_csv, write_trace_csv, DataError,
};
use rfpc_core::sensing::{calibrate as fit_detector, generate_sweep};
use rfpc_core::sim::{
    compute_metrics, fi_gain_sweep, find_unstable_pid as search_pid, GainPoint, GridAxis,
    MetricsSpec, PidGrid,
};
use rfpc_core::{run_scenario, ControllerKind, DetectorModel, Scenario, SimTrace, TransientMetrics};

use crate::svg::{Marker, Plot, Series};
use crate::GlobalOpts;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("simulation failed: {0}")]
    Sim(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Sim(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn load(g: &GlobalOpts, path: Option<&Path>) -> Result<Scenario> {
    let mut sc = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Scenario::parse(&text).map_err(|e| CliError::Input(format!("{}:{e}", p.display())))?
        }
        None => Scenario::default(),
    };
    if let Some(seed) = g.seed {
        sc.run.seed = seed;
    }
    if let Some(ts) = g.ts {
        sc.run.ts_s = ts;
    }
    sc.validate()
        .map_err(|e| CliError::Input(format!("invalid scenario: {e}")))?;
    Ok(sc)
}

struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::result::Result<(), DataError>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| io_err(&self.dir.join(name), e))?;
        self.write(name, &buf)
    }

    fn plot(&mut self, g: &GlobalOpts, name: &str, plot: Plot) -> Result<()> {
        if g.no_plots {
            return Ok(());
        }
        self.write(name, plot.render().as_bytes())
    }

    fn manifest(&mut self, sc: &Scenario) -> Result<()> {
        let mut files: Vec<&str> = self.written.iter().map(String::as_str).collect();
        files.sort_unstable();
        let text = format_manifest(sc, VERSION, &files);
        self.write("manifest.txt", text.as_bytes())
    }
}

fn say(g: &GlobalOpts, text: &str) {
    if !g.quiet {
        print!("{text}");
    }
}

fn settle_str(m: &TransientMetrics) -> String {
    m.settling_s
        .map_or_else(|| "not settled".into(), |t| format!("{t:.3} s"))
}

fn score(sc: &Scenario, trace: &SimTrace) -> Result<TransientMetrics> {
    if let Some(f) = &trace.fault {
        return Err(CliError::Sim(f.to_string()));
    }
    compute_metrics(trace, &MetricsSpec::for_scenario(sc)).map_err(|e| CliError::Sim(e.to_string()))
}

fn simulate(sc: &Scenario) -> Result<SimTrace> {
    run_scenario(sc).map_err(|e| CliError::Input(format!("invalid scenario: {e}")))
}

fn power_series(label: &str, trace: &SimTrace) -> Series {
    Series::line(label, trace.records.iter().map(|r| (r.t_s, r.p_rf_dbm)).collect())
}

fn reference_series(trace: &SimTrace) -> Series {
    let t_end = trace.records.last().map_or(0.0, |r| r.t_s);
    Series::line(
        "reference",
        vec![(0.0, trace.p_ref_dbm), (t_end, trace.p_ref_dbm)],
    )
}

fn parse_kinds(names: &[String]) -> Result<Vec<ControllerKind>> {
    names
        .iter()
        .map(|n| {
            n.trim()
                .parse::<ControllerKind>()
                .map_err(|e| CliError::Input(e.to_string()))
        })
        .collect()
}

/// `run` and `compare`: one trace per controller plus metrics and plots.
pub fn run(g: &GlobalOpts, path: Option<&Path>, controllers: &[String]) -> Result<()> {
    let base = load(g, path)?;
    let mut out = OutDir::create(&g.out)?;
    let kinds = parse_kinds(controllers)?;

    if kinds.is_empty() {
        let trace = simulate(&base)?;
        out.write_with("trace.csv", |w| write_trace_csv(w, &trace))?;
        let m = match score(&base, &trace) {
            Ok(m) => m,
            Err(e) => {
                out.manifest(&base)?;
                return Err(e);
            }
        };
        let label = base.controller.label();
        out.write("metrics.txt", format_metrics(&label, &m).as_bytes())?;
        out.plot(
            g,
            "power.svg",
            Plot {
                title: format!("Output power, {label}"),
                x_label: "time (s)".into(),
                y_label: "P_RF (dBm)".into(),
                series: vec![power_series(&label, &trace), reference_series(&trace)],
                markers: vec![],
            },
        )?;
        out.plot(
            g,
            "attenuation.svg",
            Plot {
                title: format!("Attenuator command, {label}"),
                x_label: "time (s)".into(),
                y_label: "attenuation (dB)".into(),
                series: vec![Series::line(
                    label.clone(),
                    trace.records.iter().map(|r| (r.t_s, r.u_applied_db)).collect(),
                )],
                markers: vec![],
            },
        )?;
        out.manifest(&base)?;
        say(
            g,
            &format!(
                "{label}: {} samples, settling {}, overshoot {:.3} dB, e_ss {:.4} dB, limit cycle {}{}\n",
                trace.len(),
                settle_str(&m),
                m.overshoot_db,
                m.steady_state_error_db,
                m.limit_cycle.is_some_and(|lc| lc.detected),
                match trace.saturated_samples() {
                    0 => String::new(),
                    n => format!(", {n} samples outside the sensing range"),
                }
            ),
        );
        return Ok(());
    }

    let mut rows = Vec::new();
    let mut metrics_text = String::new();
    let mut series = Vec::new();
    let mut used: Vec<String> = Vec::new();
    for kind in kinds {
        let mut sc = base.clone();
        sc.controller.kind = kind;
        let trace = simulate(&sc)?;
        let mut stem = kind.as_str().to_string();
        let mut n = 2;
        while used.contains(&stem) {
            stem = format!("{}_{n}", kind.as_str());
            n += 1;
        }
        used.push(stem.clone());
        out.write_with(&format!("trace_{stem}.csv"), |w| write_trace_csv(w, &trace))?;
        let m = score(&sc, &trace)?;
        let label = sc.controller.label();
        metrics_text.push_str(&format_metrics(&stem, &m));
        series.push(power_series(&label, &trace));
        if series.len() == 1 {
            series.push(reference_series(&trace));
        }
        rows.push((stem, label, m));
    }

    let first = rows[0].2.settling_s;
    let mut table = String::from(
        "controller,settling_s,overshoot_db,steady_state_error_db,limit_cycle,speedup_vs_first\n",
    );
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "{:<24} {:>12} {:>12} {:>10} {:>8} {:>10}",
        "controller", "settling", "overshoot", "e_ss", "cycle", "speedup"
    );
    for (stem, label, m) in &rows {
        let speedup = match (first, m.settling_s) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        let cycle = m.limit_cycle.is_some_and(|lc| lc.detected);
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), format_sig);
        let _ = writeln!(
            table,
            "{stem},{},{},{},{cycle},{}",
            opt(m.settling_s),
            format_sig(m.overshoot_db),
            format_sig(m.steady_state_error_db),
            opt(speedup)
        );
        let _ = writeln!(
            summary,
            "{label:<24} {:>12} {:>9.3} dB {:>7.4} dB {:>8} {:>10}",
            settle_str(m),
            m.overshoot_db,
            m.steady_state_error_db,
            cycle,
            speedup.map_or("-".into(), |s| format!("{s:.2}x"))
        );
    }
    out.write("comparison.csv", table.as_bytes())?;
    out.write("metrics.txt", metrics_text.as_bytes())?;
    out.plot(
        g,
        "power.svg",
        Plot {
            title: "Output power".into(),
            x_label: "time (s)".into(),
            y_label: "P_RF (dBm)".into(),
            series,
            markers: vec![],
        },
    )?;
    out.manifest(&base)?;
    say(g, &summary);
    Ok(())
}

fn evm_plot(curves: &[EvmCurve], threshold: f64) -> Plot {
    let mut markers: Vec<Marker> = Vec::new();
    for c in curves {
        if let Some(k) = c.knee_dbm(threshold) {
            if !markers.iter().any(|m| (m.x - k).abs() < 0.05) {
                markers.push(Marker {
                    x: k,
                    label: format!("{threshold}% at {k:.2} dBm"),
                });
            }
        }
    }
    Plot {
        title: "EVM against mean output power".into(),
        x_label: "mean output power (dBm)".into(),
        y_label: "RMS EVM (%)".into(),
        series: curves
            .iter()
            .map(|c| {
                Series::line(
                    format!("{} dB atten", c.atten_db),
                    c.points.iter().map(|p| (p.p_out_dbm, p.evm_pct)).collect(),
                )
            })
            .collect(),
        markers,
    }
}

pub fn sweep_evm(g: &GlobalOpts, path: Option<&Path>, no_compression: bool) -> Result<()> {
    let mut sc = load(g, path)?;
    if no_compression {
        sc.plant.compression = false;
    }
    let mut out = OutDir::create(&g.out)?;
    let batch = generate_qam(sc.evm.order, sc.evm.symbols, sc.run.seed)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let curves =
        evm_vs_power_sweep(&sc.plant, &sc.evm, &batch).map_err(|e| CliError::Sim(e.to_string()))?;
    out.write_with("evm.csv", |w| write_evm_csv(w, &curves))?;
    out.plot(g, "evm.svg", evm_plot(&curves, sc.evm.threshold_pct))?;
    out.manifest(&sc)?;

    let mut summary = String::new();
    for c in &curves {
        let knee = c
            .knee_dbm(sc.evm.threshold_pct)
            .map_or("none".into(), |k| format!("{k:.2} dBm"));
        let at_ref = c
            .evm_at(sc.evm.knee_target_dbm)
            .map_or("-".into(), |e| format!("{e:.3}%"));
        let _ = writeln!(
            summary,
            "atten {} dB: {}% knee {knee}, EVM at {} dBm {at_ref}",
            c.atten_db, sc.evm.threshold_pct, sc.evm.knee_target_dbm
        );
    }
    say(g, &summary);
    Ok(())
}

pub fn calibrate(
    g: &GlobalOpts,
    input: Option<&Path>,
    synthetic: bool,
    noise_v: f64,
    points: usize,
) -> Result<()> {
    let mut out = OutDir::create(&g.out)?;
    let sweep = match (input, synthetic) {
        (Some(p), _) => {
            let file = fs::File::open(p).map_err(|e| io_err(p, e))?;
            read_calibration_csv(file).map_err(|e| match e {
                DataError::Io(e) => io_err(p, e),
                other => CliError::Input(format!("{}: {other}", p.display())),
            })?
        }
        (None, true) => {
            if !(noise_v.is_finite() && noise_v >= 0.0) {
                return Err(CliError::Input("--noise-v must be >= 0".into()));
            }
            let det = DetectorModel {
                noise_v,
                ..DetectorModel::default()
            };
            let sweep = generate_sweep(
                &det,
                points,
                det.range_min_dbm,
                det.range_max_dbm,
                g.seed.unwrap_or(1),
            );
            out.write_with("calibration_sweep.csv", |w| write_calibration_csv(w, &sweep))?;
            sweep
        }
        (None, false) => {
            return Err(CliError::Input(
                "give a sweep CSV or use --synthetic".into(),
            ))
        }
    };
    let cal = fit_detector(&sweep).map_err(|e| CliError::Input(e.to_string()))?;

    let text = format!(
        "slope_v_per_db = {}\nintercept_dbm = {}\nr_squared = {}\npoints = {}\n",
        format_sig(cal.slope_v_per_db),
        format_sig(cal.intercept_dbm),
        format_sig(cal.r_squared),
        sweep.len()
    );
    out.write("calibration.txt", text.as_bytes())?;
    let (lo, hi) = sweep
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(p, _)| (lo.min(p), hi.max(p)));
    let fit = |p: f64| cal.slope_v_per_db * (p - cal.intercept_dbm);
    out.plot(
        g,
        "calibration.svg",
        Plot {
            title: format!("Detector response, R² = {:.4}", cal.r_squared),
            x_label: "input power (dBm)".into(),
            y_label: "output voltage (V)".into(),
            series: vec![
                Series {
                    label: "measured".into(),
                    points: sweep.clone(),
                    markers: true,
                },
                Series::line("fit", vec![(lo, fit(lo)), (hi, fit(hi))]),
            ],
            markers: vec![],
        },
    )?;
    let mut manifest = format!("tool_version = {VERSION}\n");
    if let Some(p) = input {
        let _ = writeln!(manifest, "input = {}", p.display());
    } else {
        let _ = writeln!(manifest, "seed = {}", g.seed.unwrap_or(1));
    }
    for f in &out.written {
        let _ = writeln!(manifest, "output = {f}");
    }
    out.write("manifest.txt", manifest.as_bytes())?;
    say(
        g,
        &format!(
            "S = {:.6} V/dB, P0 = {:.3} dBm, R² = {:.6} ({} points)\n",
            cal.slope_v_per_db,
            cal.intercept_dbm,
            cal.r_squared,
            sweep.len()
        ),
    );
    Ok(())
}

fn gain_rows(header: &str, points: &[GainPoint], key: impl Fn(&GainPoint) -> String) -> String {
    let mut s = format!("{header},limit_cycle,amplitude_db,period_s,settled\n");
    for p in points {
        let lc = &p.limit_cycle;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            key(p),
            lc.detected,
            format_sig(lc.amplitude_db),
            lc.period_s.map_or("none".into(), format_sig),
            p.settled
        );
    }
    s
}

pub fn find_unstable_pid(
    g: &GlobalOpts,
    path: Option<&Path>,
    (kp_max, kp_step): (f64, f64),
    (kd_max, kd_step): (f64, f64),
) -> Result<()> {
    let base = load(g, path)?;
    for (name, v) in [("kp", kp_max), ("kp step", kp_step), ("kd", kd_max), ("kd step", kd_step)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::Input(format!("{name} must be a non-negative number")));
        }
    }
    let mut out = OutDir::create(&g.out)?;
    let grid = PidGrid {
        kp: GridAxis {
            start: 0.0,
            stop: kp_max,
            step: kp_step,
        },
        kd: GridAxis {
            start: 0.0,
            stop: kd_max,
            step: kd_step,
        },
    };
    let report = search_pid(&base, &grid).map_err(|e| CliError::Sim(e.to_string()))?;
    out.write(
        "pid_grid.csv",
        gain_rows("kp,kd", &report.points, |p| {
            format!("{},{}", format_sig(p.kp), format_sig(p.kd))
        })
        .as_bytes(),
    )?;

    let ki_values = GridAxis {
        start: 0.25,
        stop: 5.0,
        step: 0.25,
    }
    .values();
    let fi = fi_gain_sweep(&base, &ki_values).map_err(|e| CliError::Sim(e.to_string()))?;
    out.write(
        "fi_grid.csv",
        gain_rows("ki", &fi, |p| format_sig(p.ki)).as_bytes(),
    )?;

    let cycling = report.points.iter().filter(|p| p.oscillates()).count();
    let fi_cycling = fi.iter().filter(|p| p.oscillates()).count();
    let mut summary = format!(
        "PID (Ki = {}): {cycling} of {} gain pairs limit-cycle; FI: {fi_cycling} of {} gains\n",
        base.controller.ki,
        report.points.len(),
        fi.len()
    );

    match report.demonstration {
        Some((stable, unstable)) => {
            let mut series = Vec::new();
            for (name, p) in [("stable", stable), ("unstable", unstable)] {
                let mut sc = base.clone();
                sc.controller.kind = ControllerKind::Pid;
                sc.controller.kp = p.kp;
                sc.controller.kd = p.kd;
                let trace = simulate(&sc)?;
                out.write_with(&format!("pid_{name}.csv"), |w| write_trace_csv(w, &trace))?;
                series.push(power_series(&format!("{name}: {}", sc.controller.label()), &trace));
            }
            out.plot(
                g,
                "pid_demo.svg",
                Plot {
                    title: "PID gain change and limit cycling".into(),
                    x_label: "time (s)".into(),
                    y_label: "P_RF (dBm)".into(),
                    series,
                    markers: vec![],
                },
            )?;
            let lc = unstable.limit_cycle;
            let _ = writeln!(
                summary,
                "stable Kp = {}, Kd = {} -> limit cycle at Kp = {}, Kd = {} \
                 (amplitude {:.2} dB, period {})",
                stable.kp,
                stable.kd,
                unstable.kp,
                unstable.kd,
                lc.amplitude_db,
                lc.period_s.map_or("-".into(), |p| format!("{p:.3} s"))
            );
        }
        None => summary.push_str("no stable gain pair sits next to a limit-cycling one on this grid\n"),
    }
    out.write("pid_search.txt", summary.as_bytes())?;
    out.manifest(&base)?;
    say(g, &summary);
    Ok(())
}
