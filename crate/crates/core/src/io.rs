//! CSV and text outputs. Numbers are written with 9 significant digits and
//! LF line endings so repeated runs produce byte-identical files.

use std::fmt::Write as _;
use std::io::{Read, Write};

use thiserror::Error;

use crate::evm::EvmCurve;
use crate::scenario::Scenario;
use crate::sim::{SimTrace, TransientMetrics};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
}

/// `%.9g`-style formatting: 9 significant digits, trailing zeros dropped,
/// exponent form outside 1e-4 <= |x| < 1e9.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub const TRACE_HEADER: [&str; 7] = [
    "t_s",
    "p_rf_dbm",
    "p_est_dbm",
    "e_db",
    "u_raw_db",
    "u_applied_db",
    "link_atten_db",
];

pub fn write_trace_csv<W: Write>(w: W, trace: &SimTrace) -> Result<(), DataError> {
    let mut out = csv_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        out.write_record(
            [r.t_s, r.p_rf_dbm, r.p_est_dbm, r.e_db, r.u_raw_db, r.u_applied_db, r.link_atten_db]
                .map(format_sig),
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_evm_csv<W: Write>(w: W, curves: &[EvmCurve]) -> Result<(), DataError> {
    let mut out = csv_writer(w);
    out.write_record(["atten_db", "drive_dbm", "p_out_dbm", "evm_pct"])?;
    for c in curves {
        for p in &c.points {
            out.write_record([c.atten_db, p.drive_dbm, p.p_out_dbm, p.evm_pct].map(format_sig))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_calibration_csv<W: Write>(w: W, sweep: &[(f64, f64)]) -> Result<(), DataError> {
    let mut out = csv_writer(w);
    out.write_record(["p_in_dbm", "v_out_volts"])?;
    for &(p, v) in sweep {
        out.write_record([format_sig(p), format_sig(v)])?;
    }
    out.flush()?;
    Ok(())
}

/// Read a `p_in_dbm,v_out_volts` sweep; the header is required.
pub fn read_calibration_csv<R: Read>(r: R) -> Result<Vec<(f64, f64)>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| DataError::Format {
            row: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (ip, iv) = (col("p_in_dbm")?, col("v_out_volts")?);
    let mut sweep = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |idx: usize| -> Result<f64, DataError> {
            let s = rec.get(idx).unwrap_or("");
            s.parse().map_err(|_| DataError::Format {
                row,
                message: format!("not a number: `{s}`"),
            })
        };
        sweep.push((field(ip)?, field(iv)?));
    }
    Ok(sweep)
}

/// `key = value` block for one labelled run.
pub fn format_metrics(label: &str, m: &TransientMetrics) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), format_sig);
    let _ = writeln!(s, "[{label}]");
    let _ = writeln!(s, "settling_s = {}", opt(m.settling_s));
    let _ = writeln!(s, "overshoot_db = {}", format_sig(m.overshoot_db));
    let _ = writeln!(s, "steady_state_error_db = {}", format_sig(m.steady_state_error_db));
    let _ = writeln!(s, "final_value_dbm = {}", format_sig(m.final_value_dbm));
    match &m.limit_cycle {
        Some(lc) => {
            let _ = writeln!(s, "limit_cycle = {}", lc.detected);
            let _ = writeln!(s, "limit_cycle_amplitude_db = {}", format_sig(lc.amplitude_db));
            let _ = writeln!(s, "limit_cycle_period_s = {}", opt(lc.period_s));
        }
        None => {
            let _ = writeln!(s, "limit_cycle = none");
        }
    }
    s
}

/// Provenance record written next to every set of outputs.
pub fn format_manifest(sc: &Scenario, tool_version: &str, files: &[&str]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tool_version = {tool_version}");
    let _ = writeln!(s, "config_sha256 = {}", sc.config_hash());
    let _ = writeln!(s, "seed = {}", sc.run.seed);
    for f in files {
        let _ = writeln!(s, "output = {f}");
    }
    s
}
