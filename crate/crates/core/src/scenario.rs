//! Scenario documents: a flat, sectioned `key = value` text format.
//!
//! ```text
//! # Fuzzy-integral loop rejecting a 10 -> 5 dB link step
//! [controller]
//! kind = fi
//! ki = 2
//!
//! [disturbances]
//! step = 2, -5
//!
//! [run]
//! duration_s = 8
//! ```
//!
//! Sections are `[controller]`, `[plant]`, `[detector]`, `[fuzzy]`,
//! `[disturbances]`, `[run]` and `[evm]`. Keys left out keep their defaults;
//! unknown sections or keys, repeated keys and malformed values are rejected
//! with the offending line number. `#` starts a comment. [`Scenario::to_text`]
//! writes every key, and parsing that text gives back the same scenario.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::control::{ControllerKind, ControllerSpec};
use crate::error::ConfigError;
use crate::evm::EvmSweep;
use crate::fuzzy::{FuzzyEngine, LinguisticTermSet, RuleTable, Term, Triangle};
use crate::plant::{Disturbance, DisturbanceSchedule, PlantConfig};
use crate::sensing::{AdcModel, DetectorModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

/// Loop-level settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub p_ref_dbm: f64,
    pub duration_s: f64,
    pub ts_s: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p_ref_dbm: -30.0,
            duration_s: 8.0,
            ts_s: crate::control::DEFAULT_TS_S,
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn samples(&self) -> usize {
        (self.duration_s / self.ts_s).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub controller: ControllerSpec,
    pub plant: PlantConfig,
    pub detector: DetectorModel,
    pub adc: Option<AdcModel>,
    pub fuzzy: FuzzyEngine,
    pub disturbances: DisturbanceSchedule,
    pub run: RunConfig,
    pub evm: EvmSweep,
}

impl Default for Scenario {
    /// Fuzzy-integral loop at -30 dBm facing a 10 -> 5 dB link step at t = 2 s.
    fn default() -> Self {
        Scenario {
            controller: ControllerSpec::default(),
            plant: PlantConfig::default(),
            detector: DetectorModel::default(),
            adc: Some(AdcModel::default()),
            fuzzy: FuzzyEngine::default(),
            disturbances: DisturbanceSchedule::link_step(2.0, -5.0),
            run: RunConfig::default(),
            evm: EvmSweep::default(),
        }
    }
}

impl Scenario {
    /// Same loop with the opposite (5 -> 10 dB) link step.
    pub fn gain_reduction() -> Self {
        Scenario {
            plant: PlantConfig {
                link_atten_db: 5.0,
                ..PlantConfig::default()
            },
            controller: ControllerSpec {
                initial_atten_db: 15.0,
                ..ControllerSpec::default()
            },
            disturbances: DisturbanceSchedule::link_step(2.0, 5.0),
            ..Scenario::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.controller.actuator.validate()?;
        self.plant.validate()?;
        self.detector.validate()?;
        if let Some(adc) = &self.adc {
            adc.validate()?;
        }
        let r = &self.run;
        if !(r.duration_s.is_finite() && r.duration_s > 0.0) {
            return Err(ConfigError::new("duration must be positive"));
        }
        if !(r.ts_s.is_finite() && r.ts_s > 0.0) {
            return Err(ConfigError::new("sampling period must be positive"));
        }
        if r.samples() == 0 {
            return Err(ConfigError::new("duration shorter than one sample"));
        }
        if !self.detector.in_range(r.p_ref_dbm) {
            return Err(ConfigError::new(format!(
                "reference {} dBm outside detector range [{}, {}]",
                r.p_ref_dbm, self.detector.range_min_dbm, self.detector.range_max_dbm
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Scenario, ParseError> {
        Parser::default().parse(text)
    }

    /// Canonical text form listing every key.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_text(&mut s).expect("writing to a String");
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }

    fn write_text(&self, w: &mut String) -> fmt::Result {
        let c = &self.controller;
        writeln!(w, "[controller]")?;
        writeln!(w, "kind = {}", c.kind)?;
        writeln!(w, "kp = {}", c.kp)?;
        writeln!(w, "ki = {}", c.ki)?;
        writeln!(w, "kd = {}", c.kd)?;
        writeln!(w, "initial_atten_db = {}", c.initial_atten_db)?;
        writeln!(w, "atten_min_db = {}", c.actuator.min_db)?;
        writeln!(w, "atten_max_db = {}", c.actuator.max_db)?;
        writeln!(w, "atten_step_db = {}", c.actuator.step_db)?;
        match c.actuator.slew_db {
            Some(s) => writeln!(w, "slew_db = {s}")?,
            None => writeln!(w, "slew_db = none")?,
        }

        let p = &self.plant;
        writeln!(w, "\n[plant]")?;
        writeln!(w, "if_drive_dbm = {}", p.if_drive_dbm)?;
        writeln!(w, "stage_gains_db = {}", join(&p.stage_gains_db))?;
        writeln!(w, "pa_gain_db = {}", p.pa.gain_db)?;
        writeln!(w, "pa_psat_dbm = {}", p.pa.psat_dbm)?;
        writeln!(w, "pa_smoothness = {}", p.pa.smoothness)?;
        writeln!(w, "compression = {}", p.compression)?;
        writeln!(w, "alpha = {}", p.alpha)?;
        writeln!(w, "lag_tau_s = {}", p.lag_tau_s)?;
        writeln!(w, "link_atten_db = {}", p.link_atten_db)?;
        writeln!(w, "f_lo_ghz = {}", p.f_lo_ghz)?;
        writeln!(w, "f_if_ghz = {}", p.f_if_ghz)?;

        let d = &self.detector;
        writeln!(w, "\n[detector]")?;
        writeln!(w, "slope_v_per_db = {}", d.slope_v_per_db)?;
        writeln!(w, "intercept_dbm = {}", d.intercept_dbm)?;
        writeln!(w, "range_min_dbm = {}", d.range_min_dbm)?;
        writeln!(w, "range_max_dbm = {}", d.range_max_dbm)?;
        writeln!(w, "clamp_min_v = {}", d.clamp_min_v)?;
        writeln!(w, "clamp_max_v = {}", d.clamp_max_v)?;
        writeln!(w, "noise_v = {}", d.noise_v)?;
        let adc = self.adc.unwrap_or_default();
        writeln!(w, "adc = {}", self.adc.is_some())?;
        writeln!(w, "adc_bits = {}", adc.bits)?;
        writeln!(w, "adc_full_scale_v = {}", adc.full_scale_v)?;
        writeln!(w, "adc_noise_codes = {}", adc.noise_codes)?;

        let f = &self.fuzzy;
        writeln!(w, "\n[fuzzy]")?;
        for (name, set) in [("e", f.error_set()), ("de", f.rate_set()), ("du", f.output_set())] {
            writeln!(w, "{name}_span = {}", set.max())?;
            let uniform = LinguisticTermSet::uniform(set.max()).ok();
            if uniform.as_ref() != Some(set) {
                writeln!(w, "{name}_terms = {}", format_terms(set))?;
            }
        }
        for t in Term::ALL {
            writeln!(
                w,
                "rule_{} = {}",
                t.label().to_ascii_lowercase(),
                f.rules().format_row(t)
            )?;
        }

        writeln!(w, "\n[disturbances]")?;
        for ev in self.disturbances.events() {
            match *ev {
                Disturbance::LinkStep { at_s, delta_db } => writeln!(w, "step = {at_s}, {delta_db}")?,
                Disturbance::TemperatureRamp {
                    at_s,
                    rate_db_per_s,
                    duration_s,
                } => writeln!(w, "ramp = {at_s}, {rate_db_per_s}, {duration_s}")?,
            }
        }

        let r = &self.run;
        writeln!(w, "\n[run]")?;
        writeln!(w, "p_ref_dbm = {}", r.p_ref_dbm)?;
        writeln!(w, "duration_s = {}", r.duration_s)?;
        writeln!(w, "ts_s = {}", r.ts_s)?;
        writeln!(w, "seed = {}", r.seed)?;

        let e = &self.evm;
        writeln!(w, "\n[evm]")?;
        writeln!(w, "order = {}", e.order)?;
        writeln!(w, "symbols = {}", e.symbols)?;
        writeln!(w, "attenuations_db = {}", join(&e.attenuations_db))?;
        writeln!(w, "drive_start_dbm = {}", e.drive_start_dbm)?;
        writeln!(w, "drive_stop_dbm = {}", e.drive_stop_dbm)?;
        writeln!(w, "drive_step_db = {}", e.drive_step_db)?;
        writeln!(w, "knee_target_dbm = {}", e.knee_target_dbm)?;
        writeln!(w, "threshold_pct = {}", e.threshold_pct)?;
        Ok(())
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

fn format_terms(set: &LinguisticTermSet) -> String {
    set.terms()
        .iter()
        .map(|t| format!("{} {} {}", t.left, t.peak, t.right))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Controller,
    Plant,
    Detector,
    Fuzzy,
    Disturbances,
    Run,
    Evm,
}

impl Section {
    fn from_name(name: &str) -> Option<Section> {
        Some(match name {
            "controller" => Section::Controller,
            "plant" => Section::Plant,
            "detector" => Section::Detector,
            "fuzzy" => Section::Fuzzy,
            "disturbances" => Section::Disturbances,
            "run" => Section::Run,
            "evm" => Section::Evm,
            _ => return None,
        })
    }
}

#[derive(Default)]
struct FuzzyDraft {
    spans: [Option<f64>; 3],
    terms: [Option<([Triangle; 7], usize)>; 3],
    rules: RuleTable,
}

#[derive(Default)]
struct Parser {
    sc: Scenario,
    seen: HashSet<(Section, String)>,
    sections_seen: HashSet<Section>,
    section_line: Vec<(Section, usize)>,
    fuzzy: FuzzyDraft,
    events: Vec<(Disturbance, usize)>,
    adc_enabled: Option<bool>,
}

fn num(line: usize, key: &str, v: &str) -> Result<f64, ParseError> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| ParseError::new(line, format!("`{key}`: expected a number, got `{}`", v.trim())))?;
    if !x.is_finite() {
        return Err(ParseError::new(line, format!("`{key}`: value must be finite")));
    }
    Ok(x)
}

fn uint(line: usize, key: &str, v: &str) -> Result<u64, ParseError> {
    v.trim().parse().map_err(|_| {
        ParseError::new(
            line,
            format!("`{key}`: expected a non-negative integer, got `{}`", v.trim()),
        )
    })
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool, ParseError> {
    match v.trim() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        other => Err(ParseError::new(
            line,
            format!("`{key}`: expected true or false, got `{other}`"),
        )),
    }
}

fn list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, ParseError> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(line, key, s)).collect()
}

fn tuple<const N: usize>(line: usize, key: &str, v: &str) -> Result<[f64; N], ParseError> {
    let xs = list(line, key, v)?;
    xs.try_into().map_err(|xs: Vec<f64>| {
        ParseError::new(line, format!("`{key}`: expected {N} values, got {}", xs.len()))
    })
}

fn terms(line: usize, key: &str, v: &str) -> Result<[Triangle; 7], ParseError> {
    let parts: Vec<&str> = v.split(';').collect();
    if parts.len() != 7 {
        return Err(ParseError::new(
            line,
            format!("`{key}`: expected 7 `left peak right` triples separated by `;`"),
        ));
    }
    let mut out = [Triangle {
        left: 0.0,
        peak: 0.0,
        right: 0.0,
    }; 7];
    for (slot, part) in out.iter_mut().zip(parts) {
        let xs: Vec<f64> = part
            .split_whitespace()
            .map(|s| num(line, key, s))
            .collect::<Result<_, _>>()?;
        if xs.len() != 3 {
            return Err(ParseError::new(line, format!("`{key}`: each term needs 3 numbers")));
        }
        *slot = Triangle::new(xs[0], xs[1], xs[2])
            .map_err(|e| ParseError::new(line, format!("`{key}`: {e}")))?;
    }
    Ok(out)
}

fn cfg_err(line: usize) -> impl Fn(ConfigError) -> ParseError {
    move |e| ParseError::new(line, e.message().to_string())
}

impl Parser {
    fn parse(mut self, text: &str) -> Result<Scenario, ParseError> {
        let mut current: Option<Section> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ParseError::new(line, "unterminated section header"))?
                    .trim();
                let section = Section::from_name(name)
                    .ok_or_else(|| ParseError::new(line, format!("unknown section [{name}]")))?;
                if !self.sections_seen.insert(section) {
                    return Err(ParseError::new(line, format!("section [{name}] repeated")));
                }
                self.section_line.push((section, line));
                current = Some(section);
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ParseError::new(line, "expected `key = value`"))?;
            let key = key.trim();
            let section =
                current.ok_or_else(|| ParseError::new(line, "key outside of any section"))?;
            let repeatable = section == Section::Disturbances;
            if !repeatable && !self.seen.insert((section, key.to_string())) {
                return Err(ParseError::new(line, format!("duplicate key `{key}`")));
            }
            self.apply(section, line, key, value)?;
        }
        self.finish()
    }

    fn apply(&mut self, section: Section, line: usize, key: &str, v: &str) -> Result<(), ParseError> {
        let unknown = || ParseError::new(line, format!("unknown key `{key}`"));
        let sc = &mut self.sc;
        match section {
            Section::Controller => {
                let c = &mut sc.controller;
                match key {
                    "kind" => c.kind = v.parse::<ControllerKind>().map_err(cfg_err(line))?,
                    "kp" => c.kp = num(line, key, v)?,
                    "ki" => c.ki = num(line, key, v)?,
                    "kd" => c.kd = num(line, key, v)?,
                    "initial_atten_db" => c.initial_atten_db = num(line, key, v)?,
                    "atten_min_db" => c.actuator.min_db = num(line, key, v)?,
                    "atten_max_db" => c.actuator.max_db = num(line, key, v)?,
                    "atten_step_db" => c.actuator.step_db = num(line, key, v)?,
                    "slew_db" => {
                        c.actuator.slew_db = if v.trim() == "none" {
                            None
                        } else {
                            Some(num(line, key, v)?)
                        }
                    }
                    _ => return Err(unknown()),
                }
            }
            Section::Plant => {
                let p = &mut sc.plant;
                match key {
                    "if_drive_dbm" => p.if_drive_dbm = num(line, key, v)?,
                    "stage_gains_db" => p.stage_gains_db = list(line, key, v)?,
                    "pa_gain_db" => p.pa.gain_db = num(line, key, v)?,
                    "pa_psat_dbm" => p.pa.psat_dbm = num(line, key, v)?,
                    "pa_smoothness" => p.pa.smoothness = num(line, key, v)?,
                    "compression" => p.compression = boolean(line, key, v)?,
                    "alpha" => p.alpha = num(line, key, v)?,
                    "lag_tau_s" => p.lag_tau_s = num(line, key, v)?,
                    "link_atten_db" => p.link_atten_db = num(line, key, v)?,
                    "f_lo_ghz" => p.f_lo_ghz = num(line, key, v)?,
                    "f_if_ghz" => p.f_if_ghz = num(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            Section::Detector => {
                let d = &mut sc.detector;
                let adc = sc.adc.get_or_insert_with(AdcModel::default);
                match key {
                    "slope_v_per_db" => d.slope_v_per_db = num(line, key, v)?,
                    "intercept_dbm" => d.intercept_dbm = num(line, key, v)?,
                    "range_min_dbm" => d.range_min_dbm = num(line, key, v)?,
                    "range_max_dbm" => d.range_max_dbm = num(line, key, v)?,
                    "clamp_min_v" => d.clamp_min_v = num(line, key, v)?,
                    "clamp_max_v" => d.clamp_max_v = num(line, key, v)?,
                    "noise_v" => d.noise_v = num(line, key, v)?,
                    "adc" => self.adc_enabled = Some(boolean(line, key, v)?),
                    "adc_bits" => {
                        adc.bits = u32::try_from(uint(line, key, v)?)
                            .map_err(|_| ParseError::new(line, "`adc_bits` out of range"))?
                    }
                    "adc_full_scale_v" => adc.full_scale_v = num(line, key, v)?,
                    "adc_noise_codes" => adc.noise_codes = num(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            Section::Fuzzy => {
                let slot = |prefix: &str| match prefix {
                    "e" => Some(0),
                    "de" => Some(1),
                    "du" => Some(2),
                    _ => None,
                };
                if let Some(label) = key.strip_prefix("rule_") {
                    let e: Term = label.parse().map_err(|_| unknown())?;
                    let row = RuleTable::parse_row(v).map_err(cfg_err(line))?;
                    self.fuzzy.rules.set_row(e, row);
                } else if let Some(i) = key.strip_suffix("_span").and_then(slot) {
                    let s = num(line, key, v)?;
                    if s <= 0.0 {
                        return Err(ParseError::new(line, format!("`{key}` must be positive")));
                    }
                    self.fuzzy.spans[i] = Some(s);
                } else if let Some(i) = key.strip_suffix("_terms").and_then(slot) {
                    self.fuzzy.terms[i] = Some((terms(line, key, v)?, line));
                } else {
                    return Err(unknown());
                }
            }
            Section::Disturbances => {
                let ev = match key {
                    "step" => {
                        let [at_s, delta_db] = tuple::<2>(line, key, v)?;
                        Disturbance::LinkStep { at_s, delta_db }
                    }
                    "ramp" => {
                        let [at_s, rate_db_per_s, duration_s] = tuple::<3>(line, key, v)?;
                        if duration_s < 0.0 {
                            return Err(ParseError::new(line, "ramp duration must be >= 0"));
                        }
                        Disturbance::TemperatureRamp {
                            at_s,
                            rate_db_per_s,
                            duration_s,
                        }
                    }
                    _ => return Err(unknown()),
                };
                if let Some((prev, _)) = self.events.last() {
                    if ev.at_s() < prev.at_s() {
                        return Err(ParseError::new(line, "disturbance times must be non-decreasing"));
                    }
                }
                self.events.push((ev, line));
            }
            Section::Run => {
                let r = &mut sc.run;
                match key {
                    "p_ref_dbm" => r.p_ref_dbm = num(line, key, v)?,
                    "duration_s" => r.duration_s = num(line, key, v)?,
                    "ts_s" => r.ts_s = num(line, key, v)?,
                    "seed" => r.seed = uint(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            Section::Evm => {
                let e = &mut sc.evm;
                match key {
                    "order" => e.order = uint(line, key, v)? as usize,
                    "symbols" => e.symbols = uint(line, key, v)? as usize,
                    "attenuations_db" => e.attenuations_db = list(line, key, v)?,
                    "drive_start_dbm" => e.drive_start_dbm = num(line, key, v)?,
                    "drive_stop_dbm" => e.drive_stop_dbm = num(line, key, v)?,
                    "drive_step_db" => e.drive_step_db = num(line, key, v)?,
                    "knee_target_dbm" => e.knee_target_dbm = num(line, key, v)?,
                    "threshold_pct" => e.threshold_pct = num(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
        }
        Ok(())
    }

    fn header_line(&self, s: Section) -> usize {
        self.section_line
            .iter()
            .find(|(sec, _)| *sec == s)
            .map_or(0, |&(_, l)| l)
    }

    fn finish(mut self) -> Result<Scenario, ParseError> {
        if self.sections_seen.contains(&Section::Disturbances) {
            let line = self.header_line(Section::Disturbances);
            self.sc.disturbances =
                DisturbanceSchedule::new(self.events.iter().map(|(e, _)| *e).collect())
                    .map_err(cfg_err(line))?;
        }
        match self.adc_enabled {
            Some(false) => self.sc.adc = None,
            _ => {
                self.sc.adc.get_or_insert_with(AdcModel::default);
            }
        }

        if self.sections_seen.contains(&Section::Fuzzy) {
            let line = self.header_line(Section::Fuzzy);
            let defaults = FuzzyEngine::default();
            let default_sets = [defaults.error_set(), defaults.rate_set(), defaults.output_set()];
            let mut sets = Vec::with_capacity(3);
            for i in 0..3 {
                let set = match (self.fuzzy.spans[i], self.fuzzy.terms[i]) {
                    (span, Some((terms, tline))) => {
                        let span = span.unwrap_or(default_sets[i].max());
                        LinguisticTermSet::new(terms, -span, span).map_err(cfg_err(tline))?
                    }
                    (Some(span), None) => LinguisticTermSet::uniform(span).map_err(cfg_err(line))?,
                    (None, None) => default_sets[i].clone(),
                };
                sets.push(set);
            }
            let output = sets.pop().expect("three sets");
            let rate = sets.pop().expect("three sets");
            let error = sets.pop().expect("three sets");
            self.sc.fuzzy = FuzzyEngine::new(error, rate, output, self.fuzzy.rules);
        }

        let checks: [(Section, Result<(), ConfigError>); 4] = [
            (Section::Controller, self.sc.controller.actuator.validate()),
            (Section::Plant, self.sc.plant.validate()),
            (
                Section::Detector,
                self.sc
                    .detector
                    .validate()
                    .and_then(|_| self.sc.adc.as_ref().map_or(Ok(()), AdcModel::validate)),
            ),
            (Section::Run, self.sc.validate()),
        ];
        for (section, result) in checks {
            result.map_err(cfg_err(self.header_line(section)))?;
        }
        Ok(self.sc)
    }
}
