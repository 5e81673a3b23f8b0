//! Mamdani fuzzy inference: fuzzification, min/max rule evaluation and
//! centroid defuzzification.
//!
//! The engine maps a power error `e` (dB) and its rate of change `de` (dB/s)
//! to an incremental attenuation `du`. The aggregated output set is the upper
//! envelope of the clipped output triangles; its centroid is computed exactly
//! by splitting the universe at every vertex, clip point and envelope crossing
//! so the envelope is linear on each piece.

mod rules;
mod terms;

pub use rules::{FuzzyOutputSet, RuleTable};
pub use terms::{triangular_membership, LinguisticTermSet, Term, Triangle};

use crate::error::{ConfigError, InferenceError};

/// Default half-span of the error universe (dB).
pub const DEFAULT_ERROR_SPAN_DB: f64 = 3.0;
/// Default half-span of the error-rate universe (dB/s).
pub const DEFAULT_RATE_SPAN_DB_S: f64 = 500.0;
/// Default half-span of the output universe (dB).
pub const DEFAULT_OUTPUT_SPAN_DB: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyEngine {
    error: LinguisticTermSet,
    rate: LinguisticTermSet,
    output: LinguisticTermSet,
    rules: RuleTable,
}

impl Default for FuzzyEngine {
    fn default() -> Self {
        Self::uniform(
            DEFAULT_ERROR_SPAN_DB,
            DEFAULT_RATE_SPAN_DB_S,
            DEFAULT_OUTPUT_SPAN_DB,
        )
        .expect("default universes are valid")
    }
}

impl FuzzyEngine {
    pub fn new(
        error: LinguisticTermSet,
        rate: LinguisticTermSet,
        output: LinguisticTermSet,
        rules: RuleTable,
    ) -> Self {
        FuzzyEngine {
            error,
            rate,
            output,
            rules,
        }
    }

    /// Evenly spaced terms on symmetric universes with the default rule table.
    pub fn uniform(error_span: f64, rate_span: f64, output_span: f64) -> Result<Self, ConfigError> {
        Ok(FuzzyEngine {
            error: LinguisticTermSet::uniform(error_span)?,
            rate: LinguisticTermSet::uniform(rate_span)?,
            output: LinguisticTermSet::uniform(output_span)?,
            rules: RuleTable::default(),
        })
    }

    pub fn error_set(&self) -> &LinguisticTermSet {
        &self.error
    }

    pub fn rate_set(&self) -> &LinguisticTermSet {
        &self.rate
    }

    pub fn output_set(&self) -> &LinguisticTermSet {
        &self.output
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }

    pub fn infer(&self, e: f64, de: f64) -> Result<FuzzyOutputSet, InferenceError> {
        let e_deg = self.error.fuzzify(e);
        let de_deg = self.rate.fuzzify(de);
        self.rules.evaluate(&e_deg, &de_deg)
    }

    /// Crisp incremental output for an (error, error-rate) pair.
    pub fn fuzzy_step(&self, e: f64, de: f64) -> Result<f64, InferenceError> {
        let out = self.infer(e, de)?;
        defuzzify_centroid(&out, &self.output)
    }
}

/// Clipped membership of one output term, including the edge shoulders.
fn clipped(set: &LinguisticTermSet, term: Term, level: f64, y: f64) -> f64 {
    set.membership(term, y).min(level)
}

/// Points where a clipped term changes slope.
fn term_breakpoints(set: &LinguisticTermSet, term: Term, level: f64, out: &mut Vec<f64>) {
    let tri = set.term(term);
    out.push(tri.left);
    out.push(tri.peak);
    out.push(tri.right);
    if level < 1.0 {
        out.push(tri.left + level * (tri.peak - tri.left));
        out.push(tri.right - level * (tri.right - tri.peak));
    }
}

/// Centroid of the max-aggregated clipped output set, integrated exactly.
pub fn defuzzify_centroid(
    out: &FuzzyOutputSet,
    set: &LinguisticTermSet,
) -> Result<f64, InferenceError> {
    let active: Vec<(Term, f64)> = Term::ALL
        .iter()
        .map(|&t| (t, out.activation(t)))
        .filter(|&(_, a)| a > 0.0)
        .collect();
    if active.is_empty() {
        return Err(InferenceError::EmptyOutput);
    }
    let (lo, hi) = (set.min(), set.max());

    let mut xs = vec![lo, hi];
    for &(t, a) in &active {
        term_breakpoints(set, t, a, &mut xs);
    }
    xs.retain(|x| (lo..=hi).contains(x));
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let eval = |y: f64| -> Vec<f64> {
        active
            .iter()
            .map(|&(t, a)| clipped(set, t, a, y))
            .collect()
    };

    // add envelope crossings so the max is linear between consecutive points
    let mut crossings = Vec::new();
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let v0 = eval(x0);
        let v1 = eval(x1);
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                let d0 = v0[i] - v0[j];
                let d1 = v1[i] - v1[j];
                if d0 * d1 < 0.0 {
                    crossings.push(x0 + (x1 - x0) * d0 / (d0 - d1));
                }
            }
        }
    }
    xs.extend(crossings);
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let envelope = |y: f64| eval(y).into_iter().fold(0.0_f64, f64::max);
    let mut area = 0.0;
    let mut moment = 0.0;
    let mut prev = (xs[0], envelope(xs[0]));
    for &x in &xs[1..] {
        let cur = (x, envelope(x));
        let h = cur.0 - prev.0;
        area += 0.5 * h * (prev.1 + cur.1);
        moment += h / 6.0 * (prev.0 * (2.0 * prev.1 + cur.1) + cur.0 * (prev.1 + 2.0 * cur.1));
        prev = cur;
    }
    if area <= 0.0 {
        return Err(InferenceError::EmptyOutput);
    }
    Ok((moment / area).clamp(lo, hi))
}
