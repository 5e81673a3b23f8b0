use std::fmt;

use super::terms::Term;
use crate::error::{ConfigError, InferenceError};

use Term::*;

/// Incremental-attenuation rule base indexed by `[error term][error-rate term]`.
const DEFAULT_TABLE: [[Term; 7]; 7] = [
    [NB, NB, NB, NB, NM, NS, Z],
    [NB, NB, NB, NM, NS, Z, PS],
    [NB, NB, NM, NS, Z, PS, PM],
    [NB, NM, NS, Z, PS, PM, PB],
    [NM, NS, Z, PS, PM, PB, PB],
    [NS, Z, PS, PM, PB, PB, PB],
    [Z, PS, PM, PB, PB, PB, PB],
];

/// 7x7 Mamdani rule table mapping an (e, de) term pair to an output term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleTable {
    cells: [[Term; 7]; 7],
}

impl Default for RuleTable {
    fn default() -> Self {
        RuleTable {
            cells: DEFAULT_TABLE,
        }
    }
}

impl RuleTable {
    pub fn new(cells: [[Term; 7]; 7]) -> Self {
        RuleTable { cells }
    }

    pub fn cell(&self, e: Term, de: Term) -> Term {
        self.cells[e.index()][de.index()]
    }

    pub fn row(&self, e: Term) -> &[Term; 7] {
        &self.cells[e.index()]
    }

    pub fn cells(&self) -> &[[Term; 7]; 7] {
        &self.cells
    }

    /// Replace one row, e.g. when loading a table from a scenario file.
    pub fn set_row(&mut self, e: Term, row: [Term; 7]) {
        self.cells[e.index()] = row;
    }

    /// cell(i, j) is the mirror of cell(6-i, 6-j) everywhere.
    pub fn is_antisymmetric(&self) -> bool {
        (0..7).all(|i| (0..7).all(|j| self.cells[i][j] == self.cells[6 - i][6 - j].mirror()))
    }

    /// Rows and columns never decrease left to right / top to bottom.
    pub fn is_monotone(&self) -> bool {
        (0..7).all(|i| (1..7).all(|j| self.cells[i][j] >= self.cells[i][j - 1]))
            && (1..7).all(|i| (0..7).all(|j| self.cells[i][j] >= self.cells[i - 1][j]))
    }

    /// Parses one whitespace- or comma-separated row of seven labels.
    pub fn parse_row(text: &str) -> Result<[Term; 7], ConfigError> {
        let labels: Vec<&str> = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if labels.len() != 7 {
            return Err(ConfigError::new(format!(
                "rule row needs 7 labels, got {}",
                labels.len()
            )));
        }
        let mut row = [Z; 7];
        for (slot, label) in row.iter_mut().zip(labels) {
            *slot = label.parse()?;
        }
        Ok(row)
    }

    pub fn format_row(&self, e: Term) -> String {
        self.row(e)
            .iter()
            .map(|t| t.label())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Mamdani min-max firing: each rule fires at `min(e_deg, de_deg)`, and each
    /// output term keeps the strongest rule that concludes it.
    pub fn evaluate(
        &self,
        e_deg: &[f64; 7],
        de_deg: &[f64; 7],
    ) -> Result<FuzzyOutputSet, InferenceError> {
        let mut activation = [0.0_f64; 7];
        for (i, &ei) in e_deg.iter().enumerate() {
            if ei <= 0.0 {
                continue;
            }
            for (j, &dj) in de_deg.iter().enumerate() {
                let strength = ei.min(dj);
                if strength > 0.0 {
                    let out = self.cells[i][j].index();
                    activation[out] = activation[out].max(strength);
                }
            }
        }
        FuzzyOutputSet::new(activation)
    }
}

impl fmt::Display for RuleTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in Term::ALL {
            writeln!(f, "{:>2} | {}", e.label(), self.format_row(e))?;
        }
        Ok(())
    }
}

/// Clip level of each output term after aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyOutputSet {
    activation: [f64; 7],
}

impl FuzzyOutputSet {
    pub fn new(activation: [f64; 7]) -> Result<Self, InferenceError> {
        if activation.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(InferenceError::InvalidActivation);
        }
        if activation.iter().all(|&a| a == 0.0) {
            return Err(InferenceError::EmptyOutput);
        }
        Ok(FuzzyOutputSet { activation })
    }

    pub fn activation(&self, t: Term) -> f64 {
        self.activation[t.index()]
    }

    pub fn activations(&self) -> &[f64; 7] {
        &self.activation
    }
}
