//! Linguistic terms and triangular membership functions.

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;

/// The seven linguistic labels shared by every fuzzy variable, in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    NB,
    NM,
    NS,
    Z,
    PS,
    PM,
    PB,
}

impl Term {
    pub const ALL: [Term; 7] = [
        Term::NB,
        Term::NM,
        Term::NS,
        Term::Z,
        Term::PS,
        Term::PM,
        Term::PB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Term> {
        Self::ALL.get(i).copied()
    }

    /// NB<->PB, NM<->PM, NS<->PS, Z<->Z.
    pub fn mirror(self) -> Term {
        Self::ALL[6 - self.index()]
    }

    pub fn label(self) -> &'static str {
        match self {
            Term::NB => "NB",
            Term::NM => "NM",
            Term::NS => "NS",
            Term::Z => "Z",
            Term::PS => "PS",
            Term::PM => "PM",
            Term::PB => "PB",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Term {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Term::ALL
            .iter()
            .copied()
            .find(|t| t.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConfigError::new(format!("unknown linguistic term `{s}`")))
    }
}

/// A triangle given by its left foot, peak and right foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub left: f64,
    pub peak: f64,
    pub right: f64,
}

impl Triangle {
    pub fn new(left: f64, peak: f64, right: f64) -> Result<Self, ConfigError> {
        let t = Triangle { left, peak, right };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.left.is_finite() && self.peak.is_finite() && self.right.is_finite()) {
            return Err(ConfigError::new("triangle vertices must be finite"));
        }
        if self.left > self.peak || self.peak > self.right {
            return Err(ConfigError::new(format!(
                "malformed triangle ({}, {}, {}): need left <= peak <= right",
                self.left, self.peak, self.right
            )));
        }
        Ok(())
    }

    /// Plain triangular membership: 0 outside `[left, right]`, 1 at the peak.
    pub fn degree(&self, x: f64) -> f64 {
        if x == self.peak {
            1.0
        } else if x <= self.left || x >= self.right {
            0.0
        } else if x < self.peak {
            (x - self.left) / (self.peak - self.left)
        } else {
            (self.right - x) / (self.right - self.peak)
        }
    }
}

/// Degree of membership of `x` in the triangle `(a, b, c)`.
pub fn triangular_membership(x: f64, a: f64, b: f64, c: f64) -> Result<f64, ConfigError> {
    Ok(Triangle::new(a, b, c)?.degree(x))
}

/// Seven triangular terms over a bounded universe, NB and PB shouldered out to the edges.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticTermSet {
    terms: [Triangle; 7],
    min: f64,
    max: f64,
}

impl LinguisticTermSet {
    pub fn new(terms: [Triangle; 7], min: f64, max: f64) -> Result<Self, ConfigError> {
        let set = LinguisticTermSet { terms, min, max };
        set.validate()?;
        Ok(set)
    }

    /// Peaks evenly spaced across `[-half_span, half_span]`; neighbours cross at 0.5.
    pub fn uniform(half_span: f64) -> Result<Self, ConfigError> {
        if !(half_span.is_finite() && half_span > 0.0) {
            return Err(ConfigError::new("universe half-span must be positive"));
        }
        let h = half_span / 3.0;
        let peak = |i: usize| (i as f64 - 3.0) * h;
        let mut terms = [Triangle {
            left: 0.0,
            peak: 0.0,
            right: 0.0,
        }; 7];
        for (i, t) in terms.iter_mut().enumerate() {
            let p = peak(i);
            *t = Triangle {
                left: if i == 0 { -half_span } else { peak(i - 1) },
                peak: p,
                right: if i == 6 { half_span } else { peak(i + 1) },
            };
        }
        // keep the extreme and central peaks exact
        terms[0].peak = -half_span;
        terms[3].peak = 0.0;
        terms[6].peak = half_span;
        terms[2].right = 0.0;
        terms[4].left = 0.0;
        terms[1].left = -half_span;
        terms[5].right = half_span;
        Self::new(terms, -half_span, half_span)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(ConfigError::new(format!(
                "invalid universe [{}, {}]",
                self.min, self.max
            )));
        }
        for (term, tri) in Term::ALL.iter().zip(&self.terms) {
            tri.validate()
                .map_err(|e| ConfigError::new(format!("term {term}: {e}")))?;
            if tri.peak < self.min || tri.peak > self.max {
                return Err(ConfigError::new(format!(
                    "term {term}: peak {} outside universe",
                    tri.peak
                )));
            }
        }
        for w in self.terms.windows(2) {
            if w[1].peak <= w[0].peak {
                return Err(ConfigError::new("term peaks must be strictly increasing"));
            }
            if w[1].left >= w[0].right {
                return Err(ConfigError::new(
                    "adjacent terms must overlap so every point is covered",
                ));
            }
        }
        let scale = self.max.abs().max(self.min.abs());
        for i in 0..3 {
            if (self.terms[i].peak + self.terms[6 - i].peak).abs() > 1e-9 * scale {
                return Err(ConfigError::new("term peaks must be symmetric about zero"));
            }
        }
        if self.terms[3].peak.abs() > 1e-9 * scale {
            return Err(ConfigError::new("peak of Z must be zero"));
        }
        Ok(())
    }

    pub fn terms(&self) -> &[Triangle; 7] {
        &self.terms
    }

    pub fn term(&self, t: Term) -> &Triangle {
        &self.terms[t.index()]
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    /// True when every triangle is the reflection of its mirror term.
    pub fn is_mirror_symmetric(&self, tol: f64) -> bool {
        (self.min + self.max).abs() <= tol
            && (0..7).all(|i| {
                let a = &self.terms[i];
                let b = &self.terms[6 - i];
                (a.left + b.right).abs() <= tol
                    && (a.peak + b.peak).abs() <= tol
                    && (a.right + b.left).abs() <= tol
            })
    }

    /// Membership of `x` in `term`, with the extreme terms held at 1 beyond their peaks.
    pub fn membership(&self, term: Term, x: f64) -> f64 {
        let tri = &self.terms[term.index()];
        match term {
            Term::NB if x <= tri.peak => 1.0,
            Term::PB if x >= tri.peak => 1.0,
            _ => tri.degree(x),
        }
    }

    /// Degrees of all seven terms after clamping `value` into the universe.
    pub fn fuzzify(&self, value: f64) -> [f64; 7] {
        let x = if value.is_nan() {
            0.0_f64.clamp(self.min, self.max)
        } else {
            value.clamp(self.min, self.max)
        };
        Term::ALL.map(|t| self.membership(t, x))
    }
}
