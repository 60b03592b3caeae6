//! Posterior containers and the order-statistic combining rules.
//!
//! Every rule sorts each class column of a [`PosteriorMatrix`] and then reads
//! (or averages) a contiguous window of ranks. Because the arithmetic only
//! ever sees sorted values, every rule is bit-identical under row
//! permutations.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CombineError {
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// N classifiers (rows) by L classes (columns) of posterior estimates for a
/// single input pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    values: Vec<f64>,
    n_classifiers: usize,
    n_classes: usize,
}

impl PosteriorMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, CombineError> {
        let n_classifiers = rows.len();
        if n_classifiers == 0 {
            return Err(CombineError::InvalidInput(
                "matrix has no classifiers".into(),
            ));
        }
        let n_classes = rows[0].len();
        let mut values = Vec::with_capacity(n_classifiers * n_classes);
        for (m, row) in rows.into_iter().enumerate() {
            if row.len() != n_classes {
                return Err(CombineError::InvalidInput(format!(
                    "row {m} has {} classes, expected {n_classes}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        Self::from_flat(values, n_classifiers, n_classes)
    }

    /// Row-major construction.
    pub fn from_flat(
        values: Vec<f64>,
        n_classifiers: usize,
        n_classes: usize,
    ) -> Result<Self, CombineError> {
        if n_classifiers == 0 {
            return Err(CombineError::InvalidInput(
                "matrix has no classifiers".into(),
            ));
        }
        if n_classes < 2 {
            return Err(CombineError::InvalidInput(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if values.len() != n_classifiers * n_classes {
            return Err(CombineError::InvalidInput(format!(
                "expected {} entries, got {}",
                n_classifiers * n_classes,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CombineError::InvalidInput(format!(
                "non-finite entry at classifier {}, class {}",
                pos / n_classes,
                pos % n_classes
            )));
        }
        Ok(Self {
            values,
            n_classifiers,
            n_classes,
        })
    }

    pub fn n_classifiers(&self) -> usize {
        self.n_classifiers
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, classifier: usize, class: usize) -> f64 {
        self.values[classifier * self.n_classes + class]
    }

    pub fn row(&self, classifier: usize) -> &[f64] {
        let start = classifier * self.n_classes;
        &self.values[start..start + self.n_classes]
    }

    pub fn column(&self, class: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_classifiers).map(move |m| self.get(m, class))
    }
}

/// A combining rule. Ranks are 1-indexed: `KthOs(1)` is min, `KthOs(N)` is max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CombinerRule {
    Average,
    Max,
    Min,
    Median,
    KthOs(usize),
    Spread,
    Trim(usize, usize),
}

impl CombinerRule {
    /// Checks that the ranks this rule refers to exist in an ensemble of `n`.
    pub fn validate(&self, n: usize) -> Result<(), CombineError> {
        if n == 0 {
            return Err(CombineError::InvalidRule(
                "ensemble size must be at least 1".into(),
            ));
        }
        match *self {
            CombinerRule::KthOs(k) if k == 0 || k > n => Err(CombineError::InvalidRule(format!(
                "rank {k} out of range 1..={n}"
            ))),
            CombinerRule::Trim(lo, hi) if lo == 0 || lo > hi || hi > n => Err(
                CombineError::InvalidRule(format!("trim window {lo}..={hi} invalid for N={n}")),
            ),
            _ => Ok(()),
        }
    }

    /// The inclusive 1-indexed rank window averaged by this rule, with the
    /// spread rule reported as its two extreme ranks.
    fn window(&self, n: usize) -> Window {
        match *self {
            CombinerRule::Average => Window::Range(1, n),
            CombinerRule::Max => Window::Range(n, n),
            CombinerRule::Min => Window::Range(1, 1),
            CombinerRule::KthOs(k) => Window::Range(k, k),
            CombinerRule::Median if n.is_multiple_of(2) => Window::Range(n / 2, n / 2 + 1),
            CombinerRule::Median => Window::Range(n.div_ceil(2), n.div_ceil(2)),
            CombinerRule::Spread => Window::Extremes,
            CombinerRule::Trim(lo, hi) => Window::Range(lo, hi),
        }
    }

    /// Combines one class column that is already sorted ascending.
    ///
    /// The rule must have been validated for `sorted.len()`.
    pub fn apply_sorted(&self, sorted: &[f64]) -> f64 {
        let n = sorted.len();
        match self.window(n) {
            Window::Range(lo, hi) => mean_of_sorted(&sorted[lo - 1..hi]),
            Window::Extremes => mean_of_sorted(&[sorted[0], sorted[n - 1]]),
        }
    }

    /// Sorts `column` in place and combines it.
    pub fn apply(&self, column: &mut [f64]) -> Result<f64, CombineError> {
        self.validate(column.len())?;
        if column.iter().any(|v| !v.is_finite()) {
            return Err(CombineError::InvalidInput(
                "non-finite value in column".into(),
            ));
        }
        column.sort_by(f64::total_cmp);
        Ok(self.apply_sorted(column))
    }
}

enum Window {
    Range(usize, usize),
    Extremes,
}

/// Mean of an ascending slice, written as an offset from its first element so
/// that a constant window returns that constant exactly.
fn mean_of_sorted(sorted: &[f64]) -> f64 {
    let first = sorted[0];
    let last = sorted[sorted.len() - 1];
    if sorted.len() == 1 {
        return first;
    }
    let offset: f64 = sorted.iter().map(|v| v - first).sum();
    (first + offset / sorted.len() as f64).clamp(first, last)
}

impl fmt::Display for CombinerRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CombinerRule::Average => f.write_str("ave"),
            CombinerRule::Max => f.write_str("max"),
            CombinerRule::Min => f.write_str("min"),
            CombinerRule::Median => f.write_str("med"),
            CombinerRule::KthOs(k) => write!(f, "os:{k}"),
            CombinerRule::Spread => f.write_str("spread"),
            CombinerRule::Trim(lo, hi) => write!(f, "trim:{lo}:{hi}"),
        }
    }
}

impl FromStr for CombinerRule {
    type Err = CombineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = lower.split(':').collect();
        let rank = |p: &str| {
            p.parse::<usize>()
                .map_err(|_| CombineError::InvalidRule(format!("bad rank '{p}' in '{s}'")))
        };
        match parts.as_slice() {
            ["ave"] => Ok(CombinerRule::Average),
            ["max"] => Ok(CombinerRule::Max),
            ["min"] => Ok(CombinerRule::Min),
            ["med"] => Ok(CombinerRule::Median),
            ["spread"] => Ok(CombinerRule::Spread),
            ["os", k] => {
                let k = rank(k)?;
                if k == 0 {
                    return Err(CombineError::InvalidRule("ranks start at 1".into()));
                }
                Ok(CombinerRule::KthOs(k))
            }
            ["trim", lo, hi] => {
                let (lo, hi) = (rank(lo)?, rank(hi)?);
                if lo == 0 || lo > hi {
                    return Err(CombineError::InvalidRule(format!(
                        "trim window must satisfy 1 <= N1 <= N2, got {lo}:{hi}"
                    )));
                }
                Ok(CombinerRule::Trim(lo, hi))
            }
            _ => Err(CombineError::InvalidRule(format!("unknown rule '{s}'"))),
        }
    }
}

impl From<CombinerRule> for String {
    fn from(rule: CombinerRule) -> Self {
        rule.to_string()
    }
}

impl TryFrom<String> for CombinerRule {
    type Error = CombineError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedPosterior {
    pub values: Vec<f64>,
    pub rule: CombinerRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecision {
    pub class_index: usize,
    pub combined: CombinedPosterior,
}

/// Applies `rule` independently to every class column of `matrix`.
pub fn combine(
    matrix: &PosteriorMatrix,
    rule: CombinerRule,
) -> Result<CombinedPosterior, CombineError> {
    rule.validate(matrix.n_classifiers())?;
    let mut column = Vec::with_capacity(matrix.n_classifiers());
    let values = (0..matrix.n_classes())
        .map(|class| {
            column.clear();
            column.extend(matrix.column(class));
            column.sort_by(f64::total_cmp);
            rule.apply_sorted(&column)
        })
        .collect();
    Ok(CombinedPosterior { values, rule })
}

/// Index of the largest entry; the lowest index wins exact ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v.partial_cmp(&b) != Some(Ordering::Greater) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

pub fn decide(combined: CombinedPosterior) -> Result<ClassDecision, CombineError> {
    if combined.values.iter().any(|v| !v.is_finite()) {
        return Err(CombineError::InvalidInput(
            "non-finite combined value".into(),
        ));
    }
    let class_index = argmax(&combined.values)
        .ok_or_else(|| CombineError::InvalidInput("empty combined posterior".into()))?;
    Ok(ClassDecision {
        class_index,
        combined,
    })
}
