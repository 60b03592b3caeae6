//! First-order boundary-offset error model.
//!
//! A classifier whose class-`i` and class-`j` posteriors are off by
//! `beta + eta` moves the decision boundary by `b`, and costs an expected
//! extra error of `(s/2) E[b^2]`, where `s` is the difference of the true
//! posterior slopes at the ideal boundary. Combining changes the moments of
//! `b`; under i.i.d. Gaussian noise the variance part scales by a reduction
//! factor built from order-statistic variances and covariances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combiner::{CombineError, CombinerRule};
use crate::moments::MomentTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid boundary spec: {0}")]
    InvalidSpec(String),
    #[error("invalid factor: {0}")]
    InvalidFactor(String),
    #[error("moment table does not cover n={0}")]
    TableCoverage(usize),
    #[error(transparent)]
    Rule(#[from] CombineError),
}

/// Two-class boundary model parameters.
///
/// `sigma_b` is the std dev of a single classifier's boundary offset,
/// `beta_m` its mean offset, `sigma_beta` the spread of mean offsets across
/// classifiers and `beta_bar` their average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub s: f64,
    pub sigma_b: f64,
    pub beta_m: f64,
    pub sigma_beta: f64,
    pub beta_bar: f64,
}

impl BoundarySpec {
    pub fn unbiased(s: f64, sigma_b: f64) -> Result<Self, ModelError> {
        Self::new(s, sigma_b, 0.0, 0.0, 0.0)
    }

    pub fn new(
        s: f64,
        sigma_b: f64,
        beta_m: f64,
        sigma_beta: f64,
        beta_bar: f64,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            s,
            sigma_b,
            beta_m,
            sigma_beta,
            beta_bar,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            self.s,
            self.sigma_b,
            self.beta_m,
            self.sigma_beta,
            self.beta_bar,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidSpec(
                "all parameters must be finite".into(),
            ));
        }
        if self.s <= 0.0 {
            return Err(ModelError::InvalidSpec(format!(
                "s must be > 0, got {}",
                self.s
            )));
        }
        if self.sigma_b < 0.0 || self.sigma_beta < 0.0 {
            return Err(ModelError::InvalidSpec(
                "standard deviations must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// First and second moments of the boundary offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetMoments {
    pub m1: f64,
    pub m2: f64,
}

impl OffsetMoments {
    pub fn from_mean_variance(mean: f64, variance: f64) -> Self {
        Self {
            m1: mean,
            m2: variance + mean * mean,
        }
    }

    pub fn variance(&self) -> f64 {
        self.m2 - self.m1 * self.m1
    }

    /// `(s/2) M2`
    pub fn model_error(&self, s: f64) -> f64 {
        0.5 * s * self.m2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionFactor {
    pub value: f64,
    pub rule: CombinerRule,
    pub n: usize,
}

pub fn single_model_error(spec: &BoundarySpec, biased: bool) -> Result<f64, ModelError> {
    spec.validate()?;
    let mean = if biased { spec.beta_m } else { 0.0 };
    Ok(OffsetMoments::from_mean_variance(mean, spec.sigma_b * spec.sigma_b).model_error(spec.s))
}

fn lookup(v: Option<f64>, n: usize) -> Result<f64, ModelError> {
    v.ok_or(ModelError::TableCoverage(n))
}

/// Variance of the mean of ranks `lo..=hi`, in units of the single-classifier
/// noise variance.
fn window_factor(table: &MomentTable, n: usize, lo: usize, hi: usize) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for m in lo..=hi {
        total += lookup(table.alpha(n, m), n)?;
        for l in m + 1..=hi {
            total += 2.0 * lookup(table.b_cov(n, m, l), n)?;
        }
    }
    let width = (hi - lo + 1) as f64;
    Ok(total / (width * width))
}

/// Ratio of combined to single-classifier model error for unbiased,
/// i.i.d. Gaussian classifier noise.
pub fn reduction_factor(
    rule: CombinerRule,
    n: usize,
    table: &MomentTable,
) -> Result<ReductionFactor, ModelError> {
    rule.validate(n)?;
    let value = match rule {
        CombinerRule::Average => 1.0 / n as f64,
        _ if n == 1 => 1.0,
        CombinerRule::Max => lookup(table.alpha(n, n), n)?,
        CombinerRule::Min => lookup(table.alpha(n, 1), n)?,
        CombinerRule::KthOs(k) => lookup(table.alpha(n, k), n)?,
        CombinerRule::Median if n % 2 == 1 => lookup(table.alpha(n, n.div_ceil(2)), n)?,
        CombinerRule::Median => {
            let mid = n / 2;
            (lookup(table.alpha(n, mid), n)? + lookup(table.b_cov(n, mid, mid + 1), n)?) / 2.0
        }
        CombinerRule::Spread => {
            (lookup(table.alpha(n, 1), n)? + lookup(table.b_cov(n, 1, n), n)?) / 2.0
        }
        CombinerRule::Trim(lo, hi) => window_factor(table, n, lo, hi)?,
    };
    Ok(ReductionFactor { value, rule, n })
}

fn check_factor(name: &str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidFactor(format!(
            "{name} must lie in (0, 1], got {value}"
        )))
    }
}

/// `(s/2) (factor (sigma_b^2 + sigma_beta^2) + bias^2)`: the shared form of
/// every biased combined error.
fn biased_error(spec: &BoundarySpec, factor: f64, bias: f64) -> f64 {
    let variance = factor * (spec.sigma_b * spec.sigma_b + spec.sigma_beta * spec.sigma_beta);
    OffsetMoments::from_mean_variance(bias, variance).model_error(spec.s)
}

/// Model error of a single order-statistic combiner with reduction `alpha`
/// when classifiers are biased; the surviving bias is `beta_bar`.
pub fn os_error_biased(spec: &BoundarySpec, alpha: f64) -> Result<f64, ModelError> {
    spec.validate()?;
    check_factor("alpha", alpha)?;
    Ok(biased_error(spec, alpha, spec.beta_bar))
}

/// Model error of the trimmed mean with factor `a_factor`; the surviving bias
/// is the trimmed mean of the ordered classifier biases.
pub fn trim_error_biased(
    spec: &BoundarySpec,
    a_factor: f64,
    beta_trim: f64,
) -> Result<f64, ModelError> {
    spec.validate()?;
    check_factor("a_factor", a_factor)?;
    if !beta_trim.is_finite() {
        return Err(ModelError::InvalidSpec("beta_trim must be finite".into()));
    }
    Ok(biased_error(spec, a_factor, beta_trim))
}

/// Model error of the spread combiner over `n` biased classifiers.
pub fn spread_error_biased(
    spec: &BoundarySpec,
    table: &MomentTable,
    n: usize,
    beta_spr: f64,
) -> Result<f64, ModelError> {
    spec.validate()?;
    if !beta_spr.is_finite() {
        return Err(ModelError::InvalidSpec("beta_spr must be finite".into()));
    }
    let r = reduction_factor(CombinerRule::Spread, n, table)?.value;
    Ok(biased_error(spec, r, beta_spr))
}

/// Aggregate bias statistics of an ensemble, in boundary-offset units.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasStats {
    /// Mean over classifiers of `(beta_i - beta_j) / s`.
    pub beta_bar: f64,
    /// `sqrt((var(beta_i) + var(beta_j)) / s^2)`, population variances.
    pub sigma_beta: f64,
    sorted_i: Vec<f64>,
    sorted_j: Vec<f64>,
    s: f64,
}

impl BiasStats {
    /// From one `(beta_i, beta_j)` pair of class posterior biases per classifier.
    pub fn from_pairs(pairs: &[(f64, f64)], s: f64) -> Result<Self, ModelError> {
        if pairs.is_empty() {
            return Err(ModelError::InvalidSpec(
                "need at least one bias pair".into(),
            ));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(ModelError::InvalidSpec(format!("s must be > 0, got {s}")));
        }
        if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(ModelError::InvalidSpec("biases must be finite".into()));
        }
        let n = pairs.len() as f64;
        let mean_i = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_j = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let var_i = pairs.iter().map(|p| (p.0 - mean_i).powi(2)).sum::<f64>() / n;
        let var_j = pairs.iter().map(|p| (p.1 - mean_j).powi(2)).sum::<f64>() / n;
        let mut sorted_i: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut sorted_j: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        sorted_i.sort_by(f64::total_cmp);
        sorted_j.sort_by(f64::total_cmp);
        Ok(Self {
            beta_bar: (mean_i - mean_j) / s,
            sigma_beta: ((var_i + var_j) / (s * s)).sqrt(),
            sorted_i,
            sorted_j,
            s,
        })
    }

    /// Mean over ranks `lo..=hi` of the rank-wise offset `(beta_i^{m:N} - beta_j^{m:N}) / s`.
    pub fn beta_trim(&self, lo: usize, hi: usize) -> Result<f64, ModelError> {
        CombinerRule::Trim(lo, hi).validate(self.sorted_i.len())?;
        let total: f64 = (lo - 1..hi)
            .map(|m| (self.sorted_i[m] - self.sorted_j[m]) / self.s)
            .sum();
        Ok(total / (hi - lo + 1) as f64)
    }

    /// Offset surviving the spread combiner: half the summed min and max
    /// rank-wise offsets.
    pub fn beta_spread(&self) -> f64 {
        let last = self.sorted_i.len() - 1;
        let low = self.sorted_i[0] - self.sorted_j[0];
        let high = self.sorted_i[last] - self.sorted_j[last];
        (low + high) / (2.0 * self.s)
    }

    /// A boundary spec for the ensemble, given the single-classifier offset
    /// std dev and the mean offset `beta_m` of the reference classifier.
    pub fn to_spec(&self, sigma_b: f64, beta_m: f64) -> Result<BoundarySpec, ModelError> {
        BoundarySpec::new(self.s, sigma_b, beta_m, self.sigma_beta, self.beta_bar)
    }
}
