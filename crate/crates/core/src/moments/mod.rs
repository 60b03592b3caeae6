//! Means, variances and covariances of order statistics of the standard
//! Gaussian.
//!
//! The k-th of n order statistics has density
//! `n!/((k-1)!(n-k)!) F(x)^(k-1) (1-F(x))^(n-k) f(x)`; the k-th and l-th
//! jointly have the usual product-of-powers density on `x < y`. Moments are
//! obtained by adaptive Gauss-Kronrod quadrature over `[-12, 12]`, the
//! covariance by nesting the rule. [`mc_oracle`] is an independent Monte Carlo
//! estimate used to cross-check the quadrature.

mod mc;
pub mod normal;
pub mod quad;
mod table;

use std::cell::Cell;
use std::fmt;

use thiserror::Error;

pub use mc::{mc_oracle, McEstimate, MomentQuery};
pub use table::{build_table, MomentTable, MAX_TABLE_N};

use quad::{integrate, QuadOptions};

/// Integration limits; the Gaussian mass outside is below 1e-30.
pub const LIMIT: f64 = 12.0;

const MEAN_TOL: f64 = 1e-10;
const VAR_TOL: f64 = 1e-10;
const COV_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("invalid moment key {0}")]
    InvalidKey(MomentKey),
    #[error("quadrature did not converge for {key}: error estimate {achieved:.3e}")]
    NumericFailure { key: MomentKey, achieved: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed table cache line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(String),
}

/// Rank(s) of standard-Gaussian order statistics among `n` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MomentKey {
    pub n: usize,
    pub k: usize,
    pub l: Option<usize>,
}

impl MomentKey {
    pub fn single(n: usize, k: usize) -> Self {
        Self { n, k, l: None }
    }

    pub fn pair(n: usize, k: usize, l: usize) -> Self {
        Self { n, k, l: Some(l) }
    }

    pub fn is_valid(&self) -> bool {
        let upper = self.l.unwrap_or(self.k);
        self.n >= 1 && self.k >= 1 && self.k <= upper && upper <= self.n
    }

    fn check(self) -> Result<Self, MomentError> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(MomentError::InvalidKey(self))
        }
    }
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.l {
            Some(l) => write!(f, "(n={}, k={}, l={})", self.n, self.k, l),
            None => write!(f, "(n={}, k={})", self.n, self.k),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `n! / ((k-1)! (n-k)!)`
fn single_coefficient(n: usize, k: usize) -> f64 {
    n as f64 * binomial(n - 1, k - 1)
}

/// `n! / ((k-1)! (l-k-1)! (n-l)!)` for `k < l`
fn pair_coefficient(n: usize, k: usize, l: usize) -> f64 {
    single_coefficient(n, k) * (n - k) as f64 * binomial(n - k - 1, l - k - 1)
}

/// Density of the k-th order statistic of n standard normals.
pub fn os_density(n: usize, k: usize, x: f64) -> f64 {
    single_coefficient(n, k)
        * normal::cdf(x).powi(k as i32 - 1)
        * normal::sf(x).powi((n - k) as i32)
        * normal::pdf(x)
}

fn expect_single<G: Fn(f64) -> f64>(
    key: MomentKey,
    weight: G,
    tol: f64,
) -> Result<f64, MomentError> {
    let coef = single_coefficient(key.n, key.k);
    let (lo, hi) = ((key.k - 1) as i32, (key.n - key.k) as i32);
    let opts = QuadOptions {
        abs_tol: tol / coef,
        ..Default::default()
    };
    let r = integrate(
        |x| weight(x) * normal::cdf(x).powi(lo) * normal::sf(x).powi(hi) * normal::pdf(x),
        -LIMIT,
        LIMIT,
        &opts,
    );
    if !r.converged {
        return Err(MomentError::NumericFailure {
            key,
            achieved: r.error * coef,
        });
    }
    Ok(r.value * coef)
}

/// E[X_{k:n}] for standard normal samples.
pub fn os_mean(n: usize, k: usize) -> Result<f64, MomentError> {
    let key = MomentKey::single(n, k).check()?;
    expect_single(key, |x| x, MEAN_TOL)
}

/// Var[X_{k:n}] for standard normal samples.
pub fn os_variance(n: usize, k: usize) -> Result<f64, MomentError> {
    let key = MomentKey::single(n, k).check()?;
    let mean = expect_single(key, |x| x, MEAN_TOL)?;
    expect_single(key, |x| (x - mean) * (x - mean), VAR_TOL)
}

/// Cov[X_{k:n}, X_{l:n}] for `k <= l`, by nested quadrature over the joint
/// density on `x < y`.
pub fn os_covariance(n: usize, k: usize, l: usize) -> Result<f64, MomentError> {
    let key = MomentKey::pair(n, k, l).check()?;
    if k == l {
        return os_variance(n, k);
    }
    let mean_k = os_mean(n, k)?;
    let mean_l = os_mean(n, l)?;
    covariance_with_means(key, mean_k, mean_l)
}

pub(crate) fn covariance_with_means(
    key: MomentKey,
    mean_k: f64,
    mean_l: f64,
) -> Result<f64, MomentError> {
    let (n, k, l) = (key.n, key.k, key.l.expect("pair key"));
    let coef = pair_coefficient(n, k, l);
    let below = (k - 1) as i32;
    let between = (l - k - 1) as i32;
    let above = (n - l) as i32;

    let inner_opts = QuadOptions {
        abs_tol: COV_TOL * 1e-2 / coef,
        // the absolute target sinks below rounding noise once coef is large
        rel_tol: 1e-11,
        max_intervals: 400,
        initial_pieces: 2,
    };
    let outer_opts = QuadOptions {
        abs_tol: COV_TOL / coef,
        ..Default::default()
    };
    let inner_error = Cell::new(0.0f64);
    let inner_failed = Cell::new(false);

    let outer = integrate(
        |y| {
            let cdf_y = normal::cdf(y);
            let tail = normal::sf(y).powi(above) * normal::pdf(y) * (y - mean_l);
            if tail == 0.0 {
                return 0.0;
            }
            let inner = integrate(
                |x| {
                    let gap = if x > 0.0 {
                        normal::sf(x) - normal::sf(y)
                    } else {
                        cdf_y - normal::cdf(x)
                    };
                    (x - mean_k) * normal::cdf(x).powi(below) * gap.powi(between) * normal::pdf(x)
                },
                -LIMIT,
                y,
                &inner_opts,
            );
            if !inner.converged {
                inner_failed.set(true);
            }
            inner_error.set(inner_error.get().max(inner.error * tail.abs()));
            tail * inner.value
        },
        -LIMIT,
        LIMIT,
        &outer_opts,
    );
    let achieved = (outer.error + inner_error.get() * 2.0 * LIMIT) * coef;
    if !outer.converged || inner_failed.get() {
        return Err(MomentError::NumericFailure { key, achieved });
    }
    Ok(outer.value * coef)
}
