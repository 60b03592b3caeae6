//! Order-statistic combiners for classifier ensembles.
//!
//! - [`combiner`]: max/min/median/k-th order statistic, spread and trimmed
//!   mean rules over an N x L posterior matrix.
//! - [`moments`]: means, variances and covariances of standard-Gaussian order
//!   statistics by quadrature, with a Monte Carlo cross-check.
//! - [`error_model`]: first-order boundary-offset model errors and the
//!   reduction factor of every rule, for unbiased and biased ensembles.
//! - [`sim`]: Monte Carlo simulation of the two-class boundary model.
//! - [`bench`]: MLP ensemble benchmark harness with confidence intervals.

pub mod bench;
pub mod combiner;
pub mod error_model;
pub mod moments;
pub mod sim;

pub use combiner::{
    combine, decide, ClassDecision, CombineError, CombinedPosterior, CombinerRule, PosteriorMatrix,
};
pub use moments::{build_table, MomentError, MomentKey, MomentTable};
