//! Ensemble benchmark harness: repeated train/validate/test runs of small MLP
//! ensembles, scored per combining rule with 95% confidence intervals.

mod dataset;
mod eval;
mod mlp;

use thiserror::Error;

use crate::combiner::CombineError;

pub use dataset::{
    load_dataset, parse_dataset, split, split_indices, two_blobs, Dataset, SplitSpec,
};
pub use eval::{
    evaluate, evaluate_path, misclassified, posterior_matrices, select_trim_cut,
    select_trim_cut_from_posteriors, BenchRule, ErrorSummary, EvalConfig, EvalReport, RuleReport,
};
pub use mlp::{train_mlp, Mlp, MlpConfig, TrainedMlp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("io error: {0}")]
    Io(String),
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("dataset has a single class")]
    SingleClass,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}")]
    TrainingFailure { epoch: usize },
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<BenchError>,
    },
    #[error(transparent)]
    Rule(#[from] CombineError),
}
