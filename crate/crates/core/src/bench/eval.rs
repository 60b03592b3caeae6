use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_dataset, split, train_mlp, BenchError, Dataset, Mlp, MlpConfig, SplitSpec};
use crate::combiner::{argmax, CombineError, CombinerRule, PosteriorMatrix};

/// A rule as requested on the bench command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum BenchRule {
    Fixed(CombinerRule),
    /// Trimmed mean with the cut chosen on the validation set each run.
    TrimAuto,
}

impl fmt::Display for BenchRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchRule::Fixed(rule) => rule.fmt(f),
            BenchRule::TrimAuto => f.write_str("trim:auto"),
        }
    }
}

impl FromStr for BenchRule {
    type Err = CombineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("trim:auto") {
            Ok(BenchRule::TrimAuto)
        } else {
            s.parse().map(BenchRule::Fixed)
        }
    }
}

impl From<BenchRule> for String {
    fn from(rule: BenchRule) -> Self {
        rule.to_string()
    }
}

impl TryFrom<String> for BenchRule {
    type Error = CombineError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// One N x L posterior matrix per pattern of `data`.
pub fn posterior_matrices(
    models: &[Mlp],
    data: &Dataset,
) -> Result<Vec<PosteriorMatrix>, BenchError> {
    (0..data.len())
        .map(|i| {
            let rows = models
                .iter()
                .map(|m| m.predict_posteriors(data.pattern(i)))
                .collect();
            Ok(PosteriorMatrix::new(rows)?)
        })
        .collect()
}

/// Number of patterns whose combined decision differs from the label.
pub fn misclassified(
    matrices: &[PosteriorMatrix],
    labels: &[usize],
    rule: CombinerRule,
) -> Result<usize, BenchError> {
    let mut wrong = 0;
    for (m, &label) in matrices.iter().zip(labels) {
        let combined = crate::combiner::combine(m, rule)?;
        if argmax(&combined.values) != Some(label) {
            wrong += 1;
        }
    }
    Ok(wrong)
}

/// Exhaustive search over trim windows. Fewest errors wins, then the wider
/// window, then the smaller lower cut.
pub fn select_trim_cut_from_posteriors(
    matrices: &[PosteriorMatrix],
    labels: &[usize],
) -> Result<(usize, usize), BenchError> {
    let n = matrices
        .first()
        .ok_or_else(|| BenchError::InvalidConfig("empty validation set".into()))?
        .n_classifiers();
    let mut best: Option<((usize, usize), usize)> = None;
    for width in (0..n).rev() {
        for lo in 1..=n - width {
            let cut = (lo, lo + width);
            let wrong = misclassified(matrices, labels, CombinerRule::Trim(cut.0, cut.1))?;
            if best.is_none_or(|(_, b)| wrong < b) {
                best = Some((cut, wrong));
            }
        }
    }
    Ok(best.expect("n >= 1").0)
}

pub fn select_trim_cut(
    ensemble: &[Mlp],
    validation: &Dataset,
) -> Result<(usize, usize), BenchError> {
    if ensemble.is_empty() || validation.is_empty() {
        return Err(BenchError::InvalidConfig(
            "need models and validation patterns".into(),
        ));
    }
    let matrices = posterior_matrices(ensemble, validation)?;
    select_trim_cut_from_posteriors(&matrices, validation.labels())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub n_classifiers: usize,
    pub rules: Vec<BenchRule>,
    pub runs: usize,
    pub mlp: MlpConfig,
    /// Train the last `N/2` classifiers for half their best epoch count.
    pub variability: bool,
    pub seed: u64,
    /// Reuse one split for every run; weights are still reseeded.
    pub fixed_split: bool,
    /// Fractions only; split seeds are derived from `seed`.
    pub split: SplitSpec,
}

impl EvalConfig {
    pub fn new(n_classifiers: usize, rules: Vec<BenchRule>, runs: usize) -> Self {
        Self {
            n_classifiers,
            rules,
            runs,
            mlp: MlpConfig::default(),
            variability: false,
            seed: 0,
            fixed_split: false,
            split: SplitSpec::default(),
        }
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.runs < 2 {
            return Err(BenchError::InvalidConfig(format!(
                "need at least 2 runs, got {}",
                self.runs
            )));
        }
        if self.n_classifiers == 0 {
            return Err(BenchError::InvalidConfig(
                "need at least one classifier".into(),
            ));
        }
        if self.rules.is_empty() {
            return Err(BenchError::InvalidConfig("no rules requested".into()));
        }
        for rule in &self.rules {
            if let BenchRule::Fixed(r) = rule {
                r.validate(self.n_classifiers)?;
            }
        }
        self.mlp.validate()
    }

    fn early_stop_fraction(&self, classifier: usize) -> f64 {
        let slow = self.n_classifiers / 2;
        if self.variability && classifier >= self.n_classifiers - slow {
            0.5
        } else {
            self.mlp.early_stop_fraction
        }
    }
}

/// Mean test error over runs with a normal-approximation 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean_error_pct: f64,
    pub ci95_halfwidth: f64,
    pub per_run: Vec<f64>,
}

impl ErrorSummary {
    fn from_runs(per_run: Vec<f64>) -> Self {
        let n = per_run.len() as f64;
        let mean = per_run.iter().sum::<f64>() / n;
        let var = per_run.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Self {
            mean_error_pct: mean,
            ci95_halfwidth: 1.96 * var.sqrt() / n.sqrt(),
            per_run,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub rule: BenchRule,
    #[serde(flatten)]
    pub summary: ErrorSummary,
    /// Most frequent validation-selected cut, for `trim:auto`.
    pub modal_cut: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: usize,
    pub n_classifiers: usize,
    pub variability: bool,
    pub per_rule: Vec<RuleReport>,
    /// Mean test error of the individual classifiers, averaged per run.
    pub per_classifier: ErrorSummary,
    pub chosen_trim: Option<(usize, usize)>,
    /// Validation-selected trim cut of every run, when `trim:auto` was requested.
    pub trim_cuts: Vec<(usize, usize)>,
}

impl EvalReport {
    pub fn rule(&self, rule: BenchRule) -> Option<&RuleReport> {
        self.per_rule.iter().find(|r| r.rule == rule)
    }
}

struct RunOutcome {
    rule_errors: Vec<f64>,
    single_error: f64,
    cut: Option<(usize, usize)>,
}

fn mix(seed: u64, run: usize, slot: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add((run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((slot as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pct(wrong: usize, total: usize) -> f64 {
    100.0 * wrong as f64 / total as f64
}

fn run_once(dataset: &Dataset, config: &EvalConfig, run: usize) -> Result<RunOutcome, BenchError> {
    let split_seed = mix(config.seed, if config.fixed_split { 0 } else { run }, 0);
    let spec = SplitSpec {
        seed: split_seed,
        ..config.split
    };
    let (train, validation, test) = split(dataset, &spec)?;
    let models = (0..config.n_classifiers)
        .map(|m| {
            let mlp = MlpConfig {
                seed: mix(config.seed, run, m + 1),
                early_stop_fraction: config.early_stop_fraction(m),
                ..config.mlp
            };
            train_mlp(&train, &validation, &mlp).map(|t| t.model)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let test_post = posterior_matrices(&models, &test)?;
    let cut = if config.rules.contains(&BenchRule::TrimAuto) {
        Some(select_trim_cut(&models, &validation)?)
    } else {
        None
    };
    let rule_errors = config
        .rules
        .iter()
        .map(|rule| {
            let r = match rule {
                BenchRule::Fixed(r) => *r,
                BenchRule::TrimAuto => {
                    let (lo, hi) = cut.expect("cut selected");
                    CombinerRule::Trim(lo, hi)
                }
            };
            Ok(pct(
                misclassified(&test_post, test.labels(), r)?,
                test.len(),
            ))
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    let single_error = models
        .iter()
        .map(|m| m.error_rate(&test) * 100.0)
        .sum::<f64>()
        / config.n_classifiers as f64;
    Ok(RunOutcome {
        rule_errors,
        single_error,
        cut,
    })
}

/// Most frequent cut; ties go to the wider window, then the smaller lower cut.
fn modal_cut(cuts: &[(usize, usize)]) -> Option<(usize, usize)> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &c in cuts {
        *counts.entry(c).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|(a, ca), (b, cb)| {
            ca.cmp(cb)
                .then((a.1 - a.0).cmp(&(b.1 - b.0)))
                .then(b.0.cmp(&a.0))
        })
        .map(|(c, _)| c)
}

/// Runs the full protocol: per run a fresh split and fresh weights, N trained
/// classifiers and the test error of every requested rule.
pub fn evaluate(dataset: &Dataset, config: &EvalConfig) -> Result<EvalReport, BenchError> {
    config.validate()?;
    let outcomes: Vec<Result<RunOutcome, BenchError>> = (0..config.runs)
        .into_par_iter()
        .map(|run| run_once(dataset, config, run))
        .collect();
    let mut runs = Vec::with_capacity(config.runs);
    for (run, outcome) in outcomes.into_iter().enumerate() {
        runs.push(outcome.map_err(|e| BenchError::Run {
            run,
            source: Box::new(e),
        })?);
    }
    let trim_cuts: Vec<(usize, usize)> = runs.iter().filter_map(|r| r.cut).collect();
    let chosen_trim = modal_cut(&trim_cuts);
    let per_rule = config
        .rules
        .iter()
        .enumerate()
        .map(|(i, &rule)| RuleReport {
            rule,
            summary: ErrorSummary::from_runs(runs.iter().map(|r| r.rule_errors[i]).collect()),
            modal_cut: if rule == BenchRule::TrimAuto {
                chosen_trim
            } else {
                None
            },
        })
        .collect();
    Ok(EvalReport {
        runs: config.runs,
        n_classifiers: config.n_classifiers,
        variability: config.variability,
        per_rule,
        per_classifier: ErrorSummary::from_runs(runs.iter().map(|r| r.single_error).collect()),
        chosen_trim,
        trim_cuts,
    })
}

pub fn evaluate_path(
    path: impl AsRef<Path>,
    config: &EvalConfig,
) -> Result<EvalReport, BenchError> {
    evaluate(&load_dataset(path)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::two_blobs;

    fn matrix(rows: &[&[f64]]) -> PosteriorMatrix {
        PosteriorMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn bench_rule_text() {
        assert_eq!(
            "TRIM:AUTO".parse::<BenchRule>().unwrap(),
            BenchRule::TrimAuto
        );
        assert_eq!(
            "trim:2:3".parse::<BenchRule>().unwrap(),
            BenchRule::Fixed(CombinerRule::Trim(2, 3))
        );
        assert_eq!(BenchRule::TrimAuto.to_string(), "trim:auto");
        assert!("trim:auto:1".parse::<BenchRule>().is_err());
    }

    #[test]
    fn identical_models_choose_full_window() {
        let m = [
            matrix(&[&[0.6, 0.4], &[0.6, 0.4], &[0.6, 0.4]]),
            matrix(&[&[0.3, 0.7], &[0.3, 0.7], &[0.3, 0.7]]),
        ];
        assert_eq!(
            select_trim_cut_from_posteriors(&m, &[0, 1]).unwrap(),
            (1, 3)
        );
        let single = [matrix(&[&[0.6, 0.4]])];
        assert_eq!(
            select_trim_cut_from_posteriors(&single, &[1]).unwrap(),
            (1, 1)
        );
    }

    #[test]
    fn bad_extreme_is_trimmed() {
        // classifier 0 is wildly wrong on both patterns; the others are right
        let m = [
            matrix(&[&[0.0, 1.0], &[0.9, 0.4], &[0.8, 0.3], &[0.7, 0.45]]),
            matrix(&[&[1.0, 0.0], &[0.4, 0.6], &[0.3, 0.8], &[0.45, 0.55]]),
        ];
        let labels = [0, 1];
        let cut = select_trim_cut_from_posteriors(&m, &labels).unwrap();
        let chosen = misclassified(&m, &labels, CombinerRule::Trim(cut.0, cut.1)).unwrap();
        let full = misclassified(&m, &labels, CombinerRule::Trim(1, 4)).unwrap();
        assert!(chosen <= full);
        assert_eq!(chosen, 0);
    }

    #[test]
    fn two_classifier_search_space() {
        // only (2,2), the max, gets both patterns right
        let m = [
            matrix(&[&[0.9, 0.5], &[0.0, 0.5]]),
            matrix(&[&[0.5, 0.9], &[0.5, 0.0]]),
        ];
        assert_eq!(
            select_trim_cut_from_posteriors(&m, &[0, 1]).unwrap(),
            (2, 2)
        );
    }

    #[test]
    fn modal_cut_ties() {
        assert_eq!(modal_cut(&[]), None);
        assert_eq!(modal_cut(&[(2, 3), (1, 3), (2, 3)]), Some((2, 3)));
        assert_eq!(modal_cut(&[(2, 3), (1, 3)]), Some((1, 3)));
        assert_eq!(modal_cut(&[(2, 3), (1, 2)]), Some((1, 2)));
    }

    #[test]
    fn summary_statistics() {
        let s = ErrorSummary::from_runs(vec![1.0, 3.0]);
        assert_eq!(s.mean_error_pct, 2.0);
        assert!((s.ci95_halfwidth - 1.96 * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn variability_slows_the_last_half() {
        let mut c = EvalConfig::new(5, vec![BenchRule::Fixed(CombinerRule::Average)], 2);
        c.variability = true;
        let f: Vec<f64> = (0..5).map(|m| c.early_stop_fraction(m)).collect();
        assert_eq!(f, vec![1.0, 1.0, 1.0, 0.5, 0.5]);
        c.variability = false;
        assert!((0..5).all(|m| c.early_stop_fraction(m) == 1.0));
    }

    fn small_config(n: usize, rules: Vec<BenchRule>) -> EvalConfig {
        let mut c = EvalConfig::new(n, rules, 3);
        c.mlp.epochs = 15;
        c.seed = 4;
        c
    }

    #[test]
    fn full_trim_matches_average() {
        let mut ds = two_blobs(120, 2, 2.0, 1);
        ds.standardize();
        let rules = vec![
            BenchRule::Fixed(CombinerRule::Average),
            BenchRule::Fixed(CombinerRule::Trim(1, 3)),
            BenchRule::TrimAuto,
        ];
        let report = evaluate(&ds, &small_config(3, rules)).unwrap();
        assert_eq!(report.runs, 3);
        assert_eq!(report.per_rule[0].summary, report.per_rule[1].summary);
        assert_eq!(report.trim_cuts.len(), 3);
        assert!(report.per_rule[2].modal_cut.is_some());
        assert_eq!(report.per_rule[2].modal_cut, report.chosen_trim);
        for r in &report.per_rule {
            assert!(r.summary.ci95_halfwidth >= 0.0);
            assert!(r.summary.per_run.iter().all(|v| (0.0..=100.0).contains(v)));
        }
    }

    #[test]
    fn single_classifier_collapse() {
        let mut ds = two_blobs(120, 2, 2.0, 2);
        ds.standardize();
        let rules = vec![
            BenchRule::Fixed(CombinerRule::Average),
            BenchRule::Fixed(CombinerRule::Spread),
            BenchRule::Fixed(CombinerRule::Median),
            BenchRule::TrimAuto,
        ];
        let report = evaluate(&ds, &small_config(1, rules)).unwrap();
        for r in &report.per_rule {
            assert_eq!(r.summary, report.per_classifier, "{}", r.rule);
        }
    }

    #[test]
    fn deterministic_and_seeded() {
        let mut ds = two_blobs(120, 2, 2.0, 3);
        ds.standardize();
        let rules = vec![BenchRule::Fixed(CombinerRule::Median), BenchRule::TrimAuto];
        let config = small_config(3, rules);
        let a = evaluate(&ds, &config).unwrap();
        assert_eq!(a, evaluate(&ds, &config).unwrap());
        let mut fixed = config.clone();
        fixed.fixed_split = true;
        assert_ne!(evaluate(&ds, &fixed).unwrap(), a);
    }

    #[test]
    fn rejects_bad_configs() {
        let ds = two_blobs(120, 2, 2.0, 3);
        let ave = vec![BenchRule::Fixed(CombinerRule::Average)];
        assert!(evaluate(&ds, &EvalConfig::new(3, ave.clone(), 1)).is_err());
        assert!(evaluate(&ds, &EvalConfig::new(3, vec![], 2)).is_err());
        let too_wide = vec![BenchRule::Fixed(CombinerRule::Trim(1, 4))];
        assert!(matches!(
            evaluate(&ds, &EvalConfig::new(3, too_wide, 2)),
            Err(BenchError::Rule(_))
        ));
        let tiny = two_blobs(3, 2, 2.0, 3);
        assert!(matches!(
            evaluate(&tiny, &EvalConfig::new(2, ave, 2)),
            Err(BenchError::Run { run: 0, .. })
        ));
    }
}
