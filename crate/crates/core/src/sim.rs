//! Monte Carlo simulation of the two-class boundary model.
//!
//! Each trial draws Gaussian noise for both class posteriors of every
//! classifier, combines the noisy estimates per class with a rule and measures
//! the first-order added error `A(b) = s b^2 / 2` of the resulting boundary
//! offset. The single-classifier error is measured on the first classifier of
//! the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::combiner::{CombineError, CombinerRule};
use crate::error_model::{reduction_factor, ModelError};
use crate::moments::MomentTable;

pub const MIN_TRIALS: u64 = 10_000;

/// Trials per independently seeded chunk. Fixed so results do not depend on
/// the number of worker threads.
const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Rule(#[from] CombineError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_classifiers: usize,
    pub rule: CombinerRule,
    pub s: f64,
    pub noise_sigma: f64,
    /// Per-classifier `(beta_i, beta_j)` posterior biases.
    pub biases: Option<Vec<(f64, f64)>>,
    pub trials: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn unbiased(n_classifiers: usize, rule: CombinerRule, trials: u64, seed: u64) -> Self {
        Self {
            n_classifiers,
            rule,
            s: 2.0,
            noise_sigma: 0.1,
            biases: None,
            trials,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.rule.validate(self.n_classifiers)?;
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "s must be > 0, got {}",
                self.s
            )));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "noise sigma must be > 0, got {}",
                self.noise_sigma
            )));
        }
        if self.trials < MIN_TRIALS {
            return Err(SimError::InvalidConfig(format!(
                "need at least {MIN_TRIALS} trials, got {}",
                self.trials
            )));
        }
        if let Some(b) = &self.biases {
            if b.len() != self.n_classifiers {
                return Err(SimError::InvalidConfig(format!(
                    "{} bias pairs for {} classifiers",
                    b.len(),
                    self.n_classifiers
                )));
            }
            if b.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(SimError::InvalidConfig("biases must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    /// Mean combined added error.
    pub empirical_error: f64,
    /// Mean added error of the first classifier alone.
    pub single_error: f64,
    pub ratio: f64,
    /// Standard error of `ratio`.
    pub std_error: f64,
    /// Mean combined boundary offset and its standard error.
    pub mean_offset: f64,
    pub mean_offset_std_error: f64,
}

/// Raw power sums over a block of trials.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    count: f64,
    a: f64,
    u: f64,
    aa: f64,
    uu: f64,
    au: f64,
    b: f64,
    bb: f64,
}

impl Sums {
    fn add(&mut self, other: &Sums) {
        self.count += other.count;
        self.a += other.a;
        self.u += other.u;
        self.aa += other.aa;
        self.uu += other.uu;
        self.au += other.au;
        self.b += other.b;
        self.bb += other.bb;
    }
}

fn run_chunk(config: &SimConfig, chunk: u64, trials: u64) -> Sums {
    let n = config.n_classifiers;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chunk);
    let zero = vec![(0.0, 0.0); n];
    let biases = config.biases.as_deref().unwrap_or(&zero);
    let mut col_i = vec![0.0; n];
    let mut col_j = vec![0.0; n];
    let half_s = 0.5 * config.s;
    let mut sums = Sums::default();
    for _ in 0..trials {
        for m in 0..n {
            let eta_i: f64 = StandardNormal.sample(&mut rng);
            let eta_j: f64 = StandardNormal.sample(&mut rng);
            col_i[m] = biases[m].0 + eta_i * config.noise_sigma;
            col_j[m] = biases[m].1 + eta_j * config.noise_sigma;
        }
        let single = (col_i[0] - col_j[0]) / config.s;
        col_i.sort_by(f64::total_cmp);
        col_j.sort_by(f64::total_cmp);
        let b = (config.rule.apply_sorted(&col_i) - config.rule.apply_sorted(&col_j)) / config.s;
        let a = half_s * b * b;
        let u = half_s * single * single;
        sums.count += 1.0;
        sums.a += a;
        sums.u += u;
        sums.aa += a * a;
        sums.uu += u * u;
        sums.au += a * u;
        sums.b += b;
        sums.bb += b * b;
    }
    sums
}

/// Simulates `config.trials` trials. Deterministic in `config`.
pub fn simulate(config: &SimConfig) -> Result<SimResult, SimError> {
    config.validate()?;
    let chunks = config.trials.div_ceil(CHUNK);
    let parts: Vec<Sums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(config.trials - c * CHUNK);
            run_chunk(config, c, len)
        })
        .collect();
    let mut total = Sums::default();
    for p in &parts {
        total.add(p);
    }
    Ok(summarize(&total))
}

fn summarize(t: &Sums) -> SimResult {
    let m = t.count;
    let mean_a = t.a / m;
    let mean_u = t.u / m;
    let var_a = (t.aa / m - mean_a * mean_a).max(0.0);
    let var_u = (t.uu / m - mean_u * mean_u).max(0.0);
    let cov_au = t.au / m - mean_a * mean_u;
    let ratio = mean_a / mean_u;
    let ratio_var =
        (var_a - 2.0 * ratio * cov_au + ratio * ratio * var_u).max(0.0) / (mean_u * mean_u * m);
    let mean_b = t.b / m;
    let var_b = (t.bb / m - mean_b * mean_b).max(0.0);
    SimResult {
        empirical_error: mean_a,
        single_error: mean_u,
        ratio,
        std_error: ratio_var.sqrt(),
        mean_offset: mean_b,
        mean_offset_std_error: (var_b / m).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub rule: CombinerRule,
    pub n: usize,
    pub ratio: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub trials: u64,
    pub seed: u64,
    pub entries: Vec<SweepEntry>,
    /// `(rule, n)` combinations not defined for that ensemble size.
    pub skipped: Vec<(CombinerRule, usize)>,
}

impl SweepReport {
    pub fn max_abs_z(&self) -> f64 {
        self.entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max)
    }
}

/// Seed for one sweep cell, independent of where the cell sits in the sweep.
fn cell_seed(seed: u64, rule: CombinerRule, n: usize) -> u64 {
    // FNV-1a over the rule text and size
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in rule.to_string().bytes().chain(n.to_le_bytes()) {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

/// `z` of an empirical ratio against an exact analytic factor.
pub fn z_score(ratio: f64, std_error: f64, analytic: f64) -> f64 {
    let diff = ratio - analytic;
    if std_error > 0.0 {
        diff / std_error
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Simulates every defined `(rule, n)` pair with unbiased noise and compares
/// each ratio to its analytic reduction factor.
pub fn sweep(
    rules: &[CombinerRule],
    n_values: &[usize],
    trials: u64,
    seed: u64,
    table: &MomentTable,
) -> Result<SweepReport, SimError> {
    if rules.is_empty() || n_values.is_empty() {
        return Err(SimError::InvalidConfig(
            "sweep needs at least one rule and one n".into(),
        ));
    }
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for &rule in rules {
        for &n in n_values {
            if rule.validate(n).is_err() {
                skipped.push((rule, n));
                continue;
            }
            let analytic = reduction_factor(rule, n, table)?.value;
            let config = SimConfig::unbiased(n, rule, trials, cell_seed(seed, rule, n));
            let r = simulate(&config)?;
            entries.push(SweepEntry {
                rule,
                n,
                ratio: r.ratio,
                std_error: r.std_error,
                analytic,
                z: z_score(r.ratio, r.std_error, analytic),
            });
        }
    }
    Ok(SweepReport {
        trials,
        seed,
        entries,
        skipped,
    })
}
