use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use serde_json::json;

use oscomb::bench::{evaluate_path, BenchError, BenchRule, EvalConfig, MlpConfig};
use oscomb::error_model::{
    os_error_biased, reduction_factor, single_model_error, spread_error_biased, trim_error_biased,
    BiasStats, BoundarySpec, ModelError,
};
use oscomb::moments::{mc_oracle, MomentQuery};
use oscomb::sim::{simulate as run_simulation, z_score, SimConfig, SimError, MIN_TRIALS};
use oscomb::{CombinerRule, MomentTable};

use crate::cache::{moment_error, table_for};
use crate::{CliError, Context, Outcome};

/// Largest tolerated |z| between quadrature or theory and simulation.
const Z_LIMIT: f64 = 5.0;

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::TableCoverage(_) => CliError::Numeric(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

fn check_rule(rule: CombinerRule, n: usize) -> Result<(), CliError> {
    rule.validate(n).map_err(|e| CliError::Usage(e.to_string()))
}

fn needs_table(rule: CombinerRule, n: usize) -> bool {
    rule != CombinerRule::Average && n > 1
}

fn table_if_needed(rule: CombinerRule, n: usize, ctx: &Context) -> Result<MomentTable, CliError> {
    if needs_table(rule, n) {
        table_for(n, ctx)
    } else {
        Ok(MomentTable::default())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    /// Largest ensemble size to tabulate.
    #[arg(long)]
    pub n_max: usize,
    /// Cross-check randomly chosen entries with this many Monte Carlo samples.
    #[arg(long, value_name = "SAMPLES")]
    pub verify_mc: Option<usize>,
    /// Number of entries to cross-check.
    #[arg(long, default_value_t = 10, requires = "verify_mc")]
    pub verify_keys: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct McCheck {
    query: String,
    quadrature: f64,
    estimate: f64,
    std_error: f64,
    z: f64,
}

pub fn moments(args: &MomentsArgs, ctx: &Context) -> Result<Outcome, CliError> {
    if args.n_max == 0 {
        return Err(CliError::Usage("--n-max must be at least 1".into()));
    }
    let table = table_for(args.n_max, ctx)?;
    let text = table.to_text(Some(args.n_max));
    print!("{text}");

    let mut checks = Vec::new();
    let mut violation = None;
    if let Some(samples) = args.verify_mc {
        for (i, q) in MomentQuery::sample(args.n_max, args.verify_keys, args.seed)
            .into_iter()
            .enumerate()
        {
            ctx.progress(&format!("sampling {q}"));
            let quad = q.tabulated(&table).expect("table covers sampled key");
            let mc =
                mc_oracle(q, samples, args.seed.wrapping_add(i as u64)).map_err(moment_error)?;
            let z = z_score(mc.estimate, mc.std_error, quad);
            println!(
                "mc {q} quad={quad:.11e} mc={:.11e} se={:.3e} z={z:.3}",
                mc.estimate, mc.std_error
            );
            if z.abs() > Z_LIMIT && violation.is_none() {
                violation = Some(format!(
                    "{q}: quadrature and Monte Carlo differ by {z:.2} std errors"
                ));
            }
            checks.push(McCheck {
                query: q.to_string(),
                quadrature: quad,
                estimate: mc.estimate,
                std_error: mc.std_error,
                z,
            });
        }
    }
    let residuals: Vec<f64> = (1..=args.n_max)
        .map(|n| table.sum_rule_residual(n).unwrap_or(f64::NAN))
        .collect();
    Ok(Outcome {
        results: json!({
            "n_max": args.n_max,
            "table": text,
            "sum_rule_residuals": residuals,
            "mc_checks": checks,
        }),
        violation,
    })
}

#[derive(Debug, Args, Serialize)]
pub struct ReduceArgs {
    #[arg(long)]
    pub rule: CombinerRule,
    #[arg(long)]
    pub n: usize,
    /// Also report the absolute model error with classifier biases.
    #[arg(long)]
    pub biased: bool,
    /// Std dev of a single classifier's boundary offset.
    #[arg(long, default_value_t = 0.1)]
    pub sigma_b: f64,
    /// Spread of the classifiers' mean offsets.
    #[arg(long, default_value_t = 0.0)]
    pub sigma_beta: f64,
    /// Mean offset across classifiers; also the surviving trim and spread offset.
    #[arg(long, default_value_t = 0.0)]
    pub beta_bar: f64,
    /// Mean offset of the single reference classifier; defaults to --beta-bar.
    #[arg(long)]
    pub beta_m: Option<f64>,
    /// Posterior slope difference at the ideal boundary.
    #[arg(long, default_value_t = 2.0)]
    pub s: f64,
}

pub fn reduce(args: &ReduceArgs, ctx: &Context) -> Result<Outcome, CliError> {
    check_rule(args.rule, args.n)?;
    let table = table_if_needed(args.rule, args.n, ctx)?;
    let factor = reduction_factor(args.rule, args.n, &table)
        .map_err(model_error)?
        .value;
    let mut line = format!("{} n={} factor={factor:.6}", args.rule, args.n);
    let mut results = json!({ "rule": args.rule, "n": args.n, "factor": factor });
    if args.biased {
        let spec = BoundarySpec::new(
            args.s,
            args.sigma_b,
            args.beta_m.unwrap_or(args.beta_bar),
            args.sigma_beta,
            args.beta_bar,
        )
        .map_err(model_error)?;
        let combined = biased_error(args.rule, args.n, &spec, &table, args.beta_bar)?;
        let single = single_model_error(&spec, true).map_err(model_error)?;
        line.push_str(&format!(
            " model_error={combined:.6e} single_error={single:.6e}"
        ));
        results["model_error"] = json!(combined);
        results["single_error"] = json!(single);
    }
    println!("{line}");
    Ok(Outcome {
        results,
        violation: None,
    })
}

/// Biased model error of `rule`, with `offset` the bias surviving a trimmed
/// mean or spread.
fn biased_error(
    rule: CombinerRule,
    n: usize,
    spec: &BoundarySpec,
    table: &MomentTable,
    offset: f64,
) -> Result<f64, CliError> {
    let factor = reduction_factor(rule, n, table).map_err(model_error)?.value;
    match rule {
        CombinerRule::Average | CombinerRule::Trim(..) => trim_error_biased(spec, factor, offset),
        CombinerRule::Spread => spread_error_biased(spec, table, n, offset),
        _ => os_error_biased(spec, factor),
    }
    .map_err(model_error)
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub rule: CombinerRule,
    #[arg(long)]
    pub n: usize,
    /// Std dev of the per-class posterior noise.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    pub s: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One `beta_i beta_j` pair per line, one line per classifier.
    #[arg(long, value_name = "PATH")]
    pub bias_file: Option<PathBuf>,
}

pub fn read_bias_file(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || {
            CliError::Usage(format!(
                "{} line {}: expected `beta_i beta_j`",
                path.display(),
                i + 1
            ))
        };
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match fields[..] {
            [a, b] if a.is_finite() && b.is_finite() => pairs.push((a, b)),
            _ => return Err(bad()),
        }
    }
    Ok(pairs)
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Model(m) => model_error(m),
        _ => CliError::Usage(e.to_string()),
    }
}

pub fn simulate(args: &SimulateArgs, ctx: &Context) -> Result<Outcome, CliError> {
    check_rule(args.rule, args.n)?;
    if args.trials < MIN_TRIALS {
        return Err(CliError::Usage(format!(
            "--trials must be at least {MIN_TRIALS}"
        )));
    }
    let biases = args.bias_file.as_deref().map(read_bias_file).transpose()?;
    let config = SimConfig {
        n_classifiers: args.n,
        rule: args.rule,
        s: args.s,
        noise_sigma: args.sigma,
        biases: biases.clone(),
        trials: args.trials,
        seed: args.seed,
    };
    config.validate().map_err(sim_error)?;
    let table = table_if_needed(args.rule, args.n, ctx)?;
    let analytic = match &biases {
        None => {
            reduction_factor(args.rule, args.n, &table)
                .map_err(model_error)?
                .value
        }
        Some(b) => biased_ratio(args, b, &table)?,
    };
    ctx.progress(&format!("simulating {} trials", args.trials));
    let result = run_simulation(&config).map_err(sim_error)?;
    let z = z_score(result.ratio, result.std_error, analytic);
    println!(
        "{} n={} ratio={:.6} se={:.6} analytic={analytic:.6} z={z:.3}",
        args.rule, args.n, result.ratio, result.std_error
    );
    let violation = (z.abs() > Z_LIMIT)
        .then(|| format!("simulated ratio is {z:.2} std errors from the analytic value"));
    Ok(Outcome {
        results: json!({
            "rule": args.rule,
            "n": args.n,
            "biased": biases.is_some(),
            "simulation": result,
            "analytic": analytic,
            "z": z,
        }),
        violation,
    })
}

/// Predicted combined-to-single error ratio for fixed classifier biases.
fn biased_ratio(
    args: &SimulateArgs,
    biases: &[(f64, f64)],
    table: &MomentTable,
) -> Result<f64, CliError> {
    let stats = BiasStats::from_pairs(biases, args.s).map_err(model_error)?;
    let sigma_b = args.sigma * std::f64::consts::SQRT_2 / args.s;
    let beta_single = (biases[0].0 - biases[0].1) / args.s;
    let spec = stats.to_spec(sigma_b, beta_single).map_err(model_error)?;
    let offset = match args.rule {
        CombinerRule::Average => stats.beta_trim(1, args.n),
        CombinerRule::Trim(lo, hi) => stats.beta_trim(lo, hi),
        _ => Ok(stats.beta_spread()),
    }
    .map_err(model_error)?;
    let combined = biased_error(args.rule, args.n, &spec, table, offset)?;
    let single = single_model_error(&spec, true).map_err(model_error)?;
    Ok(combined / single)
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Headerless CSV, integer class label in the last column.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Classifiers per ensemble.
    #[arg(long)]
    pub n: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ave,max,min,med,spread,trim:auto"
    )]
    pub rules: Vec<BenchRule>,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Train the last half of each ensemble for half as long.
    #[arg(long)]
    pub variability: bool,
    #[arg(long, default_value_t = MlpConfig::default().hidden_units)]
    pub hidden: usize,
    #[arg(long, default_value_t = MlpConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = MlpConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep one train/validation/test split for every run.
    #[arg(long)]
    pub fixed_split: bool,
}

fn bench_error(e: BenchError) -> CliError {
    match e {
        BenchError::TrainingFailure { .. } => CliError::Numeric(e.to_string()),
        BenchError::Run { ref source, .. }
            if matches!(**source, BenchError::TrainingFailure { .. }) =>
        {
            CliError::Numeric(e.to_string())
        }
        _ => CliError::Usage(e.to_string()),
    }
}

pub fn bench(args: &BenchArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let mut config = EvalConfig::new(args.n, args.rules.clone(), args.runs);
    config.mlp = MlpConfig {
        hidden_units: args.hidden,
        epochs: args.epochs,
        learning_rate: args.lr,
        ..MlpConfig::default()
    };
    config.variability = args.variability;
    config.seed = args.seed;
    config.fixed_split = args.fixed_split;
    ctx.progress(&format!(
        "training {} runs of {} classifiers",
        args.runs, args.n
    ));
    let report = evaluate_path(&args.data, &config).map_err(bench_error)?;
    for r in &report.per_rule {
        let cut = r
            .modal_cut
            .map(|(lo, hi)| format!(" cut={lo}:{hi}"))
            .unwrap_or_default();
        println!(
            "{:<10} {:7.3}% +/- {:.3}{cut}",
            r.rule.to_string(),
            r.summary.mean_error_pct,
            r.summary.ci95_halfwidth
        );
    }
    println!(
        "{:<10} {:7.3}% +/- {:.3}",
        "single", report.per_classifier.mean_error_pct, report.per_classifier.ci95_halfwidth
    );
    Ok(Outcome {
        results: serde_json::to_value(&report).map_err(|e| CliError::Usage(e.to_string()))?,
        violation: None,
    })
}
