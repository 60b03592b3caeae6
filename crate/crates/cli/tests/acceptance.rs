//! End-to-end acceptance checks, one test per criterion. Each prints a
//! `criterion N: PASS|FAIL` line before asserting.

#[path = "../../core/tests/golden/mod.rs"]
mod golden;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use oscomb::bench::two_blobs;
use oscomb::error_model::reduction_factor;
use oscomb::{build_table, combine, CombinerRule, MomentTable, PosteriorMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn oscomb(cache: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_oscomb"))
        .arg("--quiet")
        .arg("--cache")
        .arg(cache)
        .args(args)
        .output()
        .expect("run oscomb");
    let stderr = String::from_utf8_lossy(&out.stderr);
    if !stderr.is_empty() {
        eprintln!("{stderr}");
    }
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
    )
}

fn read_report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `(kind, indices) -> value` from `moments` text output.
fn parse_moments(text: &str) -> HashMap<(String, Vec<usize>), f64> {
    text.lines()
        .filter(|l| ["mu ", "alpha ", "cov "].iter().any(|p| l.starts_with(p)))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let (value, idx) = f[1..].split_last().unwrap();
            (
                (
                    f[0].to_string(),
                    idx.iter().map(|i| i.parse().unwrap()).collect(),
                ),
                value.parse().unwrap(),
            )
        })
        .collect()
}

fn cli_moments(n_max: usize) -> HashMap<(String, Vec<usize>), f64> {
    let dir = TempDir::new().unwrap();
    let n = n_max.to_string();
    let (code, stdout) = oscomb(&dir.path().join("m.txt"), &["moments", "--n-max", &n]);
    assert_eq!(code, 0);
    parse_moments(&stdout)
}

fn table() -> &'static MomentTable {
    static TABLE: OnceLock<MomentTable> = OnceLock::new();
    TABLE.get_or_init(|| build_table(10).unwrap())
}

/// Writes straight to the stderr handle so the verdict shows even when the
/// harness captures output of passing tests.
#[allow(clippy::explicit_write)]
fn report(criterion: u32, failures: &[String], summary: &str) {
    let line = if failures.is_empty() {
        format!("criterion {criterion}: PASS {summary}")
    } else {
        format!(
            "criterion {criterion}: FAIL {summary}; {} mismatches: {}",
            failures.len(),
            failures.join("; ")
        )
    };
    writeln!(std::io::stderr(), "{line}").unwrap();
    assert!(failures.is_empty(), "criterion {criterion} failed");
}

#[test]
fn criterion_1_alpha_table() {
    let m = cli_moments(10);
    let mut failures = Vec::new();
    for &(n, k, expected) in golden::ALPHA {
        for rank in [k, n + 1 - k] {
            let got = m[&("alpha".to_string(), vec![n, rank])];
            if (got - expected).abs() > 0.0005 {
                failures.push(format!("alpha({n},{rank})={got:.6} vs {expected:.3}"));
            }
        }
    }
    report(
        1,
        &failures,
        &format!("{} alpha values within 0.0005", golden::ALPHA.len()),
    );
}

#[test]
fn criterion_2_covariance_table() {
    let m = cli_moments(9);
    let mut failures = Vec::new();
    for &(n, k, l, expected) in golden::B_COV {
        let got = m[&("cov".to_string(), vec![n, k, l])];
        if (got - expected).abs() > 0.001 {
            failures.push(format!("B({n};{k},{l})={got:.6} vs {expected:.3}"));
        }
    }
    report(
        2,
        &failures,
        &format!("{} covariances within 0.001", golden::B_COV.len()),
    );
}

#[test]
fn criterion_3_spread_table() {
    let t = table();
    let mut failures = Vec::new();
    for &(n, spread, minmax) in golden::SPREAD {
        let got = reduction_factor(CombinerRule::Spread, n, t).unwrap().value;
        if (got - spread).abs() > 0.001 {
            failures.push(format!("spread n={n}: {got:.6} vs {spread:.3}"));
        }
        let alpha = t.alpha(n, 1).unwrap();
        for rule in [CombinerRule::Max, CombinerRule::Min] {
            let got = reduction_factor(rule, n, t).unwrap().value;
            if got != alpha || (got - minmax).abs() > 0.001 {
                failures.push(format!("{rule} n={n}: {got:.6} vs {minmax:.3}"));
            }
        }
    }
    report(3, &failures, "spread and min/max columns for n=2..10");
}

#[test]
fn criterion_4_trim_table() {
    let t = table();
    let mut failures = Vec::new();
    for &(n, _, trim, _) in golden::TRIM {
        let got = reduction_factor(CombinerRule::Trim(2, n - 1), n, t)
            .unwrap()
            .value;
        if (got - trim).abs() > 0.002 {
            failures.push(format!("trim:2:{} n={n}: {got:.6} vs {trim:.3}", n - 1));
        }
    }
    for n in 1..=10 {
        let got = reduction_factor(CombinerRule::Average, n, t).unwrap().value;
        if got != 1.0 / n as f64 {
            failures.push(format!("ave n={n}: {got} vs 1/{n}"));
        }
    }
    report(
        4,
        &failures,
        "trim 2..n-1 within 0.002 for n=3..9, ave exactly 1/n",
    );
}

#[test]
fn criterion_5_theory_vs_simulation() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("m.txt");
    let out = dir.path().join("sim.json");
    let mut failures = Vec::new();
    let mut cells = 0;
    let mut worst: f64 = 0.0;
    for n in [2usize, 3, 5, 8, 10] {
        let mut rules = vec![
            "max".to_string(),
            "min".to_string(),
            "med".to_string(),
            "spread".to_string(),
        ];
        if n >= 3 {
            rules.push(format!("trim:2:{}", n - 1));
        }
        for rule in rules {
            let ns = n.to_string();
            let (code, _) = oscomb(
                &cache,
                &[
                    "simulate",
                    "--rule",
                    &rule,
                    "--n",
                    &ns,
                    "--trials",
                    "1000000",
                    "--seed",
                    "5",
                    "--out",
                    out.to_str().unwrap(),
                ],
            );
            assert!(code == 0 || code == 3, "simulate exited {code}");
            let r = read_report(&out)["results"].clone();
            let ratio = r["simulation"]["ratio"].as_f64().unwrap();
            let se = r["simulation"]["std_error"].as_f64().unwrap();
            let analytic = r["analytic"].as_f64().unwrap();
            let z = (ratio - analytic) / se;
            worst = worst.max(z.abs());
            cells += 1;
            if (ratio - analytic).abs() > 4.0 * se {
                failures.push(format!(
                    "{rule} n={n}: {ratio:.5} vs {analytic:.5} (z={z:.2})"
                ));
            }
        }
    }
    report(
        5,
        &failures,
        &format!("{cells} cells at 1e6 trials, max |z|={worst:.2}"),
    );
}

#[test]
fn criterion_6_internal_consistency() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.json");
    let (code, stdout) = oscomb(
        &dir.path().join("m.txt"),
        &[
            "moments",
            "--n-max",
            "10",
            "--verify-mc",
            "10000000",
            "--verify-keys",
            "10",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    let mut failures = Vec::new();
    if code != 0 {
        failures.push(format!("moments exited {code}"));
    }
    let r = read_report(&out)["results"].clone();
    for (i, res) in r["sum_rule_residuals"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
    {
        let res = res.as_f64().unwrap_or(f64::NAN);
        if res.is_nan() || res.abs() > 1e-4 {
            failures.push(format!("sum rule n={}: residual {res:e}", i + 1));
        }
    }
    let m = parse_moments(&stdout);
    let key = |kind: &str, idx: Vec<usize>| m[&(kind.to_string(), idx)];
    for n in 1..=10 {
        for k in 1..=n {
            let mirror = n + 1 - k;
            let mu = key("mu", vec![n, k]) + key("mu", vec![n, mirror]);
            let alpha = key("alpha", vec![n, k]) - key("alpha", vec![n, mirror]);
            if mu.abs() > 1e-6 || alpha.abs() > 1e-6 {
                failures.push(format!("symmetry n={n} k={k}"));
            }
            for l in k + 1..=n {
                let b = key("cov", vec![n, k, l]) - key("cov", vec![n, n + 1 - l, mirror]);
                if b.abs() > 1e-6 {
                    failures.push(format!("cov symmetry n={n} ({k},{l})"));
                }
            }
        }
    }
    let checks = r["mc_checks"].as_array().unwrap();
    if checks.len() != 10 {
        failures.push(format!("{} MC checks instead of 10", checks.len()));
    }
    for c in checks {
        let z = c["z"].as_f64().unwrap();
        if z.is_nan() || z.abs() > 5.0 {
            failures.push(format!("{}: z={z:.2}", c["query"]));
        }
    }
    report(
        6,
        &failures,
        "sum rule, symmetry and 10 keys against 1e7-sample Monte Carlo",
    );
}

#[test]
fn criterion_7_combiner_algebra() {
    const CASES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut failures = Vec::new();
    let apply = |m: &PosteriorMatrix, rule| combine(m, rule).unwrap().values;
    for case in 0..CASES {
        let n = rng.random_range(1..=12);
        let l = rng.random_range(2..=5);
        let values: Vec<f64> = (0..n * l).map(|_| rng.random::<f64>()).collect();
        let m = PosteriorMatrix::from_flat(values.clone(), n, l).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<f64> = order
            .iter()
            .flat_map(|&r| values[r * l..(r + 1) * l].iter().copied())
            .collect();
        let p = PosteriorMatrix::from_flat(permuted, n, l).unwrap();

        let mut fail = |what: String| {
            if failures.len() < 10 {
                failures.push(format!("case {case} n={n}: {what}"));
            }
        };
        let ave = apply(&m, CombinerRule::Average);
        if apply(&m, CombinerRule::Trim(1, n)) != ave {
            fail("trim:1:N != ave".into());
        }
        if n == 2 && apply(&m, CombinerRule::Spread) != ave {
            fail("spread != ave".into());
        }
        let mut rules = vec![
            CombinerRule::Average,
            CombinerRule::Max,
            CombinerRule::Min,
            CombinerRule::Median,
            CombinerRule::Spread,
        ];
        for k in 1..=n {
            if apply(&m, CombinerRule::Trim(k, k)) != apply(&m, CombinerRule::KthOs(k)) {
                fail(format!("trim:{k}:{k} != os:{k}"));
            }
            rules.push(CombinerRule::KthOs(k));
            rules.push(CombinerRule::Trim(k, n));
            rules.push(CombinerRule::Trim(1, k));
        }
        for rule in rules {
            let a = apply(&m, rule);
            let b = apply(&p, rule);
            if a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
                fail(format!("{rule} not permutation invariant"));
            }
            for (class, v) in a.iter().enumerate() {
                let lo = m.column(class).fold(f64::INFINITY, f64::min);
                let hi = m.column(class).fold(f64::NEG_INFINITY, f64::max);
                if !(lo <= *v && *v <= hi) {
                    fail(format!("{rule} class {class} outside [{lo}, {hi}]"));
                }
            }
        }
    }
    report(
        7,
        &failures,
        &format!("{CASES} random matrices, identities, invariance and sandwich"),
    );
}

#[test]
fn criterion_8_bench_protocol() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("blobs.csv");
    std::fs::write(&data, two_blobs(800, 2, 2.0, 2024).to_csv()).unwrap();
    let out = dir.path().join("bench.json");
    let (code, stdout) = oscomb(
        &dir.path().join("m.txt"),
        &[
            "bench",
            "--data",
            data.to_str().unwrap(),
            "--n",
            "8",
            "--runs",
            "20",
            "--variability",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    print!("{stdout}");
    assert_eq!(code, 0);
    let r = read_report(&out)["results"].clone();
    let single = r["per_classifier"]["mean_error_pct"].as_f64().unwrap();
    let mean = |name: &str| {
        r["per_rule"]
            .as_array()
            .unwrap()
            .iter()
            .find(|x| x["rule"] == name)
            .unwrap_or_else(|| panic!("no {name} in report"))["mean_error_pct"]
            .as_f64()
            .unwrap()
    };
    let ave = mean("ave");
    let mut failures = Vec::new();
    for name in ["spread", "trim:auto"] {
        if mean(name) > ave + 0.5 {
            failures.push(format!("(a) {name} {:.3}% vs ave {ave:.3}%", mean(name)));
        }
    }
    for rule in r["per_rule"].as_array().unwrap() {
        let name = rule["rule"].as_str().unwrap();
        let err = rule["mean_error_pct"].as_f64().unwrap();
        if err > single {
            failures.push(format!("(b) {name} {err:.3}% vs single {single:.3}%"));
        }
        let ci = rule["ci95_halfwidth"].as_f64();
        if !ci.is_some_and(|c| c.is_finite() && c >= 0.0) {
            failures.push(format!("(c) {name} has no CI"));
        }
    }
    if r["per_rule"].as_array().unwrap().len() != 6 {
        failures.push("(c) not every default rule reported".into());
    }
    report(
        8,
        &failures,
        &format!("ave {ave:.3}%, single {single:.3}%, 6 rules with CIs"),
    );
}

#[test]
fn criterion_9_determinism() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("m.txt");
    let data = dir.path().join("blobs.csv");
    std::fs::write(&data, two_blobs(200, 2, 2.0, 3).to_csv()).unwrap();
    let out = dir.path().join("r.json");
    let out_s = out.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "moments",
            "--n-max",
            "5",
            "--verify-mc",
            "20000",
            "--seed",
            "3",
        ],
        vec![
            "reduce",
            "--rule",
            "trim:2:5",
            "--n",
            "6",
            "--biased",
            "--beta-bar",
            "0.02",
        ],
        vec![
            "simulate", "--rule", "spread", "--n", "4", "--trials", "50000", "--seed", "9",
        ],
        vec![
            "bench",
            "--data",
            data.to_str().unwrap(),
            "--n",
            "4",
            "--runs",
            "3",
            "--epochs",
            "10",
            "--variability",
            "--seed",
            "4",
        ],
    ];
    let mut failures = Vec::new();
    for args in &commands {
        let mut payloads = Vec::new();
        for _ in 0..2 {
            let mut full = args.clone();
            full.extend(["--out", out_s]);
            let (code, stdout) = oscomb(&cache, &full);
            assert_eq!(code, 0, "{args:?}");
            let r = read_report(&out);
            payloads.push((
                serde_json::to_string(&r["parameters"]).unwrap(),
                serde_json::to_string(&r["results"]).unwrap(),
                stdout,
            ));
        }
        if payloads[0] != payloads[1] {
            failures.push(format!("{} differs between runs", args[0]));
        }
    }
    report(
        9,
        &failures,
        "moments, reduce, simulate and bench repeat byte-identically",
    );
}
