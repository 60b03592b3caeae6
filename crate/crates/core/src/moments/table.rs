use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::{covariance_with_means, os_mean, os_variance, MomentError, MomentKey};

pub const MAX_TABLE_N: usize = 32;

const HEADER: &str = "# oscomb gaussian order-statistic moments v1";

/// Means (`mu`), variances (`alpha`) and covariances (`b_cov`) of standard
/// Gaussian order statistics, for every rank of every covered ensemble size.
///
/// Values are stored rounded to 12 significant digits, the same precision
/// as the text cache, so saving and reloading reproduces the table exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentTable {
    mu: BTreeMap<(usize, usize), f64>,
    alpha: BTreeMap<(usize, usize), f64>,
    b_cov: BTreeMap<(usize, usize, usize), f64>,
}

/// Rounds to the cache precision; magnitudes below the quadrature accuracy
/// are flushed to zero.
fn quantize(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        return 0.0;
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

/// Builds the full table for every `n` in `1..=n_max`.
pub fn build_table(n_max: usize) -> Result<MomentTable, MomentError> {
    if n_max == 0 || n_max > MAX_TABLE_N {
        return Err(MomentError::InvalidParameter(format!(
            "n_max must be in 1..={MAX_TABLE_N}, got {n_max}"
        )));
    }
    let mut table = MomentTable::default();
    table.extend_to(n_max)?;
    Ok(table)
}

impl MomentTable {
    /// Largest `n` for which every entry is present.
    pub fn n_max(&self) -> usize {
        (1..).take_while(|&n| self.covers(n)).last().unwrap_or(0)
    }

    pub fn covers(&self, n: usize) -> bool {
        n >= 1
            && (1..=n).all(|k| self.mu.contains_key(&(n, k)) && self.alpha.contains_key(&(n, k)))
            && (1..=n).all(|k| (k + 1..=n).all(|l| self.b_cov.contains_key(&(n, k, l))))
    }

    pub fn mu(&self, n: usize, k: usize) -> Option<f64> {
        self.mu.get(&(n, k)).copied()
    }

    pub fn alpha(&self, n: usize, k: usize) -> Option<f64> {
        self.alpha.get(&(n, k)).copied()
    }

    /// Covariance of the k-th and l-th order statistics; `k == l` gives the variance.
    pub fn b_cov(&self, n: usize, k: usize, l: usize) -> Option<f64> {
        match k.cmp(&l) {
            std::cmp::Ordering::Equal => self.alpha(n, k),
            std::cmp::Ordering::Less => self.b_cov.get(&(n, k, l)).copied(),
            std::cmp::Ordering::Greater => None,
        }
    }

    /// `sum(alpha) + 2 sum(b_cov) - n`, zero in exact arithmetic.
    pub fn sum_rule_residual(&self, n: usize) -> Option<f64> {
        let mut total = 0.0;
        for k in 1..=n {
            total += self.alpha(n, k)?;
            for l in k + 1..=n {
                total += 2.0 * self.b_cov(n, k, l)?;
            }
        }
        Some(total - n as f64)
    }

    /// Computes every missing size up to `n_max`.
    pub fn extend_to(&mut self, n_max: usize) -> Result<(), MomentError> {
        if n_max > MAX_TABLE_N {
            return Err(MomentError::InvalidParameter(format!(
                "n_max must be at most {MAX_TABLE_N}, got {n_max}"
            )));
        }
        let sizes: Vec<usize> = (1..=n_max).filter(|&n| !self.covers(n)).collect();

        let singles: Vec<MomentKey> = sizes
            .iter()
            .flat_map(|&n| (1..=n).map(move |k| MomentKey::single(n, k)))
            .collect();
        let single_values = singles
            .par_iter()
            .map(|key| Ok((os_mean(key.n, key.k)?, os_variance(key.n, key.k)?)))
            .collect::<Result<Vec<_>, MomentError>>()?;

        // Covariances reuse the unrounded means.
        let mut means = BTreeMap::new();
        for (key, &(mean, var)) in singles.iter().zip(&single_values) {
            means.insert((key.n, key.k), mean);
            self.mu.insert((key.n, key.k), quantize(mean));
            self.alpha.insert((key.n, key.k), quantize(var));
        }

        let pairs: Vec<MomentKey> = sizes
            .iter()
            .flat_map(|&n| {
                (1..=n).flat_map(move |k| (k + 1..=n).map(move |l| MomentKey::pair(n, k, l)))
            })
            .collect();
        let pair_values = pairs
            .par_iter()
            .map(|key| {
                let l = key.l.expect("pair key");
                covariance_with_means(*key, means[&(key.n, key.k)], means[&(key.n, l)])
            })
            .collect::<Result<Vec<_>, MomentError>>()?;
        for (key, value) in pairs.iter().zip(pair_values) {
            self.b_cov
                .insert((key.n, key.k, key.l.expect("pair key")), quantize(value));
        }
        Ok(())
    }

    /// Cache text for every size up to `n_limit` (all sizes when `None`):
    /// one `mu n k value`, `alpha n k value` or `cov n k l value` per line.
    pub fn to_text(&self, n_limit: Option<usize>) -> String {
        let keep = |n: usize| n_limit.is_none_or(|lim| n <= lim);
        let mut out = String::new();
        writeln!(out, "{HEADER}").unwrap();
        for (&(n, k), v) in self.mu.iter().filter(|((n, _), _)| keep(*n)) {
            writeln!(out, "mu {n} {k} {v:.11e}").unwrap();
        }
        for (&(n, k), v) in self.alpha.iter().filter(|((n, _), _)| keep(*n)) {
            writeln!(out, "alpha {n} {k} {v:.11e}").unwrap();
        }
        for (&(n, k, l), v) in self.b_cov.iter().filter(|((n, _, _), _)| keep(*n)) {
            writeln!(out, "cov {n} {k} {l} {v:.11e}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, MomentError> {
        let mut table = MomentTable::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| MomentError::Parse {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad("expected integer rank"));
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad("expected real value"));
            match fields.as_slice() {
                ["mu", n, k, v] | ["alpha", n, k, v] => {
                    let (n, k, v) = (int(n)?, int(k)?, real(v)?);
                    if !MomentKey::single(n, k).is_valid() {
                        return Err(bad("rank out of range"));
                    }
                    let map = if fields[0] == "mu" {
                        &mut table.mu
                    } else {
                        &mut table.alpha
                    };
                    map.insert((n, k), v);
                }
                ["cov", n, k, l, v] => {
                    let (n, k, l, v) = (int(n)?, int(k)?, int(l)?, real(v)?);
                    if !MomentKey::pair(n, k, l).is_valid() || k == l {
                        return Err(bad("rank pair out of range"));
                    }
                    table.b_cov.insert((n, k, l), v);
                }
                _ => return Err(bad("unrecognized entry")),
            }
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<(), MomentError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| MomentError::Io(e.to_string()))?;
        }
        std::fs::write(path, self.to_text(None)).map_err(|e| MomentError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, MomentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MomentError::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}
