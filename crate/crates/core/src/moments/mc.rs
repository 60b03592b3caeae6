use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{MomentError, MomentKey, MomentTable};

/// Samples per independently seeded chunk. Fixed so that results do not
/// depend on how chunks are scheduled.
const CHUNK: usize = 1 << 15;

pub const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentQuery {
    Mean { n: usize, k: usize },
    Variance { n: usize, k: usize },
    Covariance { n: usize, k: usize, l: usize },
}

impl MomentQuery {
    pub fn key(&self) -> MomentKey {
        match *self {
            MomentQuery::Mean { n, k } | MomentQuery::Variance { n, k } => MomentKey::single(n, k),
            MomentQuery::Covariance { n, k, l } => MomentKey::pair(n, k, l),
        }
    }

    /// The quadrature value of this moment in `table`.
    pub fn tabulated(&self, table: &MomentTable) -> Option<f64> {
        match *self {
            MomentQuery::Mean { n, k } => table.mu(n, k),
            MomentQuery::Variance { n, k } => table.alpha(n, k),
            MomentQuery::Covariance { n, k, l } => table.b_cov(n, k, l),
        }
    }

    /// `count` valid queries with `n <= n_max`, drawn uniformly over kinds and
    /// then ranks.
    pub fn sample(n_max: usize, count: usize, seed: u64) -> Vec<MomentQuery> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let kind = if n_max >= 2 {
                    rng.random_range(0..3)
                } else {
                    rng.random_range(0..2)
                };
                if kind == 2 {
                    let n = rng.random_range(2..=n_max);
                    let k = rng.random_range(1..n);
                    let l = rng.random_range(k + 1..=n);
                    MomentQuery::Covariance { n, k, l }
                } else {
                    let n = rng.random_range(1..=n_max);
                    let k = rng.random_range(1..=n);
                    if kind == 0 {
                        MomentQuery::Mean { n, k }
                    } else {
                        MomentQuery::Variance { n, k }
                    }
                }
            })
            .collect()
    }

    fn ranks(&self) -> (usize, usize, usize) {
        match *self {
            MomentQuery::Mean { n, k } | MomentQuery::Variance { n, k } => (n, k, k),
            MomentQuery::Covariance { n, k, l } => (n, k, l),
        }
    }
}

impl fmt::Display for MomentQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MomentQuery::Mean { n, k } => write!(f, "mu {n} {k}"),
            MomentQuery::Variance { n, k } => write!(f, "alpha {n} {k}"),
            MomentQuery::Covariance { n, k, l } => write!(f, "cov {n} {k} {l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Raw power sums of the sampled pair (x, y) = (X_{k:n}, X_{l:n}).
#[derive(Debug, Clone, Copy, Default)]
struct PowerSums {
    count: f64,
    x: f64,
    y: f64,
    xx: f64,
    yy: f64,
    xy: f64,
    xxy: f64,
    xyy: f64,
    xxyy: f64,
}

impl PowerSums {
    fn push(&mut self, x: f64, y: f64) {
        self.count += 1.0;
        self.x += x;
        self.y += y;
        self.xx += x * x;
        self.yy += y * y;
        self.xy += x * y;
        self.xxy += x * x * y;
        self.xyy += x * y * y;
        self.xxyy += x * x * y * y;
    }

    fn merge(mut self, o: &PowerSums) -> Self {
        self.count += o.count;
        self.x += o.x;
        self.y += o.y;
        self.xx += o.xx;
        self.yy += o.yy;
        self.xy += o.xy;
        self.xxy += o.xxy;
        self.xyy += o.xyy;
        self.xxyy += o.xxyy;
        self
    }
}

fn sample_chunk(n: usize, k: usize, l: usize, samples: usize, seed: u64, chunk: u64) -> PowerSums {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut draw = vec![0.0f64; n];
    let mut sums = PowerSums::default();
    for _ in 0..samples {
        for v in draw.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        draw.sort_unstable_by(f64::total_cmp);
        sums.push(draw[k - 1], draw[l - 1]);
    }
    sums
}

/// Monte Carlo estimate of a standard-Gaussian order-statistic moment from
/// `samples` sorted n-tuples, with its standard error.
///
/// Deterministic for a fixed seed regardless of thread count.
pub fn mc_oracle(query: MomentQuery, samples: usize, seed: u64) -> Result<McEstimate, MomentError> {
    let key = query.key();
    if !key.is_valid() {
        return Err(MomentError::InvalidKey(key));
    }
    if samples < MIN_SAMPLES {
        return Err(MomentError::InvalidParameter(format!(
            "at least {MIN_SAMPLES} samples required, got {samples}"
        )));
    }
    let (n, k, l) = query.ranks();
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<PowerSums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(samples - c * CHUNK);
            sample_chunk(n, k, l, len, seed, c as u64)
        })
        .collect();
    let s = partial
        .iter()
        .fold(PowerSums::default(), |acc, p| acc.merge(p));

    let m = s.count;
    let (ex, ey) = (s.x / m, s.y / m);
    let cov = s.xy / m - ex * ey;
    Ok(match query {
        MomentQuery::Mean { .. } => {
            let var = s.xx / m - ex * ex;
            McEstimate {
                estimate: ex,
                std_error: (var.max(0.0) / m).sqrt(),
            }
        }
        MomentQuery::Variance { .. } | MomentQuery::Covariance { .. } => {
            // E[(X-a)^2 (Y-b)^2] expanded in raw moments.
            let (a, b) = (ex, ey);
            let fourth = s.xxyy / m - 2.0 * b * s.xxy / m - 2.0 * a * s.xyy / m
                + b * b * s.xx / m
                + a * a * s.yy / m
                + 4.0 * a * b * s.xy / m
                - 2.0 * a * b * b * ex
                - 2.0 * a * a * b * ey
                + a * a * b * b;
            McEstimate {
                estimate: cov * m / (m - 1.0),
                std_error: ((fourth - cov * cov).max(0.0) / m).sqrt(),
            }
        }
    })
}
