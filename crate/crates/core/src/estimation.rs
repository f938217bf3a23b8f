//! Monte Carlo plumbing: confidence intervals, replica streams, the two-sample
//! Kolmogorov-Smirnov statistic, and the birth-death oracle for M/M/1+M.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// 97.5% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalKind {
    Wilson,
    StudentT,
}

/// Point estimate with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_error: f64,
    pub n: usize,
    pub interval: IntervalKind,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Wilson score interval for `successes` out of `n` trials.
pub fn proportion(successes: usize, n: usize) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::EmptyInput("proportion over zero trials"));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Ok(Estimate {
        point: p,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
        std_error: (p * (1.0 - p) / nf).sqrt(),
        n,
        interval: IntervalKind::Wilson,
    })
}

/// Pairwise summation of an already ordered slice.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean of replica outcomes with a 95% interval: Wilson when every value is 0 or 1,
/// Student t otherwise. Values are sorted before pairwise summation, so the result
/// does not depend on input order.
pub fn mc_aggregate(values: &[f64]) -> Result<Estimate> {
    if values.is_empty() {
        return Err(Error::EmptyInput("mc_aggregate needs at least one outcome"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("mc_aggregate outcomes must be finite".into()));
    }
    if values.iter().all(|v| *v == 0.0 || *v == 1.0) {
        let ones = values.iter().filter(|v| **v == 1.0).count();
        return proportion(ones, values.len());
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = pairwise_sum(&sorted) / n as f64;
    if n == 1 {
        return Ok(Estimate {
            point: mean,
            lower: mean,
            upper: mean,
            std_error: 0.0,
            n,
            interval: IntervalKind::StudentT,
        });
    }
    let mut dev: Vec<f64> = sorted.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("degrees of freedom are positive")
        .inverse_cdf(0.975);
    Ok(Estimate {
        point: mean,
        lower: mean - t * se,
        upper: mean + t * se,
        std_error: se,
        n,
        interval: IntervalKind::StudentT,
    })
}

/// `sup_x |F_a(x) - F_b(x)|` for the empirical CDFs of `a` and `b`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("ks_two_sample needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Kolmogorov distance between two weighted atomic measures given as `(value, weight)`.
pub fn kolmogorov_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = a
        .iter()
        .map(|&(v, w)| (v, w))
        .chain(b.iter().map(|&(v, w)| (v, -w)))
        .collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut diff = 0.0_f64;
    let mut d = 0.0_f64;
    let mut k = 0;
    while k < pts.len() {
        let x = pts[k].0;
        while k < pts.len() && pts[k].0 == x {
            diff += pts[k].1;
            k += 1;
        }
        d = d.max(diff.abs());
    }
    d
}

/// Stream id of replica `r` derived from a base stream: a bijective mix, so distinct
/// replicas never share a stream.
pub fn replica_stream(base: u64, r: u64) -> u64 {
    let mut z = base ^ r.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run `count` replicas in parallel; results come back in replica order regardless
/// of the worker count.
pub fn replicate<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Stationary loss estimate with its model bounds, all evaluated on the same
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `begin` or `end`.
    pub model: String,
    /// `renovation-exact` or `forward-approximate`.
    pub method: String,
    pub samples: usize,
    /// Forward warm-up length; present for forward-approximate runs only.
    pub warmup: Option<usize>,
    pub seed: u64,
    pub stream_id: u64,
    /// Probability that the customer at epoch 0 is lost.
    pub pi_hat: Estimate,
    /// End model only: probability that the customer never reaches the server.
    pub pi_hat_never_served: Option<Estimate>,
    pub lower_bound: Estimate,
    pub upper_bound: Estimate,
    /// Fraction of samples whose customer starts service.
    pub served_fraction: f64,
    /// `lower <= pi_hat <= upper`, each comparison with a slack of three combined standard errors.
    pub bracket_ok: bool,
}

/// `a <= b` up to three combined standard errors.
pub fn ordered_within_3se(a: &Estimate, b: &Estimate) -> bool {
    a.point <= b.point + 3.0 * a.std_error.hypot(b.std_error)
}

/// Parameters of the M/M/1+M birth-death chain: Poisson arrivals at `lambda`,
/// exponential service at `mu`, exponential patience at `gamma` for waiting
/// customers (`gamma = 0` disables abandonment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    /// Initial truncation level; doubled until the neglected tail is below 1e-12.
    pub truncation: usize,
}

impl OracleSpec {
    pub fn new(lambda: f64, mu: f64, gamma: f64) -> Self {
        Self { lambda, mu, gamma, truncation: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Long-run fraction of arrivals that abandon.
    pub abandonment: f64,
    /// M/M/1/1 blocking probability `rho / (1 + rho)`.
    pub blocking: f64,
    /// Stationary number-in-system distribution up to the final truncation level.
    pub distribution: Vec<f64>,
    pub tail_bound: f64,
}

const ORACLE_TAIL: f64 = 1e-12;
const ORACLE_MAX_LEVEL: usize = 1 << 24;

/// Stationary birth-death balance with birth rate `lambda` and death rate
/// `mu + (n - 1) gamma` in state `n >= 1`.
pub fn birth_death_abandonment(spec: &OracleSpec) -> Result<OracleResult> {
    let OracleSpec { lambda, mu, gamma, truncation } = *spec;
    if !(lambda > 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "oracle needs lambda > 0 and mu > 0, got ({lambda}, {mu})"
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("oracle gamma {gamma} must be >= 0")));
    }
    let death = |n: usize| mu + (n as f64 - 1.0) * gamma;
    let mut level = truncation.max(8);
    loop {
        let mut w = Vec::with_capacity(level + 1);
        w.push(1.0_f64);
        for n in 1..=level {
            w.push(w[n - 1] * lambda / death(n));
        }
        let total: f64 = w.iter().sum();
        // later ratios lambda / death(n) are nonincreasing in n
        let r = lambda / death(level + 1);
        let tail = if r < 1.0 { w[level] * r / (1.0 - r) / total } else { f64::INFINITY };
        if tail < ORACLE_TAIL {
            let dist: Vec<f64> = w.iter().map(|x| x / total).collect();
            let abandon_rate: f64 = dist
                .iter()
                .enumerate()
                .skip(1)
                .map(|(n, p)| p * (n as f64 - 1.0) * gamma)
                .sum();
            let rho = lambda / mu;
            return Ok(OracleResult {
                abandonment: abandon_rate / lambda,
                blocking: rho / (1.0 + rho),
                distribution: dist,
                tail_bound: tail,
            });
        }
        if level >= ORACLE_MAX_LEVEL {
            return Err(Error::OracleTruncation { level, tail_mass: tail });
        }
        level *= 2;
    }
}
