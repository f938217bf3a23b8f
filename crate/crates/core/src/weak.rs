//! Empirical diagnostics for the workload started from 0: Cesàro averages of
//! its laws, one-step invariance under the random map, tightness through the
//! dominating sequence, and the mass just above the patience threshold.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{kolmogorov_distance, proportion, replica_stream, replicate, Estimate};
use crate::marks::MarkSource;
use crate::recursion::pos;
use crate::stationary::Model;

/// Finitely many atoms `(value, weight)` sorted by value, weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<(f64, f64)>,
    /// Number of points the measure was built from.
    pub n: usize,
    pub source: String,
    pub model: Option<Model>,
}

fn describe(src: &MarkSource) -> String {
    format!("seed={};stream={};offset={}", src.seed(), src.stream_id(), src.offset())
}

impl EmpiricalMeasure {
    /// Equal weights on `values`; coincident values merge into one atom whose
    /// weight is its count over `n`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("empirical measure needs at least one value"));
        }
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for &v in values {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("value {v} must be finite and nonnegative")));
            }
            *counts.entry((v + 0.0).to_bits()).or_default() += 1;
        }
        let n = values.len() as f64;
        Ok(Self {
            atoms: counts.into_iter().map(|(b, c)| (f64::from_bits(b), c as f64 / n)).collect(),
            n: values.len(),
            source: String::new(),
            model: None,
        })
    }

    /// Normalizes the weights and merges coincident values.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput("empirical measure needs at least one atom"));
        }
        let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
        let mut total = 0.0;
        for &(v, w) in atoms {
            if !(v.is_finite() && v >= 0.0 && w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!("atom ({v}, {w}) must be finite and nonnegative")));
            }
            // nonnegative floats order like their bit patterns; +0 and -0 are merged
            *merged.entry((v + 0.0).to_bits()).or_default() += w;
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("atom weights sum to zero".into()));
        }
        Ok(Self {
            atoms: merged.into_iter().map(|(b, w)| (f64::from_bits(b), w / total)).collect(),
            n: atoms.len(),
            source: String::new(),
            model: None,
        })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mass_at(&self, v: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == v).map(|a| a.1).sum()
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        let mut diff: BTreeMap<u64, f64> = BTreeMap::new();
        for &(v, w) in &self.atoms {
            *diff.entry(v.to_bits()).or_default() += w;
        }
        for &(v, w) in &other.atoms {
            *diff.entry(v.to_bits()).or_default() -= w;
        }
        0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
    }

    pub fn kolmogorov(&self, other: &Self) -> f64 {
        kolmogorov_distance(&self.atoms, &other.atoms)
    }

    /// CSV with a `#` metadata line, then `value,weight` rows.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        let model = self.model.map_or("none", Model::name);
        writeln!(out, "# n={},model={},source={}", self.n, model, self.source)?;
        writeln!(out, "value,weight")?;
        for (v, w) in &self.atoms {
            writeln!(out, "{v},{w}")?;
        }
        Ok(())
    }
}

/// `W^0_1, ..., W^0_n`: the workload found by customers `1..=n` when customer 0
/// finds an empty system.
pub fn trajectory(src: &MarkSource, n: usize, model: Model) -> Vec<f64> {
    let mut w = 0.0;
    src.cursor(0)
        .take(n)
        .map(|m| {
            w = model.step_unchecked(w, &m);
            w
        })
        .collect()
}

/// Occupation measure of one trajectory from 0, weight `1/n` per step.
pub fn cesaro_distribution(src: &MarkSource, n: usize, model: Model) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut mu = EmpiricalMeasure::from_values(&trajectory(src, n, model))?;
    mu.source = describe(src);
    mu.model = Some(model);
    Ok(mu)
}

/// The average over `i = 1..=n` of the laws of `W^0_i`, each law estimated by
/// `replicas` independent trajectories.
pub fn cesaro_replicas(src: &MarkSource, n: usize, replicas: usize, model: Model) -> Result<EmpiricalMeasure> {
    if n == 0 || replicas == 0 {
        return Err(Error::InvalidArgument("n and replicas must be positive".into()));
    }
    let paths = replicate(replicas, |r| {
        let view = if src.is_iid() {
            src.with_stream(replica_stream(src.stream_id(), r as u64))
        } else {
            src.shift(-((r * 2 * n) as i64))
        };
        trajectory(&view, n, model)
    });
    let all: Vec<f64> = paths.into_iter().flatten().collect();
    let mut mu = EmpiricalMeasure::from_values(&all)?;
    mu.source = describe(src);
    mu.model = Some(model);
    Ok(mu)
}

/// Stream id of the fresh marks used for pushforwards.
const PUSHFORWARD_STREAM_SALT: u64 = 0x5055_5348;

/// Kolmogorov distance between `mu` and its image under one step of the model.
/// Every sample point behind `mu` is moved with its own fresh mark, so an atom
/// of weight `w` is split over `round(w n)` marks.
pub fn invariance_distance(mu: &EmpiricalMeasure, src: &MarkSource, model: Model) -> Result<f64> {
    if mu.atoms.is_empty() {
        return Err(Error::EmptyInput("invariance_distance needs a nonempty measure"));
    }
    let fresh = src.with_stream(replica_stream(src.stream_id(), PUSHFORWARD_STREAM_SALT));
    let mut marks = fresh.cursor(0);
    let mut image = Vec::with_capacity(mu.atoms.len());
    for &(v, w) in &mu.atoms {
        let points = ((w * mu.n as f64).round() as usize).max(1);
        let mut moved: Vec<f64> = (0..points).map(|_| model.step_unchecked(v, &marks.next_mark())).collect();
        moved.sort_by(f64::total_cmp);
        for run in moved.chunk_by(|a, b| a == b) {
            let share = if run.len() == points { w } else { w * run.len() as f64 / points as f64 };
            image.push((run[0], share));
        }
    }
    Ok(kolmogorov_distance(&mu.atoms, &image))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub level: f64,
    pub workload: f64,
    pub dominating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub n: usize,
    pub rows: Vec<QuantileRow>,
    /// Steps with `W^0_i > L^0_i`.
    pub pathwise_violations: usize,
    pub max_workload: f64,
    pub max_dominating: f64,
}

impl TightnessReport {
    pub fn ordered(&self) -> bool {
        self.pathwise_violations == 0 && self.rows.iter().all(|r| r.workload <= r.dominating)
    }
}

fn quantile(sorted: &[f64], level: f64) -> f64 {
    let k = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Empirical quantiles of `W^0_i` and of the dominating `L^0_i` along one path.
pub fn tightness_report(src: &MarkSource, n: usize, levels: &[f64], model: Model) -> Result<TightnessReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if let Some(l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidArgument(format!("quantile level {l} outside [0, 1]")));
    }
    let upper = model.upper_kind();
    let (mut w, mut l) = (0.0_f64, 0.0_f64);
    let mut ws = Vec::with_capacity(n);
    let mut ls = Vec::with_capacity(n);
    for m in src.cursor(0).take(n) {
        w = model.step_unchecked(w, &m);
        l = pos(l.max(upper.eval(&m)) - m.xi);
        ws.push(w);
        ls.push(l);
    }
    let pathwise_violations = ws.iter().zip(&ls).filter(|(w, l)| w > l).count();
    ws.sort_by(f64::total_cmp);
    ls.sort_by(f64::total_cmp);
    Ok(TightnessReport {
        n,
        rows: levels
            .iter()
            .map(|&level| QuantileRow { level, workload: quantile(&ws, level), dominating: quantile(&ls, level) })
            .collect(),
        pathwise_violations,
        max_workload: ws[n - 1],
        max_dominating: ls[n - 1],
    })
}

/// Fraction of customers `i = 1..=n` finding `W^0_i` strictly inside
/// `(D_i, D_i + 2^-p)`.
pub fn boundary_mass(src: &MarkSource, n: usize, p: u32, model: Model) -> Result<Estimate> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("n and p must be positive".into()));
    }
    let width = 0.5_f64.powi(p as i32);
    let mut w = 0.0;
    let mut hits = 0;
    let mut cursor = src.cursor(0);
    let mut m = cursor.next_mark();
    for _ in 0..n {
        w = model.step_unchecked(w, &m);
        m = cursor.next_mark();
        hits += usize::from(w > m.dpat && w < m.dpat + width);
    }
    proportion(hits, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marks::{DeclaredBounds, Dist, Regime};
    use proptest::prelude::*;

    fn det(sigma: f64, dpat: f64) -> MarkSource {
        MarkSource::deterministic(1.0, sigma, dpat).unwrap()
    }

    fn iid(seed: u64) -> MarkSource {
        MarkSource::iid(
            Regime {
                xi: Dist::Exponential { rate: 1.0 },
                sigma: Dist::Exponential { rate: 1.2 },
                dpat: Dist::Uniform { low: 0.0, high: 2.0 },
            },
            DeclaredBounds { sigma: None, dpat: Some(2.0) },
            seed,
            0,
        )
        .unwrap()
    }

    #[test]
    fn period_two_orbit() {
        let src = det(1.5, 0.2);
        let mu = cesaro_distribution(&src, 10_000, Model::Begin).unwrap();
        let orbit = EmpiricalMeasure::from_atoms(&[(0.0, 0.5), (0.5, 0.5)]).unwrap();
        assert!(mu.total_variation(&orbit) <= 1e-3);
        assert_eq!(invariance_distance(&orbit, &src, Model::Begin).unwrap(), 0.0);
        assert_eq!(invariance_distance(&mu, &src, Model::Begin).unwrap(), 0.0);
        // odd n leaves one extra visit to 0.5
        let odd = cesaro_distribution(&src, 101, Model::Begin).unwrap();
        assert!(odd.total_variation(&orbit) <= 1.0 / 101.0);
    }

    #[test]
    fn fixed_point_and_short_runs() {
        let src = det(0.6, 0.3);
        let mu = cesaro_distribution(&src, 500, Model::Begin).unwrap();
        assert_eq!(mu.atoms(), &[(0.0, 1.0)]);
        assert_eq!(invariance_distance(&mu, &src, Model::Begin).unwrap(), 0.0);
        let one = cesaro_distribution(&det(0.9, 5.0), 1, Model::Begin).unwrap();
        assert_eq!(one.atoms(), &[(0.0, 1.0)]);
    }

    #[test]
    fn point_mass_at_zero_is_moved_in_overload() {
        let delta0 = EmpiricalMeasure::from_values(&[0.0]).unwrap();
        // sigma = 1.5, D = 0.2, xi = 1: 0 maps to 0.5 and the sup-CDF gap is the whole mass
        assert_eq!(invariance_distance(&delta0, &det(1.5, 0.2), Model::Begin).unwrap(), 1.0);
    }

    #[test]
    fn boundary_examples() {
        for p in 2..8 {
            assert_eq!(boundary_mass(&det(1.5, 0.2), 1000, p, Model::Begin).unwrap().point, 0.0);
        }
        assert_eq!(boundary_mass(&det(0.6, 0.3), 1000, 1, Model::Begin).unwrap().point, 0.0);
        let src = iid(3);
        let coarse = boundary_mass(&src, 100_000, 1, Model::Begin).unwrap();
        let fine = boundary_mass(&src, 100_000, 10, Model::Begin).unwrap();
        assert!(fine.point <= coarse.point + 2.0 * fine.std_error.hypot(coarse.std_error));
        assert!(coarse.point > 0.0);
    }

    #[test]
    fn tightness_orders_quantiles() {
        let levels = [0.5, 0.9, 0.99, 1.0];
        for model in [Model::Begin, Model::End] {
            let r = tightness_report(&iid(4), 100_000, &levels, model).unwrap();
            assert!(r.ordered(), "{r:?}");
        }
        let dominated = MarkSource::iid(
            Regime {
                xi: Dist::Deterministic { value: 1.0 },
                sigma: Dist::Uniform { low: 0.0, high: 0.5 },
                dpat: Dist::Uniform { low: 0.0, high: 0.5 },
            },
            DeclaredBounds { sigma: Some(0.5), dpat: Some(0.5) },
            1,
            0,
        )
        .unwrap();
        let r = tightness_report(&dominated, 1000, &levels, Model::Begin).unwrap();
        assert!(r.rows.iter().all(|row| row.workload == 0.0 && row.dominating == 0.0));
    }

    #[test]
    fn replica_mode_matches_occupation() {
        let src = iid(5);
        let occ = cesaro_distribution(&src, 200_000, Model::Begin).unwrap();
        let rep = cesaro_replicas(&src, 2000, 100, Model::Begin).unwrap();
        assert!(occ.kolmogorov(&rep) < 0.02, "{}", occ.kolmogorov(&rep));
        let small = cesaro_distribution(&src, 20_000, Model::Begin).unwrap();
        assert!(invariance_distance(&small, &src, Model::Begin).unwrap() < 0.03);
    }

    #[test]
    fn csv_has_metadata_line() {
        let mu = cesaro_distribution(&det(1.5, 0.2), 4, Model::Begin).unwrap();
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# n=4,model=begin,source=seed=0;stream=0;offset=0\nvalue,weight\n0,0.5\n0.5,0.5\n");
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(values in prop::collection::vec(0.0f64..5.0, 1..200)) {
            let mu = EmpiricalMeasure::from_values(&values).unwrap();
            prop_assert!((mu.total_weight() - 1.0).abs() <= 1e-12);
            prop_assert!(mu.atoms().iter().all(|a| a.0 >= 0.0 && a.1 >= 0.0));
            prop_assert!(mu.atoms().windows(2).all(|w| w[0].0 < w[1].0));
        }
    }
}
