//! The monotone recursion `y -> [max(y, alpha) - beta]^+` with `beta = xi`.
//!
//! Its unique stationary solution is the backward supremum
//! `[sup_{j >= 1} (alpha_{-j} - sum_{i=1..j} beta_{-i})]^+`. The supremum runs over
//! infinitely many lags; when the alpha marks have a declared almost-sure bound `c`
//! the tail is dead as soon as the cumulative `beta` reaches `c`, which turns the
//! formula into a finite, exact computation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{proportion, replica_stream, replicate, Estimate};
use crate::marks::{AlphaKind, MarkSource, MarkTriple};

/// `[x]^+`, returning `+0.0` for every nonpositive input.
#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub(crate) fn check_state(y: f64, what: &str) -> Result<()> {
    if y.is_finite() && y >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be finite and >= 0, got {y}")))
    }
}

type Extractor = Arc<dyn Fn(&MarkTriple) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Alpha {
    Kind(AlphaKind),
    Custom { f: Extractor, bound: Option<f64>, name: String },
}

/// Choice of alpha mark for the recursion; beta is always the interarrival.
#[derive(Clone)]
pub struct RecursionSpec {
    alpha: Alpha,
}

impl fmt::Debug for RecursionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecursionSpec").field("alpha", &self.alpha_name()).finish()
    }
}

impl RecursionSpec {
    pub fn new(kind: AlphaKind) -> Self {
        Self { alpha: Alpha::Kind(kind) }
    }

    pub fn sigma_plus_d() -> Self {
        Self::new(AlphaKind::SigmaPlusD)
    }

    pub fn sigma_min_d() -> Self {
        Self::new(AlphaKind::SigmaMinD)
    }

    pub fn d_only() -> Self {
        Self::new(AlphaKind::DOnly)
    }

    /// User-supplied alpha extractor with its own almost-sure bound. The
    /// extractor must return finite nonnegative values; violations are reported
    /// as argument errors where they are evaluated.
    pub fn custom(
        name: impl Into<String>,
        bound: Option<f64>,
        f: impl Fn(&MarkTriple) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { alpha: Alpha::Custom { f: Arc::new(f), bound, name: name.into() } }
    }

    pub fn alpha_name(&self) -> String {
        match &self.alpha {
            Alpha::Kind(k) => k.name().to_string(),
            Alpha::Custom { name, .. } => name.clone(),
        }
    }

    pub fn kind(&self) -> Option<AlphaKind> {
        match self.alpha {
            Alpha::Kind(k) => Some(k),
            Alpha::Custom { .. } => None,
        }
    }

    pub fn alpha(&self, m: &MarkTriple) -> Result<f64> {
        let a = match &self.alpha {
            Alpha::Kind(k) => k.eval(m),
            Alpha::Custom { f, .. } => f(m),
        };
        if a.is_finite() && a >= 0.0 {
            Ok(a)
        } else {
            Err(Error::InvalidArgument(format!(
                "alpha extractor {} returned {a} for {m:?}",
                self.alpha_name()
            )))
        }
    }

    pub fn beta(&self, m: &MarkTriple) -> f64 {
        m.xi
    }

    pub fn alpha_bound(&self, src: &MarkSource) -> Option<f64> {
        match &self.alpha {
            Alpha::Kind(k) => src.alpha_bound(*k),
            Alpha::Custom { bound, .. } => *bound,
        }
    }

    fn missing_bound(&self, src: &MarkSource) -> Error {
        let what = match &self.alpha {
            Alpha::Kind(k) => src.bounds().missing_for(*k).to_string(),
            Alpha::Custom { name, .. } => format!("a bound for custom alpha {name}"),
        };
        Error::Capability(format!(
            "exact evaluation with alpha = {} needs an alpha_bound; declare {what} on the source",
            self.alpha_name()
        ))
    }

    pub(crate) fn exact_bound(&self, src: &MarkSource) -> Result<f64> {
        self.alpha_bound(src).ok_or_else(|| self.missing_bound(src))
    }
}

/// One application of the map: `[max(y, alpha(mark)) - xi]^+`.
pub fn step(y: f64, mark: &MarkTriple, spec: &RecursionSpec) -> Result<f64> {
    check_state(y, "state y")?;
    Ok(pos(y.max(spec.alpha(mark)?) - spec.beta(mark)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Requires declared bounds; results are certified.
    Exact,
    /// Truncated or warm-started; results carry `exact = false`.
    Approximate,
}

/// Finite witness that the backward supremum at `epoch` is nonpositive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCertificate {
    pub epoch: i64,
    /// Number of lags checked.
    pub depth: usize,
    /// `alpha_bound - sum of beta over the checked lags`; bounds every unchecked term.
    pub residual_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionValue {
    pub value: f64,
    pub exact: bool,
    /// Lags evaluated when the result is a truncation (approximate mode).
    pub truncation_depth: Option<usize>,
    pub certificate: Option<ZeroCertificate>,
}

/// Backward supremum at `epoch` from marks supplied lag by lag (`lag_mark(j)` is
/// the mark at `epoch - j`). Shared by every caller that needs certificates so the
/// arithmetic is identical everywhere.
pub(crate) fn supremum_over_lags(
    spec: &RecursionSpec,
    epoch: i64,
    bound: Option<f64>,
    max_depth: usize,
    mut lag_mark: impl FnMut(usize) -> MarkTriple,
) -> Result<RecursionValue> {
    if max_depth == 0 {
        return Err(Error::InvalidArgument("max_depth must be positive".into()));
    }
    let mut cumulative = 0.0;
    let mut best = f64::NEG_INFINITY;
    for j in 1..=max_depth {
        let m = lag_mark(j);
        cumulative += spec.beta(&m);
        best = best.max(spec.alpha(&m)? - cumulative);
        if let Some(c) = bound {
            if cumulative >= c {
                let value = pos(best);
                let certificate = (value == 0.0).then_some(ZeroCertificate {
                    epoch,
                    depth: j,
                    residual_bound: c - cumulative,
                });
                return Ok(RecursionValue { value, exact: true, truncation_depth: None, certificate });
            }
        }
    }
    match bound {
        Some(c) => Err(Error::DepthExhausted { epoch, cumulative, bound: c, max_depth }),
        None => Ok(RecursionValue {
            value: pos(best),
            exact: false,
            truncation_depth: Some(max_depth),
            certificate: None,
        }),
    }
}

/// Marks at `epoch - 1, epoch - 2, ...`, fetched in forward chunks.
pub(crate) struct PastMarks<'a> {
    src: &'a MarkSource,
    epoch: i64,
    marks: Vec<MarkTriple>,
}

impl<'a> PastMarks<'a> {
    pub(crate) fn new(src: &'a MarkSource, epoch: i64) -> Self {
        Self { src, epoch, marks: Vec::new() }
    }

    /// Mark at `epoch - lag`, `lag >= 1`.
    pub(crate) fn lag(&mut self, lag: usize) -> MarkTriple {
        while self.marks.len() < lag {
            let have = self.marks.len() as i64;
            let chunk = have.clamp(32, 1 << 16);
            let hi = self.epoch - have - 1;
            let lo = hi - chunk + 1;
            let mut fresh: Vec<MarkTriple> = self.src.cursor(lo).take(chunk as usize).collect();
            fresh.reverse();
            self.marks.extend(fresh);
        }
        self.marks[lag - 1]
    }
}

/// Stationary value of the recursion at `epoch`. In exact mode the supremum is
/// evaluated until the cumulative interarrival reaches the alpha bound, so the
/// result is the stationary solution itself; in approximate mode it stops at
/// `max_depth` (an underestimate of the value, an overestimate of `P(Y = 0)`).
pub fn backward_supremum(
    spec: &RecursionSpec,
    src: &MarkSource,
    epoch: i64,
    max_depth: usize,
    mode: Mode,
) -> Result<RecursionValue> {
    let bound = match mode {
        Mode::Exact => Some(spec.exact_bound(src)?),
        Mode::Approximate => None,
    };
    let mut past = PastMarks::new(src, epoch);
    supremum_over_lags(spec, epoch, bound, max_depth, |j| past.lag(j))
}

/// Loynes's sequence at `epoch`: element `k - 1` is the value at `epoch` of the
/// recursion started from 0 at `epoch - k`, for `k = 1..=depth`. Each element is an
/// independent forward run, so the list is nondecreasing by monotonicity of the
/// map rather than by construction.
pub fn loynes_backward(spec: &RecursionSpec, src: &MarkSource, epoch: i64, depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be positive".into()));
    }
    let start = epoch - depth as i64;
    let marks: Vec<MarkTriple> = src.cursor(start).take(depth).collect();
    let alphas = marks.iter().map(|m| spec.alpha(m)).collect::<Result<Vec<_>>>()?;
    Ok((1..=depth)
        .map(|k| {
            (depth - k..depth).fold(0.0_f64, |y, i| pos(y.max(alphas[i]) - spec.beta(&marks[i])))
        })
        .collect())
}

/// Estimate of `P(Y = 0)` over well-separated epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroProbability {
    pub alpha: String,
    pub estimate: Estimate,
    pub mode: Mode,
    pub replicas: usize,
    /// Epochs whose zero value carries a certificate.
    pub certified: usize,
}

/// Replica `r`'s view of the source: an independent stream for iid sources, the
/// same stream shifted back by `r * spacing` otherwise.
pub(crate) fn replica_source(src: &MarkSource, r: usize, spacing: usize) -> MarkSource {
    if src.is_iid() {
        src.with_stream(replica_stream(src.stream_id(), r as u64))
    } else {
        src.shift(-(r as i64) * spacing as i64)
    }
}

/// Fraction of epochs at which the stationary value is 0, with a Wilson interval.
/// Exact whenever the source declares a bound for this alpha; otherwise
/// truncated at `max_depth` and flagged approximate.
pub fn prob_zero_estimate(
    spec: &RecursionSpec,
    src: &MarkSource,
    replicas: usize,
    max_depth: usize,
) -> Result<ZeroProbability> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be positive".into()));
    }
    let mode = if spec.alpha_bound(src).is_some() { Mode::Exact } else { Mode::Approximate };
    let spacing = 2 * max_depth;
    let values = replicate(replicas, |r| {
        backward_supremum(spec, &replica_source(src, r, spacing), 0, max_depth, mode)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let zeros = values.iter().filter(|v| v.value == 0.0).count();
    let certified = values.iter().filter(|v| v.certificate.is_some()).count();
    Ok(ZeroProbability {
        alpha: spec.alpha_name(),
        estimate: proportion(zeros, replicas)?,
        mode,
        replicas,
        certified,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "index")]
pub enum Coupling {
    /// First index at which the two iterates coincide; verified equal up to the horizon.
    Coupled(usize),
    NotCoupled,
}

/// Forward iterates from `z1` and `z2` driven by the marks at indices `0, 1, ...`.
pub fn coupling_time(spec: &RecursionSpec, src: &MarkSource, z1: f64, z2: f64, horizon: usize) -> Result<Coupling> {
    check_state(z1, "z1")?;
    check_state(z2, "z2")?;
    let (mut a, mut b) = (z1, z2);
    let mut coupled = (a == b).then_some(0);
    for (n, m) in src.cursor(0).take(horizon).enumerate() {
        let alpha = spec.alpha(&m)?;
        a = pos(a.max(alpha) - m.xi);
        b = pos(b.max(alpha) - m.xi);
        match coupled {
            None if a == b => coupled = Some(n + 1),
            Some(at) if a != b => {
                return Err(Error::InvalidArgument(format!(
                    "iterates separated at {} after coupling at {at}",
                    n + 1
                )))
            }
            _ => {}
        }
    }
    Ok(coupled.map_or(Coupling::NotCoupled, Coupling::Coupled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marks::{DeclaredBounds, Dist, MarkLaw, Regime};
    use proptest::prelude::*;

    fn det(sigma: f64, dpat: f64) -> MarkSource {
        MarkSource::deterministic(1.0, sigma, dpat).unwrap()
    }

    fn bounded_iid(seed: u64) -> MarkSource {
        MarkSource::iid(
            Regime {
                xi: Dist::Uniform { low: 0.2, high: 1.2 },
                sigma: Dist::Uniform { low: 0.0, high: 1.0 },
                dpat: Dist::TruncatedExponential { rate: 2.0, cap: 1.5 },
            },
            DeclaredBounds { sigma: Some(1.0), dpat: Some(1.5) },
            seed,
            0,
        )
        .unwrap()
    }

    /// Source with scripted marks at epochs -1, -2, ... (custom alpha reads sigma).
    fn scripted(alpha_by_lag: &[f64], beta: f64) -> (RecursionSpec, Vec<MarkTriple>) {
        let spec = RecursionSpec::custom("scripted", Some(10.0), |m| m.sigma);
        let marks = alpha_by_lag.iter().map(|a| MarkTriple { xi: beta, sigma: *a, dpat: 0.0 }).collect();
        (spec, marks)
    }

    #[test]
    fn step_examples() {
        let spec = RecursionSpec::custom("sigma", None, |m| m.sigma);
        let m = |a: f64, b: f64| MarkTriple { xi: b, sigma: a, dpat: 0.0 };
        assert_eq!(step(2.0, &m(6.0, 3.0), &spec).unwrap(), 3.0);
        assert_eq!(step(0.0, &m(0.0, 5.0), &spec).unwrap(), 0.0);
        assert_eq!(step(5.0, &m(1.0, 7.0), &spec).unwrap(), 0.0);
        assert!(step(-1.0, &m(1.0, 1.0), &spec).is_err());
        let bad = RecursionSpec::custom("neg", None, |_| -1.0);
        assert!(step(0.0, &m(1.0, 1.0), &bad).is_err());
    }

    #[test]
    fn supremum_on_scripted_window() {
        // terms at lags 1..4: (3-2, 5-4, 1-6, 10-8) = (1, 1, -5, 2); lag 5 brings sum(beta) to 10
        let (spec, mut marks) = scripted(&[3.0, 5.0, 1.0, 10.0], 2.0);
        marks.push(MarkTriple { xi: 2.0, sigma: 0.0, dpat: 0.0 });
        let v = supremum_over_lags(&spec, 0, Some(10.0), 100, |j| marks[j - 1]).unwrap();
        assert_eq!(v.value, 2.0);
        assert!(v.exact && v.certificate.is_none());
    }

    #[test]
    fn supremum_zero_alpha_certifies_at_depth_one() {
        let src = MarkSource::deterministic(1.0, 0.0, 0.0).unwrap();
        let v = backward_supremum(&RecursionSpec::sigma_plus_d(), &src, 0, 10, Mode::Exact).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.certificate.unwrap().depth, 1);
        assert_eq!(v.certificate.unwrap().residual_bound, -1.0);
    }

    #[test]
    fn supremum_dominated_deterministic() {
        let v = backward_supremum(&RecursionSpec::sigma_plus_d(), &det(0.6, 0.3), -4, 10, Mode::Exact).unwrap();
        assert_eq!(v.value, 0.0);
        let c = v.certificate.unwrap();
        assert_eq!((c.epoch, c.depth), (-4, 1));
        assert!(c.residual_bound <= 0.0);
    }

    #[test]
    fn supremum_capability_and_depth_errors() {
        let unbounded = MarkSource::iid(
            Regime {
                xi: Dist::Exponential { rate: 1.0 },
                sigma: Dist::Exponential { rate: 1.0 },
                dpat: Dist::Exponential { rate: 1.0 },
            },
            DeclaredBounds::default(),
            1,
            0,
        )
        .unwrap();
        let err = backward_supremum(&RecursionSpec::sigma_plus_d(), &unbounded, 0, 50, Mode::Exact).unwrap_err();
        assert!(matches!(err, Error::Capability(ref msg) if msg.contains("bounds.sigma")));
        let approx = backward_supremum(&RecursionSpec::sigma_plus_d(), &unbounded, 0, 50, Mode::Approximate).unwrap();
        assert!(!approx.exact && approx.truncation_depth == Some(50));
        let err = backward_supremum(&RecursionSpec::sigma_plus_d(), &det(2.0, 3.0), 0, 3, Mode::Exact).unwrap_err();
        assert!(matches!(err, Error::DepthExhausted { max_depth: 3, .. }));
    }

    #[test]
    fn loynes_examples() {
        let spec = RecursionSpec::sigma_plus_d();
        assert_eq!(loynes_backward(&spec, &det(0.6, 0.3), 5, 3).unwrap(), vec![0.0; 3]);
        let l = loynes_backward(&spec, &det(1.5, 0.2), 0, 3).unwrap();
        assert!(l.iter().all(|v| (v - 0.7).abs() < 1e-15), "{l:?}");
        let src = bounded_iid(3);
        assert_eq!(loynes_backward(&spec, &src, 2, 1).unwrap()[0], loynes_backward(&spec, &src, 2, 2).unwrap()[0]);
    }

    #[test]
    fn loynes_converges_to_exact_supremum() {
        let spec = RecursionSpec::sigma_plus_d();
        for seed in 0..40 {
            let src = bounded_iid(seed);
            let exact = backward_supremum(&spec, &src, 0, 10_000, Mode::Exact).unwrap();
            let depth = 60;
            let l = loynes_backward(&spec, &src, 0, depth).unwrap();
            assert!(l.windows(2).all(|w| w[0] <= w[1]));
            // the certified depth is at most bound / min xi = 2.5 / 0.2
            let last = l[depth - 1];
            if exact.value == 0.0 {
                assert_eq!(last, 0.0);
            } else {
                assert!((last - exact.value).abs() <= 1e-12 * (1.0 + exact.value), "{last} vs {}", exact.value);
            }
        }
    }

    #[test]
    fn prob_zero_examples() {
        let spec = RecursionSpec::sigma_plus_d();
        let p = prob_zero_estimate(&spec, &det(0.6, 0.3), 50, 10).unwrap();
        assert_eq!((p.estimate.point, p.mode, p.certified), (1.0, Mode::Exact, 50));
        let p = prob_zero_estimate(&spec, &det(1.5, 0.2), 50, 10).unwrap();
        assert_eq!(p.estimate.point, 0.0);
        let dominated = MarkSource::iid(
            Regime {
                xi: Dist::Deterministic { value: 1.0 },
                sigma: Dist::Uniform { low: 0.0, high: 0.25 },
                dpat: Dist::Uniform { low: 0.0, high: 0.25 },
            },
            DeclaredBounds { sigma: Some(0.25), dpat: Some(0.25) },
            4,
            0,
        )
        .unwrap();
        let p = prob_zero_estimate(&spec, &dominated, 200, 10).unwrap();
        assert_eq!(p.estimate.point, 1.0);
    }

    #[test]
    fn prob_zero_flags_approximate_without_bounds() {
        let src = MarkSource::iid(
            Regime {
                xi: Dist::Exponential { rate: 1.0 },
                sigma: Dist::Exponential { rate: 2.0 },
                dpat: Dist::Exponential { rate: 2.0 },
            },
            DeclaredBounds::default(),
            5,
            0,
        )
        .unwrap();
        let p = prob_zero_estimate(&RecursionSpec::sigma_plus_d(), &src, 100, 200).unwrap();
        assert_eq!(p.mode, Mode::Approximate);
        assert_eq!(p.certified, 0);
        assert!(p.estimate.point > 0.0);
    }

    #[test]
    fn coupling_examples() {
        let spec = RecursionSpec::sigma_plus_d();
        let src = det(0.6, 0.3);
        assert_eq!(coupling_time(&spec, &src, 4.0, 4.0, 10).unwrap(), Coupling::Coupled(0));
        assert_eq!(coupling_time(&spec, &src, 0.0, 5.0, 10).unwrap(), Coupling::Coupled(5));
        assert_eq!(coupling_time(&spec, &src, 0.0, 0.5, 10).unwrap(), Coupling::Coupled(1));
        assert_eq!(coupling_time(&spec, &src, 0.0, 5.0, 4).unwrap(), Coupling::NotCoupled);
        assert!(coupling_time(&spec, &src, -1.0, 0.0, 4).is_err());
    }

    #[test]
    fn dominance_ordering_per_epoch() {
        for seed in 0..30 {
            let src = bounded_iid(seed);
            for epoch in [-7, 0, 13] {
                let v = |s: RecursionSpec| backward_supremum(&s, &src, epoch, 10_000, Mode::Exact).unwrap().value;
                let (lo, mid, hi) = (v(RecursionSpec::sigma_min_d()), v(RecursionSpec::d_only()), v(RecursionSpec::sigma_plus_d()));
                assert!(lo <= mid && mid <= hi, "{lo} {mid} {hi}");
            }
        }
    }

    #[test]
    fn zero_epochs_are_hit_by_forward_iteration() {
        let spec = RecursionSpec::sigma_plus_d();
        let src = bounded_iid(21);
        let zeros: Vec<i64> = (-200..0)
            .filter(|e| backward_supremum(&spec, &src, *e, 10_000, Mode::Exact).unwrap().value == 0.0)
            .collect();
        assert!(zeros.len() > 5);
        let first = zeros[0];
        let mut y = 0.0;
        let mut cursor = src.cursor(first);
        for n in first..0 {
            if zeros.contains(&n) {
                assert_eq!(y, 0.0, "forward iterate not at zero at certified epoch {n}");
            }
            y = step(y, &cursor.next_mark(), &spec).unwrap();
        }
    }

    #[test]
    fn markov_source_uses_spaced_epochs() {
        use crate::marks::MarkovModulated;
        let r = Regime {
            xi: Dist::Uniform { low: 0.5, high: 1.5 },
            sigma: Dist::Uniform { low: 0.0, high: 0.6 },
            dpat: Dist::Uniform { low: 0.0, high: 0.6 },
        };
        let slow = Regime { xi: Dist::Uniform { low: 0.1, high: 0.5 }, ..r.clone() };
        let m = MarkovModulated::new(vec![r, slow], vec![vec![0.95, 0.05], vec![0.3, 0.7]]).unwrap();
        let src = MarkSource::new(MarkLaw::Markov(m), DeclaredBounds { sigma: Some(0.6), dpat: Some(0.6) }, 1, 0).unwrap();
        let p = prob_zero_estimate(&RecursionSpec::sigma_plus_d(), &src, 300, 200).unwrap();
        assert_eq!(p.mode, Mode::Exact);
        assert!(p.estimate.point > 0.0 && p.estimate.point < 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn step_monotone_and_lipschitz(
            x in 0.0f64..20.0, dx in 0.0f64..20.0,
            sigma in 0.0f64..10.0, dpat in 0.0f64..10.0, xi in 0.0f64..10.0,
        ) {
            let m = MarkTriple { xi, sigma, dpat };
            for spec in [RecursionSpec::sigma_plus_d(), RecursionSpec::sigma_min_d(), RecursionSpec::d_only()] {
                let (a, b) = (step(x, &m, &spec).unwrap(), step(x + dx, &m, &spec).unwrap());
                prop_assert!(a <= b);
                prop_assert!(b - a <= dx + 1e-12);
            }
        }
    }
}
