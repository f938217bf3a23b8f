//! Two-sided stationary marked sequences `{(xi_n, sigma_n, D_n)}` indexed by customer.
//!
//! Every mark is a pure function of `(seed, stream_id, index)`: the uniforms behind
//! index `n` live at a fixed position of a ChaCha8 keystream, so backward schemes can
//! address arbitrary negative indices without storing history, and the shift acting
//! on the underlying sequence is an index offset.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One customer's marks under the Palm probability: interarrival to the next
/// customer, requested service, and initial patience.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkTriple {
    pub xi: f64,
    pub sigma: f64,
    pub dpat: f64,
}

impl MarkTriple {
    pub fn new(xi: f64, sigma: f64, dpat: f64) -> Result<Self> {
        for (name, v) in [("xi", xi), ("sigma", sigma), ("dpat", dpat)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "mark {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self { xi, sigma, dpat })
    }

    pub fn sigma_plus_d(&self) -> f64 {
        self.sigma + self.dpat
    }

    pub fn sigma_min_d(&self) -> f64 {
        self.sigma.min(self.dpat)
    }
}

/// Marginal law of a single mark, sampled by inversion from one uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case")]
pub enum Dist {
    Deterministic { value: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
    /// Exponential conditioned on `[0, cap]`.
    TruncatedExponential { rate: f64, cap: f64 },
    /// Finite support; `probs` must sum to one.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl Dist {
    pub fn validate(&self, what: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSource(format!("{what}: {msg}")));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            Dist::Deterministic { value } if !nonneg(*value) => {
                bad(format!("deterministic value {value} must be finite and >= 0"))
            }
            Dist::Uniform { low, high } if !(nonneg(*low) && nonneg(*high) && low <= high) => {
                bad(format!("uniform needs 0 <= low <= high, got [{low}, {high}]"))
            }
            Dist::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                bad(format!("exponential rate {rate} must be positive"))
            }
            Dist::TruncatedExponential { rate, cap }
                if !(rate.is_finite() && *rate > 0.0 && cap.is_finite() && *cap > 0.0) =>
            {
                bad(format!("truncated-exponential needs rate > 0 and cap > 0, got ({rate}, {cap})"))
            }
            Dist::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("discrete needs equally many values and probs (at least one)".into());
                }
                if values.iter().any(|v| !nonneg(*v)) {
                    return bad("discrete values must be finite and >= 0".into());
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return bad("discrete probs must be finite and >= 0".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("discrete probs sum to {total}, expected 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Inverse-CDF sample from `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            Dist::Deterministic { value } => *value,
            Dist::Uniform { low, high } => low + (high - low) * u,
            Dist::Exponential { rate } => -(-u).ln_1p() / rate,
            Dist::TruncatedExponential { rate, cap } => {
                let mass = -(-rate * cap).exp_m1();
                (-(-u * mass).ln_1p() / rate).min(*cap)
            }
            Dist::Discrete { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // rounding in the cumulative sum: fall back on the last atom with mass
                values
                    .iter()
                    .zip(probs)
                    .rev()
                    .find(|(_, p)| **p > 0.0)
                    .map_or(values[values.len() - 1], |(v, _)| *v)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Dist::Deterministic { value } => *value,
            Dist::Uniform { low, high } => 0.5 * (low + high),
            Dist::Exponential { rate } => 1.0 / rate,
            Dist::TruncatedExponential { rate, cap } => {
                let tail = (-rate * cap).exp();
                1.0 / rate - cap * tail / (1.0 - tail)
            }
            Dist::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    /// Essential supremum, or `None` for unbounded support.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            Dist::Deterministic { value } => Some(*value),
            Dist::Uniform { high, .. } => Some(*high),
            Dist::Exponential { .. } => None,
            Dist::TruncatedExponential { cap, .. } => Some(*cap),
            Dist::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .map(|(v, _)| *v)
                .reduce(f64::max),
        }
    }
}

/// Laws of the three marks in one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub xi: Dist,
    pub sigma: Dist,
    pub dpat: Dist,
}

impl Regime {
    fn validate(&self, label: &str) -> Result<()> {
        self.xi.validate(&format!("{label}xi"))?;
        self.sigma.validate(&format!("{label}sigma"))?;
        self.dpat.validate(&format!("{label}dpat"))
    }

    fn draw(&self, u: &[f64; WORDS_PER_INDEX]) -> MarkTriple {
        MarkTriple {
            xi: self.xi.sample(u[0]),
            sigma: self.sigma.sample(u[1]),
            dpat: self.dpat.sample(u[2]),
        }
    }
}

/// Finite-state modulating chain. The regime at index `n` is recovered by a
/// backward scan for the most recent step whose transition uniform falls in a
/// coalescing interval (one that sends every state to the same state), followed
/// by forward evolution. The result is an exact draw from the stationary chain
/// and depends only on the uniforms, hence on `(seed, stream_id, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModulated {
    regimes: Vec<Regime>,
    cdf: Vec<Vec<f64>>,
    coalescing: Vec<(f64, f64, usize)>,
    stationary: Vec<f64>,
}

impl MarkovModulated {
    pub fn new(regimes: Vec<Regime>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let k = regimes.len();
        if k == 0 {
            return Err(Error::InvalidSource("markov source needs at least one regime".into()));
        }
        if transition.len() != k || transition.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidSource(format!("transition matrix must be {k}x{k}")));
        }
        for (i, r) in regimes.iter().enumerate() {
            r.validate(&format!("regime {i} "))?;
        }
        let mut cdf = Vec::with_capacity(k);
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidSource(format!("transition row {i} has invalid entries")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSource(format!("transition row {i} sums to {total}")));
            }
            let mut acc = 0.0;
            let mut c: Vec<f64> = row
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            c[k - 1] = 1.0;
            cdf.push(c);
        }
        let mut coalescing = Vec::new();
        for j in 0..k {
            let lo = cdf.iter().map(|c| if j == 0 { 0.0 } else { c[j - 1] }).fold(0.0, f64::max);
            let hi = cdf.iter().map(|c| c[j]).fold(1.0, f64::min);
            if lo < hi {
                coalescing.push((lo, hi, j));
            }
        }
        if coalescing.is_empty() {
            return Err(Error::InvalidSource(
                "transition matrix has no one-step coalescing set (need a column j and an interval \
                 of uniforms sending every regime to j); exact stationary regimes are unavailable"
                    .into(),
            ));
        }
        let stationary = stationary_law(&transition);
        Ok(Self { regimes, cdf, coalescing, stationary })
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    fn next_state(&self, state: usize, u: f64) -> usize {
        let row = &self.cdf[state];
        row.iter().position(|c| u < *c).unwrap_or(row.len() - 1)
    }

    fn coalesces_to(&self, u: f64) -> Option<usize> {
        self.coalescing.iter().find(|(lo, hi, _)| *lo <= u && u < *hi).map(|c| c.2)
    }

    fn stationary_mean(&self, f: impl Fn(&Regime) -> f64) -> f64 {
        self.regimes.iter().zip(&self.stationary).map(|(r, p)| p * f(r)).sum()
    }
}

fn stationary_law(transition: &[Vec<f64>]) -> Vec<f64> {
    let k = transition.len();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; k];
        for (i, row) in transition.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < 1e-15 {
            break;
        }
    }
    pi
}

/// Which family generates the marks.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkLaw {
    Deterministic(MarkTriple),
    Iid(Regime),
    Markov(MarkovModulated),
}

impl MarkLaw {
    fn regimes(&self) -> Vec<Regime> {
        match self {
            MarkLaw::Deterministic(m) => vec![Regime {
                xi: Dist::Deterministic { value: m.xi },
                sigma: Dist::Deterministic { value: m.sigma },
                dpat: Dist::Deterministic { value: m.dpat },
            }],
            MarkLaw::Iid(r) => vec![r.clone()],
            MarkLaw::Markov(m) => m.regimes.clone(),
        }
    }
}

/// Declared almost-sure upper bounds on service and patience. They are what make
/// exact zero-certificates possible; the constructor refuses bounds the laws
/// do not honour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpat: Option<f64>,
}

/// The alpha marks a recursion can be driven by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaKind {
    SigmaPlusD,
    SigmaMinD,
    DOnly,
}

impl AlphaKind {
    pub fn eval(self, m: &MarkTriple) -> f64 {
        match self {
            AlphaKind::SigmaPlusD => m.sigma_plus_d(),
            AlphaKind::SigmaMinD => m.sigma_min_d(),
            AlphaKind::DOnly => m.dpat,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlphaKind::SigmaPlusD => "sigma+D",
            AlphaKind::SigmaMinD => "min(sigma,D)",
            AlphaKind::DOnly => "D",
        }
    }
}

impl DeclaredBounds {
    pub fn alpha_bound(&self, kind: AlphaKind) -> Option<f64> {
        match kind {
            AlphaKind::SigmaPlusD => Some(self.sigma? + self.dpat?),
            AlphaKind::SigmaMinD => match (self.sigma, self.dpat) {
                (Some(s), Some(d)) => Some(s.min(d)),
                (s, d) => s.or(d),
            },
            AlphaKind::DOnly => self.dpat,
        }
    }

    /// Which declarations an exact computation with `kind` is missing.
    pub fn missing_for(&self, kind: AlphaKind) -> &'static str {
        match kind {
            AlphaKind::SigmaPlusD if self.sigma.is_none() && self.dpat.is_none() => {
                "bounds.sigma and bounds.dpat"
            }
            AlphaKind::SigmaPlusD if self.sigma.is_none() => "bounds.sigma",
            AlphaKind::SigmaPlusD => "bounds.dpat",
            AlphaKind::SigmaMinD => "bounds.sigma or bounds.dpat",
            AlphaKind::DOnly => "bounds.dpat",
        }
    }
}

pub(crate) const WORDS_PER_INDEX: usize = 4;
// ChaCha positions are counted in 32-bit words; each index owns four u64 draws.
const U32_WORDS_PER_INDEX: u128 = 2 * WORDS_PER_INDEX as u128;

fn counter(n: i64) -> u128 {
    ((n as u64) ^ (1 << 63)) as u128 * U32_WORDS_PER_INDEX
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Two-sided stationary ergodic sequence of [`MarkTriple`]s with index-addressable
/// access. Cheap to clone and safe to share across threads.
#[derive(Debug, Clone)]
pub struct MarkSource {
    law: Arc<MarkLaw>,
    bounds: DeclaredBounds,
    seed: u64,
    stream_id: u64,
    offset: i64,
    base: ChaCha8Rng,
}

impl PartialEq for MarkSource {
    fn eq(&self, other: &Self) -> bool {
        self.law == other.law
            && self.bounds == other.bounds
            && self.seed == other.seed
            && self.stream_id == other.stream_id
            && self.offset == other.offset
    }
}

impl MarkSource {
    pub fn new(law: MarkLaw, bounds: DeclaredBounds, seed: u64, stream_id: u64) -> Result<Self> {
        if let MarkLaw::Deterministic(m) = &law {
            MarkTriple::new(m.xi, m.sigma, m.dpat).map_err(|e| Error::InvalidSource(e.to_string()))?;
        }
        let regimes = law.regimes();
        if let MarkLaw::Iid(r) = &law {
            r.validate("")?;
        }
        let mean_xi = match &law {
            MarkLaw::Markov(m) => m.stationary_mean(|r| r.xi.mean()),
            _ => regimes[0].xi.mean(),
        };
        if !(mean_xi > 0.0) {
            return Err(Error::InvalidSource(format!("E[xi] must be positive, got {mean_xi}")));
        }
        for (name, declared, pick) in [
            ("sigma", bounds.sigma, (|r: &Regime| &r.sigma) as fn(&Regime) -> &Dist),
            ("dpat", bounds.dpat, |r: &Regime| &r.dpat),
        ] {
            let Some(c) = declared else { continue };
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidSource(format!("bounds.{name} = {c} must be finite and >= 0")));
            }
            for r in &regimes {
                match pick(r).support_max() {
                    None => {
                        return Err(Error::InvalidSource(format!(
                            "bounds.{name} = {c} declared but the {name} law has unbounded support"
                        )))
                    }
                    Some(sup) if sup > c => {
                        return Err(Error::InvalidSource(format!(
                            "bounds.{name} = {c} is below the {name} support maximum {sup}"
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(stream_id);
        Ok(Self { law: Arc::new(law), bounds, seed, stream_id, offset: 0, base })
    }

    /// Constant marks; every bound is declared at the mark values.
    pub fn deterministic(xi: f64, sigma: f64, dpat: f64) -> Result<Self> {
        let m = MarkTriple::new(xi, sigma, dpat).map_err(|e| Error::InvalidSource(e.to_string()))?;
        Self::new(
            MarkLaw::Deterministic(m),
            DeclaredBounds { sigma: Some(sigma), dpat: Some(dpat) },
            0,
            0,
        )
    }

    pub fn iid(regime: Regime, bounds: DeclaredBounds, seed: u64, stream_id: u64) -> Result<Self> {
        Self::new(MarkLaw::Iid(regime), bounds, seed, stream_id)
    }

    pub fn law(&self) -> &MarkLaw {
        &self.law
    }

    pub fn bounds(&self) -> DeclaredBounds {
        self.bounds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn alpha_bound(&self, kind: AlphaKind) -> Option<f64> {
        self.bounds.alpha_bound(kind)
    }

    /// True when marks at distinct indices are independent and identically distributed.
    pub fn is_iid(&self) -> bool {
        !matches!(*self.law, MarkLaw::Markov(_))
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(*self.law, MarkLaw::Deterministic(_))
    }

    pub fn mean_xi(&self) -> f64 {
        self.mean(|r| r.xi.mean())
    }

    pub fn mean_sigma(&self) -> f64 {
        self.mean(|r| r.sigma.mean())
    }

    pub fn mean_dpat(&self) -> f64 {
        self.mean(|r| r.dpat.mean())
    }

    fn mean(&self, f: impl Fn(&Regime) -> f64) -> f64 {
        match &*self.law {
            MarkLaw::Deterministic(m) => f(&MarkLaw::Deterministic(*m).regimes()[0]),
            MarkLaw::Iid(r) => f(r),
            MarkLaw::Markov(m) => m.stationary_mean(f),
        }
    }

    /// Same law and seed on another independent stream. The offset is kept.
    pub fn with_stream(&self, stream_id: u64) -> Self {
        let mut base = self.base.clone();
        base.set_stream(stream_id);
        Self { stream_id, base, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(self.stream_id);
        Self { seed, base, ..self.clone() }
    }

    /// The flow iterated `k` times: `shift(k).mark_at(n) == mark_at(n + k)`.
    pub fn shift(&self, k: i64) -> Self {
        Self { offset: self.offset.wrapping_add(k), ..self.clone() }
    }

    pub fn mark_at(&self, n: i64) -> MarkTriple {
        self.cursor(n).next_mark()
    }

    /// `mark_at(i)` for `i` in `from..=to`.
    pub fn window(&self, from: i64, to: i64) -> Result<Vec<MarkTriple>> {
        if from > to {
            return Err(Error::InvalidArgument(format!("window from {from} > to {to}")));
        }
        let mut c = self.cursor(from);
        Ok((from..=to).map(|_| c.next_mark()).collect())
    }

    /// Forward iterator over marks starting at index `from`; yields exactly the
    /// values `mark_at` would.
    pub fn cursor(&self, from: i64) -> MarkCursor<'_> {
        let abs = from.wrapping_add(self.offset);
        let mut rng = self.base.clone();
        if !self.is_deterministic() {
            rng.set_word_pos(counter(abs));
        }
        let regime = match &*self.law {
            MarkLaw::Markov(m) => Some(self.regime_at(m, abs)),
            _ => None,
        };
        MarkCursor { src: self, rng, regime }
    }

    fn uniforms_at(&self, abs: i64) -> [f64; WORDS_PER_INDEX] {
        let mut rng = self.base.clone();
        rng.set_word_pos(counter(abs));
        draw_uniforms(&mut rng)
    }

    fn regime_at(&self, m: &MarkovModulated, abs: i64) -> usize {
        // Most recent k < abs whose transition uniform coalesces, then replay forward.
        let mut k = abs.wrapping_sub(1);
        let mut rng = self.base.clone();
        let mut block_start = k;
        let mut block: Vec<f64> = Vec::new();
        let state = loop {
            if block.is_empty() || k < block_start {
                // refill a run of transition uniforms ending at k
                block_start = k.wrapping_sub(63);
                rng.set_word_pos(counter(block_start));
                block = (0..64).map(|_| draw_uniforms(&mut rng)[3]).collect();
            }
            let u = block[(k - block_start) as usize];
            if let Some(j) = m.coalesces_to(u) {
                break j;
            }
            k -= 1;
        };
        let mut state = state;
        for i in (k + 1)..abs {
            state = m.next_state(state, self.uniforms_at(i)[3]);
        }
        state
    }
}

fn draw_uniforms(rng: &mut ChaCha8Rng) -> [f64; WORDS_PER_INDEX] {
    let mut u = [0.0; WORDS_PER_INDEX];
    for x in &mut u {
        *x = unit(rng.next_u64());
    }
    u
}

/// Sequential reader produced by [`MarkSource::cursor`].
#[derive(Debug, Clone)]
pub struct MarkCursor<'a> {
    src: &'a MarkSource,
    rng: ChaCha8Rng,
    regime: Option<usize>,
}

impl MarkCursor<'_> {
    pub fn next_mark(&mut self) -> MarkTriple {
        match &*self.src.law {
            MarkLaw::Deterministic(m) => *m,
            MarkLaw::Iid(r) => r.draw(&draw_uniforms(&mut self.rng)),
            MarkLaw::Markov(m) => {
                let u = draw_uniforms(&mut self.rng);
                let state = self.regime.expect("markov cursor carries its regime");
                self.regime = Some(m.next_state(state, u[3]));
                m.regimes[state].draw(&u)
            }
        }
    }
}

impl Iterator for MarkCursor<'_> {
    type Item = MarkTriple;

    fn next(&mut self) -> Option<MarkTriple> {
        Some(self.next_mark())
    }
}
