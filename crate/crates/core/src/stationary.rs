//! Machinery shared by the two single-server FIFO models: renovation search,
//! exact replay, the sandwich check and paired loss estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{ordered_within_3se, proportion, replicate, LossReport};
use crate::fifo_begin::{fifo_map, fifo_step};
use crate::fifo_end::{end_map, end_step};
use crate::marks::{AlphaKind, MarkSource, MarkTriple};
use crate::recursion::{
    backward_supremum, pos, replica_source, supremum_over_lags, Mode, PastMarks, RecursionSpec, ZeroCertificate,
};

/// Slack for order comparisons between values computed by different arithmetic
/// routes (forward replay against backward supremum).
pub const ORDER_SLACK: f64 = 1e-9;

/// Impatience until the beginning or until the end of service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Begin,
    End,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Begin => "begin",
            Model::End => "end",
        }
    }

    /// One step of the arrival-epoch workload recursion.
    pub fn step(self, w: f64, mark: &MarkTriple) -> Result<f64> {
        match self {
            Model::Begin => fifo_step(w, mark),
            Model::End => end_step(w, mark),
        }
    }

    #[inline]
    pub(crate) fn step_unchecked(self, w: f64, m: &MarkTriple) -> f64 {
        match self {
            Model::Begin => fifo_map(w, m),
            Model::End => end_map(w, m),
        }
    }

    /// The dominating recursion whose zeros are renovating events.
    pub fn upper_kind(self) -> AlphaKind {
        match self {
            Model::Begin => AlphaKind::SigmaPlusD,
            Model::End => AlphaKind::DOnly,
        }
    }

    pub fn lower_kind(self) -> AlphaKind {
        AlphaKind::SigmaMinD
    }

    /// The customer with these marks is lost when the workload it finds exceeds this.
    pub fn loss_threshold(self, m: &MarkTriple) -> f64 {
        match self {
            Model::Begin => m.dpat,
            Model::End => m.dpat - m.sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RenovationExact,
    ForwardApproximate,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RenovationExact => "renovation-exact",
            Method::ForwardApproximate => "forward-approximate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarySample {
    pub value: f64,
    pub method: Method,
    pub renovation_epoch: Option<i64>,
    pub certificate: Option<ZeroCertificate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    pub mode: Mode,
    /// Farthest renovation epoch searched.
    pub max_epochs: usize,
    /// Longest backward window per candidate epoch.
    pub max_depth: usize,
    /// Forward steps from 0 in approximate mode.
    pub warmup: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { mode: Mode::Exact, max_epochs: 100_000, max_depth: 100_000, warmup: 100_000 }
    }
}

impl SampleOptions {
    pub fn exact(max_epochs: usize, max_depth: usize) -> Self {
        Self { mode: Mode::Exact, max_epochs, max_depth, ..Self::default() }
    }

    pub fn approximate(warmup: usize) -> Self {
        Self { mode: Mode::Approximate, warmup, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.max_depth == 0 {
            return Err(Error::InvalidArgument("max_epochs and max_depth must be positive".into()));
        }
        Ok(())
    }
}

/// Nearest `m >= 1` at which the dominating recursion of `model` is certified zero
/// at epoch `-m`. Candidate windows share one cache of past marks.
pub fn renovation_epoch(model: Model, src: &MarkSource, max_epochs: usize, max_depth: usize) -> Result<ZeroCertificate> {
    if max_epochs == 0 || max_depth == 0 {
        return Err(Error::InvalidArgument("max_epochs and max_depth must be positive".into()));
    }
    let spec = RecursionSpec::new(model.upper_kind());
    let bound = spec.exact_bound(src)?;
    let mut past = PastMarks::new(src, 0);
    for m in 1..=max_epochs {
        let v = supremum_over_lags(&spec, -(m as i64), Some(bound), max_depth, |j| past.lag(m + j))?;
        if let Some(cert) = v.certificate {
            return Ok(cert);
        }
    }
    Err(Error::RenovationNotFound { max_epochs })
}

/// Forward iteration of `model` from `init` at index `from`, returning the state at `to`.
pub fn replay(model: Model, src: &MarkSource, from: i64, to: i64, init: f64) -> Result<f64> {
    if from > to {
        return Err(Error::InvalidArgument(format!("replay from {from} past {to}")));
    }
    crate::recursion::check_state(init, "initial workload")?;
    Ok(src.cursor(from).take((to - from) as usize).fold(init, |w, m| model.step_unchecked(w, &m)))
}

/// Stationary workload at index 0. Exact mode replays from a renovation epoch;
/// approximate mode runs `warmup` steps forward from 0.
pub fn sample_stationary(model: Model, src: &MarkSource, opts: &SampleOptions) -> Result<StationarySample> {
    opts.validate()?;
    match opts.mode {
        Mode::Exact => {
            let cert = renovation_epoch(model, src, opts.max_epochs, opts.max_depth)?;
            Ok(StationarySample {
                value: replay(model, src, cert.epoch, 0, 0.0)?,
                method: Method::RenovationExact,
                renovation_epoch: Some(cert.epoch),
                certificate: Some(cert),
            })
        }
        Mode::Approximate => Ok(StationarySample {
            value: replay(model, src, -(opts.warmup as i64), 0, 0.0)?,
            method: Method::ForwardApproximate,
            renovation_epoch: None,
            certificate: None,
        }),
    }
}

/// Exact `(lower, workload, upper)` at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub epoch: i64,
    pub lower: f64,
    pub workload: f64,
    pub upper: f64,
}

impl SandwichRow {
    pub fn violations(&self) -> usize {
        let slack = |x: f64| ORDER_SLACK * (1.0 + x.abs());
        usize::from(self.lower > self.workload + slack(self.workload))
            + usize::from(self.workload > self.upper + slack(self.upper))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub model: Model,
    pub rows: Vec<SandwichRow>,
    pub violations: usize,
}

pub fn sandwich_row(model: Model, src: &MarkSource, epoch: i64, opts: &SampleOptions) -> Result<SandwichRow> {
    let view = src.shift(epoch);
    let exact = SampleOptions { mode: Mode::Exact, ..*opts };
    let workload = sample_stationary(model, &view, &exact)?.value;
    let y = |kind| backward_supremum(&RecursionSpec::new(kind), &view, 0, opts.max_depth, Mode::Exact).map(|v| v.value);
    Ok(SandwichRow { epoch, lower: y(model.lower_kind())?, workload, upper: y(model.upper_kind())? })
}

/// Exact workload and both bounding recursions at each epoch, with the number of
/// order violations.
pub fn sandwich_check(model: Model, src: &MarkSource, epochs: &[i64], opts: &SampleOptions) -> Result<SandwichReport> {
    let rows = replicate(epochs.len(), |i| sandwich_row(model, src, epochs[i], opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let violations = rows.iter().map(SandwichRow::violations).sum();
    Ok(SandwichReport { model, rows, violations })
}

#[derive(Debug, Clone, Copy, Default)]
struct LossCounts {
    lost: usize,
    never_served: usize,
    lower: usize,
    upper: usize,
}

impl LossCounts {
    fn add(&mut self, model: Model, m: &MarkTriple, w: f64, lo: f64, hi: f64) {
        let t = model.loss_threshold(m);
        self.lost += usize::from(w > t);
        self.never_served += usize::from(w > m.dpat);
        self.lower += usize::from(lo > t);
        self.upper += usize::from(hi > t);
    }
}

/// Paired loss estimate: the workload at epoch 0 is compared with the marks of
/// the customer arriving at epoch 0.
pub fn loss_report(model: Model, src: &MarkSource, samples: usize, opts: &SampleOptions) -> Result<LossReport> {
    opts.validate()?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let mut counts = LossCounts::default();
    let (method, warmup) = match opts.mode {
        Mode::Exact => {
            let spacing = 2 * opts.max_depth;
            let rows = replicate(samples, |r| {
                let view = replica_source(src, r, spacing);
                sandwich_row(model, &view, 0, opts).map(|row| (row, view.mark_at(0)))
            });
            for row in rows {
                let (row, m) = row?;
                counts.add(model, &m, row.workload, row.lower, row.upper);
            }
            (Method::RenovationExact, None)
        }
        Mode::Approximate => {
            let lo_kind = model.lower_kind();
            let hi_kind = model.upper_kind();
            let (mut w, mut lo, mut hi) = (0.0, 0.0, 0.0);
            for (n, m) in src.cursor(0).take(opts.warmup + samples).enumerate() {
                if n >= opts.warmup {
                    counts.add(model, &m, w, lo, hi);
                }
                w = model.step_unchecked(w, &m);
                lo = pos(f64::max(lo, lo_kind.eval(&m)) - m.xi);
                hi = pos(f64::max(hi, hi_kind.eval(&m)) - m.xi);
            }
            (Method::ForwardApproximate, Some(opts.warmup))
        }
    };
    let pi_hat = proportion(counts.lost, samples)?;
    let lower_bound = proportion(counts.lower, samples)?;
    let upper_bound = proportion(counts.upper, samples)?;
    let never = proportion(counts.never_served, samples)?;
    Ok(LossReport {
        model: model.name().into(),
        method: method.name().into(),
        samples,
        warmup,
        seed: src.seed(),
        stream_id: src.stream_id(),
        bracket_ok: ordered_within_3se(&lower_bound, &pi_hat) && ordered_within_3se(&pi_hat, &upper_bound),
        pi_hat,
        pi_hat_never_served: (model == Model::End).then_some(never),
        lower_bound,
        upper_bound,
        served_fraction: 1.0 - never.point,
    })
}
