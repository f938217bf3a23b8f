//! Single-server FIFO queue whose customers leave if service has not begun by
//! their deadline. The arrival-epoch workload `W` follows
//! `W' = [W + sigma 1{W <= D} - xi]^+`, which is not monotone in `W`; existence,
//! uniqueness and exact sampling come from the renovating events
//! `{Y_{sigma+D} = 0}` of the dominating recursion.

use crate::error::Result;
use crate::estimation::LossReport;
use crate::marks::{MarkSource, MarkTriple};
use crate::recursion::{check_state, pos, ZeroCertificate};
use crate::stationary::{self, Model, SampleOptions, SandwichReport, StationarySample};

#[inline]
pub(crate) fn fifo_map(w: f64, m: &MarkTriple) -> f64 {
    let added = if w <= m.dpat { m.sigma } else { 0.0 };
    pos(w + added - m.xi)
}

/// Workload found by the next customer. The customer with marks `mark` is served
/// iff `w <= mark.dpat`.
pub fn fifo_step(w: f64, mark: &MarkTriple) -> Result<f64> {
    check_state(w, "workload w")?;
    Ok(fifo_map(w, mark))
}

/// Nearest epoch `-m` with a certified zero of `Y_{sigma+D}`; the stationary
/// workload vanishes there.
pub fn find_renovation_epoch(src: &MarkSource, max_epochs: usize, max_depth: usize) -> Result<ZeroCertificate> {
    stationary::renovation_epoch(Model::Begin, src, max_epochs, max_depth)
}

pub fn sample_stationary_w(src: &MarkSource, opts: &SampleOptions) -> Result<StationarySample> {
    stationary::sample_stationary(Model::Begin, src, opts)
}

pub fn sandwich_check(src: &MarkSource, epochs: &[i64], opts: &SampleOptions) -> Result<SandwichReport> {
    stationary::sandwich_check(Model::Begin, src, epochs, opts)
}

/// `P(W > D)` at epoch 0 with bounds `P(Y_{sigma^D} > D)` and `P(Y_{sigma+D} > D)`.
pub fn loss_probability_begin(src: &MarkSource, samples: usize, opts: &SampleOptions) -> Result<LossReport> {
    stationary::loss_report(Model::Begin, src, samples, opts)
}
