//! Single-server FIFO queue whose customers leave at their deadline whether or
//! not service is complete. The arrival-epoch workload follows
//! `S' = [S + (sigma - (S + sigma - D)^+)^+ - xi]^+`, a monotone continuous map, so
//! both the Loynes scheme and renovation on `{Y_D = 0}` apply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::LossReport;
use crate::marks::{AlphaKind, MarkSource, MarkTriple};
use crate::recursion::{check_state, pos};
use crate::stationary::{self, replay, Model, SampleOptions, SandwichReport, StationarySample};

/// `s + (sigma - (s + sigma - D)^+)^+` rewritten as `(s + sigma) ^ (s v D)`, which
/// rounds once and so stays monotone and below `s v D` in floating point.
#[inline]
pub(crate) fn end_map(s: f64, m: &MarkTriple) -> f64 {
    pos((s + m.sigma).min(s.max(m.dpat)) - m.xi)
}

/// The same step evaluated literally as `[s + (sigma - (s + sigma - D)^+)^+ - xi]^+`.
pub fn end_step_compact(s: f64, m: &MarkTriple) -> Result<f64> {
    check_state(s, "workload s")?;
    Ok(pos(s + pos(m.sigma - pos(s + m.sigma - m.dpat)) - m.xi))
}

/// Workload found by the next customer.
pub fn end_step(s: f64, mark: &MarkTriple) -> Result<f64> {
    check_state(s, "workload s")?;
    Ok(end_map(s, mark))
}

/// Work brought by a customer finding workload `s`, by cases: the full service
/// when it ends before the deadline, the remaining patience when service starts
/// before the deadline but cannot finish, nothing otherwise.
pub fn added_work_by_cases(s: f64, m: &MarkTriple) -> f64 {
    if s + m.sigma <= m.dpat {
        m.sigma
    } else if s <= m.dpat {
        m.dpat - s
    } else {
        0.0
    }
}

pub fn end_step_by_cases(s: f64, m: &MarkTriple) -> Result<f64> {
    check_state(s, "workload s")?;
    Ok(pos(s + added_work_by_cases(s, m) - m.xi))
}

pub fn find_renovation_epoch_end(src: &MarkSource, max_epochs: usize, max_depth: usize) -> Result<crate::ZeroCertificate> {
    stationary::renovation_epoch(Model::End, src, max_epochs, max_depth)
}

/// Stationary `S` at index 0; exact mode replays from a certified zero of `Y_D`.
pub fn sample_stationary_s(src: &MarkSource, opts: &SampleOptions) -> Result<StationarySample> {
    stationary::sample_stationary(Model::End, src, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoynesValue {
    pub value: f64,
    /// Backward depth at which the scheme stopped.
    pub depth: usize,
    /// True when iterates from 0 and from the declared bound on `D` coincided.
    pub exact: bool,
}

/// Minimal stationary solution at `epoch` as the limit of iterates started from
/// 0 at `epoch - k`, for `k = 1, 2, 4, ...` up to `max_depth`. With a declared
/// bound `c` on `D` the iterate started from `c` is run alongside, and equality of
/// the two brackets the stationary value exactly. Without one the scheme stops
/// when consecutive depths agree and is flagged inexact.
pub fn loynes_stationary_s(src: &MarkSource, epoch: i64, max_depth: usize) -> Result<LoynesValue> {
    if max_depth == 0 {
        return Err(Error::InvalidArgument("max_depth must be positive".into()));
    }
    let top = src.alpha_bound(AlphaKind::DOnly);
    let mut previous = None;
    let mut k = 1;
    loop {
        let start = epoch - k as i64;
        let bottom = replay(Model::End, src, start, epoch, 0.0)?;
        match top {
            Some(c) if replay(Model::End, src, start, epoch, c)? == bottom => {
                return Ok(LoynesValue { value: bottom, depth: k, exact: true })
            }
            None if previous == Some(bottom) => return Ok(LoynesValue { value: bottom, depth: k, exact: false }),
            _ => {}
        }
        if k == max_depth {
            return Ok(LoynesValue { value: bottom, depth: k, exact: false });
        }
        previous = Some(bottom);
        k = (2 * k).min(max_depth);
    }
}

pub fn sandwich_check_end(src: &MarkSource, epochs: &[i64], opts: &SampleOptions) -> Result<SandwichReport> {
    stationary::sandwich_check(Model::End, src, epochs, opts)
}

/// `pi_hat = P(S > D - sigma)`, `pi_hat_never_served = P(S > D)`, with bounds
/// `P(Y_{sigma^D} > D - sigma)` and `P(Y_D > D - sigma)`.
pub fn loss_metrics_end(src: &MarkSource, samples: usize, opts: &SampleOptions) -> Result<LossReport> {
    stationary::loss_report(Model::End, src, samples, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisciplineComparison {
    pub steps: usize,
    /// Indices with `S_n > W_n`.
    pub violations: usize,
}

/// Runs both workloads from 0 on the marks at indices `0..horizon` and counts
/// indices where the end-model workload exceeds the begin-model one.
pub fn compare_disciplines(src: &MarkSource, horizon: usize) -> DisciplineComparison {
    let (mut s, mut w) = (0.0, 0.0);
    let mut violations = 0;
    for m in src.cursor(0).take(horizon) {
        s = end_map(s, &m);
        w = crate::fifo_begin::fifo_map(w, &m);
        violations += usize::from(s > w);
    }
    DisciplineComparison { steps: horizon, violations }
}
