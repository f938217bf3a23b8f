//! C interface to the `renege` library.
//!
//! Sources are opaque handles created from the same JSON used by scenario
//! files (`{"kind": "iid", ...}`) and released with `renege_source_free`.
//! Every fallible call returns a `RenegeStatus`; on failure the message is
//! available from `renege_last_error` on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use renege::estimation::{birth_death_abandonment, ks_two_sample, OracleSpec};
use renege::fifo_begin::fifo_step;
use renege::fifo_end::end_step;
use renege::recursion::backward_supremum;
use renege::scenario::SourceConfig;
use renege::stationary::{loss_report, sample_stationary};
use renege::{AlphaKind, Error, MarkSource, MarkTriple, Mode, Model, RecursionSpec, SampleOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenegeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSource = 3,
    Capability = 4,
    DepthExhausted = 5,
    RenovationNotFound = 6,
    OracleTruncation = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenegeModel {
    Begin = 0,
    End = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenegeAlpha {
    SigmaPlusD = 0,
    SigmaMinD = 1,
    DOnly = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenegeMark {
    pub xi: f64,
    pub sigma: f64,
    pub dpat: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenegeSampleOptions {
    /// Nonzero selects the exact (renovation-based) method.
    pub exact: u8,
    pub max_epochs: usize,
    pub max_depth: usize,
    pub warmup: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenegeEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_error: f64,
    pub n: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenegeLoss {
    pub pi_hat: RenegeEstimate,
    /// Only meaningful for the end model; zeroed otherwise.
    pub pi_hat_never_served: RenegeEstimate,
    pub lower_bound: RenegeEstimate,
    pub upper_bound: RenegeEstimate,
    pub bracket_ok: u8,
}

/// Opaque mark source.
pub struct RenegeSource {
    inner: MarkSource,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RenegeStatus {
    match e {
        Error::InvalidArgument(_) | Error::EmptyInput(_) => RenegeStatus::InvalidArgument,
        Error::InvalidSource(_) => RenegeStatus::InvalidSource,
        Error::Capability(_) => RenegeStatus::Capability,
        Error::DepthExhausted { .. } => RenegeStatus::DepthExhausted,
        Error::RenovationNotFound { .. } => RenegeStatus::RenovationNotFound,
        Error::OracleTruncation { .. } => RenegeStatus::OracleTruncation,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RenegeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RenegeStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            RenegeStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            RenegeStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn to_triple(m: &RenegeMark) -> Result<MarkTriple, Fail> {
    Ok(MarkTriple::new(m.xi, m.sigma, m.dpat)?)
}

fn model(m: RenegeModel) -> Model {
    match m {
        RenegeModel::Begin => Model::Begin,
        RenegeModel::End => Model::End,
    }
}

fn options(o: &RenegeSampleOptions) -> SampleOptions {
    SampleOptions {
        mode: if o.exact != 0 { Mode::Exact } else { Mode::Approximate },
        max_epochs: o.max_epochs,
        max_depth: o.max_depth,
        warmup: o.warmup,
    }
}

fn estimate(e: &renege::estimation::Estimate) -> RenegeEstimate {
    RenegeEstimate { point: e.point, lower: e.lower, upper: e.upper, std_error: e.std_error, n: e.n }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn renege_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn renege_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a source from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn renege_source_from_json(json: *const c_char, out: *mut *mut RenegeSource) -> RenegeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::InvalidArgument(format!("json is not utf-8: {e}")))?;
        let cfg: SourceConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidSource(e.to_string()))?;
        *out = Box::into_raw(Box::new(RenegeSource { inner: cfg.build()? }));
        Ok(())
    })
}

/// Releases a source. Null is ignored.
///
/// # Safety
/// `src` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn renege_source_free(src: *mut RenegeSource) {
    if !src.is_null() {
        drop(Box::from_raw(src));
    }
}

/// New source whose index 0 is index `k` of `src`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn renege_source_shift(src: *const RenegeSource, k: i64, out: *mut *mut RenegeSource) -> RenegeStatus {
    guard(|| {
        let src = deref(src, "src")?;
        let out = self::out(out, "out")?;
        *out = Box::into_raw(Box::new(RenegeSource { inner: src.inner.shift(k) }));
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn renege_mark_at(src: *const RenegeSource, index: i64, out: *mut RenegeMark) -> RenegeStatus {
    guard(|| {
        let m = deref(src, "src")?.inner.mark_at(index);
        *self::out(out, "out")? = RenegeMark { xi: m.xi, sigma: m.sigma, dpat: m.dpat };
        Ok(())
    })
}

/// One step of the begin-of-service workload recursion.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn renege_fifo_step(w: f64, mark: *const RenegeMark, out: *mut f64) -> RenegeStatus {
    guard(|| {
        let m = to_triple(deref(mark, "mark")?)?;
        *self::out(out, "out")? = fifo_step(w, &m)?;
        Ok(())
    })
}

/// One step of the end-of-service workload recursion.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn renege_end_step(s: f64, mark: *const RenegeMark, out: *mut f64) -> RenegeStatus {
    guard(|| {
        let m = to_triple(deref(mark, "mark")?)?;
        *self::out(out, "out")? = end_step(s, &m)?;
        Ok(())
    })
}

/// Backward supremum of the generic recursion at `epoch`. `exact` receives 1
/// when a zero certificate was found.
///
/// # Safety
/// Pointers must be valid; `exact` may be null.
#[no_mangle]
pub unsafe extern "C" fn renege_backward_supremum(
    src: *const RenegeSource,
    alpha: RenegeAlpha,
    epoch: i64,
    max_depth: usize,
    exact_mode: u8,
    out: *mut f64,
    exact: *mut u8,
) -> RenegeStatus {
    guard(|| {
        let src = deref(src, "src")?;
        let kind = match alpha {
            RenegeAlpha::SigmaPlusD => AlphaKind::SigmaPlusD,
            RenegeAlpha::SigmaMinD => AlphaKind::SigmaMinD,
            RenegeAlpha::DOnly => AlphaKind::DOnly,
        };
        let mode = if exact_mode != 0 { Mode::Exact } else { Mode::Approximate };
        let v = backward_supremum(&RecursionSpec::new(kind), &src.inner, epoch, max_depth, mode)?;
        *self::out(out, "out")? = v.value;
        if let Some(e) = exact.as_mut() {
            *e = u8::from(v.exact);
        }
        Ok(())
    })
}

/// One stationary workload draw at index 0 of `src`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn renege_sample_stationary(
    src: *const RenegeSource,
    which: RenegeModel,
    opts: *const RenegeSampleOptions,
    out: *mut f64,
) -> RenegeStatus {
    guard(|| {
        let src = deref(src, "src")?;
        let o = options(deref(opts, "opts")?);
        *self::out(out, "out")? = sample_stationary(model(which), &src.inner, &o)?.value;
        Ok(())
    })
}

/// Loss probability estimate with its bounds.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn renege_loss(
    src: *const RenegeSource,
    which: RenegeModel,
    samples: usize,
    opts: *const RenegeSampleOptions,
    out: *mut RenegeLoss,
) -> RenegeStatus {
    guard(|| {
        let src = deref(src, "src")?;
        let o = options(deref(opts, "opts")?);
        let r = loss_report(model(which), &src.inner, samples, &o)?;
        let zero = RenegeEstimate { point: 0.0, lower: 0.0, upper: 0.0, std_error: 0.0, n: 0 };
        *self::out(out, "out")? = RenegeLoss {
            pi_hat: estimate(&r.pi_hat),
            pi_hat_never_served: r.pi_hat_never_served.as_ref().map_or(zero, estimate),
            lower_bound: estimate(&r.lower_bound),
            upper_bound: estimate(&r.upper_bound),
            bracket_ok: u8::from(r.bracket_ok),
        };
        Ok(())
    })
}

/// Abandonment probability of the single-server Markovian queue with
/// exponential patience. `blocking` may be null.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn renege_birth_death(
    lambda: f64,
    mu: f64,
    gamma: f64,
    abandonment: *mut f64,
    blocking: *mut f64,
) -> RenegeStatus {
    guard(|| {
        let r = birth_death_abandonment(&OracleSpec::new(lambda, mu, gamma))?;
        *out(abandonment, "abandonment")? = r.abandonment;
        if let Some(b) = blocking.as_mut() {
            *b = r.blocking;
        }
        Ok(())
    })
}

/// Two-sample Kolmogorov-Smirnov statistic.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` doubles.
#[no_mangle]
pub unsafe extern "C" fn renege_ks_two_sample(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut f64,
) -> RenegeStatus {
    guard(|| {
        let (a, b) = (slice(a, na, "a")?, slice(b, nb, "b")?);
        *self::out(out, "out")? = ks_two_sample(a, b)?;
        Ok(())
    })
}
