//! C ABI for `hll-core`.
//!
//! Every fallible call returns an [`HllStatus`]; on failure the message is
//! kept per thread and read with [`hll_last_error`]. Objects cross the
//! boundary as opaque handles owned by the caller and released with the
//! matching `*_free` function. Panics never unwind into C; they surface as
//! [`HllStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hll_core::config::parse_config;
use hll_core::fit::{self, FitReport, SampleSet};
use hll_core::ks;
use hll_core::sim::{run_simulation, LatencyKind, SimConfig, SimOutput};
use hll_core::{Distribution, Error, Family};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HllStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParameterDomain = 3,
    FitFailed = 4,
    Config = 5,
    Io = 6,
    BufferTooSmall = 7,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HllFamily {
    Exponential = 0,
    Gamma = 1,
    Gev = 2,
    /// Fit every family and keep the one with the smallest KS statistic.
    Auto = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HllLatency {
    Endorse = 0,
    Order = 1,
    Validate = 2,
    Total = 3,
}

/// Plain-data view of a fit report. Unused trailing `params` are zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HllFitSummary {
    pub family: HllFamily,
    pub n_params: u32,
    pub params: [f64; 3],
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub significance: f64,
    pub passed: bool,
    pub empirical_mean: f64,
    /// NaN when the fitted distribution has no mean.
    pub bestfit_mean: f64,
    pub n: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HllKsResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub passed: bool,
    pub n: usize,
}

pub struct HllDistribution(Distribution);
pub struct HllFitReport(FitReport);
pub struct HllSimResult(SimOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> HllStatus {
    match e {
        Error::ParameterDomain { .. } => HllStatus::ParameterDomain,
        Error::FitDegenerate(_)
        | Error::InsufficientSamples { .. }
        | Error::FitFailed { .. }
        | Error::AllFitsFailed(_)
        | Error::UndefinedMoment(_) => HllStatus::FitFailed,
        Error::Config { .. } | Error::ConfigParse { .. } => HllStatus::Config,
        Error::Io { .. } | Error::Format { .. } => HllStatus::Io,
        _ => HllStatus::InvalidArgument,
    }
}

struct Fail(HllStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HllStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HllStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HllStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HllStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HllStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn family_out(f: Family) -> HllFamily {
    match f {
        Family::Exponential => HllFamily::Exponential,
        Family::Gamma => HllFamily::Gamma,
        Family::Gev => HllFamily::Gev,
    }
}

fn latency_in(k: HllLatency) -> LatencyKind {
    match k {
        HllLatency::Endorse => LatencyKind::Endorse,
        HllLatency::Order => LatencyKind::Order,
        HllLatency::Validate => LatencyKind::Validate,
        HllLatency::Total => LatencyKind::Total,
    }
}

fn boxed<T>(out: &mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hll_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hll_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses `exp:λ`, `gamma:α,β` or `gev:ξ,σ,μ`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hll_distribution_parse(spec: *const c_char, out: *mut *mut HllDistribution) -> HllStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let d: Distribution = text(spec, "spec")?.parse()?;
        boxed(out, HllDistribution(d));
        Ok(())
    })
}

/// Builds a distribution from `n_params` parameters in the order of the
/// family's string form. `family` must not be `Auto`.
///
/// # Safety
/// `params` must point to `n_params` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_distribution_new(
    family: HllFamily,
    params: *const f64,
    n_params: usize,
    out: *mut *mut HllDistribution,
) -> HllStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let family = match family {
            HllFamily::Exponential => Family::Exponential,
            HllFamily::Gamma => Family::Gamma,
            HllFamily::Gev => Family::Gev,
            HllFamily::Auto => return Err(Fail(HllStatus::InvalidArgument, "Auto names no distribution".into())),
        };
        let d = Distribution::from_params(family, slice(params, n_params, "params")?)?;
        boxed(out, HllDistribution(d));
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hll_distribution_free(d: *mut HllDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_distribution_pdf(d: *const HllDistribution, x: f64, out: *mut f64) -> HllStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(d, "distribution")?.0.pdf(x)?;
        Ok(())
    })
}

/// # Safety
/// `d` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_distribution_cdf(d: *const HllDistribution, x: f64, out: *mut f64) -> HllStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(d, "distribution")?.0.cdf(x)?;
        Ok(())
    })
}

/// # Safety
/// `d` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_distribution_mean(d: *const HllDistribution, out: *mut f64) -> HllStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(d, "distribution")?.0.mean()?;
        Ok(())
    })
}

/// Writes the string form (`gamma:α,β`, ...) into `buf`, NUL-terminated.
/// `needed` receives the buffer size required, including the NUL.
///
/// # Safety
/// `d` and `needed` must be valid; `buf` must hold `len` bytes or be null
/// when `len` is 0.
#[no_mangle]
pub unsafe extern "C" fn hll_distribution_to_string(
    d: *const HllDistribution,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> HllStatus {
    guard(|| {
        let s = deref(d, "distribution")?.0.to_string();
        *out_ref(needed, "needed")? = s.len() + 1;
        if len < s.len() + 1 {
            return Err(Fail(HllStatus::BufferTooSmall, format!("need {} bytes", s.len() + 1)));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(s.as_ptr().cast(), buf, s.len());
        *buf.add(s.len()) = 0;
        Ok(())
    })
}

/// Fills `out[0..n]` with draws seeded by `seed`.
///
/// # Safety
/// `d` must be valid and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn hll_distribution_sample(
    d: *const HllDistribution,
    seed: u64,
    out: *mut f64,
    n: usize,
) -> HllStatus {
    guard(|| {
        let d = deref(d, "distribution")?;
        if n == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let draws = d.0.sample_n(&mut ChaCha8Rng::seed_from_u64(seed), n)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&draws);
        Ok(())
    })
}

/// One-sample KS test of `samples` against `d`.
///
/// # Safety
/// `samples` must hold `n` doubles; `d` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_ks_test(
    samples: *const f64,
    n: usize,
    d: *const HllDistribution,
    significance: f64,
    out: *mut HllKsResult,
) -> HllStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let r = ks::ks_test(
            slice(samples, n, "samples")?,
            &deref(d, "distribution")?.0,
            significance,
        )?;
        *out = HllKsResult {
            statistic: r.statistic,
            critical_value: r.critical_value,
            p_value: r.p_value(),
            passed: r.passed,
            n: r.n,
        };
        Ok(())
    })
}

/// Fits `family` (or the best of all three with `Auto`) by maximum
/// likelihood and KS-tests the result at `significance`.
///
/// # Safety
/// `samples` must hold `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_fit(
    samples: *const f64,
    n: usize,
    family: HllFamily,
    significance: f64,
    out: *mut *mut HllFitReport,
) -> HllStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = SampleSet::from_values(slice(samples, n, "samples")?.to_vec())?;
        let report = match family {
            HllFamily::Exponential => fit::fit_report(&s, Family::Exponential, significance)?,
            HllFamily::Gamma => fit::fit_report(&s, Family::Gamma, significance)?,
            HllFamily::Gev => fit::fit_report(&s, Family::Gev, significance)?,
            HllFamily::Auto => fit::select_best_fit(&s, &Family::ALL, significance)?,
        };
        boxed(out, HllFitReport(report));
        Ok(())
    })
}

/// # Safety
/// `r` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_fit_report_summary(r: *const HllFitReport, out: *mut HllFitSummary) -> HllStatus {
    guard(|| {
        let r = &deref(r, "report")?.0;
        let out = out_ref(out, "out")?;
        let p = r.distribution.params();
        let mut params = [0.0; 3];
        params[..p.len()].copy_from_slice(&p);
        *out = HllFitSummary {
            family: family_out(r.distribution.family()),
            n_params: p.len() as u32,
            params,
            ks_statistic: r.ks_statistic,
            ks_critical: r.ks_critical,
            significance: r.significance,
            passed: r.passed,
            empirical_mean: r.empirical_mean,
            bestfit_mean: r.bestfit_mean,
            n: r.n,
        };
        Ok(())
    })
}

/// A new handle to a copy of the fitted distribution.
///
/// # Safety
/// `r` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_fit_report_distribution(
    r: *const HllFitReport,
    out: *mut *mut HllDistribution,
) -> HllStatus {
    guard(|| {
        let d = deref(r, "report")?.0.distribution;
        boxed(out_ref(out, "out")?, HllDistribution(d));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hll_fit_report_free(r: *mut HllFitReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Simulates `n_tx` transactions with the calibrated service models.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_simulate(
    lambda_t: f64,
    block_size: usize,
    block_timeout: f64,
    n_tx: usize,
    seed: u64,
    out: *mut *mut HllSimResult,
) -> HllStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = SimConfig::new(lambda_t, block_size, block_timeout)
            .with_n_tx(n_tx)
            .with_seed(seed);
        cfg.validate()?;
        boxed(out, HllSimResult(run_simulation(&cfg)?));
        Ok(())
    })
}

/// Simulates the scenario in a TOML file (the first grid point for sweep
/// files), overriding its seed.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hll_simulate_file(path: *const c_char, seed: u64, out: *mut *mut HllSimResult) -> HllStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mut cfg = parse_config(Path::new(text(path, "path")?))?;
        cfg.set_seed(seed);
        let sim = cfg.sim_config();
        sim.validate()?;
        boxed(out, HllSimResult(run_simulation(&sim)?));
        Ok(())
    })
}

/// Number of recorded transactions.
///
/// # Safety
/// `r` must be null or valid; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn hll_sim_result_len(r: *const HllSimResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.samples.len())
}

/// Number of blocks cut.
///
/// # Safety
/// `r` must be null or valid; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn hll_sim_result_block_count(r: *const HllSimResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.blocks.len())
}

/// Copies one latency column, in transaction order, into `out`.
///
/// # Safety
/// `r` must be valid and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hll_sim_result_latencies(
    r: *const HllSimResult,
    kind: HllLatency,
    out: *mut f64,
    len: usize,
) -> HllStatus {
    guard(|| {
        let r = deref(r, "result")?;
        let values = r.0.latencies(latency_in(kind));
        if len < values.len() {
            return Err(Fail(HllStatus::BufferTooSmall, format!("need {} values", values.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(&values);
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hll_sim_result_free(r: *mut HllSimResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
