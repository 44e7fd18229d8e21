//! C ABI over the `bayesgi` solver.
//!
//! Every fallible function returns a [`BgiStatus`] and writes its result
//! through an out-pointer. Objects are opaque handles created by `*_new` or
//! `*_parse` style functions and released with the matching `*_free`. On any
//! non-OK status a description is kept per thread and can be read with
//! [`bgi_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bayesgi::dist::{GainDistribution, RngSeed};
use bayesgi::model::GameParams;
use bayesgi::repeated::{simulate, RepeatedConfig, SimulationTrace};
use bayesgi::sequential::{entry_cutoff_d, g12_tilde, g_star, sbgi_equilibrium};
use bayesgi::two_sided::{solve_two_sided, TwoSidedSettings};
use bayesgi::{EntryAction, Error, SeqAction};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BgiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    AssumptionViolated = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Game parameters `(P, N0, K, k)`.
pub struct BgiParams(GameParams);

/// Prior over a single channel gain.
pub struct BgiDistribution(GainDistribution);

/// Result of a repeated-game simulation.
pub struct BgiTrace {
    trace: SimulationTrace,
}

/// Equilibrium path of the two-stage game. Actions are 1 for share, 0 for spread.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BgiSbgiResult {
    pub primary_shares: i32,
    pub secondary_shares: i32,
    pub primary_payoff: f64,
    pub secondary_payoff: f64,
}

/// Fixed point of the two-sided game. Infinite thresholds come back as `INFINITY`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BgiTwoSidedResult {
    pub kappa_hat: f64,
    pub g21_hat: f64,
    pub alpha: f64,
    pub g12_hat: f64,
    pub entry_probability: f64,
    pub max_residual: f64,
    pub iterations: usize,
    pub converged: i32,
    pub off_path: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BgiTraceSummary {
    pub horizon: u32,
    /// 1 when the reputation strategy is in play, 0 for repeated one-shot play.
    pub reputation: i32,
    pub rho: f64,
    pub g_star: f64,
    /// Belief cutoff, NaN outside the reputation regime.
    pub d: f64,
    /// NaN outside the reputation regime.
    pub t_star: f64,
    pub total1: f64,
    pub total2: f64,
    pub deterred_periods: u32,
    /// Reverse index of the first entry, 0 if the secondary never enters.
    pub first_entry_period: u32,
    pub welfare: f64,
    pub benchmark_welfare: f64,
    pub efficiency_ratio: f64,
}

/// One period of play. `primary_action` is -1 on exit, 0 spread, 1 share.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BgiPeriod {
    pub t_reverse: u32,
    pub entered: i32,
    pub primary_action: i32,
    pub mu_before: f64,
    pub mu_after: f64,
    pub payoff1: f64,
    pub payoff2: f64,
}

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

fn status_of(e: &Error) -> BgiStatus {
    match e {
        Error::NotConverged { .. } | Error::NoSignChange { .. } => BgiStatus::NotConverged,
        Error::Assumption(_) => BgiStatus::AssumptionViolated,
        _ => BgiStatus::InvalidArgument,
    }
}

fn fail(status: BgiStatus, msg: impl Into<String>) -> BgiStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> BgiStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, converting panics into [`BgiStatus::Panic`].
fn guard<F: FnOnce() -> BgiStatus>(f: F) -> BgiStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(BgiStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, BgiStatus> {
    p.as_ref().ok_or_else(|| fail(BgiStatus::NullPointer, format!("`{name}` is null")))
}

fn write<T>(out: *mut T, value: T) -> BgiStatus {
    if out.is_null() {
        return fail(BgiStatus::NullPointer, "output pointer is null");
    }
    // SAFETY: checked for null; the caller promises it is writable.
    unsafe { out.write(value) };
    BgiStatus::Ok
}

fn boxed<T>(out: *mut *mut T, value: T) -> BgiStatus {
    write(out, Box::into_raw(Box::new(value)))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Description of the last failure on this thread, or NULL. The pointer is
/// valid until the next `bgi_*` call on the same thread.
#[no_mangle]
pub extern "C" fn bgi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn bgi_status_name(status: BgiStatus) -> *const c_char {
    let s: &'static CStr = match status {
        BgiStatus::Ok => c"ok",
        BgiStatus::NullPointer => c"null pointer",
        BgiStatus::InvalidArgument => c"invalid argument",
        BgiStatus::NotConverged => c"not converged",
        BgiStatus::AssumptionViolated => c"assumption violated",
        BgiStatus::OutOfRange => c"out of range",
        BgiStatus::Panic => c"panic",
    };
    s.as_ptr()
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn bgi_params_new(power: f64, noise: f64, subchannels: usize, cost: f64, out: *mut *mut BgiParams) -> BgiStatus {
    guard(|| match GameParams::new(power, noise, subchannels, cost) {
        Ok(p) => boxed(out, BgiParams(p)),
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `params` must be NULL or a handle from [`bgi_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bgi_params_free(params: *mut BgiParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Spread/share indifference gain of a primary.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_g_star(params: *const BgiParams, out: *mut f64) -> BgiStatus {
    guard(|| {
        let p = tri!(deref(params, "params"));
        write(out, g_star(&p.0))
    })
}

/// Secondary gain above which entry is no longer free of risk; `INFINITY` when `k = 0`.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_g12_tilde(params: *const BgiParams, out: *mut f64) -> BgiStatus {
    guard(|| {
        let p = tri!(deref(params, "params"));
        write(out, g12_tilde(&p.0))
    })
}

/// Belief cutoff below which a high-gain secondary enters.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_entry_cutoff(params: *const BgiParams, g12: f64, out: *mut f64) -> BgiStatus {
    guard(|| {
        let p = tri!(deref(params, "params"));
        match entry_cutoff_d(&p.0, g12) {
            Ok(d) => write(out, d),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_sbgi_equilibrium(params: *const BgiParams, g12: f64, g21: f64, out: *mut BgiSbgiResult) -> BgiStatus {
    guard(|| {
        let p = tri!(deref(params, "params"));
        match sbgi_equilibrium(&p.0, g12, g21) {
            Ok(eq) => write(
                out,
                BgiSbgiResult {
                    primary_shares: (eq.primary_action == SeqAction::Share) as i32,
                    secondary_shares: (eq.secondary_action == SeqAction::Share) as i32,
                    primary_payoff: eq.primary_payoff,
                    secondary_payoff: eq.secondary_payoff,
                },
            ),
            Err(e) => from_error(e),
        }
    })
}

/// Parses a prior literal such as `uniform(0,1)`, `texp(2,0,inf)`,
/// `point(0.7)` or `discrete(0.1:0.5,0.9:0.5)`.
///
/// # Safety
/// `literal` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_distribution_parse(literal: *const c_char, out: *mut *mut BgiDistribution) -> BgiStatus {
    guard(|| {
        if literal.is_null() {
            return fail(BgiStatus::NullPointer, "`literal` is null");
        }
        let Ok(text) = CStr::from_ptr(literal).to_str() else {
            return fail(BgiStatus::InvalidArgument, "`literal` is not UTF-8");
        };
        match text.parse::<GainDistribution>() {
            Ok(d) => boxed(out, BgiDistribution(d)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `dist` must be NULL or a handle from [`bgi_distribution_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bgi_distribution_free(dist: *mut BgiDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_distribution_cdf(dist: *const BgiDistribution, x: f64, out: *mut f64) -> BgiStatus {
    guard(|| {
        let d = tri!(deref(dist, "dist"));
        write(out, d.0.cdf(x))
    })
}

/// Solves the two-sided belief fixed point with default settings. A solve
/// that stalls returns [`BgiStatus::NotConverged`] and still fills `out`.
///
/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_solve_two_sided(
    params: *const BgiParams,
    prior_g12: *const BgiDistribution,
    prior_g21: *const BgiDistribution,
    out: *mut BgiTwoSidedResult,
) -> BgiStatus {
    guard(|| {
        let p = tri!(deref(params, "params"));
        let a = tri!(deref(prior_g12, "prior_g12"));
        let b = tri!(deref(prior_g21, "prior_g21"));
        let eq = match solve_two_sided(&p.0, &a.0, &b.0, TwoSidedSettings::default()) {
            Ok(eq) => eq,
            Err(e) => return from_error(e),
        };
        let converged = eq.converged();
        let s = write(
            out,
            BgiTwoSidedResult {
                kappa_hat: eq.kappa_hat,
                g21_hat: eq.g21_hat,
                alpha: eq.alpha,
                g12_hat: eq.g12_hat,
                entry_probability: eq.entry_probability,
                max_residual: eq.residuals.max(),
                iterations: eq.report.iterations,
                converged: converged as i32,
                off_path: eq.off_path as i32,
            },
        );
        if s == BgiStatus::Ok && !converged {
            return fail(BgiStatus::NotConverged, format!("belief iteration stalled at residual {:e}", eq.report.residual));
        }
        s
    })
}

/// Simulates `horizon` periods of the repeated entry game.
///
/// # Safety
/// `params` and `prior_g21` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_simulate(
    params: *const BgiParams,
    horizon: u32,
    g12: f64,
    g21: f64,
    prior_g21: *const BgiDistribution,
    seed: u64,
    out: *mut *mut BgiTrace,
) -> BgiStatus {
    guard(|| {
        let p = tri!(deref(params, "params"));
        let prior = tri!(deref(prior_g21, "prior_g21"));
        let config = RepeatedConfig { horizon, params: p.0, g12, g21, prior_g21: prior.0.clone(), seed: RngSeed(seed) };
        match simulate(&config) {
            Ok(trace) => boxed(out, BgiTrace { trace }),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `trace` must be NULL or a handle from [`bgi_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bgi_trace_free(trace: *mut BgiTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of periods; 0 for a NULL handle.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bgi_trace_len(trace: *const BgiTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.periods.len())
}

/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_trace_summary(trace: *const BgiTrace, out: *mut BgiTraceSummary) -> BgiStatus {
    guard(|| {
        let t = &tri!(deref(trace, "trace")).trace;
        write(
            out,
            BgiTraceSummary {
                horizon: t.horizon,
                reputation: t.strategy.is_some() as i32,
                rho: t.rho,
                g_star: t.g_star,
                d: t.strategy.map_or(f64::NAN, |s| s.d),
                t_star: t.t_star.unwrap_or(f64::NAN),
                total1: t.total1,
                total2: t.total2,
                deterred_periods: t.deterred_periods,
                first_entry_period: t.first_entry_period.unwrap_or(0),
                welfare: t.welfare,
                benchmark_welfare: t.benchmark_welfare,
                efficiency_ratio: t.efficiency_ratio,
            },
        )
    })
}

/// Period `index` in play order (0 is the first period, reverse index `T`).
///
/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_trace_period(trace: *const BgiTrace, index: usize, out: *mut BgiPeriod) -> BgiStatus {
    guard(|| {
        let t = &tri!(deref(trace, "trace")).trace;
        let Some(p) = t.periods.get(index) else {
            return fail(BgiStatus::OutOfRange, format!("period {index} of {}", t.periods.len()));
        };
        write(
            out,
            BgiPeriod {
                t_reverse: p.t_reverse,
                entered: (p.entry == EntryAction::Enter) as i32,
                primary_action: match p.primary_action {
                    None => -1,
                    Some(SeqAction::Spread) => 0,
                    Some(SeqAction::Share) => 1,
                },
                mu_before: p.mu_before,
                mu_after: p.mu_after,
                payoff1: p.payoff1,
                payoff2: p.payoff2,
            },
        )
    })
}

/// Per-period trace as CSV. Release with [`bgi_string_free`].
///
/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bgi_trace_csv(trace: *const BgiTrace, out: *mut *mut c_char) -> BgiStatus {
    guard(|| {
        let t = &tri!(deref(trace, "trace")).trace;
        match CString::new(t.trace_csv()) {
            Ok(s) => write(out, s.into_raw()),
            Err(_) => fail(BgiStatus::InvalidArgument, "trace contains a NUL byte"),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bgi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
