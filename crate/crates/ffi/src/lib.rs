//! C ABI over the `hdcoint` core.
//!
//! Conventions:
//! - every function returns an [`HdcStatus`]; results go through out-pointers;
//! - objects are opaque handles released with their `_free` function;
//! - strings returned to the caller are released with [`hdc_string_free`];
//! - the message of the most recent failure on the calling thread is
//!   available through [`hdc_last_error`];
//! - panics never cross the boundary (reported as `HDC_STATUS_PANIC`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hdcoint::bootstrap::AwbConfig;
use hdcoint::dgp::{simulate_vecm, VecmParams};
use hdcoint::harness::{self, ForecastReport, HarnessConfig};
use hdcoint::multitest::{pantula_classify, BsqtConfig, ClassifyConfig, IntegrationReport, Method, Strategy};
use hdcoint::nalgebra::DMatrix;
use hdcoint::panel::DeterministicSpec;
use hdcoint::{io, unitroot, vecm, Error, Panel};

/// Status codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid argument or configuration.
    InvalidArgument = 2,
    /// Input data rejected (ingestion, panel invariants, too few observations).
    Data = 3,
    /// Numerical failure (singular system, non-convergence).
    Numerical = 4,
    /// Index out of range or value unavailable.
    OutOfRange = 5,
    /// Strings must be valid UTF-8.
    Utf8 = 6,
    /// Internal error; the library state is unchanged.
    Panic = 7,
}

/// `T x N` panel of observations.
pub struct HdcPanel {
    inner: Panel,
}

/// Integration-order classification of a panel.
pub struct HdcClassification {
    inner: IntegrationReport,
}

/// Result of a rolling forecast evaluation.
pub struct HdcForecast {
    inner: ForecastReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HdcStatus {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::UnsupportedOrder(_) => HdcStatus::InvalidArgument,
        Error::Numerical(_) | Error::Convergence { .. } | Error::SolverFault { .. } => HdcStatus::Numerical,
        _ => HdcStatus::Data,
    }
}

enum Failure {
    Status(HdcStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn fail(status: HdcStatus, msg: impl Into<String>) -> Failure {
    Failure::Status(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdcStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            HdcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(HdcStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(HdcStatus::Utf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(HdcStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(HdcStatus::NullPointer, format!("{name} is null")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    Ok(CString::new(s).map_err(|_| fail(HdcStatus::Data, "string contains NUL"))?.into_raw())
}

/// Message of the last failure on this thread (empty if none). The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hdc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hdc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Panel from `t * n` row-major values (NaN marks leading missing values).
///
/// # Safety
/// `values` must point to `t * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_panel_new(values: *const f64, t: usize, n: usize, out: *mut *mut HdcPanel) -> HdcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if values.is_null() {
            return Err(fail(HdcStatus::NullPointer, "values is null"));
        }
        if t == 0 || n == 0 {
            return Err(fail(HdcStatus::InvalidArgument, "panel dimensions must be positive"));
        }
        let len = t.checked_mul(n).ok_or_else(|| fail(HdcStatus::InvalidArgument, "panel too large"))?;
        let data = std::slice::from_raw_parts(values, len);
        let inner = Panel::from_matrix(DMatrix::from_row_slice(t, n, data))?;
        *out = Box::into_raw(Box::new(HdcPanel { inner }));
        Ok(())
    })
}

/// Panel read from a CSV file (dates in the first column, optional code row).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_panel_from_csv(path: *const c_char, out: *mut *mut HdcPanel) -> HdcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let (inner, _) = io::ingest_csv(Path::new(path), None)?;
        *out = Box::into_raw(Box::new(HdcPanel { inner }));
        Ok(())
    })
}

/// Simulate `t` observations of a rank-`r` VECM with `n` series.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_simulate_vecm(n: usize, r: usize, speed: f64, t: usize, seed: u64, out: *mut *mut HdcPanel) -> HdcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params = VecmParams::random_cointegrated(n, r, speed, seed)?;
        let inner = simulate_vecm(&params, t, 100, seed)?.panel;
        *out = Box::into_raw(Box::new(HdcPanel { inner }));
        Ok(())
    })
}

/// # Safety
/// `panel` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_panel_shape(panel: *const HdcPanel, t: *mut usize, n: *mut usize) -> HdcStatus {
    guard(|| {
        let p = &ref_arg(panel, "panel")?.inner;
        *out_arg(t, "t")? = p.nobs();
        *out_arg(n, "n")? = p.nseries();
        Ok(())
    })
}

/// Copy observation `(row, col)`.
///
/// # Safety
/// `panel` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_panel_value(panel: *const HdcPanel, row: usize, col: usize, value: *mut f64) -> HdcStatus {
    guard(|| {
        let p = &ref_arg(panel, "panel")?.inner;
        if row >= p.nobs() || col >= p.nseries() {
            return Err(fail(HdcStatus::OutOfRange, format!("({row}, {col}) outside {}x{}", p.nobs(), p.nseries())));
        }
        *out_arg(value, "value")? = p.values()[(row, col)];
        Ok(())
    })
}

/// # Safety
/// `panel` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hdc_panel_free(panel: *mut HdcPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

fn det_spec(code: u32) -> Result<DeterministicSpec, Failure> {
    match code {
        0 => Ok(DeterministicSpec::None),
        1 => Ok(DeterministicSpec::Mean),
        2 => Ok(DeterministicSpec::Trend),
        _ => Err(fail(HdcStatus::InvalidArgument, format!("deterministic code {code} (0 none, 1 mean, 2 trend)"))),
    }
}

/// ADF t-statistic with `lags` augmentation lags; `det` is 0 none, 1 mean, 2 trend.
///
/// # Safety
/// `x` must point to `len` doubles; `stat` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_adf_stat(x: *const f64, len: usize, det: u32, lags: usize, stat: *mut f64) -> HdcStatus {
    guard(|| {
        let out = out_arg(stat, "stat")?;
        if x.is_null() {
            return Err(fail(HdcStatus::NullPointer, "x is null"));
        }
        *out = unitroot::adf_stat(std::slice::from_raw_parts(x, len), det_spec(det)?, lags)?;
        Ok(())
    })
}

/// Cointegration rank chosen by information criterion (`p` short-run lags).
///
/// # Safety
/// `panel` must be a live handle; `rank` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_select_rank(panel: *const HdcPanel, p: usize, rmax: usize, det: u32, rank: *mut usize) -> HdcStatus {
    guard(|| {
        let pn = &ref_arg(panel, "panel")?.inner;
        *out_arg(rank, "rank")? = vecm::select_rank_ic(pn, p, rmax, det_spec(det)?)?;
        Ok(())
    })
}

/// Classify every series. `method` is "iadf", "bsqt", "bfdr" or "naive";
/// `strategy` is 1 or 2.
///
/// # Safety
/// `panel` must be a live handle, `method` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_classify(
    panel: *const HdcPanel,
    method: *const c_char,
    strategy: u32,
    alpha: f64,
    gamma: f64,
    reps: usize,
    seed: u64,
    out: *mut *mut HdcClassification,
) -> HdcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pn = &ref_arg(panel, "panel")?.inner;
        let method: Method = str_arg(method, "method")?.parse()?;
        let strategy: Strategy = strategy.to_string().parse()?;
        let cfg = ClassifyConfig {
            awb: AwbConfig { gamma, reps, seed, alpha, ..AwbConfig::default() },
            bsqt: BsqtConfig::evenly_spaced(0.05, alpha)?,
            a_priori_i2: Vec::new(),
        };
        let inner = pantula_classify(pn, method, strategy, &cfg)?;
        *out = Box::into_raw(Box::new(HdcClassification { inner }));
        Ok(())
    })
}

/// Integration order (0, 1 or 2) of series `index`.
///
/// # Safety
/// `cls` must be a live handle; `order` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_classification_order(cls: *const HdcClassification, index: usize, order: *mut u32) -> HdcStatus {
    guard(|| {
        let c = &ref_arg(cls, "classification")?.inner;
        let o = c.order.get(index).ok_or_else(|| fail(HdcStatus::OutOfRange, format!("series {index} of {}", c.order.len())))?;
        *out_arg(order, "order")? = o.order() as u32;
        Ok(())
    })
}

/// Full classification report as JSON (free with [`hdc_string_free`]).
///
/// # Safety
/// `cls` must be a live handle; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_classification_json(cls: *const HdcClassification, json: *mut *mut c_char) -> HdcStatus {
    guard(|| {
        let c = &ref_arg(cls, "classification")?.inner;
        *out_arg(json, "json")? = into_c_string(c.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `cls` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hdc_classification_free(cls: *mut HdcClassification) {
    if !cls.is_null() {
        drop(Box::from_raw(cls));
    }
}

/// Rolling forecast evaluation configured by a JSON document with the
/// harness configuration fields (window, step, horizons, targets, methods,
/// benchmark, orders, log, mcs_alpha, mcs_gamma, mcs_reps, seed).
///
/// # Safety
/// `panel` must be a live handle, `config_json` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_forecast(panel: *const HdcPanel, config_json: *const c_char, out: *mut *mut HdcForecast) -> HdcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pn = &ref_arg(panel, "panel")?.inner;
        let cfg: HarnessConfig = serde_json::from_str(str_arg(config_json, "config_json")?)
            .map_err(|e| fail(HdcStatus::InvalidArgument, format!("configuration: {e}")))?;
        let inner = harness::run_rolling(pn, &cfg)?;
        *out = Box::into_raw(Box::new(HdcForecast { inner }));
        Ok(())
    })
}

/// Relative MSFE of `method` for the given target and horizon (by index in
/// the configuration). `HDC_STATUS_OUT_OF_RANGE` if unavailable.
///
/// # Safety
/// `fc` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_forecast_rel_msfe(fc: *const HdcForecast, target: usize, horizon: usize, method: usize, value: *mut f64) -> HdcStatus {
    guard(|| {
        let r = &ref_arg(fc, "forecast")?.inner;
        let (nt, nh) = (r.targets.len(), r.horizons.len());
        if target >= nt || horizon >= nh || method >= r.methods.len() {
            return Err(fail(HdcStatus::OutOfRange, "target, horizon or method index out of range"));
        }
        let cell = &r.cells[target * nh + horizon];
        let v = cell.rel_msfe[method].ok_or_else(|| fail(HdcStatus::OutOfRange, "relative MSFE unavailable"))?;
        *out_arg(value, "value")? = v;
        Ok(())
    })
}

/// Full report as JSON (free with [`hdc_string_free`]).
///
/// # Safety
/// `fc` must be a live handle; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdc_forecast_json(fc: *const HdcForecast, json: *mut *mut c_char) -> HdcStatus {
    guard(|| {
        let r = &ref_arg(fc, "forecast")?.inner;
        *out_arg(json, "json")? = into_c_string(r.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `fc` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hdc_forecast_free(fc: *mut HdcForecast) {
    if !fc.is_null() {
        drop(Box::from_raw(fc));
    }
}

/// Model confidence set of `n x m` row-major losses. Writes one membership
/// flag (0/1) and one MCS p-value per method.
///
/// # Safety
/// `losses` must point to `n * m` doubles; `members` and `pvalues` to `m` writable slots.
#[no_mangle]
pub unsafe extern "C" fn hdc_mcs(
    losses: *const f64,
    n: usize,
    m: usize,
    alpha: f64,
    gamma: f64,
    reps: usize,
    seed: u64,
    members: *mut u8,
    pvalues: *mut f64,
) -> HdcStatus {
    guard(|| {
        if losses.is_null() || members.is_null() || pvalues.is_null() {
            return Err(fail(HdcStatus::NullPointer, "losses, members and pvalues must be non-null"));
        }
        let len = n.checked_mul(m).ok_or_else(|| fail(HdcStatus::InvalidArgument, "loss table too large"))?;
        let l = DMatrix::from_row_slice(n, m, std::slice::from_raw_parts(losses, len));
        let res = harness::mcs(&l, alpha, gamma, reps, seed)?;
        let mem = std::slice::from_raw_parts_mut(members, m);
        let pv = std::slice::from_raw_parts_mut(pvalues, m);
        for k in 0..m {
            mem[k] = u8::from(res.members[k]);
            pv[k] = res.pvalues[k];
        }
        Ok(())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hdc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}
