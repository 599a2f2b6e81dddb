//! C interface to the `wcls` estimators and simulation harness.
//!
//! Every fallible function returns a [`WclsStatus`]. On failure the
//! thread's last error is set and can be read with
//! [`wcls_last_error_message`] and [`wcls_last_error_code`]. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde::Deserialize;
use wcls::config::SimulateConfig;
use wcls::data::{ingest_csv, CsvSchema, PanelDataset};
use wcls::inference::InferenceOptions;
use wcls::pipeline::{run_analysis, AnalysisOutcome, AnalysisSpec};
use wcls::sim::{run_replications, ReplicationReport, SimOptions};
use wcls::wcls::SmallSample;
use wcls::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WclsStatus {
    Ok = 0,
    NullPointer = 1,
    /// A string argument is not valid UTF-8 or an index is out of range.
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    /// Estimation failed: separation, singular system, positivity.
    Model = 5,
    Simulation = 6,
    Io = 7,
    Panic = 8,
}

/// One row of a contrast test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WclsContrastRow {
    pub estimate: f64,
    pub se: f64,
    pub df: usize,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

/// Summary of one analysis over the replicates of one scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WclsSimulationRow {
    pub n: usize,
    pub occasions: usize,
    pub beta11: f64,
    pub truth: f64,
    pub mean: f64,
    /// NaN when fewer than two replicates succeeded.
    pub sd: f64,
    pub avg_se: f64,
    pub rmse: f64,
    pub cp: f64,
    pub successes: usize,
    pub failures: usize,
}

/// A validated panel dataset.
pub struct WclsDataset {
    data: PanelDataset,
}

struct EstimateRow {
    analysis: CString,
    contrast: CString,
    row: WclsContrastRow,
}

/// Outcomes of one or more analyses on a dataset.
pub struct WclsEstimate {
    outcomes: Vec<AnalysisOutcome>,
    rows: Vec<EstimateRow>,
}

struct SimulationRow {
    group: CString,
    analysis: CString,
    row: WclsSimulationRow,
}

/// A replication report for every scenario group of a simulation config.
pub struct WclsSimulation {
    reports: Vec<ReplicationReport>,
    rows: Vec<SimulationRow>,
}

struct Failure {
    status: WclsStatus,
    code: String,
    message: String,
}

impl Failure {
    fn new(status: WclsStatus, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::new(WclsStatus::Config, "config", message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Data(_) | Error::Feature(_) => WclsStatus::Data,
            Error::Prob(_) | Error::Wcls(_) | Error::Gee(_) => WclsStatus::Model,
            Error::Config(_) => WclsStatus::Config,
            Error::Simulation(_) => WclsStatus::Simulation,
            Error::Io(_) => WclsStatus::Io,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<(CString, CString)>> = const { RefCell::new(None) };
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("interior NULs replaced")
}

fn set_error(f: &Failure) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some((c_string(&f.code), c_string(&f.message))));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> WclsStatus {
    clear_error();
    let failure = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => return WclsStatus::Ok,
        Ok(Err(f)) => f,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Failure::new(WclsStatus::Panic, "panic", msg)
        }
    };
    set_error(&failure);
    failure.status
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            WclsStatus::NullPointer,
            "null_pointer",
            format!("`{name}` is NULL"),
        ));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure::new(
            WclsStatus::InvalidArgument,
            "invalid_argument",
            format!("`{name}` is not UTF-8"),
        )
    })
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(WclsStatus::NullPointer, "null_pointer", format!("`{name}` is NULL")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(
            WclsStatus::NullPointer,
            "null_pointer",
            format!("`{name}` is NULL"),
        ))
    } else {
        Ok(())
    }
}

fn index<T>(items: &[T], i: usize) -> Result<&T, Failure> {
    items.get(i).ok_or_else(|| {
        Failure::new(
            WclsStatus::InvalidArgument,
            "invalid_argument",
            format!("index {i} is out of range for {} rows", items.len()),
        )
    })
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn wcls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |(_, m)| m.as_ptr()))
}

/// Stable machine-readable code of the last failure (e.g. `missing_column`), or NULL.
#[no_mangle]
pub extern "C" fn wcls_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |(c, _)| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn wcls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Read a long-format CSV. `schema_toml` names the columns and may be NULL
/// for the defaults (`id`, `t`, `avail`, `trt`, `y`).
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wcls_dataset_from_csv(
    path: *const c_char,
    schema_toml: *const c_char,
    out: *mut *mut WclsDataset,
) -> WclsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = str_arg(path, "path")?;
        let schema = if schema_toml.is_null() {
            CsvSchema::default()
        } else {
            toml::from_str(str_arg(schema_toml, "schema_toml")?).map_err(|e| Failure::config(e.to_string()))?
        };
        let data = ingest_csv(path, &schema).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(WclsDataset { data }));
        Ok(())
    })
}

/// Number of individuals, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_dataset_individuals(dataset: *const WclsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.data.n())
}

/// Occasions per individual, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_dataset_occasions(dataset: *const WclsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.data.occasions())
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wcls_dataset_free(dataset: *mut WclsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateRequest {
    #[serde(default = "default_alpha")]
    alpha0: f64,
    #[serde(default)]
    small_sample: SmallSample,
    #[serde(default)]
    one_sided: bool,
    #[serde(rename = "analysis")]
    analyses: Vec<AnalysisSpec>,
}

/// Run the `[[analysis]]` tables of `config_toml` on a dataset. Top-level
/// keys `alpha0`, `small_sample` and `one_sided` are optional.
///
/// # Safety
/// `dataset` must be a live handle, `config_toml` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wcls_estimate(
    dataset: *const WclsDataset,
    config_toml: *const c_char,
    out: *mut *mut WclsEstimate,
) -> WclsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let data = &handle(dataset, "dataset")?.data;
        let req: EstimateRequest =
            toml::from_str(str_arg(config_toml, "config_toml")?).map_err(|e| Failure::config(e.to_string()))?;
        if !(req.alpha0 > 0.0 && req.alpha0 < 1.0) {
            return Err(Failure::config(format!(
                "alpha0 must lie in (0, 1), got {}",
                req.alpha0
            )));
        }
        if req.analyses.is_empty() {
            return Err(Failure::config("at least one [[analysis]] is required"));
        }
        let options = InferenceOptions {
            alpha0: req.alpha0,
            one_sided: req.one_sided,
        };
        let outcomes = req
            .analyses
            .iter()
            .map(|a| run_analysis(data, a, options, req.small_sample))
            .collect::<Result<Vec<_>, Error>>()?;
        let mut rows = Vec::new();
        for o in &outcomes {
            for c in &o.contrasts {
                for r in &c.result.rows {
                    rows.push(EstimateRow {
                        analysis: c_string(&o.name),
                        contrast: c_string(&c.name),
                        row: WclsContrastRow {
                            estimate: r.estimate,
                            se: r.se,
                            df: r.df,
                            ci_lower: r.ci_lower,
                            ci_upper: r.ci_upper,
                            t_statistic: r.t_statistic,
                            p_value: r.p_value,
                        },
                    });
                }
            }
        }
        *out = Box::into_raw(Box::new(WclsEstimate { outcomes, rows }));
        Ok(())
    })
}

/// Contrast rows across all analyses, in configuration order.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_estimate_row_count(result: *const WclsEstimate) -> usize {
    result.as_ref().map_or(0, |r| r.rows.len())
}

/// # Safety
/// `result` must be a live handle and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn wcls_estimate_row(
    result: *const WclsEstimate,
    i: usize,
    row: *mut WclsContrastRow,
) -> WclsStatus {
    guard(|| {
        out_ptr(row, "row")?;
        *row = index(&handle(result, "result")?.rows, i)?.row;
        Ok(())
    })
}

/// Analysis name of row `i`, or NULL. Valid while `result` lives.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_estimate_analysis_name(result: *const WclsEstimate, i: usize) -> *const c_char {
    result
        .as_ref()
        .and_then(|r| r.rows.get(i))
        .map_or(ptr::null(), |r| r.analysis.as_ptr())
}

/// Contrast name of row `i`, or NULL. Valid while `result` lives.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_estimate_contrast_name(result: *const WclsEstimate, i: usize) -> *const c_char {
    result
        .as_ref()
        .and_then(|r| r.rows.get(i))
        .map_or(ptr::null(), |r| r.contrast.as_ptr())
}

/// Full outcome including nuisance fits and diagnostics as JSON. Free the
/// string with [`wcls_string_free`]. NULL on failure.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_estimate_to_json(result: *const WclsEstimate) -> *mut c_char {
    let mut json = None;
    let status = guard(|| {
        let r = handle(result, "result")?;
        let s = serde_json::to_string(&r.outcomes)
            .map_err(|e| Failure::new(WclsStatus::Panic, "serialize", e.to_string()))?;
        json = Some(c_string(&s));
        Ok(())
    });
    match (status, json) {
        (WclsStatus::Ok, Some(s)) => s.into_raw(),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wcls_estimate_free(result: *mut WclsEstimate) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Run a simulation config (a preset or an explicit generative model).
/// `seed` may be NULL to use the config's seed; `replicates` and `threads`
/// of 0 mean the config value and the global pool.
///
/// # Safety
/// `config_toml` must be NUL-terminated, `seed` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wcls_simulate(
    config_toml: *const c_char,
    seed: *const u64,
    replicates: usize,
    threads: usize,
    out: *mut *mut WclsSimulation,
) -> WclsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let cfg = SimulateConfig::from_toml(str_arg(config_toml, "config_toml")?).map_err(Failure::config)?;
        let seed = seed.as_ref().copied().unwrap_or_else(|| cfg.root_seed());
        let options = SimOptions {
            replicates: if replicates == 0 { cfg.replicates } else { replicates },
            alpha0: cfg.alpha0,
            small_sample: cfg.small_sample,
            threads: (threads > 0).then_some(threads),
        };
        let mut reports = Vec::new();
        let mut rows = Vec::new();
        for g in cfg.groups(seed).map_err(Failure::config)? {
            let mut report = run_replications(&g.config, &g.analyses, &options).map_err(Failure::config)?;
            report.label = g.label;
            for e in &report.rows {
                rows.push(SimulationRow {
                    group: c_string(&report.label),
                    analysis: c_string(&e.analysis),
                    row: WclsSimulationRow {
                        n: report.config.n,
                        occasions: report.config.occasions,
                        beta11: report.config.beta11,
                        truth: report.truth,
                        mean: e.mean,
                        sd: e.sd.unwrap_or(f64::NAN),
                        avg_se: e.avg_se,
                        rmse: e.rmse,
                        cp: e.cp,
                        successes: e.successes,
                        failures: e.failures,
                    },
                });
            }
            reports.push(report);
        }
        if rows.iter().all(|r| r.row.successes == 0) {
            return Err(Failure::from(Error::Simulation("every replicate failed".into())));
        }
        *out = Box::into_raw(Box::new(WclsSimulation { reports, rows }));
        Ok(())
    })
}

/// Rows across all scenario groups.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_simulation_row_count(sim: *const WclsSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.rows.len())
}

/// # Safety
/// `sim` must be a live handle and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn wcls_simulation_row(
    sim: *const WclsSimulation,
    i: usize,
    row: *mut WclsSimulationRow,
) -> WclsStatus {
    guard(|| {
        out_ptr(row, "row")?;
        *row = index(&handle(sim, "sim")?.rows, i)?.row;
        Ok(())
    })
}

/// Scenario group label of row `i`, or NULL. Valid while `sim` lives.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_simulation_group(sim: *const WclsSimulation, i: usize) -> *const c_char {
    sim.as_ref()
        .and_then(|s| s.rows.get(i))
        .map_or(ptr::null(), |r| r.group.as_ptr())
}

/// Analysis name of row `i`, or NULL. Valid while `sim` lives.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_simulation_analysis_name(sim: *const WclsSimulation, i: usize) -> *const c_char {
    sim.as_ref()
        .and_then(|s| s.rows.get(i))
        .map_or(ptr::null(), |r| r.analysis.as_ptr())
}

/// The replication reports as JSON; free with [`wcls_string_free`].
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcls_simulation_to_json(sim: *const WclsSimulation) -> *mut c_char {
    let mut json = None;
    let status = guard(|| {
        let s = handle(sim, "sim")?;
        let text = serde_json::to_string(&s.reports)
            .map_err(|e| Failure::new(WclsStatus::Panic, "serialize", e.to_string()))?;
        json = Some(c_string(&text));
        Ok(())
    });
    match (status, json) {
        (WclsStatus::Ok, Some(s)) => s.into_raw(),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `sim` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wcls_simulation_free(sim: *mut WclsSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string from a `_to_json` function, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wcls_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
