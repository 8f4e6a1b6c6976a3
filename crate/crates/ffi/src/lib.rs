//! C ABI over `vista-core`.
//!
//! Every function returns a [`VistaStatus`]. On failure the message is
//! available from [`vista_last_error_message`] on the same thread. Handles
//! are opaque and owned by the caller, who releases them with the matching
//! `*_free` function. Strings returned through `char **` are released with
//! [`vista_string_free`]. The built-in stub oracle is used throughout.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use vista_core::ais::{read_csv, read_masks, write_masks, Dataset, ObservationMask};
use vista_core::encoder::GeofenceIndex;
use vista_core::eval;
use vista_core::imputation::ImputationOutcome;
use vista_core::oracle::StubOracle;
use vista_core::sdkg::{self, SdKg};
use vista_core::workflow::{run_build, run_impute, SchedulerConfig};
use vista_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VistaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidInput = 4,
    InvalidParameter = 5,
    Snapshot = 6,
    UnknownNode = 7,
    MissingOutcome = 8,
    Oracle = 9,
    Internal = 10,
    Panic = 11,
}

impl From<&Error> for VistaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => VistaStatus::Io,
            Error::Csv(_) | Error::Json(_) | Error::InvalidInput(_) | Error::EmptyInput(_) => VistaStatus::InvalidInput,
            Error::InvalidParameter(_) | Error::Config(_) => VistaStatus::InvalidParameter,
            Error::IncompatibleSnapshot { .. } => VistaStatus::Snapshot,
            Error::UnknownNode(_) | Error::UnknownNodeRef(_) => VistaStatus::UnknownNode,
            Error::MissingOutcome { .. } => VistaStatus::MissingOutcome,
            Error::OracleTimeout(_)
            | Error::OracleUnavailable(_)
            | Error::MalformedOracleOutput { .. }
            | Error::EmptyOracleOutput(_) => VistaStatus::Oracle,
            _ => VistaStatus::Internal,
        }
    }
}

pub struct VistaDataset(Dataset);
pub struct VistaMasks(Vec<ObservationMask>);
pub struct VistaKg(SdKg);
pub struct VistaOutcomes(Vec<ImputationOutcome>);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VistaMetrics {
    pub mae_lat: f64,
    pub mae_lon: f64,
    pub rmse_lat: f64,
    pub rmse_lon: f64,
    /// Mean haversine distance in kilometres.
    pub mhd: f64,
    pub n: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|b| *b != 0);
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(bytes).unwrap_or_default());
}

struct Fail(VistaStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        set_error(e.to_string());
        Fail(VistaStatus::from(&e))
    }
}

fn fail(status: VistaStatus, msg: &str) -> Fail {
    set_error(msg);
    Fail(status)
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> VistaStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VistaStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            VistaStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| fail(VistaStatus::NullArgument, &format!("{what} is null")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| fail(VistaStatus::NullArgument, &format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(VistaStatus::NullArgument, &format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(VistaStatus::InvalidUtf8, &format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(fail(VistaStatus::NullArgument, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(fail(VistaStatus::NullArgument, "output pointer is null"));
    }
    let s = CString::new(s).map_err(|_| fail(VistaStatus::Internal, "string contains NUL"))?;
    *out = s.into_raw();
    Ok(())
}

unsafe fn put_value<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(fail(VistaStatus::NullArgument, "output pointer is null"));
    }
    *out = value;
    Ok(())
}

fn scheduler(batch_size: usize, m: usize, seed: u64) -> SchedulerConfig {
    SchedulerConfig { batch_size, m, seed, ..Default::default() }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn vista_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vista_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn vista_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// Datasets

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_dataset_read_csv(path: *const c_char, out: *mut *mut VistaDataset) -> VistaStatus {
    guard(|| {
        let path = text(path, "path")?;
        put(out, VistaDataset(read_csv(Path::new(path))?))
    })
}

/// # Safety
/// `dataset` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vista_dataset_free(dataset: *mut VistaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// Pointers must be valid; `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vista_dataset_counts(
    dataset: *const VistaDataset,
    vessels: *mut usize,
    records: *mut usize,
) -> VistaStatus {
    guard(|| {
        let d = &borrow(dataset, "dataset")?.0;
        put_value(vessels, d.len())?;
        put_value(records, d.vessels().map(|v| v.records().len()).sum())
    })
}

/// Removes whole segments of `m` records with probability `removal_prob`.
///
/// # Safety
/// Pointers must be valid; `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vista_dataset_mask(
    dataset: *const VistaDataset,
    m: usize,
    removal_prob: f64,
    seed: u64,
    out_masked: *mut *mut VistaDataset,
    out_masks: *mut *mut VistaMasks,
) -> VistaStatus {
    guard(|| {
        let d = &borrow(dataset, "dataset")?.0;
        if out_masked.is_null() || out_masks.is_null() {
            return Err(fail(VistaStatus::NullArgument, "output pointer is null"));
        }
        let (masked, masks) = d.mask(m, removal_prob, seed)?;
        put(out_masked, VistaDataset(masked))?;
        put(out_masks, VistaMasks(masks))
    })
}

// Masks

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_masks_read(path: *const c_char, out: *mut *mut VistaMasks) -> VistaStatus {
    guard(|| put(out, VistaMasks(read_masks(Path::new(text(path, "path")?))?)))
}

/// # Safety
/// `masks` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vista_masks_write(masks: *const VistaMasks, path: *const c_char) -> VistaStatus {
    guard(|| Ok(write_masks(Path::new(text(path, "path")?), &borrow(masks, "masks")?.0)?))
}

/// Number of masked segments.
///
/// # Safety
/// `masks` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_masks_gap_count(masks: *const VistaMasks, out: *mut usize) -> VistaStatus {
    guard(|| put_value(out, borrow(masks, "masks")?.0.iter().map(|m| m.targets.len()).sum()))
}

/// # Safety
/// `masks` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vista_masks_free(masks: *mut VistaMasks) {
    if !masks.is_null() {
        drop(Box::from_raw(masks));
    }
}

// Knowledge graphs

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_kg_new(out: *mut *mut VistaKg) -> VistaStatus {
    guard(|| put(out, VistaKg(SdKg::new())))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_kg_load(path: *const c_char, out: *mut *mut VistaKg) -> VistaStatus {
    guard(|| put(out, VistaKg(sdkg::load(Path::new(text(path, "path")?))?)))
}

/// # Safety
/// `kg` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vista_kg_save(kg: *const VistaKg, path: *const c_char) -> VistaStatus {
    guard(|| Ok(sdkg::save(&borrow(kg, "kg")?.0, Path::new(text(path, "path")?))?))
}

/// # Safety
/// `kg` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vista_kg_free(kg: *mut VistaKg) {
    if !kg.is_null() {
        drop(Box::from_raw(kg));
    }
}

/// # Safety
/// Pointers must be valid; `kg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vista_kg_counts(kg: *const VistaKg, nodes: *mut usize, edges: *mut usize) -> VistaStatus {
    guard(|| {
        let g = &borrow(kg, "kg")?.0;
        put_value(nodes, g.node_count())?;
        put_value(edges, g.edge_count())
    })
}

/// Distills every complete segment of `dataset` into `kg`. Segments that
/// fail permanently are skipped; their number goes to `quarantined`, which
/// may be null.
///
/// # Safety
/// `kg` and `dataset` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn vista_kg_build(
    kg: *mut VistaKg,
    dataset: *const VistaDataset,
    batch_size: usize,
    m: usize,
    seed: u64,
    quarantined: *mut usize,
) -> VistaStatus {
    guard(|| {
        let g = borrow_mut(kg, "kg")?;
        let d = &borrow(dataset, "dataset")?.0;
        let report = run_build(d, g.0.clone(), &scheduler(batch_size, m, seed), &StubOracle, &GeofenceIndex::empty())?;
        g.0 = report.kg;
        if !quarantined.is_null() {
            *quarantined = report.quarantine.len();
        }
        Ok(())
    })
}

/// DOT text of the subgraph induced by `nodes`, a comma-separated list of
/// DOT names or numeric ids.
///
/// # Safety
/// `kg` must be a live handle, `nodes` a NUL-terminated string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_kg_export_dot(
    kg: *const VistaKg,
    nodes: *const c_char,
    out: *mut *mut c_char,
) -> VistaStatus {
    guard(|| {
        let g = &borrow(kg, "kg")?.0;
        let ids = sdkg::resolve_nodes(g, text(nodes, "nodes")?.split(','))?;
        put_string(out, sdkg::to_dot(&g.induced_subgraph(&ids)?))
    })
}

// Imputation and evaluation

/// Imputes every masked segment of `masked`.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_impute(
    kg: *const VistaKg,
    masked: *const VistaDataset,
    masks: *const VistaMasks,
    batch_size: usize,
    seed: u64,
    out: *mut *mut VistaOutcomes,
) -> VistaStatus {
    guard(|| {
        let g = &borrow(kg, "kg")?.0;
        let d = &borrow(masked, "masked")?.0;
        let mk = &borrow(masks, "masks")?.0;
        let m = mk.first().map_or(vista_core::ais::DEFAULT_SEGMENT_LEN, |x| x.m);
        let report = run_impute(d, mk, g, &scheduler(batch_size, m, seed), &StubOracle, &mut |_| Ok(()))?;
        put(out, VistaOutcomes(report.outcomes))
    })
}

/// # Safety
/// `outcomes` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_outcomes_count(outcomes: *const VistaOutcomes, out: *mut usize) -> VistaStatus {
    guard(|| put_value(out, borrow(outcomes, "outcomes")?.0.len()))
}

/// Outcomes as JSON lines.
///
/// # Safety
/// `outcomes` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_outcomes_to_jsonl(outcomes: *const VistaOutcomes, out: *mut *mut c_char) -> VistaStatus {
    guard(|| {
        let mut s = String::new();
        for o in &borrow(outcomes, "outcomes")?.0 {
            s += &serde_json::to_string(o).map_err(Error::from)?;
            s.push('\n');
        }
        put_string(out, s)
    })
}

/// # Safety
/// `outcomes` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vista_outcomes_free(outcomes: *mut VistaOutcomes) {
    if !outcomes.is_null() {
        drop(Box::from_raw(outcomes));
    }
}

/// Scores `outcomes` against `truth` over the masked records.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vista_evaluate(
    truth: *const VistaDataset,
    outcomes: *const VistaOutcomes,
    masks: *const VistaMasks,
    out: *mut VistaMetrics,
) -> VistaStatus {
    guard(|| {
        let t = &borrow(truth, "truth")?.0;
        let o = &borrow(outcomes, "outcomes")?.0;
        let m = &borrow(masks, "masks")?.0;
        let r = eval::evaluate(t, &eval::predictions_of(o), m)?;
        put_value(
            out,
            VistaMetrics {
                mae_lat: r.mae_lat,
                mae_lon: r.mae_lon,
                rmse_lat: r.rmse_lat,
                rmse_lon: r.rmse_lon,
                mhd: r.mhd,
                n: r.n,
            },
        )
    })
}
