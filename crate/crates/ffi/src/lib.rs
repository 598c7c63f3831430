//! C ABI over the `specboot` estimators.
//!
//! Objects are opaque handles created by `sb_*` constructors and released
//! with the matching `*_free`. Every function returns an [`SbStatus`]; on
//! failure a description is available from [`sb_last_error_message`] on the
//! same thread. Panics never cross the boundary.
//!
//! Matrices are passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use specboot::algorithms::{Algorithm, FitResult, RunConfig};
use specboot::datagen::{generate_cross_over, generate_mirror, LabeledDataset};
use specboot::gmm::InitMethod;
use specboot::{Error, Matrix};

/// Result codes. `SB_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    InvalidData = 4,
    EmptyComponent = 5,
    Numerical = 6,
    BootstrapAborted = 7,
    Io = 8,
    Parse = 9,
    /// The requested quantity does not exist for this result (for example
    /// out-of-bag memberships of a non-bootstrapped fit).
    NotAvailable = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

impl From<&Error> for SbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => SbStatus::Dimension,
            Error::Data(_) => SbStatus::InvalidData,
            Error::InvalidArgument(_) | Error::Config(_) => SbStatus::InvalidArgument,
            Error::EmptyComponent { .. } => SbStatus::EmptyComponent,
            Error::Numerical(_) | Error::UndefinedStatistic => SbStatus::Numerical,
            Error::BootstrapAborted { .. } => SbStatus::BootstrapAborted,
            Error::Io(_) | Error::Csv(_) => SbStatus::Io,
            Error::Parse { .. } => SbStatus::Parse,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbAlgorithm {
    Em = 0,
    SpectralEm = 1,
    BootEm = 2,
    SpectralBootEm = 3,
    BootSpectral = 4,
}

impl From<SbAlgorithm> for Algorithm {
    fn from(a: SbAlgorithm) -> Self {
        match a {
            SbAlgorithm::Em => Algorithm::Em,
            SbAlgorithm::SpectralEm => Algorithm::SpectralEm,
            SbAlgorithm::BootEm => Algorithm::BootEm,
            SbAlgorithm::SpectralBootEm => Algorithm::SpectralBootEm,
            SbAlgorithm::BootSpectral => Algorithm::BootSpectral,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbInit {
    Kmeans = 0,
    Random = 1,
}

/// Run settings. Fill with [`sb_run_config_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SbRunConfig {
    pub algorithm: SbAlgorithm,
    pub groups: usize,
    pub eps: f64,
    pub eps_b: f64,
    pub dw_alpha: f64,
    pub dw_window: usize,
    /// 0 selects the per-algorithm default.
    pub min_bootstrap: usize,
    pub max_bootstrap: usize,
    pub seed: u64,
    pub init: SbInit,
    pub center: bool,
}

impl From<&RunConfig> for SbRunConfig {
    fn from(c: &RunConfig) -> Self {
        let algorithm = match c.algorithm {
            Algorithm::Em => SbAlgorithm::Em,
            Algorithm::SpectralEm => SbAlgorithm::SpectralEm,
            Algorithm::BootEm => SbAlgorithm::BootEm,
            Algorithm::SpectralBootEm => SbAlgorithm::SpectralBootEm,
            Algorithm::BootSpectral => SbAlgorithm::BootSpectral,
        };
        Self {
            algorithm,
            groups: c.groups,
            eps: c.eps,
            eps_b: c.eps_b,
            dw_alpha: c.dw_alpha,
            dw_window: c.dw_window,
            min_bootstrap: c.min_bootstrap.unwrap_or(0),
            max_bootstrap: c.max_bootstrap,
            seed: c.seed,
            init: match c.init {
                InitMethod::Kmeans => SbInit::Kmeans,
                InitMethod::Random => SbInit::Random,
            },
            center: c.center,
        }
    }
}

impl From<&SbRunConfig> for RunConfig {
    fn from(c: &SbRunConfig) -> Self {
        RunConfig {
            algorithm: c.algorithm.into(),
            groups: c.groups,
            eps: c.eps,
            eps_b: c.eps_b,
            dw_alpha: c.dw_alpha,
            dw_window: c.dw_window,
            min_bootstrap: (c.min_bootstrap > 0).then_some(c.min_bootstrap),
            max_bootstrap: c.max_bootstrap,
            seed: c.seed,
            init: match c.init {
                SbInit::Kmeans => InitMethod::Kmeans,
                SbInit::Random => InitMethod::Random,
            },
            center: c.center,
            ..RunConfig::default()
        }
    }
}

/// Opaque data matrix with optional labels and probe rows.
pub struct SbDataset {
    data: Matrix,
    labels: Vec<usize>,
    special: Vec<usize>,
}

impl From<LabeledDataset> for SbDataset {
    fn from(d: LabeledDataset) -> Self {
        Self {
            data: d.data,
            labels: d.labels,
            special: d.special_indices,
        }
    }
}

/// Opaque fit result.
pub struct SbFitResult {
    inner: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(SbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SbStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            SbStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = value;
    Ok(())
}

/// Message for the last failed call on this thread, or NULL after a
/// successful call. The pointer stays valid until the next `sb_*` call on
/// the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Fills `out` with the library defaults (spectral-boot-em, G = 2).
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_run_config_default(out: *mut SbRunConfig) -> SbStatus {
    guard(|| store(out, SbRunConfig::from(&RunConfig::default())))
}

/// Copies an `nrows x ncols` row-major matrix into a new dataset.
///
/// # Safety
/// `values` must point to `nrows * ncols` doubles; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_from_rows(
    values: *const f64,
    nrows: usize,
    ncols: usize,
    out: *mut *mut SbDataset,
) -> SbStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if nrows == 0 || ncols == 0 {
            return Err(Failure(SbStatus::Dimension, "empty matrix".into()));
        }
        let len = nrows
            .checked_mul(ncols)
            .ok_or_else(|| Failure(SbStatus::Dimension, "matrix size overflows".into()))?;
        let slice = std::slice::from_raw_parts(values, len);
        write_out(
            out,
            SbDataset {
                data: Matrix::from_row_slice(nrows, ncols, slice),
                labels: Vec::new(),
                special: Vec::new(),
            },
        )
    })
}

/// Simulated mirror data: two groups of `n_per_group` in `p` dimensions,
/// the second the negation of the first, plus a centre point (last row).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_simulate_mirror(
    n_per_group: usize,
    p: usize,
    seed: u64,
    out: *mut *mut SbDataset,
) -> SbStatus {
    guard(|| write_out(out, generate_mirror(n_per_group, p, seed)?.into()))
}

/// Simulated cross-over data with `n_changers` group-switching rows.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_simulate_cross_over(
    n_per_group: usize,
    time_points: usize,
    n_changers: usize,
    seed: u64,
    out: *mut *mut SbDataset,
) -> SbStatus {
    guard(|| {
        write_out(
            out,
            generate_cross_over(n_per_group, time_points, n_changers, seed)?.into(),
        )
    })
}

/// # Safety
/// `dataset` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_shape(
    dataset: *const SbDataset,
    nrows: *mut usize,
    ncols: *mut usize,
) -> SbStatus {
    guard(|| {
        let d = borrow(dataset, "dataset")?;
        store(nrows, d.data.nrows())?;
        store(ncols, d.data.ncols())
    })
}

/// Copies the probe row indices of a simulated dataset. `len` receives the
/// count; pass `out = NULL` to query it.
///
/// # Safety
/// `dataset` must be live; `out` must hold `capacity` entries if non-null.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_special_indices(
    dataset: *const SbDataset,
    out: *mut usize,
    capacity: usize,
    len: *mut usize,
) -> SbStatus {
    guard(|| {
        let d = borrow(dataset, "dataset")?;
        store(len, d.special.len())?;
        copy_to(&d.special, out, capacity)
    })
}

/// Copies the ground-truth labels of a simulated dataset (`n` entries).
/// Datasets built from raw rows have none.
///
/// # Safety
/// `dataset` must be live; `out` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_labels(
    dataset: *const SbDataset,
    out: *mut usize,
    capacity: usize,
) -> SbStatus {
    guard(|| {
        let d = borrow(dataset, "dataset")?;
        if d.labels.is_empty() {
            return Err(Failure(
                SbStatus::NotAvailable,
                "dataset has no labels".into(),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        copy_to(&d.labels, out, capacity)
    })
}

unsafe fn copy_to<T: Copy>(src: &[T], out: *mut T, capacity: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Ok(());
    }
    if capacity < src.len() {
        return Err(Failure(
            SbStatus::BufferTooSmall,
            format!("buffer holds {capacity}, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_free(dataset: *mut SbDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fits the configured estimator.
///
/// # Safety
/// `dataset` and `config` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_fit(
    dataset: *const SbDataset,
    config: *const SbRunConfig,
    out: *mut *mut SbFitResult,
) -> SbStatus {
    guard(|| {
        let d = borrow(dataset, "dataset")?;
        let c = RunConfig::from(borrow(config, "config")?);
        let inner = specboot::fit(&d.data, &c)?;
        write_out(out, SbFitResult { inner })
    })
}

/// # Safety
/// `result` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_log_likelihood(
    result: *const SbFitResult,
    out: *mut f64,
) -> SbStatus {
    guard(|| store(out, borrow(result, "result")?.inner.log_likelihood))
}

/// BIC in the larger-is-better convention, in the estimation space.
///
/// # Safety
/// `result` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_bic(result: *const SbFitResult, out: *mut f64) -> SbStatus {
    guard(|| store(out, borrow(result, "result")?.inner.bic()))
}

/// # Safety
/// `result` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_elapsed_seconds(
    result: *const SbFitResult,
    out: *mut f64,
) -> SbStatus {
    guard(|| store(out, borrow(result, "result")?.inner.elapsed_seconds))
}

/// # Safety
/// `result` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_converged(
    result: *const SbFitResult,
    out: *mut bool,
) -> SbStatus {
    guard(|| store(out, borrow(result, "result")?.inner.converged))
}

/// Number of accepted bootstrap samples; `SB_STATUS_NOT_AVAILABLE` for
/// non-bootstrapped estimators.
///
/// # Safety
/// `result` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_bootstrap_iterations(
    result: *const SbFitResult,
    out: *mut usize,
) -> SbStatus {
    guard(|| {
        let k = borrow(result, "result")?
            .inner
            .bootstrap_iterations
            .ok_or_else(|| Failure(SbStatus::NotAvailable, "not a bootstrapped fit".into()))?;
        store(out, k)
    })
}

/// Shape of the membership matrices (observations x components).
///
/// # Safety
/// `result` must be live; out pointers valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_membership_shape(
    result: *const SbFitResult,
    nrows: *mut usize,
    ncols: *mut usize,
) -> SbStatus {
    guard(|| {
        let m = borrow(result, "result")?.inner.memberships.matrix();
        store(nrows, m.nrows())?;
        store(ncols, m.ncols())
    })
}

unsafe fn copy_matrix(m: &Matrix, out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let needed = m.nrows() * m.ncols();
    if capacity < needed {
        return Err(Failure(
            SbStatus::BufferTooSmall,
            format!("buffer holds {capacity}, need {needed}"),
        ));
    }
    let dst = std::slice::from_raw_parts_mut(out, needed);
    for (i, row) in m.row_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            dst[i * m.ncols() + j] = *v;
        }
    }
    Ok(())
}

/// Copies the full-data memberships, row-major.
///
/// # Safety
/// `result` must be live; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_memberships(
    result: *const SbFitResult,
    out: *mut f64,
    capacity: usize,
) -> SbStatus {
    guard(|| {
        copy_matrix(
            borrow(result, "result")?.inner.memberships.matrix(),
            out,
            capacity,
        )
    })
}

/// Copies the out-of-bag memberships, row-major.
///
/// # Safety
/// `result` must be live; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_oob_memberships(
    result: *const SbFitResult,
    out: *mut f64,
    capacity: usize,
) -> SbStatus {
    guard(|| {
        let oob = borrow(result, "result")?
            .inner
            .oob_memberships
            .as_ref()
            .ok_or_else(|| Failure(SbStatus::NotAvailable, "not a bootstrapped fit".into()))?;
        copy_matrix(oob.matrix(), out, capacity)
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_fit_result_free(result: *mut SbFitResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
