//! C interface to `asc-core`.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free`. Fallible calls return an [`AscStatus`]; on failure
//! [`asc_last_error`] describes what went wrong on the calling thread.
//! Matrices are dense and row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use asc_core::evaluation::{metric_bundle, MetricBundle};
use asc_core::pipeline::cluster_similarity;
use asc_core::{
    run_asc, AscConfig, ClusterMethod, ConstraintSets, Error, ErrorKind, KScore, LaplacianKind,
    NumericDataset, SimilarityKind, SimilarityMatrix, TextDataset,
};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AscStatus {
    Ok = 0,
    /// Bad data: shapes, values, constraint indices.
    Input = 1,
    /// Eigensolver or degenerate geometry.
    Numerical = 2,
    /// Invalid setting, or no way to pick the fusion weight.
    Config = 3,
    NullPointer = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AscMethod {
    Kmeans = 0,
    Kmedians = 1,
    Kmedoids = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AscLaplacian {
    Unnormalized = 0,
    Symmetric = 1,
    RandomWalk = 2,
}

/// Pipeline settings. Starts from the library defaults.
pub struct AscConfigHandle {
    inner: AscConfig,
}

/// Outcome of a run.
pub struct AscResultHandle {
    labels: Vec<usize>,
    k: usize,
    lambda: Option<f64>,
    candidates: Vec<usize>,
    metrics: MetricBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure {
    status: AscStatus,
    message: String,
}

impl Failure {
    fn new(status: AscStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Self::new(AscStatus::NullPointer, format!("`{what}` is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Input => AscStatus::Input,
            ErrorKind::Numerical => AscStatus::Numerical,
            ErrorKind::Config => AscStatus::Config,
        };
        Self::new(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AscStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AscStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_owned())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            AscStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    // SAFETY: caller promises `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn cells(rows: usize, cols: usize, what: &str) -> Result<usize, Failure> {
    rows.checked_mul(cols)
        .ok_or_else(|| Failure::new(AscStatus::Input, format!("{what}: {rows} x {cols} overflows")))
}

unsafe fn config_mut<'a>(cfg: *mut AscConfigHandle) -> Result<&'a mut AscConfigHandle, Failure> {
    // SAFETY: non-null handles come from `asc_config_new`.
    unsafe { cfg.as_mut() }.ok_or_else(|| Failure::null("config"))
}

unsafe fn result_ref<'a>(res: *const AscResultHandle) -> Option<&'a AscResultHandle> {
    // SAFETY: non-null handles come from a run function.
    unsafe { res.as_ref() }
}

/// Apply `edit` to a copy and keep it only if the whole config validates.
unsafe fn update(cfg: *mut AscConfigHandle, edit: impl FnOnce(&mut AscConfig)) -> AscStatus {
    guard(|| {
        let handle = unsafe { config_mut(cfg) }?;
        let mut next = handle.inner.clone();
        edit(&mut next);
        next.validate()?;
        handle.inner = next;
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn asc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn asc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

#[no_mangle]
pub extern "C" fn asc_config_new() -> *mut AscConfigHandle {
    Box::into_raw(Box::new(AscConfigHandle {
        inner: AscConfig::default(),
    }))
}

/// # Safety
/// `cfg` is null or a handle from [`asc_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn asc_config_free(cfg: *mut AscConfigHandle) {
    if !cfg.is_null() {
        // SAFETY: allocated by `asc_config_new`.
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Fixed fusion weight in [0, 1]; NaN returns to searching the grid with the
/// constraints passed to [`asc_run`].
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_lambda(cfg: *mut AscConfigHandle, lambda: f64) -> AscStatus {
    unsafe { update(cfg, |c| c.lambda = (!lambda.is_nan()).then_some(lambda)) }
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_lambda_step(cfg: *mut AscConfigHandle, step: f64) -> AscStatus {
    unsafe { update(cfg, |c| c.lambda_step = step) }
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_seed(cfg: *mut AscConfigHandle, seed: u64) -> AscStatus {
    unsafe { update(cfg, |c| c.seed = seed) }
}

/// Cluster at exactly `k`; 0 chooses among eigengap candidates.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_k(cfg: *mut AscConfigHandle, k: usize) -> AscStatus {
    unsafe { update(cfg, |c| c.k = (k != 0).then_some(k)) }
}

/// `method` is an [`AscMethod`] value.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_method(cfg: *mut AscConfigHandle, method: u32) -> AscStatus {
    let m = match method {
        0 => ClusterMethod::Kmeans,
        1 => ClusterMethod::Kmedians,
        2 => ClusterMethod::Kmedoids,
        other => return bad_enum("method", other),
    };
    unsafe { update(cfg, |c| c.method = m) }
}

/// `kind` is an [`AscLaplacian`] value.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_laplacian(cfg: *mut AscConfigHandle, kind: u32) -> AscStatus {
    let l = match kind {
        0 => LaplacianKind::Unnormalized,
        1 => LaplacianKind::Symmetric,
        2 => LaplacianKind::RandomWalk,
        other => return bad_enum("laplacian", other),
    };
    unsafe { update(cfg, |c| c.laplacian = l) }
}

fn bad_enum(name: &str, value: u32) -> AscStatus {
    guard(|| Err(Failure::new(AscStatus::Config, format!("unknown {name} value {value}"))))
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_restarts(cfg: *mut AscConfigHandle, restarts: usize) -> AscStatus {
    unsafe { update(cfg, |c| c.restarts = restarts) }
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_eigengap_window(cfg: *mut AscConfigHandle, window: usize) -> AscStatus {
    unsafe { update(cfg, |c| c.eigengap_window = window) }
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_rescale_numeric(cfg: *mut AscConfigHandle, on: bool) -> AscStatus {
    unsafe { update(cfg, |c| c.rescale_numeric = on) }
}

/// Check constraint triples against the raw numeric similarity on the
/// cannot-link side.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_literal_lambda_rhs(cfg: *mut AscConfigHandle, on: bool) -> AscStatus {
    unsafe { update(cfg, |c| c.literal_lambda_rhs = on) }
}

/// Pick k by the per-cluster gap + separation score instead of gap plus
/// silhouette.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn asc_config_set_literal_k_score(cfg: *mut AscConfigHandle, on: bool) -> AscStatus {
    let score = if on { KScore::Literal } else { KScore::GapSilhouette };
    unsafe { update(cfg, |c| c.k_score = score) }
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

unsafe fn store(out: *mut *mut AscResultHandle, res: AscResultHandle) {
    // SAFETY: checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(res)) };
}

/// Full fused run.
///
/// `numeric` is `n x p`, `counts` is `n x q` term counts. The constraint
/// arrays hold sample indices and may be null when their length is 0; with
/// no constraints the config must carry a fixed lambda. On success `*out`
/// receives a result handle.
///
/// # Safety
/// Pointers must reference the stated number of elements; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn asc_run(
    cfg: *const AscConfigHandle,
    numeric: *const f64,
    n: usize,
    p: usize,
    counts: *const u32,
    q: usize,
    must_link: *const usize,
    must_link_len: usize,
    cannot_link: *const usize,
    cannot_link_len: usize,
    out: *mut *mut AscResultHandle,
) -> AscStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(|| Failure::null("config"))?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let x = unsafe { slice(numeric, cells(n, p, "numeric")?, "numeric") }?;
        let c = unsafe { slice(counts, cells(n, q, "counts")?, "counts") }?;
        let ml = unsafe { slice(must_link, must_link_len, "must_link") }?;
        let cl = unsafe { slice(cannot_link, cannot_link_len, "cannot_link") }?;

        let samples = ids("s", n);
        let numeric = NumericDataset::new(
            samples.clone(),
            ids("x", p),
            DMatrix::from_row_slice(n, p, x),
        )?;
        let text = TextDataset::new(samples, ids("t", q), DMatrix::from_row_slice(n, q, c))?;
        let constraints = if ml.is_empty() && cl.is_empty() {
            None
        } else {
            Some(ConstraintSets::new(ml.to_vec(), cl.to_vec(), n)?)
        };
        let r = run_asc(&numeric, &text, constraints.as_ref(), &cfg.inner)?;
        let res = AscResultHandle {
            k: r.k(),
            labels: r.labels().to_vec(),
            lambda: r.lambda,
            candidates: r.spectral.gaps.candidates.clone(),
            metrics: r.metrics,
        };
        unsafe { store(out, res) };
        Ok(())
    })
}

/// Laplacian, eigengap candidates and clustering on a caller-built `n x n`
/// similarity matrix (symmetric, finite, non-negative). Metrics are taken in
/// the spectral embedding.
///
/// # Safety
/// `w` must hold `n * n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asc_cluster_similarity(
    cfg: *const AscConfigHandle,
    w: *const f64,
    n: usize,
    out: *mut *mut AscResultHandle,
) -> AscStatus {
    guard(|| {
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(|| Failure::null("config"))?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let values = unsafe { slice(w, cells(n, n, "similarity")?, "similarity") }?;
        let w = SimilarityMatrix::new(
            DMatrix::from_row_slice(n, n, values),
            SimilarityKind::External,
            None,
        )?;
        let run = cluster_similarity(&w, &cfg.inner)?;
        let a = &run.assignment;
        let metrics = metric_bundle(&run.embedding.coordinates, &a.labels, &a.centers)?;
        let res = AscResultHandle {
            k: a.k,
            labels: a.labels.clone(),
            lambda: None,
            candidates: run.gaps.candidates.clone(),
            metrics,
        };
        unsafe { store(out, res) };
        Ok(())
    })
}

/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_free(res: *mut AscResultHandle) {
    if !res.is_null() {
        // SAFETY: allocated by a run function.
        drop(unsafe { Box::from_raw(res) });
    }
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_n(res: *const AscResultHandle) -> usize {
    unsafe { result_ref(res) }.map_or(0, |r| r.labels.len())
}

/// Chosen cluster count; 0 for a null handle.
///
/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_k(res: *const AscResultHandle) -> usize {
    unsafe { result_ref(res) }.map_or(0, |r| r.k)
}

/// Copy `n` labels (0-based cluster indices) into `labels`, which holds `len`
/// slots.
///
/// # Safety
/// `labels` must be writable for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn asc_result_labels(
    res: *const AscResultHandle,
    labels: *mut usize,
    len: usize,
) -> AscStatus {
    guard(|| {
        let r = unsafe { result_ref(res) }.ok_or_else(|| Failure::null("result"))?;
        unsafe { copy_out(&r.labels, labels, len, "labels") }
    })
}

/// Number of eigengap candidates.
///
/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_candidate_count(res: *const AscResultHandle) -> usize {
    unsafe { result_ref(res) }.map_or(0, |r| r.candidates.len())
}

/// # Safety
/// `out` must be writable for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn asc_result_candidates(
    res: *const AscResultHandle,
    out: *mut usize,
    len: usize,
) -> AscStatus {
    guard(|| {
        let r = unsafe { result_ref(res) }.ok_or_else(|| Failure::null("result"))?;
        unsafe { copy_out(&r.candidates, out, len, "candidates") }
    })
}

unsafe fn copy_out(src: &[usize], dst: *mut usize, len: usize, what: &str) -> Result<(), Failure> {
    if len < src.len() {
        return Err(Failure::new(
            AscStatus::Input,
            format!("{what}: buffer holds {len}, need {}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(Failure::null(what));
    }
    // SAFETY: `dst` is writable for `len >= src.len()` elements.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    Ok(())
}

/// Fusion weight used, or NaN for runs without fusion and null handles.
///
/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_lambda(res: *const AscResultHandle) -> f64 {
    unsafe { result_ref(res) }.and_then(|r| r.lambda).unwrap_or(f64::NAN)
}

/// Mean silhouette; NaN for a null handle.
///
/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_silhouette(res: *const AscResultHandle) -> f64 {
    unsafe { result_ref(res) }.map_or(f64::NAN, |r| r.metrics.silhouette)
}

/// Intra/inter distance ratio; NaN when undefined.
///
/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_intra_inter(res: *const AscResultHandle) -> f64 {
    unsafe { result_ref(res) }.and_then(|r| r.metrics.intra_inter).unwrap_or(f64::NAN)
}

/// Calinski-Harabasz index; NaN when undefined.
///
/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_chc(res: *const AscResultHandle) -> f64 {
    unsafe { result_ref(res) }.and_then(|r| r.metrics.chc).unwrap_or(f64::NAN)
}

/// Davies-Bouldin index; NaN when undefined.
///
/// # Safety
/// `res` is null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn asc_result_dbi(res: *const AscResultHandle) -> f64 {
    unsafe { result_ref(res) }.and_then(|r| r.metrics.dbi).unwrap_or(f64::NAN)
}
