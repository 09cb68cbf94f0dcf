//! C ABI over the pocket detector.
//!
//! Objects are opaque handles created by `gp_*_new`/`gp_*_parse` style calls
//! and released with the matching `gp_*_free`. Every fallible call returns a
//! [`GpStatus`]; on failure [`gp_last_error`] describes the error for the
//! calling thread. Strings handed out by the library are released with
//! [`gp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use geneo_pocket::error::Error;
use geneo_pocket::geneo::{predict, DetectorConfig, GeneoParams, PocketPrediction, PredictionRecord};
use geneo_pocket::ingest::{import_pdb, parse_complex, Atom, AtomicStructure};
use geneo_pocket::stats::wald;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Domain = 4,
    Numerical = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary; the library state is intact.
    Panic = 7,
}

/// Learnable detector parameters.
pub struct GpParams(GeneoParams);

/// A protein structure.
pub struct GpStructure(AtomicStructure);

/// Ranked pockets of one structure.
pub struct GpPrediction(PocketPrediction);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parse { .. } => GpStatus::Parse,
            Error::Domain(_) => GpStatus::Domain,
            Error::Numerical(_) => GpStatus::Numerical,
            Error::Io { .. } => GpStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GpStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and turns panics into [`GpStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GpStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(GpStatus::Numerical, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The published optimum parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_params_table1(out: *mut *mut GpParams) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, GpParams(GeneoParams::table1()));
        Ok(())
    })
}

/// Parameters from the `key = value` parameter file format.
///
/// # Safety
/// `source` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_params_parse(source: *const c_char, out: *mut *mut GpParams) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = GeneoParams::parse(text(source, "source")?)?;
        put(out, GpParams(p));
        Ok(())
    })
}

/// Parameters from raw values; `sigma` and `alpha` point to 8 doubles each.
///
/// # Safety
/// Array pointers must reference 8 readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_params_new(
    sigma: *const f64,
    alpha: *const f64,
    theta: f64,
    out: *mut *mut GpParams,
) -> GpStatus {
    guard(|| {
        if sigma.is_null() || alpha.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let mut s = [0.0; 8];
        let mut a = [0.0; 8];
        s.copy_from_slice(std::slice::from_raw_parts(sigma, 8));
        a.copy_from_slice(std::slice::from_raw_parts(alpha, 8));
        put(out, GpParams(GeneoParams::new(s, a, theta)?));
        Ok(())
    })
}

/// Serialize parameters to the parameter file format.
///
/// # Safety
/// `params` must be a live handle; `out` a valid pointer. Free the result with
/// [`gp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn gp_params_to_string(params: *const GpParams, out: *mut *mut c_char) -> GpStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_string(out, p.0.to_file_string())
    })
}

/// # Safety
/// `params` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_params_free(params: *mut GpParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Parse a structure. `format` 0 reads the native complex format, 1 reads PDB.
/// Ligand records are ignored.
///
/// # Safety
/// `source` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_structure_parse(
    source: *const c_char,
    format: u32,
    out: *mut *mut GpStructure,
) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = text(source, "source")?;
        let (s, _) = match format {
            0 => parse_complex(t)?,
            1 => import_pdb(t, "structure")?,
            f => return Err(Failure(GpStatus::Domain, format!("unknown format {f}"))),
        };
        put(out, GpStructure(s));
        Ok(())
    })
}

/// Structure from element symbols and `3 * n` coordinates in Å; charges are zero.
///
/// # Safety
/// `elements` must hold `n` NUL-terminated strings and `xyz` `3 * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn gp_structure_from_atoms(
    elements: *const *const c_char,
    xyz: *const f64,
    n: usize,
    out: *mut *mut GpStructure,
) -> GpStatus {
    guard(|| {
        if elements.is_null() || xyz.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let names = std::slice::from_raw_parts(elements, n);
        let coords = std::slice::from_raw_parts(xyz, 3 * n);
        let atoms = names
            .iter()
            .zip(coords.chunks_exact(3))
            .map(|(&e, c)| Ok(Atom::new(text(e, "element")?, [c[0], c[1], c[2]])))
            .collect::<Result<Vec<_>, Failure>>()?;
        put(out, GpStructure(AtomicStructure::new("structure", atoms)?));
        Ok(())
    })
}

/// # Safety
/// `structure` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_structure_free(structure: *mut GpStructure) {
    if !structure.is_null() {
        drop(Box::from_raw(structure));
    }
}

/// Run the detector with default grid and potentials and 6-connectivity.
///
/// # Safety
/// Handles must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_predict(
    params: *const GpParams,
    structure: *const GpStructure,
    out: *mut *mut GpPrediction,
) -> GpStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let s = structure.as_ref().ok_or_else(|| null("structure"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, GpPrediction(predict(&s.0, &p.0, &DetectorConfig::default())?));
        Ok(())
    })
}

/// Number of pockets, 0 for a NULL handle.
///
/// # Safety
/// `pred` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_prediction_pocket_count(pred: *const GpPrediction) -> usize {
    pred.as_ref().map_or(0, |p| p.0.pockets.len())
}

/// Grid origin (Å, 3 doubles), spacing and dimensions (3 values).
///
/// # Safety
/// `pred` must be live; outputs must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_prediction_grid(
    pred: *const GpPrediction,
    origin: *mut f64,
    spacing: *mut f64,
    dims: *mut usize,
) -> GpStatus {
    guard(|| {
        let spec = pred.as_ref().ok_or_else(|| null("pred"))?.0.spec();
        if !origin.is_null() {
            ptr::copy_nonoverlapping(spec.origin().as_ptr(), origin, 3);
        }
        if !spacing.is_null() {
            *spacing = spec.spacing();
        }
        if !dims.is_null() {
            ptr::copy_nonoverlapping(spec.dims().as_ptr(), dims, 3);
        }
        Ok(())
    })
}

/// Score and voxel count of the pocket of 1-based `rank`.
///
/// # Safety
/// `pred` must be live; outputs must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_prediction_pocket(
    pred: *const GpPrediction,
    rank: usize,
    score: *mut f64,
    voxel_count: *mut usize,
) -> GpStatus {
    guard(|| {
        let p = pred.as_ref().ok_or_else(|| null("pred"))?;
        let pk = p
            .0
            .pocket(rank)
            .ok_or_else(|| Failure(GpStatus::Domain, format!("no pocket of rank {rank}")))?;
        if !score.is_null() {
            *score = pk.score;
        }
        if !voxel_count.is_null() {
            *voxel_count = pk.mask.len();
        }
        Ok(())
    })
}

/// Copy up to `capacity` voxel indices `(i, j, k)` of a pocket into `out`
/// (`3 * capacity` values) and store the total count in `written`.
///
/// # Safety
/// `pred` must be live; `out` must hold `3 * capacity` values.
#[no_mangle]
pub unsafe extern "C" fn gp_prediction_pocket_voxels(
    pred: *const GpPrediction,
    rank: usize,
    out: *mut usize,
    capacity: usize,
    written: *mut usize,
) -> GpStatus {
    guard(|| {
        let p = pred.as_ref().ok_or_else(|| null("pred"))?;
        let pk = p
            .0
            .pocket(rank)
            .ok_or_else(|| Failure(GpStatus::Domain, format!("no pocket of rank {rank}")))?;
        if out.is_null() && capacity > 0 {
            return Err(null("out"));
        }
        for (n, v) in pk.mask.indices().take(capacity).enumerate() {
            ptr::copy_nonoverlapping(v.as_ptr(), out.add(3 * n), 3);
        }
        if !written.is_null() {
            *written = pk.mask.len();
        }
        Ok(())
    })
}

/// The whole prediction as JSON. Free with [`gp_string_free`].
///
/// # Safety
/// `pred` must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_prediction_to_json(pred: *const GpPrediction, out: *mut *mut c_char) -> GpStatus {
    guard(|| {
        let p = pred.as_ref().ok_or_else(|| null("pred"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&PredictionRecord::from(&p.0))
            .map_err(|e| Failure(GpStatus::Numerical, e.to_string()))?;
        put_string(out, json)
    })
}

/// # Safety
/// `pred` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_prediction_free(pred: *mut GpPrediction) {
    if !pred.is_null() {
        drop(Box::from_raw(pred));
    }
}

/// Wald interval for a proportion `p_hat` out of `n` at `confidence`.
///
/// # Safety
/// Outputs must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_wald(
    p_hat: f64,
    n: usize,
    confidence: f64,
    se: *mut f64,
    ci_low: *mut f64,
    ci_high: *mut f64,
) -> GpStatus {
    guard(|| {
        let w = wald(p_hat, n, confidence)?;
        for (dst, v) in [(se, w.se), (ci_low, w.ci_low), (ci_high, w.ci_high)] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}
