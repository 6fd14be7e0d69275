//! C ABI over lagsurge: opaque handles for graded planes, cylinder curves and
//! chain complexes, integer status codes, and JSON entry points for the
//! check runner.
//!
//! Every function returns an [`LsStatus`]; on failure the message is kept in
//! a thread-local buffer readable through [`ls_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use lagsurge::cli::{self, RunConfig, RunError};
use lagsurge::error::Error;
use lagsurge::floer_cylinder::{self as fc, CurveSpec, CylinderCurve};
use lagsurge::homological_algebra::{homology, F2Complex};
use lagsurge::symplectic_linalg::{self as sl, CMat, GradedLagrangianPlane, SymplecticSpace};
use num_complex::Complex64;

/// Status codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Schema = 3,
    InvalidParameter = 4,
    InvalidFrame = 5,
    DegenerateAngle = 6,
    NonTransverse = 7,
    Obstruction = 8,
    InvalidComplex = 9,
    BufferTooSmall = 10,
    CheckFailed = 11,
    Other = 99,
}

/// Graded Lagrangian plane in ℂⁿ.
pub struct LsPlane(GradedLagrangianPlane);
/// Graded exact curve on the cylinder.
pub struct LsCurve(CylinderCurve);
/// Finite cochain complex over a prime field.
pub struct LsComplex(F2Complex);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: LsStatus, msg: &str) -> LsStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> LsStatus {
    let status = match e {
        Error::Schema(_) => LsStatus::Schema,
        Error::InvalidParameter(_) | Error::ProfileMismatch(_) | Error::InvalidLift(_) => LsStatus::InvalidParameter,
        Error::InvalidFrame(_) | Error::InvalidSpace(_) => LsStatus::InvalidFrame,
        Error::DegenerateAngle(_) => LsStatus::DegenerateAngle,
        Error::NonTransverse(_) => LsStatus::NonTransverse,
        Error::ObstructionDetected(_) => LsStatus::Obstruction,
        Error::InvalidComplex(_) | Error::InvalidMap(_) => LsStatus::InvalidComplex,
        _ => LsStatus::Other,
    };
    fail(status, &e.to_string())
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, LsStatus> {
    if s.is_null() {
        return Err(fail(LsStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(LsStatus::InvalidUtf8, "string is not UTF-8"))
}

/// # Safety
/// `s` must be null or a NUL-terminated JSON string.
unsafe fn read_json(s: *const c_char) -> Result<serde_json::Value, LsStatus> {
    let text = read_str(s)?;
    serde_json::from_str(text).map_err(|e| fail(LsStatus::Schema, &e.to_string()))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(LsStatus::NullPointer, "null output pointer");
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated) and returns its full length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ls_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library.
#[no_mangle]
pub unsafe extern "C" fn ls_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The plane ℝⁿ with grading `theta`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_plane_real(n: usize, theta: f64, out: *mut *mut LsPlane) -> LsStatus {
    out_ptr!(out);
    match GradedLagrangianPlane::real(n, theta) {
        Ok(p) => {
            *out = Box::into_raw(Box::new(LsPlane(p)));
            LsStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// The plane ℝᵏ × iℝⁿ⁻ᵏ with grading `theta`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_plane_conormal(n: usize, k: usize, theta: f64, out: *mut *mut LsPlane) -> LsStatus {
    out_ptr!(out);
    match GradedLagrangianPlane::conormal(n, k, theta) {
        Ok(p) => {
            *out = Box::into_raw(Box::new(LsPlane(p)));
            LsStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// A plane in standard ℂⁿ from a unitary frame given column-major as real
/// and imaginary parts, graded by `theta`.
///
/// # Safety
/// `re` and `im` must point to n·n doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_plane_from_frame(n: usize, re: *const f64, im: *const f64, theta: f64, out: *mut *mut LsPlane) -> LsStatus {
    out_ptr!(out);
    if re.is_null() || im.is_null() {
        return fail(LsStatus::NullPointer, "null frame");
    }
    let re = std::slice::from_raw_parts(re, n * n);
    let im = std::slice::from_raw_parts(im, n * n);
    let frame = CMat::from_fn(n, n, |i, j| Complex64::new(re[j * n + i], im[j * n + i]));
    match GradedLagrangianPlane::new(SymplecticSpace::standard(n), frame, theta) {
        Ok(p) => {
            *out = Box::into_raw(Box::new(LsPlane(p)));
            LsStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// # Safety
/// `p` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ls_plane_free(p: *mut LsPlane) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Ind(p0, p1): the raw value and its rounding.
///
/// # Safety
/// Handles must be valid; `raw` and `rounded` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_index(p0: *const LsPlane, p1: *const LsPlane, raw: *mut f64, rounded: *mut i64) -> LsStatus {
    if p0.is_null() || p1.is_null() {
        return fail(LsStatus::NullPointer, "null plane");
    }
    out_ptr!(raw);
    out_ptr!(rounded);
    match sl::index(&(*p0).0, &(*p1).0) {
        Ok(v) => {
            *raw = v.raw;
            *rounded = v.rounded;
            LsStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Builds a curve from a JSON curve spec such as `{"type":"fiber","q":1.0}`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_curve_from_json(spec: *const c_char, out: *mut *mut LsCurve) -> LsStatus {
    out_ptr!(out);
    let value = try_ffi!(read_json(spec));
    let spec: CurveSpec = match serde_json::from_value(value) {
        Ok(s) => s,
        Err(e) => return fail(LsStatus::Schema, &e.to_string()),
    };
    match spec.build() {
        Ok(c) => {
            *out = Box::into_raw(Box::new(LsCurve(c)));
            LsStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// # Safety
/// `c` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ls_curve_free(c: *mut LsCurve) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Floer complex of (c0, c1) as a new complex handle.
///
/// # Safety
/// Handles must be valid; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_floer_complex(c0: *const LsCurve, c1: *const LsCurve, out: *mut *mut LsComplex) -> LsStatus {
    if c0.is_null() || c1.is_null() {
        return fail(LsStatus::NullPointer, "null curve");
    }
    out_ptr!(out);
    match fc::bigon_differential(&(*c0).0, &(*c1).0) {
        Ok(cf) => {
            *out = Box::into_raw(Box::new(LsComplex(cf.complex)));
            LsStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Parses a complex from `{"generators":[{"label","deg"}], "d":[[row,col,val]]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_complex_from_json(json: *const c_char, out: *mut *mut LsComplex) -> LsStatus {
    out_ptr!(out);
    let value = try_ffi!(read_json(json));
    match F2Complex::from_json(&value) {
        Ok(c) => {
            *out = Box::into_raw(Box::new(LsComplex(c)));
            LsStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// # Safety
/// `c` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ls_complex_free(c: *mut LsComplex) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Writes (degree, rank) pairs of the nonzero cohomology into the arrays,
/// `*len` receiving the number of pairs. BufferTooSmall when `cap` is short.
///
/// # Safety
/// `c` must be valid; `degrees` and `ranks` must hold `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn ls_complex_homology(
    c: *const LsComplex,
    degrees: *mut i64,
    ranks: *mut usize,
    cap: usize,
    len: *mut usize,
) -> LsStatus {
    if c.is_null() {
        return fail(LsStatus::NullPointer, "null complex");
    }
    out_ptr!(len);
    let h = match homology(&(*c).0) {
        Ok(h) => h,
        Err(e) => return from_error(&e),
    };
    let nz: Vec<(i64, usize)> = h.into_iter().filter(|&(_, r)| r > 0).collect();
    *len = nz.len();
    if nz.len() > cap {
        return fail(LsStatus::BufferTooSmall, &format!("need {} entries", nz.len()));
    }
    if !nz.is_empty() && (degrees.is_null() || ranks.is_null()) {
        return fail(LsStatus::NullPointer, "null output arrays");
    }
    for (i, (d, r)) in nz.into_iter().enumerate() {
        *degrees.add(i) = d;
        *ranks.add(i) = r;
    }
    LsStatus::Ok
}

/// Number of generators of the complex.
///
/// # Safety
/// `c` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ls_complex_len(c: *const LsComplex) -> usize {
    if c.is_null() {
        0
    } else {
        (*c).0.len()
    }
}

/// Runs a JSON run config (the format of the regression corpus) and returns
/// the canonical JSON report in `*report` (free with `ls_string_free`).
/// Returns Ok when every check passes, CheckFailed otherwise, Schema when
/// the config is rejected.
///
/// # Safety
/// `config` must be a NUL-terminated string; `report` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_run_config(config: *const c_char, report: *mut *mut c_char) -> LsStatus {
    out_ptr!(report);
    *report = ptr::null_mut();
    let value = try_ffi!(read_json(config));
    let cfg = match RunConfig::from_json(&value) {
        Ok(c) => c,
        Err(e) => return from_error(&e),
    };
    match cli::run(&cfg) {
        Ok(out) => {
            *report = into_c_string(out.report.to_canonical_json());
            if out.report.pass {
                LsStatus::Ok
            } else {
                fail(LsStatus::CheckFailed, "at least one check failed")
            }
        }
        Err(RunError::Schema(m)) => fail(LsStatus::Schema, &m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(ls_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn error_buffer_truncates() {
        set_error("abcdef");
        let mut buf = [0 as c_char; 4];
        let n = unsafe { ls_last_error(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, 6);
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) };
        assert_eq!(s.to_str().unwrap(), "abc");
    }
}
