//! C interface to `bottcher-core`.
//!
//! Every call returns a [`BottcherStatus`]; results go through out-pointers.
//! Handles are opaque, created by `*_new*` and released by the matching
//! `*_free`. After a non-OK status, `bottcher_last_error` copies a message
//! describing the failure (per thread).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bottcher_core::algebra::polymap_from_json;
use bottcher_core::bottcher1d::{bottcher_eval, bottcher_series, Germ1D};
use bottcher_core::fields::{extend_bottcher, local_bottcher, BottcherCoordinate, VectorField};
use bottcher_core::green::{GreenEvaluator, GreenLevel};
use bottcher_core::koch::{chart_germ, koch_fixed_points, koch_spectrum, Partition};
use bottcher_core::quasihom::{extract_quasihomogeneous_part, AdaptedGerm};
use bottcher_core::Error;
use num_complex::Complex64;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BottcherStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    DimensionMismatch = 4,
    /// the point is outside the basin or the orbit escaped
    NotInBasin = 5,
    /// a numerical guard refused the computation (critical proximity, branch ambiguity, …)
    Refused = 6,
    NotConverged = 7,
    /// output buffer too small; the needed length is written to the length out-pointer
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

impl From<&Error> for BottcherStatus {
    fn from(e: &Error) -> Self {
        use BottcherStatus as S;
        match e {
            Error::InvalidArgument(_) | Error::InvalidBlocks(_) | Error::NonZeroAverage(_) => S::InvalidArgument,
            Error::Parse(_) | Error::Io(_) => S::Parse,
            Error::DimensionMismatch { .. } => S::DimensionMismatch,
            Error::Escaped { .. } | Error::NotInBasin(_) | Error::DomainExit { .. } => S::NotInBasin,
            Error::CriticalProximity { .. }
            | Error::BranchAmbiguity { .. }
            | Error::StepSizeCollapse(_)
            | Error::NotAsymptoticallyRadial(_)
            | Error::ForwardFlow(_) => S::Refused,
            Error::RootsNotConverged { .. } | Error::NonStabilization(_) | Error::ResidueSum(_) => S::NotConverged,
            _ => S::Other,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Fail(BottcherStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail((&e).into(), e.to_string())
    }
}

fn fail<T>(status: BottcherStatus, msg: &str) -> Result<T, Fail> {
    Err(Fail(status, msg.to_string()))
}

/// Runs `f`, converting errors and panics to a status and the thread's error message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BottcherStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            BottcherStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            BottcherStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail(BottcherStatus::NullPointer, "null output pointer".into()))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail(BottcherStatus::NullPointer, "null handle".into()))
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return fail(BottcherStatus::NullPointer, "null string");
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(BottcherStatus::Parse, "string is not UTF-8".into()))
}

unsafe fn complex_in(re: *const f64, im: *const f64, n: usize) -> Result<Vec<Complex64>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if re.is_null() || im.is_null() {
        return fail(BottcherStatus::NullPointer, "null coordinate array");
    }
    let re = std::slice::from_raw_parts(re, n);
    let im = std::slice::from_raw_parts(im, n);
    Ok(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

unsafe fn complex_out(v: &[Complex64], re: *mut f64, im: *mut f64, cap: usize, len: *mut usize) -> Result<(), Fail> {
    *out(len)? = v.len();
    if v.len() > cap {
        return fail(BottcherStatus::BufferTooSmall, &format!("need room for {} values", v.len()));
    }
    if re.is_null() || im.is_null() {
        return fail(BottcherStatus::NullPointer, "null output array");
    }
    for (k, z) in v.iter().enumerate() {
        *re.add(k) = z.re;
        *im.add(k) = z.im;
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bottcher_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bottcher_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// One-variable germ f(z) = a z^k + … with ascending coefficients.
pub struct BottcherGerm1D {
    inner: Germ1D,
}

/// # Safety
/// `re`, `im` point to `n` doubles; `out_handle` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_germ1d_new(
    re: *const f64,
    im: *const f64,
    n: usize,
    out_handle: *mut *mut BottcherGerm1D,
) -> BottcherStatus {
    guard(|| {
        let slot = out(out_handle)?;
        let inner = Germ1D::from_coeffs(&complex_in(re, im, n)?)?;
        *slot = boxed(BottcherGerm1D { inner });
        Ok(())
    })
}

/// # Safety
/// `h` is null or a handle from `bottcher_germ1d_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bottcher_germ1d_free(h: *mut BottcherGerm1D) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// φ(z) by the logarithmic limit.
///
/// # Safety
/// `h` is a live handle; out-pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_germ1d_eval(
    h: *const BottcherGerm1D,
    z_re: f64,
    z_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> BottcherStatus {
    guard(|| {
        let g = handle(h)?;
        let (re, im) = (out(out_re)?, out(out_im)?);
        let w = bottcher_eval(&g.inner, Complex64::new(z_re, z_im))?;
        *re = w.re;
        *im = w.im;
        Ok(())
    })
}

/// Coefficients c_2 … c_N of φ(z) = z + Σ c_n z^n; `*out_len` receives N − 1.
///
/// # Safety
/// `h` is a live handle; arrays hold `cap` doubles; `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_germ1d_series(
    h: *const BottcherGerm1D,
    terms: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> BottcherStatus {
    guard(|| {
        let g = handle(h)?;
        let s = bottcher_series(&g.inner, terms);
        complex_out(&s.coeffs, out_re, out_im, cap, out_len)
    })
}

fn germ_from_partition(partition: &str) -> Result<AdaptedGerm, Fail> {
    let p: Partition = partition.parse()?;
    Ok(chart_germ(&p)?.germ)
}

fn germ_from_json(json: &str) -> Result<AdaptedGerm, Fail> {
    let f = polymap_from_json(json)?;
    Ok(extract_quasihomogeneous_part(&f, &f.input().without_degrees())?)
}

/// Green-function evaluator for one germ.
pub struct BottcherGreen {
    inner: GreenEvaluator,
}

unsafe fn new_green(germ: Result<AdaptedGerm, Fail>, out_handle: *mut *mut BottcherGreen) -> Result<(), Fail> {
    let slot = out(out_handle)?;
    *slot = boxed(BottcherGreen { inner: GreenEvaluator::for_germ(&germ?) });
    Ok(())
}

/// Evaluator for the chart germ of the family at a stratum, e.g. "1,2,3|4".
///
/// # Safety
/// `partition` is a NUL-terminated string; `out_handle` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_green_new_chart(
    partition: *const c_char,
    out_handle: *mut *mut BottcherGreen,
) -> BottcherStatus {
    guard(|| new_green(cstr(partition).and_then(germ_from_partition), out_handle))
}

/// Evaluator for a polynomial map given as PolyMap JSON.
///
/// # Safety
/// `json` is a NUL-terminated string; `out_handle` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_green_new_json(json: *const c_char, out_handle: *mut *mut BottcherGreen) -> BottcherStatus {
    guard(|| new_green(cstr(json).and_then(germ_from_json), out_handle))
}

/// # Safety
/// `h` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bottcher_green_free(h: *mut BottcherGreen) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of complex coordinates; 0 for a null handle.
///
/// # Safety
/// `h` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bottcher_green_dim(h: *const BottcherGreen) -> usize {
    h.as_ref().map_or(0, |g| g.inner.h().blocks().m())
}

/// G_F(v) = max_j G_j(v); −∞ at points whose orbit reaches the origin.
///
/// # Safety
/// `h` is a live handle; `re`, `im` hold `n` doubles; `out_g` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_green_eval(
    h: *const BottcherGreen,
    re: *const f64,
    im: *const f64,
    n: usize,
    out_g: *mut f64,
) -> BottcherStatus {
    guard(|| {
        let g = handle(h)?;
        let slot = out(out_g)?;
        let v = g.inner.evaluate(&complex_in(re, im, n)?)?;
        *slot = match v.g_f {
            GreenLevel::Finite(x) => x,
            GreenLevel::MinusInfinity => f64::NEG_INFINITY,
        };
        Ok(())
    })
}

/// Böttcher coordinate Φ_n built from block-radial fields.
pub struct BottcherCoordinateHandle {
    inner: BottcherCoordinate,
}

unsafe fn new_coordinate(
    germ: Result<AdaptedGerm, Fail>,
    n: usize,
    out_handle: *mut *mut BottcherCoordinateHandle,
) -> Result<(), Fail> {
    let slot = out(out_handle)?;
    let germ = germ?;
    let inner = local_bottcher(&germ, VectorField::block_fields(germ.blocks()), n)?;
    *slot = boxed(BottcherCoordinateHandle { inner });
    Ok(())
}

/// Level-`n` coordinate for the chart germ at a stratum.
///
/// # Safety
/// `partition` is a NUL-terminated string; `out_handle` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_coordinate_new_chart(
    partition: *const c_char,
    n: usize,
    out_handle: *mut *mut BottcherCoordinateHandle,
) -> BottcherStatus {
    guard(|| new_coordinate(cstr(partition).and_then(germ_from_partition), n, out_handle))
}

/// Level-`n` coordinate for a PolyMap JSON germ.
///
/// # Safety
/// `json` is a NUL-terminated string; `out_handle` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_coordinate_new_json(
    json: *const c_char,
    n: usize,
    out_handle: *mut *mut BottcherCoordinateHandle,
) -> BottcherStatus {
    guard(|| new_coordinate(cstr(json).and_then(germ_from_json), n, out_handle))
}

/// # Safety
/// `h` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bottcher_coordinate_free(h: *mut BottcherCoordinateHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of complex coordinates; 0 for a null handle.
///
/// # Safety
/// `h` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bottcher_coordinate_dim(h: *const BottcherCoordinateHandle) -> usize {
    h.as_ref().map_or(0, |c| c.inner.green().h().blocks().m())
}

/// Φ_n(v) on the local patch. `re`/`im` in, `out_re`/`out_im` out, all of length `n`.
///
/// # Safety
/// `h` is a live handle; all arrays hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn bottcher_coordinate_eval(
    h: *const BottcherCoordinateHandle,
    re: *const f64,
    im: *const f64,
    n: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> BottcherStatus {
    guard(|| {
        let c = handle(h)?;
        let w = c.inner.eval(&complex_in(re, im, n)?)?;
        let mut len = 0;
        complex_out(&w, out_re, out_im, n, &mut len)
    })
}

/// Φ(x) anywhere in the basin via the backward flow; `out_discrepancy`
/// (may be null) receives the relative gap between two flow times.
///
/// # Safety
/// `h` is a live handle; all arrays hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn bottcher_coordinate_extend(
    h: *const BottcherCoordinateHandle,
    re: *const f64,
    im: *const f64,
    n: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    out_discrepancy: *mut f64,
) -> BottcherStatus {
    guard(|| {
        let c = handle(h)?;
        let e = extend_bottcher(&c.inner, &complex_in(re, im, n)?)?;
        let mut len = 0;
        complex_out(&e.point(), out_re, out_im, n, &mut len)?;
        if let Some(d) = out_discrepancy.as_mut() {
            *d = e.discrepancy;
        }
        Ok(())
    })
}

/// Number of fixed points of the family off the diagonals for `m` points.
///
/// # Safety
/// `out_count` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_koch_fixed_point_count(m: usize, out_count: *mut usize) -> BottcherStatus {
    guard(|| {
        let slot = out(out_count)?;
        *slot = koch_fixed_points(m)?.count;
        Ok(())
    })
}

/// Eigenvalues of the derivative at a fixed point off the diagonals, sorted
/// by decreasing real part; `*out_len` receives m − 1.
///
/// # Safety
/// Arrays hold `cap` doubles; `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn bottcher_koch_spectrum(
    m: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> BottcherStatus {
    guard(|| {
        let census = koch_fixed_points(m)?;
        let Some(x) = census.points().into_iter().next() else {
            return fail(BottcherStatus::InvalidArgument, "no fixed point");
        };
        let ev: Vec<Complex64> = koch_spectrum(&x)?.eigenvalues.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        complex_out(&ev, out_re, out_im, cap, out_len)
    })
}
