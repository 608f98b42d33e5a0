//! C interface to the pluriform toolkit.
//!
//! Systems are opaque handles created by `pf_system_*` constructors and released
//! with `pf_system_free`. Every fallible call returns a `PfStatus`; on failure
//! `pf_last_error` describes the most recent error on the calling thread.
//! Arrays are caller-owned and hold exactly `n` doubles, `n` being the system
//! dimension. Strings returned through out-pointers must be released with
//! `pf_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pluriform::config::RunConfig;
use pluriform::hamiltonian::{hk_value, poisson_bracket};
use pluriform::mechsys::{
    make_harmonic, make_kepler, make_kepler_runge_lenz, make_toda, LagrangianSystem, PhasePoint, TangentPoint,
    TodaBoundary,
};
use pluriform::noether::noether_integral;
use pluriform::verify::{run_checks, Check};
use pluriform::Error;

/// Result codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Parameter = 3,
    Degeneracy = 4,
    Inversion = 5,
    Dimension = 6,
    Index = 7,
    Usage = 8,
    Io = 9,
    Panic = 10,
}

/// Boundary condition of the Toda chain.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfBoundary {
    Periodic = 0,
    OpenEnd = 1,
}

/// Opaque handle to a Lagrangian system with its symmetries.
pub struct PfSystem {
    inner: LagrangianSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PfStatus {
    match e {
        Error::Domain(_) => PfStatus::Domain,
        Error::Parameter(_) => PfStatus::Parameter,
        Error::Degeneracy(_) => PfStatus::Degeneracy,
        Error::Inversion(_) => PfStatus::Inversion,
        Error::Dimension(_) => PfStatus::Dimension,
        Error::Index(_) => PfStatus::Index,
        Error::Usage(_) => PfStatus::Usage,
        Error::Io(_) => PfStatus::Io,
    }
}

struct NullPointer(&'static str);

enum Failure {
    Null(NullPointer),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<NullPointer> for Failure {
    fn from(e: NullPointer) -> Self {
        Failure::Null(e)
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> PfStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(Failure::Null(NullPointer(what)))) => {
            set_error(&format!("null pointer passed as {what}"));
            PfStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            PfStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, NullPointer> {
    if p.is_null() {
        Err(NullPointer(what))
    } else {
        Ok(p)
    }
}

unsafe fn system<'a>(sys: *const PfSystem) -> Result<&'a LagrangianSystem, NullPointer> {
    Ok(&(*non_null(sys, "system")?).inner)
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], NullPointer> {
    Ok(std::slice::from_raw_parts(non_null(p, what)?, n))
}

fn check_n(sys: &LagrangianSystem, n: usize) -> Result<(), Error> {
    if n != sys.dim() {
        return Err(Error::Dimension(format!(
            "array length {n} does not match system dimension {}",
            sys.dim()
        )));
    }
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &'static str) -> Result<(), NullPointer> {
    if out.is_null() {
        return Err(NullPointer(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn tangent(sys: &LagrangianSystem, x: *const f64, xdot: *const f64, n: usize) -> Result<TangentPoint, Failure> {
    check_n(sys, n)?;
    Ok(TangentPoint::new(
        slice(x, n, "x")?.to_vec(),
        slice(xdot, n, "xdot")?.to_vec(),
    ))
}

unsafe fn phase(sys: &LagrangianSystem, x: *const f64, p: *const f64, n: usize) -> Result<PhasePoint, Failure> {
    check_n(sys, n)?;
    Ok(PhasePoint::new(slice(x, n, "x")?.to_vec(), slice(p, n, "p")?.to_vec()))
}

unsafe fn make(out: *mut *mut PfSystem, build: impl FnOnce() -> Result<LagrangianSystem, Error>) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(NullPointer("out").into());
        }
        out.write(ptr::null_mut());
        let sys = Box::new(PfSystem { inner: build()? });
        out.write(Box::into_raw(sys));
        Ok(())
    })
}

/// Kepler problem with one Runge–Lenz symmetry.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_system_kepler(alpha: f64, out: *mut *mut PfSystem) -> PfStatus {
    make(out, || make_kepler(alpha))
}

/// Kepler problem with all three Runge–Lenz symmetries.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_system_kepler_runge_lenz(alpha: f64, out: *mut *mut PfSystem) -> PfStatus {
    make(out, || make_kepler_runge_lenz(alpha))
}

/// Toda chain of `n ≥ 3` particles.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_system_toda(n: usize, boundary: PfBoundary, out: *mut *mut PfSystem) -> PfStatus {
    let b = match boundary {
        PfBoundary::Periodic => TodaBoundary::Periodic,
        PfBoundary::OpenEnd => TodaBoundary::OpenEnd,
    };
    make(out, || make_toda(n, b))
}

/// One-dimensional harmonic oscillator with energy symmetry.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_system_harmonic(omega: f64, out: *mut *mut PfSystem) -> PfStatus {
    make(out, || {
        if !omega.is_finite() {
            return Err(Error::Parameter(format!("omega must be finite, got {omega}")));
        }
        Ok(make_harmonic(omega))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sys` must be null or a handle from a `pf_system_*` constructor not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf_system_free(sys: *mut PfSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Configuration dimension, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pf_system_dim(sys: *const PfSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.dim())
}

/// Number of symmetries `m`, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pf_system_symmetry_count(sys: *const PfSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.symmetry_count())
}

/// `L(x, ẋ)`.
///
/// # Safety
/// `x` and `xdot` must point to `n` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn pf_lagrangian(
    sys: *const PfSystem,
    x: *const f64,
    xdot: *const f64,
    n: usize,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let s = system(sys)?;
        let v = s.lagrangian(&tangent(s, x, xdot, n)?)?;
        Ok(write_out(out, v, "out")?)
    })
}

/// Acceleration `ẍ` solving the Euler–Lagrange equations; writes `n` doubles.
///
/// # Safety
/// `x`, `xdot` and `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pf_accel(
    sys: *const PfSystem,
    x: *const f64,
    xdot: *const f64,
    n: usize,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let s = system(sys)?;
        let a = s.accel(&tangent(s, x, xdot, n)?)?;
        if out.is_null() {
            return Err(NullPointer("out").into());
        }
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&a);
        Ok(())
    })
}

/// Noether integral `J_k(x, ẋ)` for `1 ≤ k ≤ m`.
///
/// # Safety
/// `x` and `xdot` must point to `n` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn pf_noether_integral(
    sys: *const PfSystem,
    k: usize,
    x: *const f64,
    xdot: *const f64,
    n: usize,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let s = system(sys)?;
        let v = noether_integral(s, k, &tangent(s, x, xdot, n)?)?;
        Ok(write_out(out, v, "out")?)
    })
}

/// `H_k(x, p)`; `k = 0` gives the Hamiltonian `H`.
///
/// # Safety
/// `x` and `p` must point to `n` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn pf_hamiltonian(
    sys: *const PfSystem,
    k: usize,
    x: *const f64,
    p: *const f64,
    n: usize,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let s = system(sys)?;
        let v = hk_value(s, k, &phase(s, x, p, n)?)?;
        Ok(write_out(out, v, "out")?)
    })
}

/// Canonical bracket `{H_k, H_l}(x, p)`; index 0 is `H`.
///
/// # Safety
/// `x` and `p` must point to `n` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn pf_poisson_bracket(
    sys: *const PfSystem,
    k: usize,
    l: usize,
    x: *const f64,
    p: *const f64,
    n: usize,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let s = system(sys)?;
        let v = poisson_bracket(s, k, l, &phase(s, x, p, n)?)?;
        Ok(write_out(out, v, "out")?)
    })
}

/// Runs verification checks and returns the JSON report through `out_json`.
/// `config_json` follows the run-configuration schema (null means defaults);
/// `checks` is a comma-separated list or `"all"` (null means all).
/// A completed run returns `Ok` even when checks fail; inspect `all_pass`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out_json` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_verify_json(
    config_json: *const c_char,
    checks: *const c_char,
    out_json: *mut *mut c_char,
) -> PfStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(NullPointer("out_json").into());
        }
        out_json.write(ptr::null_mut());
        let text = |p: *const c_char, what: &str| -> Result<Option<String>, Error> {
            if p.is_null() {
                return Ok(None);
            }
            CStr::from_ptr(p)
                .to_str()
                .map(|s| Some(s.to_string()))
                .map_err(|_| Error::Usage(format!("{what} is not valid UTF-8")))
        };
        let cfg = match text(config_json, "config")? {
            Some(t) => RunConfig::from_json(&t)?,
            None => RunConfig::default(),
        };
        let list = Check::parse_list(&text(checks, "checks")?.unwrap_or_else(|| "all".into()))?;
        let report = run_checks(&cfg, &list)?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        let c = CString::new(json).map_err(|_| Error::Usage("report contains NUL".into()))?;
        out_json.write(c.into_raw());
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
