//! C ABI for the kscolour toolkit.
//!
//! Conventions: every fallible function returns a [`KscStatus`] and writes
//! results through out-pointers; handles are opaque and freed with their
//! `_free` function; `kscolour_last_error_message` returns a thread-local
//! description of the most recent failure. Strings are NUL-terminated UTF-8
//! owned by the library unless documented otherwise.

use kscolour::colouring::{Colour, Colouring, PolarCapColouring, Ray};
use kscolour::deficit::DeficitProblem;
use kscolour::rational::{meyer_colour, ParityClass, RationalRay};
use kscolour::sets::{decide_colourability, Colourability, RaySet};
use kscolour::sphere::RandomStream;
use kscolour::UnitVec;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    NotOnRationalSphere = 4,
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &kscolour::KsError) -> KscStatus {
    use kscolour::KsError::*;
    set_error(&err.to_string());
    match err {
        Domain(_) => KscStatus::InvalidArgument,
        NotOnRationalSphere { .. } => KscStatus::NotOnRationalSphere,
        Parse(_) | Io(_) | Json(_) => KscStatus::ParseError,
        Inconsistency(_) | Internal(_) => KscStatus::InternalError,
    }
}

/// An opaque ray-set handle.
pub struct KscRaySet {
    inner: RaySet,
}

/// Version of the underlying toolkit, as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kscolour_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent error on this thread. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kscolour_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses a ray set from its JSON representation.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kscolour_ray_set_from_json(
    json: *const c_char,
    out: *mut *mut KscRaySet,
) -> KscStatus {
    if json.is_null() || out.is_null() {
        set_error("null pointer argument");
        return KscStatus::NullPointer;
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("json argument is not valid UTF-8");
            return KscStatus::ParseError;
        }
    };
    match RaySet::from_json(text) {
        Ok(set) => {
            *out = Box::into_raw(Box::new(KscRaySet { inner: set }));
            KscStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// The bundled 31-direction Conway-Kochen set.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kscolour_ray_set_conway_kochen(out: *mut *mut KscRaySet) -> KscStatus {
    if out.is_null() {
        set_error("null pointer argument");
        return KscStatus::NullPointer;
    }
    *out = Box::into_raw(Box::new(KscRaySet {
        inner: kscolour::data::conway_kochen(),
    }));
    KscStatus::Ok
}

/// Frees a ray-set handle; a null handle is a no-op.
///
/// # Safety
/// `set` must have come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn kscolour_ray_set_free(set: *mut KscRaySet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of rays in the set.
///
/// # Safety
/// Valid pointers only.
#[no_mangle]
pub unsafe extern "C" fn kscolour_ray_set_len(
    set: *const KscRaySet,
    out_len: *mut usize,
) -> KscStatus {
    if set.is_null() || out_len.is_null() {
        set_error("null pointer argument");
        return KscStatus::NullPointer;
    }
    *out_len = (*set).inner.len();
    KscStatus::Ok
}

/// Minimum angle between distinct ray lines, in radians.
///
/// # Safety
/// Valid pointers only.
#[no_mangle]
pub unsafe extern "C" fn kscolour_ray_set_min_angle(
    set: *const KscRaySet,
    out_radians: *mut f64,
) -> KscStatus {
    if set.is_null() || out_radians.is_null() {
        set_error("null pointer argument");
        return KscStatus::NullPointer;
    }
    match (*set).inner.min_angle() {
        Ok(a) => {
            *out_radians = a;
            KscStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Complete-search colourability: writes 1 when colourable, 0 when not.
///
/// # Safety
/// Valid pointers only.
#[no_mangle]
pub unsafe extern "C" fn kscolour_ray_set_decide(
    set: *const KscRaySet,
    out_colourable: *mut u8,
) -> KscStatus {
    if set.is_null() || out_colourable.is_null() {
        set_error("null pointer argument");
        return KscStatus::NullPointer;
    }
    let result = decide_colourability(&(*set).inner.build_graph());
    *out_colourable = u8::from(result.status == Colourability::Colourable);
    KscStatus::Ok
}

/// Colour (0 or 1) of the integer direction under the rational-sphere parity
/// colouring with the Z class mapped to 0. Fails with
/// `NotOnRationalSphere` when the squared norm is not a perfect square.
///
/// # Safety
/// `out_colour` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kscolour_meyer_colour(
    x: i64,
    y: i64,
    z: i64,
    out_colour: *mut u8,
) -> KscStatus {
    if out_colour.is_null() {
        set_error("null pointer argument");
        return KscStatus::NullPointer;
    }
    match RationalRay::from_i64(x, y, z) {
        Ok(ray) => {
            *out_colour = meyer_colour(&ray, ParityClass::Z).value();
            KscStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Polar-cap colouring query: writes 0, 1 or -1 (undefined band).
///
/// # Safety
/// `out_colour` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kscolour_polar_cap_query(
    x: f64,
    y: f64,
    z: f64,
    out_colour: *mut i8,
) -> KscStatus {
    if out_colour.is_null() {
        set_error("null pointer argument");
        return KscStatus::NullPointer;
    }
    let v = match UnitVec::new(x, y, z) {
        Ok(v) => v,
        Err(e) => return status_of(&e),
    };
    *out_colour = match PolarCapColouring.query(&Ray::Real(v)) {
        Some(Colour::Zero) => 0,
        Some(Colour::One) => 1,
        None => -1,
    };
    KscStatus::Ok
}

/// Monte Carlo estimate of the integral of the minimum rotation-map Jacobian
/// for the set, with its standard error. `samples` must be at least 10^4;
/// identical `(samples, seed)` reproduce identical estimates.
///
/// # Safety
/// Valid pointers only.
#[no_mangle]
pub unsafe extern "C" fn kscolour_deficit_estimate(
    set: *const KscRaySet,
    samples: u64,
    seed: u64,
    out_estimate: *mut f64,
    out_std_error: *mut f64,
) -> KscStatus {
    if set.is_null() || out_estimate.is_null() || out_std_error.is_null() {
        set_error("null pointer argument");
        return KscStatus::NullPointer;
    }
    let problem = match DeficitProblem::new(&(*set).inner) {
        Ok(p) => p,
        Err(e) => return status_of(&e),
    };
    let stream = RandomStream::new(seed);
    match problem.estimate(samples as usize, &stream) {
        Ok(report) => {
            *out_estimate = report.estimate;
            *out_std_error = report.std_error;
            KscStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}
