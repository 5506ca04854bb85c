//! C interface to `mvrbm`.
//!
//! Models are opaque handles created by [`mvrbm_model_load`] and released
//! with [`mvrbm_model_free`]. Every fallible call returns an
//! [`MvrbmStatus`]; on failure [`mvrbm_last_error_message`] describes the
//! error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mvrbm::io::dataset::parse_record;
use mvrbm::io::text::{read_model, Model};
use mvrbm::training::symmetric_kl;
use mvrbm::Error;

/// Opaque model handle.
pub struct MvrbmModel {
    inner: Model,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvrbmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Version = 5,
    Schema = 6,
    Validation = 7,
    Usage = 8,
    Unsupported = 9,
    BufferTooSmall = 10,
    Internal = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MvrbmStatus, msg: impl Into<String>) -> MvrbmStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> MvrbmStatus {
    let status = match &e {
        Error::Io(_) => MvrbmStatus::Io,
        Error::Parse { .. } => MvrbmStatus::Parse,
        Error::Version { .. } => MvrbmStatus::Version,
        Error::Schema(_) => MvrbmStatus::Schema,
        Error::Validation(_) => MvrbmStatus::Validation,
        Error::Usage(_) | Error::Config(_) => MvrbmStatus::Usage,
        Error::Unsupported(_) => MvrbmStatus::Unsupported,
        Error::Diverged { .. } | Error::Numeric(_) => MvrbmStatus::Internal,
    };
    fail(status, e.to_string())
}

/// Run `f`, turning panics into `Internal`.
fn guard(f: impl FnOnce() -> MvrbmStatus) -> MvrbmStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(MvrbmStatus::Internal, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, MvrbmStatus> {
    if p.is_null() {
        return Err(fail(MvrbmStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MvrbmStatus::InvalidUtf8, "string argument is not valid UTF-8"))
}

/// Load a model file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvrbm_model_load(path: *const c_char, out: *mut *mut MvrbmModel) -> MvrbmStatus {
    guard(|| {
        if out.is_null() {
            return fail(MvrbmStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match read_model(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MvrbmModel { inner }));
                MvrbmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a handle from [`mvrbm_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mvrbm_model_free(model: *mut MvrbmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of hidden units, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvrbm_model_num_hidden(model: *const MvrbmModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.params.num_hidden())
}

/// Hidden posteriors of one record given as a JSON object (the dataset line
/// format). Writes `num_hidden` values to `out`.
///
/// # Safety
/// `model` must be a live handle, `record_json` a nul-terminated string and
/// `out` valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn mvrbm_project(
    model: *const MvrbmModel,
    record_json: *const c_char,
    out: *mut f64,
    out_len: usize,
) -> MvrbmStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(MvrbmStatus::NullPointer, "null model handle");
        };
        if out.is_null() {
            return fail(MvrbmStatus::NullPointer, "null output buffer");
        }
        let json = match str_arg(record_json) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let k = m.inner.params.num_hidden();
        if out_len < k {
            return fail(MvrbmStatus::BufferTooSmall, format!("output buffer holds {out_len} values, model has {k}"));
        }
        let schema = &m.inner.schema;
        let v = match parse_record(schema, 1, json).and_then(|(r, _)| schema.encode(&r)) {
            Ok(v) => v,
            Err(e) => return from_error(e),
        };
        let post = mvrbm::hidden_conditional(schema, &m.inner.params, &v);
        std::slice::from_raw_parts_mut(out, k).copy_from_slice(post.as_slice().expect("contiguous"));
        MvrbmStatus::Ok
    })
}

/// Symmetric KL distance between two posterior vectors of length `len`.
///
/// # Safety
/// `p` and `q` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn mvrbm_symmetric_kl(p: *const f64, q: *const f64, len: usize, out: *mut f64) -> MvrbmStatus {
    guard(|| {
        if p.is_null() || q.is_null() || out.is_null() {
            return fail(MvrbmStatus::NullPointer, "null pointer argument");
        }
        let p = ndarray::ArrayView1::from(std::slice::from_raw_parts(p, len));
        let q = ndarray::ArrayView1::from(std::slice::from_raw_parts(q, len));
        match symmetric_kl(p, q) {
            Ok(d) => {
                *out = d;
                MvrbmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mvrbm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
