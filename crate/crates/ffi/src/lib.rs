// SPDX-License-Identifier: Apache-2.0

//! C ABI over the core library.
//!
//! Networks and specifications are opaque heap handles released with their
//! `_free` function. Every fallible call returns an [`NnvStatus`]; on failure
//! `nnv_last_error_message` describes the error for the calling thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nnvfuzz::network::{load_network, Network};
use nnvfuzz::spec::{load_spec, robustness_spec, Specification, TestCase};
use nnvfuzz::verifier::{Verdict, VerifierHandle};
use nnvfuzz::Error;

/// Opaque network handle.
pub struct NnvNetwork(Network);

/// Opaque specification handle.
pub struct NnvSpec(Specification);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnvStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    Shape = 5,
    NonFinite = 6,
    InvalidArgument = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnvVerdict {
    Holds = 0,
    Violated = 1,
    Unknown = 2,
    Timeout = 3,
    Crash = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnvVerifierKind {
    Ibp = 0,
    Bab = 1,
    Sampler = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("no interior nul"));
}

fn fail(status: NnvStatus, msg: impl Into<String>) -> NnvStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> NnvStatus {
    let status = match &e {
        Error::Parse { .. } => NnvStatus::Parse,
        Error::Io { .. } => NnvStatus::Io,
        Error::DimensionMismatch { .. } | Error::Shape(_) | Error::EmptyVector => NnvStatus::Shape,
        Error::NonFiniteValue { .. } => NnvStatus::NonFinite,
        _ => NnvStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(body: impl FnOnce() -> NnvStatus) -> NnvStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(NnvStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, NnvStatus> {
    if s.is_null() {
        return Err(fail(NnvStatus::NullArgument, "null string argument"));
    }
    // SAFETY: caller guarantees NUL termination
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| fail(NnvStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// # Safety
/// `p` is null or points to `n` readable doubles.
unsafe fn slice_arg<'a>(p: *const f64, n: usize) -> Result<&'a [f64], NnvStatus> {
    if p.is_null() {
        return Err(fail(NnvStatus::NullArgument, "null array argument"));
    }
    // SAFETY: caller guarantees `n` readable elements
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

fn store<T>(out: *mut *mut T, value: T) -> NnvStatus {
    // SAFETY: `out` was checked non-null by the caller of `store`
    unsafe { *out = Box::into_raw(Box::new(value)) };
    NnvStatus::Ok
}

/// Message for the last failed call on this thread. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn nnv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn nnv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_from_json(json: *const c_char, out: *mut *mut NnvNetwork) -> NnvStatus {
    guard(|| {
        if out.is_null() {
            return fail(NnvStatus::NullArgument, "null output pointer");
        }
        // SAFETY: forwarded caller contract
        let text = match unsafe { str_arg(json) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Network::from_json(text) {
            Ok(net) => store(out, NnvNetwork(net)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_load(path: *const c_char, out: *mut *mut NnvNetwork) -> NnvStatus {
    guard(|| {
        if out.is_null() {
            return fail(NnvStatus::NullArgument, "null output pointer");
        }
        // SAFETY: forwarded caller contract
        let path = match unsafe { str_arg(path) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_network(path) {
            Ok(net) => store(out, NnvNetwork(net)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `net` is null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_free(net: *mut NnvNetwork) {
    if !net.is_null() {
        // SAFETY: handle was produced by Box::into_raw
        drop(unsafe { Box::from_raw(net) });
    }
}

/// Zero for a null handle.
///
/// # Safety
/// `net` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_input_dim(net: *const NnvNetwork) -> usize {
    // SAFETY: caller contract
    unsafe { net.as_ref() }.map_or(0, |n| n.0.input_dim())
}

/// Zero for a null handle.
///
/// # Safety
/// `net` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_output_dim(net: *const NnvNetwork) -> usize {
    // SAFETY: caller contract
    unsafe { net.as_ref() }.map_or(0, |n| n.0.output_dim())
}

/// Writes `output_dim` values to `y`; `y_len` must be at least that.
///
/// # Safety
/// `x` holds `x_len` doubles; `y` has room for `y_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_forward(
    net: *const NnvNetwork,
    x: *const f64,
    x_len: usize,
    y: *mut f64,
    y_len: usize,
) -> NnvStatus {
    guard(|| {
        // SAFETY: caller contract
        let Some(net) = (unsafe { net.as_ref() }) else {
            return fail(NnvStatus::NullArgument, "null network");
        };
        if y.is_null() {
            return fail(NnvStatus::NullArgument, "null output buffer");
        }
        // SAFETY: caller contract
        let x = match unsafe { slice_arg(x, x_len) } {
            Ok(x) => x,
            Err(s) => return s,
        };
        if y_len < net.0.output_dim() {
            return fail(NnvStatus::BufferTooSmall, format!("output buffer needs {} values", net.0.output_dim()));
        }
        match net.0.forward(x) {
            Ok(out) => {
                // SAFETY: y has room for y_len >= out.len() doubles
                unsafe { ptr::copy_nonoverlapping(out.as_ptr(), y, out.len()) };
                NnvStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_spec_from_json(json: *const c_char, out: *mut *mut NnvSpec) -> NnvStatus {
    guard(|| {
        if out.is_null() {
            return fail(NnvStatus::NullArgument, "null output pointer");
        }
        // SAFETY: forwarded caller contract
        let text = match unsafe { str_arg(json) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Specification::from_json(text) {
            Ok(spec) => store(out, NnvSpec(spec)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_spec_load(path: *const c_char, out: *mut *mut NnvSpec) -> NnvStatus {
    guard(|| {
        if out.is_null() {
            return fail(NnvStatus::NullArgument, "null output pointer");
        }
        // SAFETY: forwarded caller contract
        let path = match unsafe { str_arg(path) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_spec(path) {
            Ok(spec) => store(out, NnvSpec(spec)),
            Err(e) => from_error(e),
        }
    })
}

/// Linf robustness: inputs within `epsilon` of `center` keep `label`.
///
/// # Safety
/// `center` holds `n` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_spec_robustness(
    center: *const f64,
    n: usize,
    epsilon: f64,
    label: usize,
    out: *mut *mut NnvSpec,
) -> NnvStatus {
    guard(|| {
        if out.is_null() {
            return fail(NnvStatus::NullArgument, "null output pointer");
        }
        // SAFETY: caller contract
        let center = match unsafe { slice_arg(center, n) } {
            Ok(c) => c,
            Err(s) => return s,
        };
        match robustness_spec(center, epsilon, label) {
            Ok(spec) => store(out, NnvSpec(spec)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `spec` is null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nnv_spec_free(spec: *mut NnvSpec) {
    if !spec.is_null() {
        // SAFETY: handle was produced by Box::into_raw
        drop(unsafe { Box::from_raw(spec) });
    }
}

fn test_case(net: *const NnvNetwork, spec: *const NnvSpec) -> Result<TestCase, NnvStatus> {
    // SAFETY: handles are null or live per the public contracts
    let (Some(net), Some(spec)) = (unsafe { net.as_ref() }, unsafe { spec.as_ref() }) else {
        return Err(fail(NnvStatus::NullArgument, "null handle"));
    };
    TestCase::seed("ffi", net.0.clone(), spec.0.clone()).map_err(from_error)
}

/// Sets `*out` when `x` satisfies the precondition and the network output
/// violates the postcondition.
///
/// # Safety
/// Handles are live; `x` holds `x_len` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_violates(
    net: *const NnvNetwork,
    spec: *const NnvSpec,
    x: *const f64,
    x_len: usize,
    out: *mut bool,
) -> NnvStatus {
    guard(|| {
        if out.is_null() {
            return fail(NnvStatus::NullArgument, "null output pointer");
        }
        let tc = match test_case(net, spec) {
            Ok(tc) => tc,
            Err(s) => return s,
        };
        // SAFETY: caller contract
        let x = match unsafe { slice_arg(x, x_len) } {
            Ok(x) => x,
            Err(s) => return s,
        };
        match tc.violates(x) {
            Ok(v) => {
                // SAFETY: checked non-null
                unsafe { *out = v };
                NnvStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs one in-tree verifier. On Violated the counterexample is copied to
/// `cex` when `cex_len` is at least the input dimension; `cex` may be null
/// to skip the copy.
///
/// # Safety
/// Handles are live; `verdict` is writable; `cex` is null or has room for
/// `cex_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nnv_verify(
    net: *const NnvNetwork,
    spec: *const NnvSpec,
    kind: NnvVerifierKind,
    timeout_ms: u64,
    verdict: *mut NnvVerdict,
    cex: *mut f64,
    cex_len: usize,
) -> NnvStatus {
    guard(|| {
        if verdict.is_null() {
            return fail(NnvStatus::NullArgument, "null verdict pointer");
        }
        let tc = match test_case(net, spec) {
            Ok(tc) => tc,
            Err(s) => return s,
        };
        let handle = match kind {
            NnvVerifierKind::Ibp => VerifierHandle::ibp("ibp"),
            NnvVerifierKind::Bab => VerifierHandle::bab("bab"),
            NnvVerifierKind::Sampler => VerifierHandle::sampler("sampler"),
        }
        .with_timeout_ms(timeout_ms);
        let v = handle.verify(&tc);
        let code = match &v {
            Verdict::Holds => NnvVerdict::Holds,
            Verdict::Violated { .. } => NnvVerdict::Violated,
            Verdict::Unknown { .. } => NnvVerdict::Unknown,
            Verdict::Timeout => NnvVerdict::Timeout,
            Verdict::Crash { .. } => NnvVerdict::Crash,
        };
        // SAFETY: checked non-null
        unsafe { *verdict = code };
        if let Verdict::Violated { cex: x } = &v {
            if !cex.is_null() {
                if cex_len < x.len() {
                    return fail(NnvStatus::BufferTooSmall, format!("counterexample needs {} values", x.len()));
                }
                // SAFETY: cex has room for cex_len >= x.len() doubles
                unsafe { ptr::copy_nonoverlapping(x.as_ptr(), cex, x.len()) };
            }
        }
        NnvStatus::Ok
    })
}
