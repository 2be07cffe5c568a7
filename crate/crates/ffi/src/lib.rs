//! C ABI over fk-lab. Objects are opaque handles released with the
//! matching `*_free`; every call returns an `FkStatus` and writes results
//! through out-pointers. The message of the last failure on the calling
//! thread is available from `fk_last_error`.
//!
//! # Safety
//!
//! Handles must come from the matching constructor and be freed once.
//! Pointer arguments must be null or valid for the stated length; strings
//! must be NUL-terminated.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use fk_lab::action::{minimizer_set, periodic_action, MultiStartOptions};
use fk_lab::birkhoff::{extended_orbit, find_gaps};
use fk_lab::lattice::{is_birkhoff, PeriodicConfig};
use fk_lab::perturbation::{c_k, make_bump, BumpSpec};
use fk_lab::potentials::{builtin, LocalPotentialFamily};
use fk_lab::Error;

#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unsupported = 3,
    Undecidable = 4,
    Budget = 5,
    Io = 6,
    Parse = 7,
    BufferTooSmall = 8,
    NotFound = 9,
    Panic = 10,
}

pub struct FkFamily(LocalPotentialFamily);
pub struct FkConfig(PeriodicConfig);
pub struct FkBump(BumpSpec);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> FkStatus {
    match e {
        Error::InvalidArgument(_) | Error::Window { .. } | Error::NotCoprime(_) | Error::UnknownFamily(_) => {
            FkStatus::InvalidArgument
        }
        Error::Unsupported(_) => FkStatus::Unsupported,
        Error::Undecidable(_) => FkStatus::Undecidable,
        Error::Budget(_) => FkStatus::Budget,
        Error::Io { .. } => FkStatus::Io,
        Error::Parse(_) => FkStatus::Parse,
    }
}

fn guard(f: impl FnOnce() -> Result<(), FkStatus>) -> FkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside fk-lab");
            FkStatus::Panic
        }
    }
}

fn lib<T>(r: fk_lab::Result<T>) -> Result<T, FkStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn nonnull<T>(p: *const T, what: &str) -> Result<(), FkStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        Err(FkStatus::NullPointer)
    } else {
        Ok(())
    }
}

fn boxed<T>(out: *mut *mut T, v: T) {
    unsafe { *out = Box::into_raw(Box::new(v)) };
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full message length, 0 when there is none.
#[no_mangle]
pub unsafe extern "C" fn fk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Built-in family `fk_nn` or `fk_nnn` with kick strength `lambda`.
#[no_mangle]
pub unsafe extern "C" fn fk_family_new(name: *const c_char, lambda: f64, out: *mut *mut FkFamily) -> FkStatus {
    guard(|| {
        nonnull(name, "name")?;
        nonnull(out, "out")?;
        let name = CStr::from_ptr(name).to_str().map_err(|_| {
            set_error("family name is not UTF-8");
            FkStatus::InvalidArgument
        })?;
        let f = lib(builtin(name, lambda))?;
        boxed(out, FkFamily(f));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fk_family_free(f: *mut FkFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// New family S_j + φ(x_j); the inputs stay owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn fk_family_perturb(f: *const FkFamily, b: *const FkBump, out: *mut *mut FkFamily) -> FkStatus {
    guard(|| {
        nonnull(f, "family")?;
        nonnull(b, "bump")?;
        nonnull(out, "out")?;
        let g = (*f).0.with_onsite(Arc::new((*b).0.clone()));
        boxed(out, FkFamily(g));
        Ok(())
    })
}

/// Lowest-action Birkhoff (p,q)-minimizer over `n_starts` seeded starts.
#[no_mangle]
pub unsafe extern "C" fn fk_minimize(
    f: *const FkFamily,
    p: usize,
    q: i64,
    n_starts: usize,
    seed: u64,
    out: *mut *mut FkConfig,
) -> FkStatus {
    guard(|| {
        nonnull(f, "family")?;
        nonnull(out, "out")?;
        let set = lib(minimizer_set(&(*f).0, p, q, &MultiStartOptions::new(n_starts, seed)))?;
        let m = set
            .members
            .iter()
            .find(|m| is_birkhoff(&m.result.config, 1e-9).birkhoff)
            .ok_or_else(|| {
                set_error(format!("no converged Birkhoff ({p},{q})-minimizer"));
                FkStatus::NotFound
            })?;
        boxed(out, FkConfig(m.result.config.clone()));
        Ok(())
    })
}

/// Configuration in X_{p,q} from p values x_1..x_p.
#[no_mangle]
pub unsafe extern "C" fn fk_config_new(values: *const f64, p: usize, q: i64, out: *mut *mut FkConfig) -> FkStatus {
    guard(|| {
        nonnull(values, "values")?;
        nonnull(out, "out")?;
        let v = std::slice::from_raw_parts(values, p).to_vec();
        let x = lib(PeriodicConfig::new(p, q, v))?;
        boxed(out, FkConfig(x));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fk_config_free(x: *mut FkConfig) {
    if !x.is_null() {
        drop(Box::from_raw(x));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fk_config_period(x: *const FkConfig, p: *mut usize, q: *mut i64) -> FkStatus {
    guard(|| {
        nonnull(x, "config")?;
        nonnull(p, "p")?;
        nonnull(q, "q")?;
        *p = (*x).0.p;
        *q = (*x).0.q;
        Ok(())
    })
}

/// Copies x_1..x_p into `buf`, which must hold p values.
#[no_mangle]
pub unsafe extern "C" fn fk_config_values(x: *const FkConfig, buf: *mut f64, len: usize) -> FkStatus {
    guard(|| {
        nonnull(x, "config")?;
        nonnull(buf, "buf")?;
        let v = &(*x).0.values;
        if len < v.len() {
            set_error(format!("buffer holds {len} values, need {}", v.len()));
            return Err(FkStatus::BufferTooSmall);
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fk_periodic_action(f: *const FkFamily, x: *const FkConfig, out: *mut f64) -> FkStatus {
    guard(|| {
        nonnull(f, "family")?;
        nonnull(x, "config")?;
        nonnull(out, "out")?;
        *out = periodic_action(&(*f).0, &(*x).0);
        Ok(())
    })
}

/// Largest gap (lo, hi) of the extended orbit; hi may exceed 1 for the
/// gap that wraps around.
#[no_mangle]
pub unsafe extern "C" fn fk_config_max_gap(x: *const FkConfig, lo: *mut f64, hi: *mut f64) -> FkStatus {
    guard(|| {
        nonnull(x, "config")?;
        nonnull(lo, "lo")?;
        nonnull(hi, "hi")?;
        let g = find_gaps(&extended_orbit(&(*x).0));
        let g = g.first().ok_or_else(|| {
            set_error("orbit has no gap");
            FkStatus::NotFound
        })?;
        *lo = g.lo;
        *hi = g.hi;
        Ok(())
    })
}

/// Bump of size ε supported on (ξ₋, ξ₊) mod 1.
#[no_mangle]
pub unsafe extern "C" fn fk_bump_new(xi_minus: f64, xi_plus: f64, eps: f64, k: u32, out: *mut *mut FkBump) -> FkStatus {
    guard(|| {
        nonnull(out, "out")?;
        let b = lib(make_bump(xi_minus, xi_plus, eps, k as usize))?;
        boxed(out, FkBump(b));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fk_bump_free(b: *mut FkBump) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// n-th derivative of φ at ξ.
#[no_mangle]
pub unsafe extern "C" fn fk_bump_eval(b: *const FkBump, xi: f64, n: u32, out: *mut f64) -> FkStatus {
    guard(|| {
        nonnull(b, "bump")?;
        nonnull(out, "out")?;
        *out = (*b).0.derivs(xi, n as usize)[n as usize];
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fk_bump_plateau_value(b: *const FkBump, out: *mut f64) -> FkStatus {
    guard(|| {
        nonnull(b, "bump")?;
        nonnull(out, "out")?;
        *out = (*b).0.plateau_value();
        Ok(())
    })
}

/// The certified bump constant C_k.
#[no_mangle]
pub unsafe extern "C" fn fk_bump_constant(k: u32, out: *mut f64) -> FkStatus {
    guard(|| {
        nonnull(out, "out")?;
        if k < 2 {
            set_error("k must be >= 2");
            return Err(FkStatus::InvalidArgument);
        }
        *out = c_k(k as usize);
        Ok(())
    })
}
