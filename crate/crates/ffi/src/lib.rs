//! C interface to the sphereflow toolkit.
//!
//! Every function returns an [`SfStatus`]. On failure a message describing
//! the error is kept per thread and can be read with
//! [`sf_last_error_message`]. Objects are opaque handles created by
//! `*_new` functions and released by the matching `*_free`.
//!
//! Coefficient arrays are ordered like the basis modes (ascending
//! eigenvalue, lexicographic ties).

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use sphereflow::flow::{Flow, FlowConfig, Integrator};
use sphereflow::ground_state::{lambda_search, linear_ground_state, solve_by_flow, LambdaSearchOptions};
use sphereflow::operators::{energy, s_functional, OperatorParams};
use sphereflow::{DomainSpec, Error, Field, SpectralBasis};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    BlowUp = 4,
    NonConvergence = 5,
    NoPositiveSolution = 6,
    Io = 7,
    Panic = 8,
}

/// Time integrator selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SfIntegrator {
    Rk4 = 0,
    Heun = 1,
}

/// Ground-state solver selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SfMethod {
    /// Normalized flow from the first mode until stationary.
    Flow = 0,
    /// Sub/super-solution iteration with mass shooting (`p >= 3`), or the
    /// first eigenfunction when `p = 2`.
    SubSuper = 1,
}

/// One row of the energy ledger.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SfLedgerRow {
    pub t: f64,
    pub energy: f64,
    pub s: f64,
    pub grad_m_sq: f64,
    pub dissipation_integral: f64,
    pub sphere_drift: f64,
    pub min_value: f64,
}

/// Scalars describing a ground state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SfGroundState {
    pub lambda: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: u64,
}

/// Sine basis on an interval or rectangle.
pub struct SfBasis {
    inner: Arc<SpectralBasis>,
}

/// A running flow.
pub struct SfFlow {
    inner: Flow,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// The message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::BlowUp { .. } => SfStatus::BlowUp,
            Error::NonConvergence { .. } | Error::BracketNotFound(_) | Error::NonMonotoneIteration { .. } => {
                SfStatus::NonConvergence
            }
            Error::NoPositiveSolution { .. } => SfStatus::NoPositiveSolution,
            Error::Io(_) => SfStatus::Io,
            _ => SfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SfStatus::NullPointer, format!("{what} is NULL"))
}

/// Run `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SfStatus::Ok,
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
            set_last_error(format!("panic: {msg}"));
            SfStatus::Panic
        }
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn copy_out(values: &[f64], out: *mut f64, cap: usize) -> Result<(), Failure> {
    if cap < values.len() {
        return Err(Failure(
            SfStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

unsafe fn field_from(basis: &SfBasis, coeffs: *const f64, len: usize) -> Result<Field, Failure> {
    let c = slice(coeffs, len, "coefficients")?;
    Ok(Field::from_coefficients(&basis.inner, c.to_vec())?)
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| null(what))
}

/// Build the level-`level` basis on `[0, lengths[0]] (× [0, lengths[1]])`.
#[no_mangle]
pub unsafe extern "C" fn sf_basis_new(lengths: *const f64, dim: usize, level: u32, out: *mut *mut SfBasis) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let l = slice(lengths, dim, "lengths")?;
        let inner = Arc::new(SpectralBasis::new(DomainSpec::new(l, level)?)?);
        *out = Box::into_raw(Box::new(SfBasis { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_basis_free(basis: *mut SfBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Number of modes; 0 for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn sf_basis_len(basis: *const SfBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.inner.len())
}

/// Copy the eigenvalues into `out` (capacity `cap`).
#[no_mangle]
pub unsafe extern "C" fn sf_basis_eigenvalues(basis: *const SfBasis, out: *mut f64, cap: usize) -> SfStatus {
    guard(|| copy_out(handle(basis, "basis")?.inner.eigenvalues(), out, cap))
}

/// `ℰ(u) = ½‖∇u‖² + ‖u‖_p^p / p`.
#[no_mangle]
pub unsafe extern "C" fn sf_energy(
    basis: *const SfBasis,
    coeffs: *const f64,
    len: usize,
    p: f64,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let u = field_from(handle(basis, "basis")?, coeffs, len)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = energy(&u, p)?;
        Ok(())
    })
}

/// `𝒮(u) = ‖∇u‖² + ‖u‖_p^p`.
#[no_mangle]
pub unsafe extern "C" fn sf_s_functional(
    basis: *const SfBasis,
    coeffs: *const f64,
    len: usize,
    p: f64,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let u = field_from(handle(basis, "basis")?, coeffs, len)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s_functional(&u, p)?;
        Ok(())
    })
}

/// Start a flow from `coeffs` on `basis` at the basis level, with per-step
/// renormalization when `renormalize` is nonzero. `stationarity_tol = 0`
/// never stops early.
#[no_mangle]
pub unsafe extern "C" fn sf_flow_new(
    basis: *const SfBasis,
    coeffs: *const f64,
    len: usize,
    p: f64,
    dt: f64,
    integrator: SfIntegrator,
    renormalize: bool,
    stationarity_tol: f64,
    out: *mut *mut SfFlow,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let b = handle(basis, "basis")?;
        let u0 = field_from(b, coeffs, len)?;
        let integrator = match integrator {
            SfIntegrator::Rk4 => Integrator::Rk4,
            SfIntegrator::Heun => Integrator::Heun,
        };
        let cfg = FlowConfig::new(OperatorParams::new(p)?, b.inner.domain().level(), dt, dt)
            .with_integrator(integrator)
            .with_renormalize(renormalize)
            .with_stationarity_tol(stationarity_tol);
        let inner = Flow::new(&u0, &cfg)?;
        *out = Box::into_raw(Box::new(SfFlow { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_flow_free(flow: *mut SfFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// Integrate to time `t`. `stationary` (may be NULL) reports an early stop.
#[no_mangle]
pub unsafe extern "C" fn sf_flow_advance(flow: *mut SfFlow, t: f64, stationary: *mut bool) -> SfStatus {
    guard(|| {
        let f = flow.as_mut().ok_or_else(|| null("flow"))?;
        if !(t.is_finite() && t >= f.inner.state().t) {
            return Err(Failure(SfStatus::InvalidArgument, format!("target time {t} precedes the current time")));
        }
        let done = f.inner.advance_to(t)?;
        if let Some(s) = stationary.as_mut() {
            *s = done;
        }
        Ok(())
    })
}

/// Current time and coefficients; `t` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sf_flow_state(flow: *const SfFlow, out: *mut f64, cap: usize, t: *mut f64) -> SfStatus {
    guard(|| {
        let f = handle(flow, "flow")?;
        copy_out(f.inner.state().u.coefficients(), out, cap)?;
        if let Some(t) = t.as_mut() {
            *t = f.inner.state().t;
        }
        Ok(())
    })
}

/// Number of ledger rows; 0 for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn sf_flow_ledger_len(flow: *const SfFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.inner.ledger().len())
}

#[no_mangle]
pub unsafe extern "C" fn sf_flow_ledger_row(flow: *const SfFlow, index: usize, out: *mut SfLedgerRow) -> SfStatus {
    guard(|| {
        let f = handle(flow, "flow")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = f.inner.ledger().rows.get(index).ok_or_else(|| {
            Failure(SfStatus::InvalidArgument, format!("row {index} out of range ({} rows)", f.inner.ledger().len()))
        })?;
        *out = SfLedgerRow {
            t: r.t,
            energy: r.energy,
            s: r.s,
            grad_m_sq: r.grad_m_sq,
            dissipation_integral: r.dissipation_integral,
            sphere_drift: r.sphere_drift,
            min_value: r.min_value,
        };
        Ok(())
    })
}

/// Write the ledger as CSV to `path`.
#[no_mangle]
pub unsafe extern "C" fn sf_flow_write_ledger(flow: *const SfFlow, path: *const c_char) -> SfStatus {
    guard(|| {
        let f = handle(flow, "flow")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(SfStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let file = File::create(path).map_err(|e| Failure(SfStatus::Io, format!("{path}: {e}")))?;
        f.inner.ledger().write_csv(BufWriter::new(file), &[])?;
        Ok(())
    })
}

/// Positive unit-mass ground state on `basis`. The flow method integrates
/// with step `0.4 / λ_max` for at most time 50.
#[no_mangle]
pub unsafe extern "C" fn sf_ground_state(
    basis: *const SfBasis,
    p: f64,
    method: SfMethod,
    out: *mut f64,
    cap: usize,
    info: *mut SfGroundState,
) -> SfStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.inner;
        let result = match method {
            SfMethod::SubSuper if p == 2.0 => linear_ground_state(b)?,
            SfMethod::SubSuper => lambda_search(p, b, &LambdaSearchOptions::default())?.result,
            SfMethod::Flow => {
                let dt = 0.4 / b.lambda_max();
                let cfg = FlowConfig::new(OperatorParams::new(p)?, b.domain().level(), dt, 50.0)
                    .with_stationarity_tol(1e-10);
                solve_by_flow(&Field::mode(b, 0), &cfg)?
            }
        };
        copy_out(result.profile.coefficients(), out, cap)?;
        if let Some(info) = info.as_mut() {
            *info = SfGroundState {
                lambda: result.lambda,
                energy: result.energy,
                residual: result.residual,
                iterations: result.iterations as u64,
            };
        }
        Ok(())
    })
}
