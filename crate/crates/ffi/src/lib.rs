//! C ABI over the `twistlab` library.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`TwistlabStatus`]; results go through out-pointers.
//! * Objects are opaque handles created by `*_new`/`*_sample`/`*_covariance` calls and
//!   released with the matching `*_free`. Passing NULL to a `*_free` is a no-op.
//! * On failure a message is stored per thread; read it with
//!   [`twistlab_last_error_message`].
//! * Panics never cross the boundary; they surface as `TWISTLAB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use twistlab::cli::{emit, run_experiment, OutputFormat, RunConfig};
use twistlab::correlators::{order_disorder_two_point, RegionCorrelations, TwistKind};
use twistlab::edcore::{Boundary, ChainModel};
use twistlab::entanglement::renyi_from_gaussian;
use twistlab::formfactor::{ff_series_two_point, FormFactor};
use twistlab::gaussian::{
    chain_ground_covariance, number_correlation_matrix, thermal_covariance, BdGForm, FermionBoundary,
    MajoranaCovariance,
};
use twistlab::toda::{sample_toda_thermal, stretch_fcs_estimate, stretch_fcs_oracle, TodaEnsemble};
use twistlab::Error;

/// Outcome of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Capacity = 3,
    Pole = 4,
    Quadrature = 5,
    Refinement = 6,
    NoSaturation = 7,
    Divergence = 8,
    Numerical = 9,
    Config = 10,
    Io = 11,
    /// A run finished but at least one invariant check failed.
    InvariantFailed = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistlabFamily {
    TransverseIsing = 0,
    Xx = 1,
    Heisenberg = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistlabBoundary {
    Open = 0,
    Periodic = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistlabTwistKind {
    /// `<σ¹_x σ¹_x'>`.
    Order = 0,
    /// `<∏_{x≤y<x'} σ³_y>`.
    Disorder = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistlabFormat {
    Csv = 0,
    Json = 1,
}

/// A spin-chain Hamiltonian.
pub struct TwistlabChain(ChainModel);

/// Majorana covariance of a Gaussian state.
pub struct TwistlabCovariance(MajoranaCovariance);

/// Thermal samples of Toda stretches.
pub struct TwistlabTodaEnsemble(TodaEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TwistlabStatus {
    match e {
        Error::Capacity(_) => TwistlabStatus::Capacity,
        Error::Index(_) | Error::Validation(_) | Error::DimensionMismatch { .. } | Error::Straddle { .. } => {
            TwistlabStatus::InvalidArgument
        }
        Error::Pole(_) => TwistlabStatus::Pole,
        Error::Quadrature(_) => TwistlabStatus::Quadrature,
        Error::Refinement { .. } => TwistlabStatus::Refinement,
        Error::NoSaturation { .. } => TwistlabStatus::NoSaturation,
        Error::Divergence(_) => TwistlabStatus::Divergence,
        Error::Numerical(_) => TwistlabStatus::Numerical,
        Error::Config(_) => TwistlabStatus::Config,
        Error::Io(_) => TwistlabStatus::Io,
    }
}

struct Failure(TwistlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TwistlabStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, converting errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TwistlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwistlabStatus::Ok,
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
            set_last_error(format!("internal panic: {msg}"));
            TwistlabStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn twistlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Size in bytes (including the terminating NUL) of the last error message on this
/// thread, or 0 when no call has failed yet.
#[no_mangle]
pub extern "C" fn twistlab_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes_with_nul().len()))
}

/// Copies the last error message into `buf` (truncated to `len` bytes, always
/// NUL-terminated when `len > 0`). Returns the size needed for the full message.
///
/// # Safety
/// `buf` must be NULL or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn twistlab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Creates a chain. Transverse Ising: `−(J/2)Σ(σ¹σ¹ + h σ³)`; XX:
/// `−(J/2)Σ(σ¹σ¹ + σ²σ²) − (J h/2)Σσ³`; Heisenberg: `J Σ σ⃗·σ⃗ + h Σ σ³`.
/// Only the first two have Gaussian states.
///
/// # Safety
/// `out_chain` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn twistlab_chain_new(
    family: TwistlabFamily,
    j: f64,
    field: f64,
    length: usize,
    boundary: TwistlabBoundary,
    out_chain: *mut *mut TwistlabChain,
) -> TwistlabStatus {
    guard(|| {
        let slot = out(out_chain, "out_chain")?;
        let boundary = match boundary {
            TwistlabBoundary::Open => Boundary::Open,
            TwistlabBoundary::Periodic => Boundary::Periodic,
        };
        let model = match family {
            TwistlabFamily::TransverseIsing => ChainModel::transverse_ising(length, j, field, boundary),
            TwistlabFamily::Xx => ChainModel::xx(length, j, field, boundary),
            TwistlabFamily::Heisenberg => ChainModel::heisenberg(length, j, field, Vec::new(), boundary),
        };
        model.validate()?;
        *slot = Box::into_raw(Box::new(TwistlabChain(model)));
        Ok(())
    })
}

/// # Safety
/// `chain` must be NULL or a handle from [`twistlab_chain_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn twistlab_chain_free(chain: *mut TwistlabChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Ground-state covariance of a transverse-Ising or XX chain and its energy.
///
/// # Safety
/// `chain` must be a live handle; `out_cov` must be valid; `out_energy` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn twistlab_ground_covariance(
    chain: *const TwistlabChain,
    out_cov: *mut *mut TwistlabCovariance,
    out_energy: *mut f64,
) -> TwistlabStatus {
    guard(|| {
        let chain = handle(chain, "chain")?;
        let slot = out(out_cov, "out_cov")?;
        let (cov, e) = chain_ground_covariance(&chain.0)?;
        if let Some(p) = out_energy.as_mut() {
            *p = e;
        }
        *slot = Box::into_raw(Box::new(TwistlabCovariance(cov)));
        Ok(())
    })
}

/// Thermal covariance `e^{−βH}/Z` of an open transverse-Ising or XX chain.
///
/// # Safety
/// `chain` must be a live handle and `out_cov` valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_thermal_covariance(
    chain: *const TwistlabChain,
    beta: f64,
    out_cov: *mut *mut TwistlabCovariance,
) -> TwistlabStatus {
    guard(|| {
        let chain = handle(chain, "chain")?;
        let slot = out(out_cov, "out_cov")?;
        if chain.0.boundary != Boundary::Open {
            return Err(Failure(
                TwistlabStatus::InvalidArgument,
                "thermal Gaussian states need an open chain".into(),
            ));
        }
        let form = BdGForm::from_chain(&chain.0, FermionBoundary::Open)?;
        *slot = Box::into_raw(Box::new(TwistlabCovariance(thermal_covariance(&form, beta)?)));
        Ok(())
    })
}

/// # Safety
/// `cov` must be NULL or a live covariance handle.
#[no_mangle]
pub unsafe extern "C" fn twistlab_covariance_free(cov: *mut TwistlabCovariance) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// # Safety
/// `cov` must be a live handle and `out_sites` valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_covariance_sites(cov: *const TwistlabCovariance, out_sites: *mut usize) -> TwistlabStatus {
    guard(|| {
        *out(out_sites, "out_sites")? = handle(cov, "cov")?.0.sites();
        Ok(())
    })
}

/// Order or disorder two-point function between sites `x < xp`.
///
/// # Safety
/// `cov` must be a live handle and `out_value` valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_two_point(
    cov: *const TwistlabCovariance,
    kind: TwistlabTwistKind,
    x: usize,
    xp: usize,
    out_value: *mut f64,
) -> TwistlabStatus {
    guard(|| {
        let cov = handle(cov, "cov")?;
        let slot = out(out_value, "out_value")?;
        let kind = match kind {
            TwistlabTwistKind::Order => TwistKind::Order,
            TwistlabTwistKind::Disorder => TwistKind::Disorder,
        };
        *slot = order_disorder_two_point(&cov.0, kind, x, xp)?;
        Ok(())
    })
}

fn region(cov: &MajoranaCovariance, start: usize, size: usize) -> Result<Vec<usize>, Failure> {
    if size == 0 || start.checked_add(size).is_none_or(|end| end > cov.sites()) {
        return Err(Failure(TwistlabStatus::InvalidArgument, format!("region [{start}, {start}+{size}) is empty or outside the chain")));
    }
    Ok((start..start + size).collect())
}

/// `<e^{iλN_A}>` for the region `A = [start, start+size)`.
///
/// # Safety
/// `cov` must be a live handle; `out_re` and `out_im` valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_fcs(
    cov: *const TwistlabCovariance,
    region_start: usize,
    region_size: usize,
    lambda: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> TwistlabStatus {
    guard(|| {
        let cov = &handle(cov, "cov")?.0;
        let (re, im) = (out(out_re, "out_re")?, out(out_im, "out_im")?);
        let sites = region(cov, region_start, region_size)?;
        let v = if cov.number_correlation.is_some() {
            let c = number_correlation_matrix(cov, &sites)?;
            RegionCorrelations::NumberConserving(&c).evaluate(lambda)?
        } else {
            let g = cov.restrict(&sites)?;
            RegionCorrelations::Majorana(&g).evaluate(lambda)?
        };
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// Rényi entropy of order `n` (von Neumann at `n = 1`) of `[start, start+size)`.
///
/// # Safety
/// `cov` must be a live handle and `out_entropy` valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_renyi(
    cov: *const TwistlabCovariance,
    region_start: usize,
    region_size: usize,
    n: f64,
    out_entropy: *mut f64,
) -> TwistlabStatus {
    guard(|| {
        let cov = &handle(cov, "cov")?.0;
        let slot = out(out_entropy, "out_entropy")?;
        let sites = region(cov, region_start, region_size)?;
        *slot = renyi_from_gaussian(cov, &sites, n)?.entropy;
        Ok(())
    })
}

/// Draws `draws` chains of `sites` Toda stretches at inverse temperature `beta` and pressure `pressure`.
///
/// # Safety
/// `out_ensemble` must be valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_toda_sample(
    beta: f64,
    pressure: f64,
    sites: usize,
    draws: usize,
    seed: u64,
    out_ensemble: *mut *mut TwistlabTodaEnsemble,
) -> TwistlabStatus {
    guard(|| {
        let slot = out(out_ensemble, "out_ensemble")?;
        let ens = sample_toda_thermal(beta, pressure, sites, draws, seed)?;
        *slot = Box::into_raw(Box::new(TwistlabTodaEnsemble(ens)));
        Ok(())
    })
}

/// # Safety
/// `ensemble` must be NULL or a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn twistlab_toda_free(ensemble: *mut TwistlabTodaEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Monte Carlo `<e^{λφ(x)}>` and its jackknife error.
///
/// # Safety
/// `ensemble` must be a live handle; `out_mean` valid; `out_stderr` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn twistlab_toda_estimate(
    ensemble: *const TwistlabTodaEnsemble,
    lambda: f64,
    x: usize,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> TwistlabStatus {
    guard(|| {
        let ens = handle(ensemble, "ensemble")?;
        let slot = out(out_mean, "out_mean")?;
        let (m, s) = stretch_fcs_estimate(&ens.0, lambda, x)?;
        *slot = m;
        if let Some(p) = out_stderr.as_mut() {
            *p = s;
        }
        Ok(())
    })
}

/// Closed form `[β^λ Γ(P−λ)/Γ(P)]^x`.
///
/// # Safety
/// `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_toda_oracle(
    beta: f64,
    pressure: f64,
    lambda: f64,
    x: usize,
    out_value: *mut f64,
) -> TwistlabStatus {
    guard(|| {
        *out(out_value, "out_value")? = stretch_fcs_oracle(beta, pressure, lambda, x)?;
        Ok(())
    })
}

/// Ising disorder two-point function from the form-factor series truncated at
/// `truncation` (0 or 2) particles.
///
/// # Safety
/// `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_ising_series(
    mass: f64,
    vev: f64,
    r: f64,
    truncation: usize,
    out_value: *mut f64,
) -> TwistlabStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        let ff = FormFactor::ising_disorder(mass, vev)?;
        *slot = ff_series_two_point(&ff, r, truncation)?;
        Ok(())
    })
}

/// Runs a JSON run configuration (the format read by the `twistlab` binary; it must
/// name its `experiment`) and returns the emitted table in `*out_text`, to be released
/// with [`twistlab_string_free`]. Returns `TWISTLAB_STATUS_INVARIANT_FAILED` when the
/// run completed but a built-in check failed; the text is produced either way.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_text` must be valid.
#[no_mangle]
pub unsafe extern "C" fn twistlab_run_config(
    config_json: *const c_char,
    format: TwistlabFormat,
    out_text: *mut *mut c_char,
) -> TwistlabStatus {
    let mut failed_checks = false;
    let status = guard(|| {
        let slot = out(out_text, "out_text")?;
        *slot = ptr::null_mut();
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| Failure(TwistlabStatus::Config, format!("config is not UTF-8: {e}")))?;
        let cfg = RunConfig::from_json(text, None)?;
        let set = run_experiment(&cfg)?;
        let format = match format {
            TwistlabFormat::Csv => OutputFormat::Csv,
            TwistlabFormat::Json => OutputFormat::Json,
        };
        let body = emit(&set, format)?;
        *slot = CString::new(body).expect("output has no NUL").into_raw();
        if !set.all_pass() {
            failed_checks = true;
            set_last_error(format!("invariant checks failed: {:?}", set.check_summary()));
        }
        Ok(())
    });
    if status == TwistlabStatus::Ok && failed_checks {
        TwistlabStatus::InvariantFailed
    } else {
        status
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn twistlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Exit code the `twistlab` binary would use for `status`.
#[no_mangle]
pub extern "C" fn twistlab_status_exit_code(status: TwistlabStatus) -> c_int {
    match status {
        TwistlabStatus::Ok => 0,
        TwistlabStatus::Config => 2,
        TwistlabStatus::Capacity => 3,
        _ => 1,
    }
}
