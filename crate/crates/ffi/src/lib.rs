//! C ABI over the `dcbell` core.
//!
//! States are opaque handles created by `dcb_state_new_*` and released with
//! [`dcb_state_free`]. Every fallible call returns a [`DcbStatus`]; on failure
//! [`dcb_last_error_message`] describes the problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use dcbell::chsh::{self, AngleSettings, Outcome};
use dcbell::config::RunConfig;
use dcbell::continuum::{make_grid, sample_function, Bundle, Family, Grid, GridKind};
use dcbell::error::Error;
use dcbell::hybrid::{HybridState, SchmidtForm};
use dcbell::montecarlo::{estimate_bell_with, McConfig};
use dcbell::protocol;
use num_complex::Complex64;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcbStatus {
    Ok = 0,
    InvalidArgument = 1,
    DegenerateInput = 2,
    NumericalValidation = 3,
    NullPointer = 4,
    Config = 5,
    Panic = 6,
}

/// Opaque state handle: a hybrid state with its Schmidt decomposition.
pub struct DcbState {
    state: HybridState,
    schmidt: SchmidtForm,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcbSettings {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcbSchmidt {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_product: f64,
    pub z_re: f64,
    pub z_im: f64,
    /// Product state (`κ₂ = 0`).
    pub degenerate: bool,
    pub linear_polarizer_realizable: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcbEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_events: u64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DcbStatus {
    match e {
        Error::InvalidArgument(_) => DcbStatus::InvalidArgument,
        Error::DegenerateInput(_) => DcbStatus::DegenerateInput,
        Error::NumericalValidation(_) => DcbStatus::NumericalValidation,
        Error::Config(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => DcbStatus::Config,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DcbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DcbStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            DcbStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            DcbStatus::Panic
        }
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes either null or a valid pointer.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: non-null and, per the API contract, valid for writes.
    unsafe { p.write(value) };
    Ok(())
}

fn handle(state: HybridState) -> Result<*mut DcbState, Failure> {
    let schmidt = state.schmidt_decompose();
    schmidt.validate(&state)?;
    Ok(Box::into_raw(Box::new(DcbState { state, schmidt })))
}

fn grid(n: usize, lo: f64, hi: f64) -> Result<Arc<Grid>, Failure> {
    Ok(make_grid(GridKind::UniformTrapezoid, n, (lo, hi))?)
}

fn to_settings(s: &DcbSettings) -> Result<AngleSettings, Failure> {
    Ok(AngleSettings::new(s.alpha, s.alpha_prime, s.beta, s.beta_prime)?)
}

fn outcome(i: u8) -> Result<Outcome, Failure> {
    Ok(Outcome::from_index(i)?)
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn dcb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dcb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `cosθ|H⟩h + sinθ|V⟩v` with `h` a Gaussian and `⟨h|v⟩ = z`, on an `n`-node
/// uniform grid over `[lo, hi]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_state_new_overlap(
    theta: f64,
    z_re: f64,
    z_im: f64,
    n: usize,
    lo: f64,
    hi: f64,
    out: *mut *mut DcbState,
) -> DcbStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let st = HybridState::with_overlap(theta, Complex64::new(z_re, z_im), &grid(n, lo, hi)?)?;
        unsafe { write(out, handle(st)?, "out") }
    })
}

/// Gaussian bundles `h ~ N(mu_h, sigma_h)` and `v ~ N(mu_v, sigma_v)` (amplitude
/// `exp(−(q−μ)²/(4σ²))`, normalized on the grid).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_state_new_gaussians(
    theta: f64,
    mu_h: f64,
    sigma_h: f64,
    mu_v: f64,
    sigma_v: f64,
    n: usize,
    lo: f64,
    hi: f64,
    out: *mut *mut DcbState,
) -> DcbStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let g = grid(n, lo, hi)?;
        let h = sample_function(&Family::Gaussian { mu: mu_h, sigma: sigma_h, chirp: 0.0 }, &g)?;
        let v = sample_function(&Family::Gaussian { mu: mu_v, sigma: sigma_v, chirp: 0.0 }, &g)?;
        unsafe { write(out, handle(HybridState::new(theta, h, v)?)?, "out") }
    })
}

/// State from tabulated amplitudes on a uniform `n`-node grid over `[lo, hi]`.
/// Each of `h_re`, `h_im`, `v_re`, `v_im` holds `n` values; bundles are
/// normalized before use.
///
/// # Safety
/// The four arrays must hold `n` readable doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_state_new_tabulated(
    theta: f64,
    n: usize,
    lo: f64,
    hi: f64,
    h_re: *const f64,
    h_im: *const f64,
    v_re: *const f64,
    v_im: *const f64,
    out: *mut *mut DcbState,
) -> DcbStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let g = grid(n, lo, hi)?;
        let read = |re: *const f64, im: *const f64, what| -> Result<Bundle, Failure> {
            if re.is_null() || im.is_null() {
                return Err(Failure::Null(what));
            }
            // SAFETY: the caller guarantees n readable values behind each pointer.
            let (re, im) = unsafe { (std::slice::from_raw_parts(re, n), std::slice::from_raw_parts(im, n)) };
            let amplitudes = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            Ok(sample_function(&Family::Tabulated { amplitudes }, &g)?)
        };
        let h = read(h_re, h_im, "h")?;
        let v = read(v_re, v_im, "v")?;
        unsafe { write(out, handle(HybridState::new(theta, h, v)?)?, "out") }
    })
}

/// State described by a JSON run configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_state_from_config(path: *const c_char, out: *mut *mut DcbState) -> DcbStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        // SAFETY: non-null, NUL-terminated per contract.
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| Error::Config("config path is not UTF-8".into()))?;
        let st = RunConfig::load(path)?.build_state()?;
        unsafe { write(out, handle(st)?, "out") }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `state` must come from a `dcb_state_new_*` call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dcb_state_free(state: *mut DcbState) {
    if !state.is_null() {
        // SAFETY: allocated by Box::into_raw in `handle`.
        drop(unsafe { Box::from_raw(state) });
    }
}

/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_state_schmidt(state: *const DcbState, out: *mut DcbSchmidt) -> DcbStatus {
    guard(|| {
        let h = unsafe { deref(state, "state")? };
        let s = &h.schmidt;
        let z = h.state.overlap_z();
        let rep = DcbSchmidt {
            kappa1: s.kappa1,
            kappa2: s.kappa2,
            kappa_product: s.kappa_product(),
            z_re: z.re,
            z_im: z.im,
            degenerate: s.degenerate,
            linear_polarizer_realizable: s.linear_polarizer_realizable,
        };
        unsafe { write(out, rep, "out") }
    })
}

/// `α = 0, α′ = π/4, β = π/8, β′ = 3π/8`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_canonical_settings(out: *mut DcbSettings) -> DcbStatus {
    guard(|| {
        let c = chsh::canonical_settings();
        let s = DcbSettings { alpha: c.alpha, alpha_prime: c.alpha_prime, beta: c.beta, beta_prime: c.beta_prime };
        unsafe { write(out, s, "out") }
    })
}

/// `P_ij(α,β)` with outcomes `i, j ∈ {1, 2}`.
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_joint_probability(
    state: *const DcbState,
    i: u8,
    j: u8,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> DcbStatus {
    guard(|| {
        let h = unsafe { deref(state, "state")? };
        let p = chsh::joint_probability(&h.state, &h.schmidt, outcome(i)?, outcome(j)?, alpha, beta)?;
        unsafe { write(out, p, "out") }
    })
}

/// `C(α,β)`.
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_correlation(state: *const DcbState, alpha: f64, beta: f64, out: *mut f64) -> DcbStatus {
    guard(|| {
        let h = unsafe { deref(state, "state")? };
        let c = chsh::correlation(&h.state, &h.schmidt, alpha, beta)?;
        unsafe { write(out, c, "out") }
    })
}

/// CHSH value from direct joint probabilities.
///
/// # Safety
/// `state` must be a live handle, `settings` readable, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_bell_value(state: *const DcbState, settings: *const DcbSettings, out: *mut f64) -> DcbStatus {
    guard(|| {
        let h = unsafe { deref(state, "state")? };
        let st = to_settings(unsafe { deref(settings, "settings")? })?;
        let b = chsh::bell_value(&h.state, &h.schmidt, &st)?.bell_value;
        unsafe { write(out, b, "out") }
    })
}

/// `√2(2κ₁κ₂+1)`.
#[no_mangle]
pub extern "C" fn dcb_canonical_bell(kappa1: f64, kappa2: f64) -> f64 {
    chsh::canonical_bell(kappa1, kappa2)
}

/// Settings maximizing the CHSH value for the given Schmidt coefficients.
///
/// # Safety
/// `out_settings` and `out_bell` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_optimize_settings(
    kappa1: f64,
    kappa2: f64,
    out_settings: *mut DcbSettings,
    out_bell: *mut f64,
) -> DcbStatus {
    guard(|| {
        if out_settings.is_null() {
            return Err(Failure::Null("out_settings"));
        }
        if out_bell.is_null() {
            return Err(Failure::Null("out_bell"));
        }
        let (s, b) = chsh::optimize_settings(kappa1, kappa2)?;
        let s = DcbSettings { alpha: s.alpha, alpha_prime: s.alpha_prime, beta: s.beta, beta_prime: s.beta_prime };
        unsafe {
            write(out_settings, s, "out_settings")?;
            write(out_bell, b, "out_bell")
        }
    })
}

/// Four-fold coincidence probability `P_TT̄AĀ(α,β)` of the stripping protocol.
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_four_photon_probability(
    state: *const DcbState,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> DcbStatus {
    guard(|| {
        let h = unsafe { deref(state, "state")? };
        let p = protocol::four_photon_probability(&h.state, &h.schmidt, alpha, beta)?;
        unsafe { write(out, p, "out") }
    })
}

/// CHSH value assembled from four-photon reconstructions with exact probabilities.
///
/// # Safety
/// `state` must be a live handle, `settings` readable, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_protocol_bell(state: *const DcbState, settings: *const DcbSettings, out: *mut f64) -> DcbStatus {
    guard(|| {
        let h = unsafe { deref(state, "state")? };
        let st = to_settings(unsafe { deref(settings, "settings")? })?;
        let b = protocol::run_protocol(&h.state, &h.schmidt, &st)?.bell_value;
        unsafe { write(out, b, "out") }
    })
}

/// Monte Carlo CHSH estimate with `n_events` trials per run. With `calibrate`
/// false the true Schmidt form replaces the simulated calibration.
///
/// # Safety
/// `state` must be a live handle, `settings` readable, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dcb_mc_estimate_bell(
    state: *const DcbState,
    settings: *const DcbSettings,
    n_events: u64,
    seed: u64,
    calibrate: bool,
    out: *mut DcbEstimate,
) -> DcbStatus {
    guard(|| {
        let h = unsafe { deref(state, "state")? };
        let st = to_settings(unsafe { deref(settings, "settings")? })?;
        let e = estimate_bell_with(&h.state, &h.schmidt, &st, &McConfig { n_events, seed, calibrate })?.estimate;
        let rep = DcbEstimate { value: e.value, std_error: e.std_error, n_events: e.n_events, seed: e.seed };
        unsafe { write(out, rep, "out") }
    })
}
