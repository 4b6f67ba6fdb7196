//! C ABI over `qpe-lab`.
//!
//! Every fallible function returns a [`QpeStatus`]; on failure the message is
//! available from [`qpe_last_error`] on the same thread. Objects are opaque
//! handles released with their matching `*_free` function. Strings returned
//! through `char**` are released with [`qpe_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qpe_lab::detection::{constants, detect_empirical};
use qpe_lab::fem::{build_cantilever, standardize, BeamConfig, StandardProblem};
use qpe_lab::harness::{run_experiment, ExperimentConfig};
use qpe_lab::qpe_dist::{self, exact_weighted, ModeWeights};
use qpe_lab::sampler::{sample_rejection, two_stage_sample, EmpiricalDistribution, ShotStream};
use qpe_lab::shots::shot_bound;
use qpe_lab::spectrum::Spectrum;
use qpe_lab::torus::PhaseGrid;
use qpe_lab::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    SeparationGate = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque sorted eigenphase set.
pub struct QpeSpectrum(Spectrum);
/// Opaque exact measurement law.
pub struct QpeDistribution(qpe_dist::QpeDistribution);
/// Opaque shot histogram.
pub struct QpeEmpirical(EmpiricalDistribution);
/// Opaque standardized beam eigenproblem.
pub struct QpeProblem(StandardProblem);

/// Threshold constants for a grid.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QpeConstants {
    pub tau: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub d_n: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QpeStatus {
    match e {
        Error::SeparationGate { .. } => QpeStatus::SeparationGate,
        Error::Precondition(_) | Error::InfeasiblePacking(_) | Error::DimensionOverflow(_) => {
            QpeStatus::Precondition
        }
        Error::Eigensolver(_) | Error::NonpositiveJacobian { .. } | Error::NotNormalized(_) => {
            QpeStatus::Numerical
        }
        Error::Io(_) => QpeStatus::Io,
        _ => QpeStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), QpeStatus>>(f: F) -> QpeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpeStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            QpeStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, QpeStatus>;
}

impl<T> OrStatus<T> for qpe_lab::Result<T> {
    fn or_status(self) -> Result<T, QpeStatus> {
        self.map_err(|e| {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        })
    }
}

fn non_null<'a, T>(p: *const T) -> Result<&'a T, QpeStatus> {
    if p.is_null() {
        set_error("null pointer argument".into());
        Err(QpeStatus::NullPointer)
    } else {
        Ok(unsafe { &*p })
    }
}

fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, QpeStatus> {
    if p.is_null() {
        set_error("null output pointer".into());
        Err(QpeStatus::NullPointer)
    } else {
        Ok(unsafe { &mut *p })
    }
}

fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], QpeStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p)?;
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn string_arg(p: *const c_char) -> Result<String, QpeStatus> {
    let c = unsafe { CStr::from_ptr(non_null(p)?) };
    c.to_str().map(str::to_owned).map_err(|_| {
        set_error("string argument is not UTF-8".into());
        QpeStatus::InvalidArgument
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> Result<(), QpeStatus> {
    let out = out_ptr(out)?;
    *out = CString::new(s)
        .map_err(|_| QpeStatus::InvalidArgument)?
        .into_raw();
    Ok(())
}

fn grid(bits: u32) -> Result<PhaseGrid, QpeStatus> {
    PhaseGrid::new(bits).or_status()
}

/// Message for the last failure on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn qpe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn qpe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `phases` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpe_spectrum_new(
    phases: *const f64,
    len: usize,
    out: *mut *mut QpeSpectrum,
) -> QpeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let s = Spectrum::new(slice(phases, len)?.iter().copied()).or_status()?;
        *out = Box::into_raw(Box::new(QpeSpectrum(s)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`qpe_spectrum_new`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_spectrum_free(s: *mut QpeSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_spectrum_len(s: *const QpeSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the sorted phases into `out` (capacity `cap`).
///
/// # Safety
/// `out` must have room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn qpe_spectrum_phases(
    s: *const QpeSpectrum,
    out: *mut f64,
    cap: usize,
) -> QpeStatus {
    guard(|| {
        let s = non_null(s)?;
        if cap < s.0.len() {
            set_error(format!("need room for {} phases", s.0.len()));
            return Err(QpeStatus::BufferTooSmall);
        }
        out_ptr(out)?;
        for (i, v) in s.0.values().enumerate() {
            *out.add(i) = v;
        }
        Ok(())
    })
}

/// Cyclic minimum gap (1 for a single phase).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpe_spectrum_min_gap(s: *const QpeSpectrum, out: *mut f64) -> QpeStatus {
    guard(|| {
        *out_ptr(out)? = non_null(s)?.0.cyclic_min_gap();
        Ok(())
    })
}

/// Exact law on `2^bits` bins; `weights` may be NULL for uniform weights.
///
/// # Safety
/// `weights` must point to one double per phase when not NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_distribution_new(
    s: *const QpeSpectrum,
    weights: *const f64,
    bits: u32,
    out: *mut *mut QpeDistribution,
) -> QpeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let s = &non_null(s)?.0;
        let w = if weights.is_null() {
            ModeWeights::uniform(s.len())
        } else {
            ModeWeights::normalized(slice(weights, s.len())?.to_vec()).or_status()?
        };
        let d = exact_weighted(s, &w, &grid(bits)?).or_status()?;
        *out = Box::into_raw(Box::new(QpeDistribution(d)));
        Ok(())
    })
}

/// # Safety
/// `d` must come from [`qpe_distribution_new`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_distribution_free(d: *mut QpeDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// `p_j` for bin `j`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpe_distribution_prob(
    d: *const QpeDistribution,
    j: u64,
    out: *mut f64,
) -> QpeStatus {
    guard(|| {
        *out_ptr(out)? = non_null(d)?.0.prob(j);
        Ok(())
    })
}

/// Draws `shots` samples by mixture rejection sampling. `weights` may be
/// NULL for uniform weights.
///
/// # Safety
/// `weights` must point to one double per phase when not NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_sample(
    s: *const QpeSpectrum,
    weights: *const f64,
    bits: u32,
    shots: u64,
    seed: u64,
    stream: u64,
    out: *mut *mut QpeEmpirical,
) -> QpeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let s = &non_null(s)?.0;
        let w = if weights.is_null() {
            ModeWeights::uniform(s.len())
        } else {
            ModeWeights::normalized(slice(weights, s.len())?.to_vec()).or_status()?
        };
        let e = sample_rejection(s, &w, &grid(bits)?, shots, ShotStream::new(seed, stream))
            .or_status()?;
        *out = Box::into_raw(Box::new(QpeEmpirical(e)));
        Ok(())
    })
}

/// # Safety
/// `e` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_empirical_free(e: *mut QpeEmpirical) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `e` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_empirical_shots(e: *const QpeEmpirical) -> u64 {
    e.as_ref().map_or(0, |e| e.0.shots())
}

/// # Safety
/// `e` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_empirical_count(e: *const QpeEmpirical, j: u64) -> u64 {
    e.as_ref().map_or(0, |e| e.0.count(j))
}

/// JSON `{grid, shots, counts: [[j, count], ...]}`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpe_empirical_to_json(
    e: *const QpeEmpirical,
    out: *mut *mut c_char,
) -> QpeStatus {
    guard(|| {
        let json = serde_json::to_string(&non_null(e)?.0).map_err(|err| {
            set_error(err.to_string());
            QpeStatus::InvalidArgument
        })?;
        give_string(json, out)
    })
}

/// Detected bins for `m0` target modes, sorted. `len_out` receives the set
/// size; fails with `BufferTooSmall` when it exceeds `cap`.
///
/// # Safety
/// `bins` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn qpe_detect(
    e: *const QpeEmpirical,
    m0: usize,
    bins: *mut u64,
    cap: usize,
    len_out: *mut usize,
) -> QpeStatus {
    guard(|| {
        let len_out = out_ptr(len_out)?;
        let set = detect_empirical(&non_null(e)?.0, m0).or_status()?;
        *len_out = set.len();
        if set.len() > cap {
            set_error(format!("{} bins detected, buffer holds {cap}", set.len()));
            return Err(QpeStatus::BufferTooSmall);
        }
        if !set.is_empty() {
            out_ptr(bins)?;
            ptr::copy_nonoverlapping(set.bins.as_ptr(), bins, set.len());
        }
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpe_constants(bits: u32, out: *mut QpeConstants) -> QpeStatus {
    guard(|| {
        let c = constants(&grid(bits)?).or_status()?;
        *out_ptr(out)? = QpeConstants {
            tau: c.tau,
            sigma: c.sigma,
            gamma: c.gamma,
            d_n: c.d_n,
        };
        Ok(())
    })
}

/// Shot bound for `m0` modes on `2^bits` bins. Pass `epsilon <= 0` for the
/// largest admissible margin; the margin used is written to `epsilon_out`
/// when it is not NULL.
///
/// # Safety
/// `k_out` must be writable; `epsilon_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_shot_bound(
    m0: usize,
    bits: u32,
    delta: f64,
    epsilon: f64,
    k_out: *mut u64,
    epsilon_out: *mut f64,
) -> QpeStatus {
    guard(|| {
        let k_out = out_ptr(k_out)?;
        let eps = (epsilon > 0.0).then_some(epsilon);
        let plan = shot_bound(m0, &grid(bits)?, delta, eps).or_status()?;
        *k_out = plan.k_bound;
        if !epsilon_out.is_null() {
            *epsilon_out = plan.epsilon;
        }
        Ok(())
    })
}

/// Assembles and standardizes a beam. `beam_json` may be NULL for the
/// default 16x6x2 mesh.
///
/// # Safety
/// `beam_json` must be a NUL-terminated string or NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_problem_from_beam(
    beam_json: *const c_char,
    target_norm: f64,
    out: *mut *mut QpeProblem,
) -> QpeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let beam = if beam_json.is_null() {
            BeamConfig::default()
        } else {
            serde_json::from_str(&string_arg(beam_json)?).map_err(|e| {
                set_error(e.to_string());
                QpeStatus::InvalidArgument
            })?
        };
        let model = build_cantilever(&beam).or_status()?;
        let p = standardize(&model, target_norm, true).or_status()?;
        *out = Box::into_raw(Box::new(QpeProblem(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_problem_free(p: *mut QpeProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_problem_dim(p: *const QpeProblem) -> usize {
    p.as_ref().map_or(0, |p| p.0.dim())
}

/// # Safety
/// `p` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qpe_problem_alpha(p: *const QpeProblem) -> f64 {
    p.as_ref().map_or(f64::NAN, |p| p.0.alpha())
}

/// New spectrum handle holding the problem's phases.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpe_problem_spectrum(
    p: *const QpeProblem,
    out: *mut *mut QpeSpectrum,
) -> QpeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = Box::into_raw(Box::new(QpeSpectrum(non_null(p)?.0.spectrum().clone())));
        Ok(())
    })
}

/// Shots from the random-basis-state protocol.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qpe_problem_sample(
    p: *const QpeProblem,
    bits: u32,
    shots: u64,
    seed: u64,
    out: *mut *mut QpeEmpirical,
) -> QpeStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let e = two_stage_sample(
            &non_null(p)?.0,
            &grid(bits)?,
            shots,
            ShotStream::new(seed, 0),
        )
        .or_status()?;
        *out = Box::into_raw(Box::new(QpeEmpirical(e)));
        Ok(())
    })
}

/// Runs an experiment described by JSON and returns the report as JSON.
///
/// # Safety
/// `config_json` must be NUL-terminated; `report_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpe_run_experiment(
    config_json: *const c_char,
    report_out: *mut *mut c_char,
) -> QpeStatus {
    guard(|| {
        out_ptr(report_out)?;
        let cfg = ExperimentConfig::from_json(&string_arg(config_json)?).or_status()?;
        let report = run_experiment(&cfg).or_status()?;
        let json = serde_json::to_string(&report).map_err(|e| {
            set_error(e.to_string());
            QpeStatus::InvalidArgument
        })?;
        give_string(json, report_out)
    })
}
