//! C interface. Models live behind opaque `CkModel` handles; every fallible
//! call returns a `CkStatus` and writes its result through an out-pointer.
//! The message of the most recent failure on the calling thread is
//! available from `ck_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use collapse_kinetics::correlators::{NoiseModel, SpectralShape};
use collapse_kinetics::dynamics::expected_p1p2_closed;
use collapse_kinetics::error::{Error, ErrorCategory};
use collapse_kinetics::phenomenology::{dm_derived, DarkMatterScenario};
use collapse_kinetics::quadrature::bose_integral;
use collapse_kinetics::rates::{gamma_pair, reduction_bounds, ParticleGroup};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Parameters outside the model's domain or an inconsistent request.
    Validation = 2,
    /// An integral or series failed to reach its tolerance.
    NonConvergence = 3,
    /// A covariance matrix was not positive semidefinite.
    NotPsd = 4,
    Io = 5,
    /// The library panicked; the message holds the payload.
    Internal = 6,
}

/// Kernel selectors for `ck_model_kernel`.
pub const CK_KERNEL_D: u32 = 0;
pub const CK_KERNEL_F: u32 = 1;
pub const CK_KERNEL_I: u32 = 2;
/// I(0, t) − I(r, t).
pub const CK_KERNEL_I_DIFF: u32 = 3;
/// Spatial Fourier transform of F; the first argument is the wavenumber.
pub const CK_KERNEL_FOURIER_F: u32 = 4;

/// Opaque noise model.
pub struct CkModel {
    inner: NoiseModel,
}

/// Bounds on E[p₁p₂].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CkBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Dark-matter scenario in natural units (GeV).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CkScenario {
    pub mass: f64,
    /// rms velocity in units of c.
    pub v_rms: f64,
    /// Mass density, GeV⁴.
    pub density: f64,
    /// γ = 1/M², GeV⁻².
    pub coupling: f64,
    pub nucleons_per_bunch: f64,
    pub bunches: f64,
    pub fifth_force_scale: f64,
}

/// Quantities derived from a `CkScenario`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CkScenarioDerived {
    pub correlation_length: f64,
    pub temperature: f64,
    pub reduction_time: f64,
    pub chem_factor: f64,
    pub exponent_2gamma: f64,
    /// Nonzero when the dilute expansion does not apply.
    pub non_dilute: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn status_of(error: &Error) -> CkStatus {
    match error.category() {
        ErrorCategory::Validation => CkStatus::Validation,
        ErrorCategory::NonConvergence => CkStatus::NonConvergence,
        ErrorCategory::Psd => CkStatus::NotPsd,
        ErrorCategory::Io => CkStatus::Io,
    }
}

/// Runs `body`, records any failure and converts it into a status.
fn guard<F>(body: F) -> CkStatus
where
    F: FnOnce() -> Result<(), CkFailure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CkStatus::Ok,
        Ok(Err(CkFailure::Null(name))) => {
            set_last_error(format!("null pointer passed for {name}"));
            CkStatus::NullPointer
        }
        Ok(Err(CkFailure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {message}"));
            CkStatus::Internal
        }
    }
}

enum CkFailure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for CkFailure {
    fn from(e: Error) -> Self {
        CkFailure::Core(e)
    }
}

fn write_out<T>(out: *mut T, name: &'static str, value: T) -> Result<(), CkFailure> {
    if out.is_null() {
        return Err(CkFailure::Null(name));
    }
    // SAFETY: non-null and, per the interface contract, valid for writes.
    unsafe { out.write(value) };
    Ok(())
}

fn model_ref<'a>(model: *const CkModel) -> Result<&'a NoiseModel, CkFailure> {
    // SAFETY: a non-null handle comes from a `ck_model_new_*` call and has
    // not been freed, per the interface contract.
    unsafe { model.as_ref() }
        .map(|m| &m.inner)
        .ok_or(CkFailure::Null("model"))
}

fn new_model(
    out: *mut *mut CkModel,
    build: impl FnOnce() -> collapse_kinetics::error::Result<NoiseModel>,
) -> CkStatus {
    guard(|| {
        if out.is_null() {
            return Err(CkFailure::Null("out"));
        }
        let inner = build()?;
        write_out(out, "out", Box::into_raw(Box::new(CkModel { inner })))
    })
}

/// White noise of strength `coupling` smeared over `correlation_length`.
#[no_mangle]
pub extern "C" fn ck_model_new_white(
    coupling: f64,
    correlation_length: f64,
    out: *mut *mut CkModel,
) -> CkStatus {
    new_model(out, || NoiseModel::white(coupling, correlation_length))
}

/// Product correlator with a flat spectrum `level` below `cutoff` and zero
/// above; a non-positive `cutoff` means no cutoff.
#[no_mangle]
pub extern "C" fn ck_model_new_cutoff(
    level: f64,
    cutoff: f64,
    correlation_length: f64,
    out: *mut *mut CkModel,
) -> CkStatus {
    let shape = if cutoff > 0.0 {
        SpectralShape::Step { level, cutoff }
    } else {
        SpectralShape::Constant { level }
    };
    new_model(out, || {
        NoiseModel::cutoff_product(shape, correlation_length)
    })
}

/// Relativistic Bose gas of a massive scalar.
#[no_mangle]
pub extern "C" fn ck_model_new_thermal(
    mass: f64,
    temperature: f64,
    chemical_potential: f64,
    coupling: f64,
    out: *mut *mut CkModel,
) -> CkStatus {
    new_model(out, || {
        NoiseModel::thermal(mass, temperature, chemical_potential, coupling)
    })
}

/// Non-relativistic dilute gas of a massive scalar.
#[no_mangle]
pub extern "C" fn ck_model_new_dilute(
    mass: f64,
    temperature: f64,
    chemical_potential: f64,
    coupling: f64,
    out: *mut *mut CkModel,
) -> CkStatus {
    new_model(out, || {
        NoiseModel::dilute(mass, temperature, chemical_potential, coupling)
    })
}

/// Thermal unparticle stuff of scaling dimension `dimension`.
#[no_mangle]
pub extern "C" fn ck_model_new_unparticle(
    dimension: f64,
    scale: f64,
    temperature: f64,
    chemical_potential: f64,
    coupling: f64,
    out: *mut *mut CkModel,
) -> CkStatus {
    new_model(out, || {
        NoiseModel::unparticle(dimension, scale, temperature, chemical_potential, coupling)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from `ck_model_new_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ck_model_free(model: *mut CkModel) {
    if !model.is_null() {
        // SAFETY: caller guarantees ownership of a live handle.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Evaluates the kernel chosen by `kind` (one of `CK_KERNEL_*`) at
/// separation `r` (or wavenumber) and time `t`.
///
/// # Safety
/// `model` must be null or a live handle from `ck_model_new_*`.
#[no_mangle]
pub unsafe extern "C" fn ck_model_kernel(
    model: *const CkModel,
    kind: u32,
    r: f64,
    t: f64,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let m = model_ref(model)?;
        let value = match kind {
            CK_KERNEL_D => m.corr_d(r, t)?,
            CK_KERNEL_F => m.corr_f(r, t)?,
            CK_KERNEL_I => m.corr_i(r, t)?,
            CK_KERNEL_I_DIFF => m.corr_i_diff(r, t)?,
            CK_KERNEL_FOURIER_F => m.fourier_fhat(r, t)?,
            other => return Err(Error::Domain(format!("unknown kernel selector {other}")).into()),
        };
        write_out(out, "out", value)
    })
}

fn group(
    positions: *const f64,
    couplings: *const f64,
    count: usize,
) -> Result<ParticleGroup, CkFailure> {
    if positions.is_null() {
        return Err(CkFailure::Null("positions"));
    }
    if couplings.is_null() {
        return Err(CkFailure::Null("couplings"));
    }
    // SAFETY: per the interface contract, `positions` holds 3·count and
    // `couplings` count readable values.
    let (xyz, c) = unsafe {
        (
            std::slice::from_raw_parts(positions, 3 * count),
            std::slice::from_raw_parts(couplings, count),
        )
    };
    let points = xyz.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect();
    Ok(ParticleGroup::new(points, c.to_vec())?)
}

/// Reduction rate Γ(t) between two branches. Positions are packed xyz
/// triples; `couplings` gives each particle's coupling mass.
///
/// # Safety
/// `positions_*` must hold `3 * count_*` doubles and `couplings_*` must hold
/// `count_*` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ck_gamma_pair(
    model: *const CkModel,
    positions_a: *const f64,
    couplings_a: *const f64,
    count_a: usize,
    positions_b: *const f64,
    couplings_b: *const f64,
    count_b: usize,
    t: f64,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let m = model_ref(model)?;
        let a = group(positions_a, couplings_a, count_a)?;
        let b = group(positions_b, couplings_b, count_b)?;
        write_out(out, "out", gamma_pair(m, &a, &b, t)?.gamma)
    })
}

/// E[p₁p₂] for two branches at integrated rate Γ.
#[no_mangle]
pub extern "C" fn ck_expected_p1p2(gamma: f64, p1: f64, p2: f64, out: *mut f64) -> CkStatus {
    guard(|| write_out(out, "out", expected_p1p2_closed(gamma, p1, p2)?))
}

/// Lower and upper bounds on E[p₁p₂] at integrated rate Γ from initial
/// value `e0`.
#[no_mangle]
pub extern "C" fn ck_reduction_bounds(gamma: f64, e0: f64, out: *mut CkBounds) -> CkStatus {
    guard(|| {
        let b = reduction_bounds(gamma, e0)?;
        write_out(
            out,
            "out",
            CkBounds {
                lower: b.lower,
                upper: b.upper,
            },
        )
    })
}

/// ∫₀^∞ xⁿ/(e^{(x−ζ)/T} − 1) dx.
#[no_mangle]
pub extern "C" fn ck_bose_integral(n: f64, zeta: f64, temperature: f64, out: *mut f64) -> CkStatus {
    guard(|| write_out(out, "out", bose_integral(n, zeta, temperature)?))
}

/// Correlation length, temperature, reduction time and reduction exponent
/// of a dark-matter scenario.
///
/// # Safety
/// `scenario` must be null or point to a readable `CkScenario`.
#[no_mangle]
pub unsafe extern "C" fn ck_dm_derived(
    scenario: *const CkScenario,
    out: *mut CkScenarioDerived,
) -> CkStatus {
    guard(|| {
        // SAFETY: non-null pointers are valid for reads per the contract.
        let s = unsafe { scenario.as_ref() }.ok_or(CkFailure::Null("scenario"))?;
        let s = DarkMatterScenario::new(
            s.mass,
            s.v_rms,
            s.density,
            s.coupling,
            s.nucleons_per_bunch,
            s.bunches,
            s.fifth_force_scale,
        )?;
        let d = dm_derived(&s);
        write_out(
            out,
            "out",
            CkScenarioDerived {
                correlation_length: d.correlation_length,
                temperature: d.temperature,
                reduction_time: d.reduction_time,
                chem_factor: d.chem_factor,
                exponent_2gamma: d.exponent_2gamma,
                non_dilute: i32::from(d.non_dilute),
            },
        )
    })
}

/// Message of the latest failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ck_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Clears the stored failure message.
#[no_mangle]
pub extern "C" fn ck_clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}
