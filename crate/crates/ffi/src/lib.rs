//! C interface to `epr-lattice`.
//!
//! Every function returns an [`ElatStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and can be read with
//! [`elat_last_error_message`]. Handles are opaque and must be released with
//! their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use epr_lattice::band_structure::{self, BlochSpectrum};
use epr_lattice::parameters::{self, Boundary, ModelParams, PhysicalParams};
use epr_lattice::protocol::{self, SeparationSetup};
use epr_lattice::two_atom::{self, ExternalPotential, SpectrumResult};
use epr_lattice::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElatStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Convergence = 3,
    Config = 4,
    Numerical = 5,
    Memory = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElatBoundary {
    Open = 0,
    Periodic = 1,
}

impl From<ElatBoundary> for Boundary {
    fn from(b: ElatBoundary) -> Self {
        match b {
            ElatBoundary::Open => Boundary::Open,
            ElatBoundary::Periodic => Boundary::Periodic,
        }
    }
}

impl From<Boundary> for ElatBoundary {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Open => ElatBoundary::Open,
            Boundary::Periodic => ElatBoundary::Periodic,
        }
    }
}

/// Tight-binding model; energies in units of `recoil_energy` (J), lengths in
/// units of `lattice_constant` (m).
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElatModel {
    pub recoil_energy: f64,
    pub lattice_depth: f64,
    pub hop: f64,
    pub vdd: f64,
    pub site_count: usize,
    pub lattice_constant: f64,
    pub boundary: ElatBoundary,
    pub hop_valid: bool,
}

impl From<&ModelParams> for ElatModel {
    fn from(m: &ModelParams) -> Self {
        ElatModel {
            recoil_energy: m.recoil_energy,
            lattice_depth: m.lattice_depth,
            hop: m.hop,
            vdd: m.vdd,
            site_count: m.site_count,
            lattice_constant: m.lattice_constant,
            boundary: m.boundary.into(),
            hop_valid: m.hop_valid,
        }
    }
}

impl From<&ElatModel> for ModelParams {
    fn from(m: &ElatModel) -> Self {
        ModelParams {
            recoil_energy: m.recoil_energy,
            lattice_depth: m.lattice_depth,
            hop: m.hop,
            vdd: m.vdd,
            site_count: m.site_count,
            lattice_constant: m.lattice_constant,
            boundary: m.boundary.into(),
            hop_valid: m.hop_valid,
        }
    }
}

/// Separation diagnostics of one snapshot; absent values are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElatSeparation {
    pub time: f64,
    pub norm: f64,
    pub diagonal_weight: f64,
    pub pair_weight: f64,
    pub diatom_centroid: f64,
    pub single_centroid: f64,
    pub displacement_ratio: f64,
}

/// Two-atom spectrum.
pub struct ElatSpectrum {
    inner: SpectrumResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ElatStatus {
    match e {
        Error::Domain(_) => ElatStatus::Domain,
        Error::Convergence { .. } => ElatStatus::Convergence,
        Error::MemoryBudget { .. } => ElatStatus::Memory,
        Error::Numerical(_) => ElatStatus::Numerical,
        Error::Config(_) => ElatStatus::Config,
        Error::Io(_) => ElatStatus::Io,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard<F>(f: F) -> ElatStatus
where
    F: FnOnce() -> Result<(), ElatStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ElatStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            ElatStatus::Panic
        }
    }
}

fn fail(e: Error) -> ElatStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

fn null(name: &str) -> ElatStatus {
    set_error(format!("{name} is null"));
    ElatStatus::NullPointer
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn elat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes (without the terminating NUL) of the calling thread's last
/// error message, 0 if the last call succeeded.
#[no_mangle]
pub extern "C" fn elat_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copy the last error message into `buffer` (NUL-terminated, truncated to
/// `capacity - 1` bytes). Returns the number of bytes written without the NUL.
///
/// # Safety
/// `buffer` must be null or point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn elat_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    if buffer.is_null() || capacity == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(capacity - 1);
        // SAFETY: caller guarantees `capacity` bytes at `buffer`; n < capacity.
        unsafe {
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, n);
            *buffer.add(n) = 0;
        }
        n
    })
}

/// `E_rec = 2π²ħ²/(m λ²)` in joules.
///
/// # Safety
/// `out` must be null or a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn elat_recoil_energy(mass_kg: f64, lambda_m: f64, out: *mut f64) -> ElatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let e = parameters::recoil_energy(mass_kg, lambda_m).map_err(fail)?;
        // SAFETY: checked non-null; caller guarantees validity.
        unsafe { *out = e };
        Ok(())
    })
}

/// Hopping and width of the lowest band of a lattice of depth `lattice_depth` (E_rec).
///
/// # Safety
/// `hop` and `bandwidth` must be null or valid pointers to `double`s; null
/// outputs are skipped.
#[no_mangle]
pub unsafe extern "C" fn elat_lattice_hopping(lattice_depth: f64, hop: *mut f64, bandwidth: *mut f64) -> ElatStatus {
    guard(|| {
        if !(lattice_depth >= 0.0 && lattice_depth.is_finite()) {
            return Err(fail(Error::Domain(format!("lattice depth must be >= 0, got {lattice_depth}"))));
        }
        let spectrum =
            BlochSpectrum::compute(lattice_depth, parameters::DEFAULT_PLANEWAVES, parameters::DEFAULT_KPOINTS)
                .map_err(fail)?;
        let h = band_structure::hopping_exact(&spectrum);
        // SAFETY: each pointer is checked before writing.
        unsafe {
            if !hop.is_null() {
                *hop = h.hop;
            }
            if !bandwidth.is_null() {
                *bandwidth = h.bandwidth;
            }
        }
        Ok(())
    })
}

/// Model derived from the built-in lithium parameters.
///
/// # Safety
/// `out` must be null or a valid pointer to an `ElatModel`.
#[no_mangle]
pub unsafe extern "C" fn elat_lithium_model(
    site_count: usize,
    boundary: ElatBoundary,
    out: *mut ElatModel,
) -> ElatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = parameters::to_model(&PhysicalParams::lithium(), site_count, boundary.into()).map_err(fail)?;
        // SAFETY: checked non-null.
        unsafe { *out = ElatModel::from(&m) };
        Ok(())
    })
}

/// Model given directly in natural units, with lithium SI anchors.
///
/// # Safety
/// `out` must be null or a valid pointer to an `ElatModel`.
#[no_mangle]
pub unsafe extern "C" fn elat_model_new(
    hop: f64,
    vdd: f64,
    site_count: usize,
    boundary: ElatBoundary,
    out: *mut ElatModel,
) -> ElatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = ModelParams::dimensionless(hop, vdd, site_count, boundary.into()).map_err(fail)?;
        // SAFETY: checked non-null.
        unsafe { *out = ElatModel::from(&m) };
        Ok(())
    })
}

fn read_model(model: *const ElatModel) -> Result<ModelParams, ElatStatus> {
    if model.is_null() {
        return Err(null("model"));
    }
    // SAFETY: checked non-null; the public functions require validity.
    let m = ModelParams::from(unsafe { &*model });
    m.validate().map_err(fail)?;
    Ok(m)
}

/// Diagonalize the two-atom Hamiltonian of `model` without external potential.
///
/// # Safety
/// `model` must point to a valid `ElatModel`; `out` must be a valid pointer
/// to receive the handle, which is released with `elat_spectrum_free`.
#[no_mangle]
pub unsafe extern "C" fn elat_spectrum_new(model: *const ElatModel, out: *mut *mut ElatSpectrum) -> ElatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = read_model(model)?;
        let h = two_atom::build(&m, &ExternalPotential::None).map_err(fail)?;
        let inner = two_atom::diagonalize(&h).map_err(fail)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(ElatSpectrum { inner })) };
        Ok(())
    })
}

/// Release a spectrum; null is ignored.
///
/// # Safety
/// `spectrum` must be null or a handle from `elat_spectrum_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn elat_spectrum_free(spectrum: *mut ElatSpectrum) {
    if !spectrum.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(spectrum) });
    }
}

/// Number of computed eigenvalues and of states in the bound band.
///
/// # Safety
/// `spectrum` must be a live handle; outputs must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn elat_spectrum_counts(
    spectrum: *const ElatSpectrum,
    eigenvalues: *mut usize,
    bound_states: *mut usize,
) -> ElatStatus {
    guard(|| {
        if spectrum.is_null() {
            return Err(null("spectrum"));
        }
        // SAFETY: checked non-null; caller guarantees a live handle.
        let s = unsafe { &(*spectrum).inner };
        // SAFETY: each output is checked before writing.
        unsafe {
            if !eigenvalues.is_null() {
                *eigenvalues = s.eigenvalues.len();
            }
            if !bound_states.is_null() {
                *bound_states = s.diatom_count();
            }
        }
        Ok(())
    })
}

/// Copy the ascending eigenvalues (E_rec) into `buffer`.
///
/// # Safety
/// `spectrum` must be a live handle and `buffer` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn elat_spectrum_eigenvalues(
    spectrum: *const ElatSpectrum,
    buffer: *mut f64,
    capacity: usize,
) -> ElatStatus {
    guard(|| {
        if spectrum.is_null() {
            return Err(null("spectrum"));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        // SAFETY: checked non-null; caller guarantees a live handle.
        let values = unsafe { &(*spectrum).inner.eigenvalues };
        if capacity < values.len() {
            set_error(format!("buffer holds {capacity} values, {} needed", values.len()));
            return Err(ElatStatus::BufferTooSmall);
        }
        // SAFETY: buffer has room for values.len() doubles.
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len()) };
        Ok(())
    })
}

/// Evolve the trap product state of width `sigma_e` (sites) centred on
/// `center` under the interaction plus a linear potential `slope` (E_rec per
/// site), writing diagnostics at each of the `count` times (seconds).
///
/// # Safety
/// `model` must point to a valid `ElatModel`; `times_s` must hold `count`
/// doubles and `out` room for `count` `ElatSeparation` records.
#[no_mangle]
pub unsafe extern "C" fn elat_separation_run(
    model: *const ElatModel,
    sigma_e: f64,
    center: f64,
    slope: f64,
    times_s: *const f64,
    count: usize,
    out: *mut ElatSeparation,
) -> ElatStatus {
    guard(|| {
        let m = read_model(model)?;
        if count == 0 {
            return Ok(());
        }
        if times_s.is_null() {
            return Err(null("times_s"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: caller guarantees `count` readable doubles.
        let seconds = unsafe { std::slice::from_raw_parts(times_s, count) };
        let setup = SeparationSetup {
            sigma_e,
            center,
            slope,
            times: seconds.iter().map(|&t| m.time_from_seconds(t)).collect(),
            pair_band: protocol::DEFAULT_PAIR_BAND,
        };
        let run = protocol::run_separation(&m, &setup).map_err(fail)?;
        let nan = |x: Option<f64>| x.unwrap_or(f64::NAN);
        for (i, d) in run.trace.diagnostics.iter().enumerate() {
            let record = ElatSeparation {
                time: seconds[i],
                norm: d.norm,
                diagonal_weight: d.diagonal_weight,
                pair_weight: d.pair_weight,
                diatom_centroid: nan(d.diatom_centroid),
                single_centroid: nan(d.single_centroid),
                displacement_ratio: nan(d.displacement_ratio),
            };
            // SAFETY: caller guarantees room for `count` records; i < count.
            unsafe { *out.add(i) = record };
        }
        Ok(())
    })
}

/// Closed-form EPR parameter `(σ_E/(√2σ)) tanh[1/(π²σ_E² k_BT)]` with lengths
/// in lattice constants and `kt` in E_rec.
///
/// # Safety
/// `out` must be null or a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn elat_s_estimate(sigma_e: f64, sigma: f64, kt: f64, out: *mut f64) -> ElatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = epr_lattice::distributions::s_estimate(sigma_e, sigma, kt).map_err(fail)?;
        // SAFETY: checked non-null.
        unsafe { *out = s };
        Ok(())
    })
}
