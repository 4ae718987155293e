//! C interface to the iongyro core.
//!
//! Every function returns an [`IongyroStatus`]; results come back through out
//! pointers. Handles are opaque and owned by the caller once returned, and each
//! has a matching `_free`. On failure the message for the calling thread is
//! kept until the next failing call and can be read with
//! [`iongyro_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use iongyro::constants::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};
use iongyro::dynamics::{integrate, IntegratorConfig, ParticleState, Trajectory};
use iongyro::equilibrium::{relax, IonConfiguration, RelaxationConfig};
use iongyro::sensing::{BudgetInputs, EnsembleSpec, ODFParams, SensitivityBudget};
use iongyro::shape::{aspect_ratio_from_beta, RotatingWallConfig};
use iongyro::{compute_modes, Error, IonSpecies, ModeFrequencies, RotationInput, TrapConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IongyroStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unstable = 3,
    OutsideRotationWindow = 4,
    /// The handle still holds the best configuration found.
    NotConverged = 5,
    Numerical = 6,
    IndexOutOfRange = 7,
    Panic = 8,
}

/// Angular frequencies, rad/s.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IongyroModes {
    pub omega_c: f64,
    pub omega_z: f64,
    pub omega_m: f64,
    pub omega_cap_m: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IongyroBudgetInputs {
    pub n_ions: u64,
    /// N
    pub odf_force: f64,
    /// s
    pub tau: f64,
    /// 1/s
    pub gamma: f64,
    /// s
    pub cycle_time: f64,
    /// m per rad/s
    pub scale_factor: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IongyroBudget {
    pub theta_max: f64,
    /// m
    pub delta_zc_single_shot: f64,
    /// m/√Hz
    pub amplitude_asd: f64,
    /// rad/s/√Hz
    pub rotation_asd: f64,
    /// rad/√h
    pub arw: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IongyroRelaxReport {
    pub converged: bool,
    pub iterations: u64,
    pub final_energy_j: f64,
    pub max_force_n: f64,
}

/// Species, trap and derived mode frequencies.
pub struct IongyroTrap {
    species: IonSpecies,
    trap: TrapConfig,
    modes: ModeFrequencies,
}

pub struct IongyroTrajectory(Trajectory);

pub struct IongyroCrystal {
    config: IonConfiguration,
    report: IongyroRelaxReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> IongyroStatus {
    match err {
        Error::Unstable { .. } => IongyroStatus::Unstable,
        Error::OutsideRotationWindow { .. } => IongyroStatus::OutsideRotationWindow,
        Error::NotConverged { .. } => IongyroStatus::NotConverged,
        Error::NoBracket { .. }
        | Error::StepUnderflow { .. }
        | Error::NonFinite { .. }
        | Error::NonUniformSampling
        | Error::TooFewSamples { .. } => IongyroStatus::Numerical,
        _ => IongyroStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), IongyroStatus>) -> IongyroStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IongyroStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            IongyroStatus::Panic
        }
    }
}

fn fail(err: Error) -> IongyroStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> IongyroStatus {
    set_error(format!("null pointer: {what}"));
    IongyroStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, IongyroStatus> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

fn store<T>(out: *mut *mut T, value: T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length without the
/// terminator, or 0 when no error is recorded.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn iongyro_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Builds a trap for an ion of `mass_u` atomic mass units and charge
/// `charge_e` elementary charges. Unstable traps are rejected.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iongyro_trap_new(
    mass_u: f64,
    charge_e: f64,
    b_field_t: f64,
    voltage_v: f64,
    z0_m: f64,
    out: *mut *mut IongyroTrap,
) -> IongyroStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let species = IonSpecies::new("custom", mass_u * ATOMIC_MASS_UNIT, charge_e * ELEMENTARY_CHARGE)
            .map_err(fail)?;
        let trap = TrapConfig::new(b_field_t, voltage_v, z0_m).map_err(fail)?;
        let modes = compute_modes(&species, &trap).map_err(fail)?;
        store(out, IongyroTrap { species, trap, modes });
        Ok(())
    })
}

/// # Safety
/// `trap` must be null or a handle from [`iongyro_trap_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iongyro_trap_free(trap: *mut IongyroTrap) {
    if !trap.is_null() {
        drop(unsafe { Box::from_raw(trap) });
    }
}

/// # Safety
/// `trap` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iongyro_trap_modes(trap: *const IongyroTrap, out: *mut IongyroModes) -> IongyroStatus {
    guard(|| {
        let t = unsafe { deref(trap, "trap") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = t.modes;
        unsafe {
            *out = IongyroModes {
                omega_c: m.omega_c,
                omega_z: m.omega_z,
                omega_m: m.omega_m,
                omega_cap_m: m.omega_cap_m,
            }
        };
        Ok(())
    })
}

/// Fixed-step RK4 trajectory. `state` is (x, y, z, vx, vy, vz) in SI units.
///
/// # Safety
/// `trap` must be a live handle, `state` valid for 6 reads and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iongyro_trajectory_integrate(
    trap: *const IongyroTrap,
    state: *const f64,
    omega_x: f64,
    steps_per_period: u32,
    total_time_s: f64,
    sample_stride: u32,
    out: *mut *mut IongyroTrajectory,
) -> IongyroStatus {
    guard(|| {
        let t = unsafe { deref(trap, "trap") }?;
        if state.is_null() {
            return Err(null("state"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if steps_per_period == 0 || sample_stride == 0 {
            set_error("steps_per_period and sample_stride must be positive".into());
            return Err(IongyroStatus::InvalidArgument);
        }
        let s = unsafe { std::slice::from_raw_parts(state, 6) };
        let s0 = ParticleState::new([s[0], s[1], s[2]], [s[3], s[4], s[5]]);
        let rot = RotationInput::new(omega_x).map_err(fail)?;
        let cfg = IntegratorConfig::for_modes(&t.modes, steps_per_period as usize, total_time_s, sample_stride as usize);
        let traj = integrate(s0, &t.species, &t.trap, &rot, &cfg).map_err(fail)?;
        store(out, IongyroTrajectory(traj));
        Ok(())
    })
}

/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iongyro_trajectory_len(traj: *const IongyroTrajectory, out: *mut usize) -> IongyroStatus {
    guard(|| {
        let t = unsafe { deref(traj, "trajectory") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = t.0.len() };
        Ok(())
    })
}

/// Sample `index`: time in `t_out`, (x, y, z, vx, vy, vz) in `state_out`.
///
/// # Safety
/// `traj` must be a live handle, `t_out` valid, `state_out` valid for 6 writes.
#[no_mangle]
pub unsafe extern "C" fn iongyro_trajectory_sample(
    traj: *const IongyroTrajectory,
    index: usize,
    t_out: *mut f64,
    state_out: *mut f64,
) -> IongyroStatus {
    guard(|| {
        let t = unsafe { deref(traj, "trajectory") }?;
        if t_out.is_null() || state_out.is_null() {
            return Err(null("output buffer"));
        }
        if index >= t.0.len() {
            set_error(format!("sample {index} out of range for {} samples", t.0.len()));
            return Err(IongyroStatus::IndexOutOfRange);
        }
        let s = &t.0.states[index];
        let out = unsafe { std::slice::from_raw_parts_mut(state_out, 6) };
        out[..3].copy_from_slice(&s.position);
        out[3..].copy_from_slice(&s.velocity);
        unsafe { *t_out = t.0.times[index] };
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iongyro_trajectory_free(traj: *mut IongyroTrajectory) {
    if !traj.is_null() {
        drop(unsafe { Box::from_raw(traj) });
    }
}

/// Relaxes `n_ions` in the frame rotating at `omega_r` with wall strength
/// `delta` and angle `theta`. On [`IongyroStatus::NotConverged`] the handle is
/// still written and holds the best configuration found.
///
/// # Safety
/// `trap` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iongyro_crystal_relax(
    trap: *const IongyroTrap,
    n_ions: usize,
    omega_r: f64,
    delta: f64,
    theta: f64,
    seed: u64,
    out: *mut *mut IongyroCrystal,
) -> IongyroStatus {
    guard(|| {
        let t = unsafe { deref(trap, "trap") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let wall = RotatingWallConfig::new(&t.modes, omega_r, delta, theta).map_err(fail)?;
        let cfg = RelaxationConfig {
            initial_seed: seed,
            ..RelaxationConfig::default()
        };
        let report = |r: &iongyro::equilibrium::ConvergenceReport| IongyroRelaxReport {
            converged: r.converged,
            iterations: r.iterations as u64,
            final_energy_j: r.final_energy_j,
            max_force_n: r.max_force_n,
        };
        match relax(n_ions, &t.species, &t.modes, &wall, &cfg) {
            Ok(r) => {
                store(out, IongyroCrystal { report: report(&r.report), config: r.config });
                Ok(())
            }
            Err(Error::NotConverged { report: rep, best }) => {
                set_error(format!("relaxation did not converge: max force {:.3e} N", rep.max_force_n));
                store(out, IongyroCrystal { report: report(&rep), config: *best });
                Err(IongyroStatus::NotConverged)
            }
            Err(e) => Err(fail(e)),
        }
    })
}

/// # Safety
/// `crystal` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iongyro_crystal_report(
    crystal: *const IongyroCrystal,
    out: *mut IongyroRelaxReport,
) -> IongyroStatus {
    guard(|| {
        let c = unsafe { deref(crystal, "crystal") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = c.report };
        Ok(())
    })
}

/// # Safety
/// `crystal` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iongyro_crystal_len(crystal: *const IongyroCrystal, out: *mut usize) -> IongyroStatus {
    guard(|| {
        let c = unsafe { deref(crystal, "crystal") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = c.config.ion_count() };
        Ok(())
    })
}

/// Writes positions as (x, y, z) triples, m. `len` counts doubles and must be
/// at least three times the ion count.
///
/// # Safety
/// `crystal` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn iongyro_crystal_positions(
    crystal: *const IongyroCrystal,
    buf: *mut f64,
    len: usize,
) -> IongyroStatus {
    guard(|| {
        let c = unsafe { deref(crystal, "crystal") }?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let need = 3 * c.config.ion_count();
        if len < need {
            set_error(format!("buffer holds {len} values, need {need}"));
            return Err(IongyroStatus::IndexOutOfRange);
        }
        let out = unsafe { std::slice::from_raw_parts_mut(buf, need) };
        for (chunk, p) in out.chunks_exact_mut(3).zip(&c.config.positions) {
            chunk.copy_from_slice(p);
        }
        Ok(())
    })
}

/// # Safety
/// `crystal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iongyro_crystal_free(crystal: *mut IongyroCrystal) {
    if !crystal.is_null() {
        drop(unsafe { Box::from_raw(crystal) });
    }
}

/// Cold-fluid aspect ratio z_cl/r_cl for a shape parameter `beta` in (0, 1).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iongyro_aspect_ratio(beta: f64, out: *mut f64) -> IongyroStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let root = aspect_ratio_from_beta(beta).map_err(fail)?;
        unsafe { *out = root.alpha };
        Ok(())
    })
}

/// # Safety
/// `inputs` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iongyro_sensitivity_budget(
    inputs: *const IongyroBudgetInputs,
    out: *mut IongyroBudget,
) -> IongyroStatus {
    guard(|| {
        let i = unsafe { deref(inputs, "inputs") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let b = SensitivityBudget::compute(&BudgetInputs {
            ensemble: EnsembleSpec::new(i.n_ions).map_err(fail)?,
            odf: ODFParams::new(i.odf_force, i.tau, i.gamma).map_err(fail)?,
            cycle_time: i.cycle_time,
            scale_factor: i.scale_factor,
        })
        .map_err(fail)?;
        unsafe {
            *out = IongyroBudget {
                theta_max: b.theta_max,
                delta_zc_single_shot: b.delta_zc_single_shot,
                amplitude_asd: b.amplitude_asd,
                rotation_asd: b.rotation_asd,
                arw: b.arw,
            }
        };
        Ok(())
    })
}
