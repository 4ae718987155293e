//! Optical-dipole-force amplitude readout and the rotation sensitivity budget.
//!
//! The ODF precesses each spin by `θ = (F₀/ħ) Z_c τ cos δ`. A Ramsey
//! sequence maps θ onto `P↑ = ½[1 − e^{−Γτ} cos θ]`, and projection noise
//! limits the resolvable angle to `δθ = e^{Γτ}/√(2N)`, so
//!
//! ```text
//! δZ_c = ħ e^{Γτ} / (F₀ τ √(2N))
//! ```
//!
//! The `e` here is Euler's number entering through `e^{Γτ}` at `Γτ = 1`.
//! Only the resonant ODF (`Δμ = 0`) is modelled.

use serde::Serialize;

use crate::constants::REDUCED_PLANCK;
use crate::error::{Error, Result};

pub const BUDGET_SCHEMA_VERSION: u32 = 1;

/// Seconds per hour under the square root: ARW (rad/√h) = ASD (rad/s/√Hz) × 60.
const SQRT_SECONDS_PER_HOUR: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ODFParams {
    /// Force per ion, N.
    pub f0: f64,
    /// Precession time, s.
    pub tau: f64,
    /// Spontaneous decay rate, 1/s.
    pub gamma: f64,
    /// Beat detuning μ − ω, rad/s. Must be zero.
    pub delta_mu: f64,
    /// ODF phase relative to the axial motion, rad.
    pub delta_phase: f64,
}

impl ODFParams {
    pub fn new(f0: f64, tau: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            f0,
            tau,
            gamma,
            delta_mu: 0.0,
            delta_phase: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phase(mut self, delta_phase: f64) -> Self {
        self.delta_phase = delta_phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) {
            return Err(Error::invalid("f0", "must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid("gamma", "must be non-negative"));
        }
        if self.delta_mu != 0.0 {
            return Err(Error::invalid("delta_mu", "only the resonant ODF is modelled"));
        }
        Ok(())
    }

    /// Γτ
    pub fn decay_exponent(&self) -> f64 {
        self.gamma * self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnsembleSpec {
    pub n_ions: u64,
}

impl EnsembleSpec {
    pub fn new(n_ions: u64) -> Result<Self> {
        if n_ions == 0 {
            return Err(Error::invalid("n_ions", "need at least one ion"));
        }
        Ok(Self { n_ions })
    }
}

pub fn precession_angle(odf: &ODFParams, zc: f64) -> f64 {
    odf.f0 / REDUCED_PLANCK * zc * odf.tau * odf.delta_phase.cos()
}

pub fn ramsey_population(theta: f64, gamma: f64, tau: f64) -> f64 {
    0.5 * (1.0 - (-gamma * tau).exp() * theta.cos())
}

/// `P↑(δ=π) − P↑(δ=0)` in the readout quadrature, which cancels the background offset.
pub fn population_difference(theta_max: f64, gamma: f64, tau: f64) -> f64 {
    (-gamma * tau).exp() * theta_max.sin()
}

/// Projection-noise-limited angle resolution `e^{Γτ}/√(2N)`.
pub fn angle_resolution(ens: &EnsembleSpec, odf: &ODFParams) -> f64 {
    odf.decay_exponent().exp() / (2.0 * ens.n_ions as f64).sqrt()
}

/// Signal over projection noise for precession angle `theta_max`: the signal
/// `e^{−Γτ} sin θ` against a noise `e^{−Γτ} cos θ · δθ`.
pub fn snr(theta_max: f64, ens: &EnsembleSpec, odf: &ODFParams) -> f64 {
    theta_max.tan() / angle_resolution(ens, odf)
}

pub fn single_shot_amplitude_resolution(ens: &EnsembleSpec, odf: &ODFParams) -> f64 {
    REDUCED_PLANCK * odf.decay_exponent().exp()
        / (odf.f0 * odf.tau * (2.0 * ens.n_ions as f64).sqrt())
}

/// Amplitude spectral density for one shot per `cycle_time`, m/√Hz.
pub fn averaged_sensitivity(single_shot: f64, cycle_time: f64) -> Result<f64> {
    if !(cycle_time > 0.0) {
        return Err(Error::invalid("cycle_time", "must be positive"));
    }
    Ok(single_shot * cycle_time.sqrt())
}

pub fn rotation_sensitivity(amplitude_asd: f64, scale_factor: f64) -> Result<f64> {
    if !(scale_factor > 0.0) {
        return Err(Error::invalid("scale_factor", "must be positive"));
    }
    Ok(amplitude_asd / scale_factor)
}

pub fn angle_random_walk(rotation_asd: f64) -> f64 {
    rotation_asd * SQRT_SECONDS_PER_HOUR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetInputs {
    pub ensemble: EnsembleSpec,
    pub odf: ODFParams,
    pub cycle_time: f64,
    /// Cloud-average axial amplitude per unit rotation, m per rad/s.
    pub scale_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityBudget {
    pub schema_version: u32,
    pub inputs: BudgetInputs,
    /// Resolvable precession angle, rad.
    pub theta_max: f64,
    pub delta_zc_single_shot: f64,
    pub amplitude_asd: f64,
    pub scale_factor: f64,
    pub rotation_asd: f64,
    pub arw: f64,
    pub repetitions_per_s: f64,
    pub cycle_time: f64,
}

impl SensitivityBudget {
    pub fn compute(inputs: &BudgetInputs) -> Result<Self> {
        inputs.odf.validate()?;
        if inputs.cycle_time < inputs.odf.tau {
            return Err(Error::invalid("cycle_time", "must cover the precession time"));
        }
        let dz = single_shot_amplitude_resolution(&inputs.ensemble, &inputs.odf);
        let asd = averaged_sensitivity(dz, inputs.cycle_time)?;
        let rot = rotation_sensitivity(asd, inputs.scale_factor)?;
        Ok(Self {
            schema_version: BUDGET_SCHEMA_VERSION,
            inputs: *inputs,
            theta_max: angle_resolution(&inputs.ensemble, &inputs.odf),
            delta_zc_single_shot: dz,
            amplitude_asd: asd,
            scale_factor: inputs.scale_factor,
            rotation_asd: rot,
            arw: angle_random_walk(rot),
            repetitions_per_s: 1.0 / inputs.cycle_time,
            cycle_time: inputs.cycle_time,
        })
    }
}
