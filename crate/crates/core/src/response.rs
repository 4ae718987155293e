//! Axial response of a driven, damped oscillator to the Coriolis force.
//!
//! An ion moving with `y = Y cos(ω_r t)` in a frame rotating at `Ω_x` feels
//! an axial drive `2mΩ_x ω_r Y`. With `k_z = mω_z²` the steady amplitude is
//!
//! ```text
//! Z = (2 ω_r Ω_x Y / ω_z²) / √[(1 − Γ²)² + (2ζΓ)²],   Γ = ω_r/ω_z,  Q = 1/(2ζ)
//! ```
//!
//! which at Γ = 1 is `Z = (2Q/ω_z) Ω_x Y`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorParams {
    pub omega_z: f64,
    pub omega_r: f64,
    /// `f64::INFINITY` for an undamped oscillator.
    pub quality_factor: f64,
}

impl OscillatorParams {
    pub fn new(omega_z: f64, omega_r: f64, quality_factor: f64) -> Result<Self> {
        if !(omega_z > 0.0) || !omega_z.is_finite() {
            return Err(Error::invalid("omega_z", "must be positive and finite"));
        }
        if !(omega_r >= 0.0) || !omega_r.is_finite() {
            return Err(Error::invalid("omega_r", "must be non-negative and finite"));
        }
        if !(quality_factor > 0.0) {
            return Err(Error::invalid("quality_factor", "must be positive"));
        }
        Ok(Self {
            omega_z,
            omega_r,
            quality_factor,
        })
    }

    /// Drive at the axial frequency.
    pub fn resonant(omega_z: f64, quality_factor: f64) -> Result<Self> {
        Self::new(omega_z, omega_z, quality_factor)
    }

    pub fn zeta(&self) -> f64 {
        0.5 / self.quality_factor
    }

    pub fn gamma_ratio(&self) -> f64 {
        self.omega_r / self.omega_z
    }
}

pub fn transfer_gain(params: &OscillatorParams) -> f64 {
    let g = params.gamma_ratio();
    let detune = 1.0 - g * g;
    let damp = 2.0 * params.zeta() * g;
    1.0 / (detune * detune + damp * damp).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeResult {
    /// Amplitude of an ion with drive amplitude `drive_amplitude`, m.
    pub z_single: f64,
    /// Cloud average under the half-outermost rule, m.
    pub z_avg: f64,
    pub drive_amplitude: f64,
    pub rotation: f64,
}

fn amplitude(omega_x: f64, y_amp: f64, params: &OscillatorParams) -> f64 {
    2.0 * params.omega_r * transfer_gain(params) / (params.omega_z * params.omega_z)
        * omega_x.abs()
        * y_amp
}

/// Axial amplitude of one ion whose radial drive amplitude is `y_amp`.
/// `z_avg` treats `y_amp` as the outermost ion of the cloud.
pub fn z_amplitude(omega_x: f64, y_amp: f64, params: &OscillatorParams) -> Result<AmplitudeResult> {
    if !(y_amp >= 0.0) {
        return Err(Error::invalid("y_amp", "must be non-negative"));
    }
    let z = amplitude(omega_x, y_amp, params);
    Ok(AmplitudeResult {
        z_single: z,
        z_avg: 0.5 * z,
        drive_amplitude: y_amp,
        rotation: omega_x,
    })
}

/// Cloud-average response of a crystal of radius `r_cl`: the mean drive
/// amplitude is taken as half the outermost one.
// A uniform disk's mean radius is 2r_cl/3; the half-outermost rule is kept for the headline chain.
pub fn cloud_average_amplitude(r_cl: f64, omega_x: f64, params: &OscillatorParams) -> Result<AmplitudeResult> {
    if !(r_cl > 0.0) {
        return Err(Error::invalid("r_cl", "must be positive"));
    }
    let outer = z_amplitude(omega_x, r_cl, params)?;
    Ok(AmplitudeResult {
        z_single: outer.z_single,
        z_avg: amplitude(omega_x, 0.5 * r_cl, params),
        drive_amplitude: r_cl,
        rotation: omega_x,
    })
}

/// Amplitude per unit rotation rate for the cloud average, m per rad/s.
pub fn scale_factor(r_cl: f64, params: &OscillatorParams) -> Result<f64> {
    Ok(cloud_average_amplitude(r_cl, 1.0, params)?.z_avg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const WZ_100V: f64 = 2.0 * PI * 247.3e3;

    #[test]
    fn gain_limits() {
        let res = OscillatorParams::resonant(WZ_100V, 1e6).unwrap();
        assert!((transfer_gain(&res) / 1e6 - 1.0).abs() < 1e-12);
        let stat = OscillatorParams::new(WZ_100V, 1e-9 * WZ_100V, 1e6).unwrap();
        assert!((transfer_gain(&stat) - 1.0).abs() < 1e-12);
        let two = OscillatorParams::new(WZ_100V, 2.0 * WZ_100V, f64::INFINITY).unwrap();
        assert!((transfer_gain(&two) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn headline_amplitudes() {
        let p = OscillatorParams::resonant(WZ_100V, 1e6).unwrap();
        let z = z_amplitude(1.0, 2.2e-4, &p).unwrap();
        assert!((z.z_single / 2.8e-4 - 1.0).abs() < 0.05, "{}", z.z_single);
        let c = cloud_average_amplitude(2.2e-4, 1.0, &p).unwrap();
        assert!((c.z_avg / 1.4e-4 - 1.0).abs() < 0.05, "{}", c.z_avg);
        assert_eq!(c.z_avg, 0.5 * c.z_single);
        assert_eq!(z_amplitude(0.0, 2.2e-4, &p).unwrap().z_single, 0.0);
    }

    #[test]
    fn single_particle_off_resonance_point() {
        let p = OscillatorParams::new(2.0 * PI * 78.2e3, 2.0 * PI * 8.13e3, f64::INFINITY).unwrap();
        let z = z_amplitude(10.0, 25e-6, &p).unwrap().z_single;
        // 2ω_m Ω r / (ω_z² − ω_m²)
        let (wz, wm) = (p.omega_z, p.omega_r);
        let expect = 2.0 * wm * 10.0 * 25e-6 / (wz * wz - wm * wm);
        assert!((z / expect - 1.0).abs() < 1e-12);
        assert!(z > 0.5e-10 && z < 2e-10);
    }

    #[test]
    fn doubling_radius_doubles_average() {
        let p = OscillatorParams::resonant(WZ_100V, 1e6).unwrap();
        let a = cloud_average_amplitude(1e-4, 1.0, &p).unwrap().z_avg;
        let b = cloud_average_amplitude(2e-4, 1.0, &p).unwrap().z_avg;
        assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_inputs() {
        assert!(OscillatorParams::new(0.0, 1.0, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, 0.0).is_err());
        let p = OscillatorParams::resonant(1.0, 1.0).unwrap();
        assert!(z_amplitude(1.0, -1.0, &p).is_err());
        assert!(cloud_average_amplitude(0.0, 1.0, &p).is_err());
    }

    #[test]
    fn gain_peaks_near_resonance() {
        for q in [1e3, 1e4, 1e6] {
            let wz = 1.0;
            let n = 200_001;
            let (mut best_g, mut best_gain) = (0.0, 0.0);
            for i in 1..=n {
                let g = 0.99 + 0.02 * i as f64 / n as f64;
                let gain = transfer_gain(&OscillatorParams::new(wz, g, q).unwrap());
                if gain > best_gain {
                    best_gain = gain;
                    best_g = g;
                }
            }
            // analytic peak at √(1 − 2ζ²); grid step 1e-7
            assert!((best_g - 1.0f64).abs() < 1.0 / (q * q) + 2e-7, "Q {q}: {best_g}");
        }
    }

    proptest! {
        #[test]
        fn linear_in_rotation_and_drive(om in 0.0f64..100.0, y in 0.0f64..1e-3, k in 0.1f64..10.0, g in 0.01f64..2.0, q in 1.0f64..1e7) {
            let p = OscillatorParams::new(WZ_100V, g * WZ_100V, q).unwrap();
            let base = z_amplitude(om, y, &p).unwrap().z_single;
            let scaled_om = z_amplitude(k * om, y, &p).unwrap().z_single;
            let scaled_y = z_amplitude(om, k * y, &p).unwrap().z_single;
            prop_assert!((scaled_om - k * base).abs() <= 1e-12 * scaled_om.abs().max(1e-300));
            prop_assert!((scaled_y - k * base).abs() <= 1e-12 * scaled_y.abs().max(1e-300));
        }

        #[test]
        fn resonance_reduces_to_closed_form(q in 1.0f64..1e9, om in 0.0f64..10.0, y in 0.0f64..1e-3) {
            let p = OscillatorParams::resonant(WZ_100V, q).unwrap();
            let z = z_amplitude(om, y, &p).unwrap().z_single;
            let closed = 2.0 * q / WZ_100V * om * y;
            prop_assert!((z - closed).abs() <= 1e-12 * closed.max(1e-300));
        }
    }
}
