//! Closed-form Penning trap mode frequencies and the `f_z − f_m` sweep.
//!
//! All angular frequencies are in rad/s. The magnetron and modified
//! cyclotron frequencies are the two roots of `ω² − ω_c ω + ω_z²/2 = 0`:
//!
//! ```text
//! ω_m = ½(ω_c − √(ω_c² − 2ω_z²)),   Ω_m = ½(ω_c + √(ω_c² − 2ω_z²))
//! ```
//!
//! `ω_m` is evaluated as `ω_z² / (2 Ω_m)` to avoid cancellation at low voltage.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::trap::{
    axial_angular_frequency, cyclotron_angular_frequency, validate_stability, IonSpecies,
    TrapConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeFrequencies {
    /// True cyclotron frequency qB/m.
    pub omega_c: f64,
    pub omega_z: f64,
    /// Magnetron frequency.
    pub omega_m: f64,
    /// Modified cyclotron frequency.
    pub omega_cap_m: f64,
}

fn hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

impl ModeFrequencies {
    /// Builds the mode set from ω_c and ω_z directly.
    pub fn from_angular(omega_c: f64, omega_z: f64) -> Result<Self> {
        if !(omega_c > 0.0 && omega_z > 0.0) {
            return Err(Error::invalid("omega", "frequencies must be positive"));
        }
        let disc = omega_c * omega_c - 2.0 * omega_z * omega_z;
        if disc <= 0.0 {
            return Err(Error::Unstable {
                omega_z,
                limit: omega_c / std::f64::consts::SQRT_2,
            });
        }
        let omega_cap_m = 0.5 * (omega_c + disc.sqrt());
        let omega_m = omega_z * omega_z / (2.0 * omega_cap_m);
        Ok(Self {
            omega_c,
            omega_z,
            omega_m,
            omega_cap_m,
        })
    }

    pub fn f_c(&self) -> f64 {
        hz(self.omega_c)
    }
    pub fn f_z(&self) -> f64 {
        hz(self.omega_z)
    }
    pub fn f_m(&self) -> f64 {
        hz(self.omega_m)
    }
    pub fn f_cap_m(&self) -> f64 {
        hz(self.omega_cap_m)
    }

    /// Fastest motional period (modified cyclotron), s.
    pub fn fastest_period(&self) -> f64 {
        2.0 * PI / self.omega_cap_m
    }

    pub fn hz_table(&self) -> ModeFrequenciesHz {
        ModeFrequenciesHz {
            f_c_hz: self.f_c(),
            f_z_hz: self.f_z(),
            f_m_hz: self.f_m(),
            f_cap_m_hz: self.f_cap_m(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeFrequenciesHz {
    pub f_c_hz: f64,
    pub f_z_hz: f64,
    pub f_m_hz: f64,
    pub f_cap_m_hz: f64,
}

pub fn compute_modes(species: &IonSpecies, trap: &TrapConfig) -> Result<ModeFrequencies> {
    validate_stability(species, trap).into_result()?;
    ModeFrequencies::from_angular(
        cyclotron_angular_frequency(species, trap),
        axial_angular_frequency(species, trap),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub b_tesla: f64,
    pub v_volts: f64,
    /// `None` marks an unstable grid point.
    pub fz_minus_fm_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FreqDifferenceSweep {
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

impl FreqDifferenceSweep {
    pub fn stable_rows(&self) -> impl Iterator<Item = (&SweepRow, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.fz_minus_fm_hz.map(|d| (r, d)))
    }

    /// Largest stable grid voltage at the given field.
    pub fn stability_edge(&self, b_tesla: f64) -> Option<f64> {
        self.stable_rows()
            .filter(|(r, _)| r.b_tesla == b_tesla)
            .map(|(r, _)| r.v_volts)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }
}

/// `f_z − f_m` over a (B, V) grid. Rows are ordered by (B, V) with both lists sorted ascending.
pub fn freq_difference_sweep(
    species: &IonSpecies,
    z0: f64,
    b_list: &[f64],
    v_range: &[f64],
) -> Result<FreqDifferenceSweep> {
    if b_list.is_empty() || v_range.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut bs = b_list.to_vec();
    let mut vs = v_range.to_vec();
    bs.sort_by(f64::total_cmp);
    vs.sort_by(f64::total_cmp);

    let grid: Vec<(f64, f64)> = bs
        .iter()
        .flat_map(|&b| vs.iter().map(move |&v| (b, v)))
        .collect();
    let rows = grid
        .par_iter()
        .map(|&(b, v)| -> Result<SweepRow> {
            let trap = TrapConfig::new(b, v, z0)?;
            let diff = compute_modes(species, &trap)
                .ok()
                .map(|m| m.f_z() - m.f_m());
            Ok(SweepRow {
                b_tesla: b,
                v_volts: v,
                fz_minus_fm_hz: diff,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sweep = FreqDifferenceSweep {
        rows,
        warnings: Vec::new(),
    };
    if sweep.stable_rows().next().is_none() {
        sweep.rows.clear();
        sweep
            .warnings
            .push("every grid point is unstable (omega_z >= omega_c/sqrt(2))".to_string());
    }
    Ok(sweep)
}

/// `n` evenly spaced points on `[start, stop]`.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
