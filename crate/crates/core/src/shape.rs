//! Cold-fluid spheroid model of a rotating ion cloud under rotating-wall drive.
//!
//! In the frame rotating at `ω_r` the radial confinement relative to the
//! axial one is
//!
//! ```text
//! β = [ω_r(ω_c − ω_r) − ω_z²/2] / ω_z²
//! ```
//!
//! and a uniform-density oblate spheroid of aspect ratio `α = z_cl/r_cl`
//! satisfies (with `k₀ = √(1 − α²)`, `k₁ = 3√(1 − k₀²)/k₀²`)
//!
//! ```text
//! 3/(2β + 1) = k₁ [ (1 − k₀²)^(−1/2) − sin⁻¹(k₀)/k₀ ]
//! ```
//!
//! The left side is three times the axial depolarization factor `A_z`.
//! [`oracle_aspect_ratio_depolarization`] solves the same physics through
//! `β = A_⊥/A_z` with `A_z` written in arctangent form, as an independent check.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::constants::VACUUM_PERMITTIVITY;
use crate::error::{Error, Result};
use crate::modes::{compute_modes, ModeFrequencies};
use crate::trap::{IonSpecies, TrapConfig};

/// β below this is treated as a disk-like (planar) cloud.
pub const PLANARITY_THRESHOLD: f64 = 0.1;

const SCAN_LOW: f64 = 1e-6;
const SCAN_HIGH: f64 = 1.0 - 1e-6;
const SCAN_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotatingWallConfig {
    /// Rotation frequency of the wall and the locked crystal, rad/s.
    pub omega_r: f64,
    /// Wall strength relative to the trap potential.
    pub delta: f64,
    /// Drive phase, rad. Rotates the wall axes in the co-rotating frame.
    pub theta: f64,
}

impl RotatingWallConfig {
    pub fn new(modes: &ModeFrequencies, omega_r: f64, delta: f64, theta: f64) -> Result<Self> {
        check_window(modes, omega_r)?;
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::invalid("delta", format!("must lie in [0, 1), got {delta}")));
        }
        if !theta.is_finite() {
            return Err(Error::invalid("theta", "must be finite"));
        }
        Ok(Self {
            omega_r,
            delta,
            theta,
        })
    }
}

fn check_window(modes: &ModeFrequencies, omega_r: f64) -> Result<()> {
    if omega_r > modes.omega_m && omega_r < modes.omega_cap_m {
        Ok(())
    } else {
        Err(Error::OutsideRotationWindow {
            omega_r,
            lower: modes.omega_m,
            upper: modes.omega_cap_m,
        })
    }
}

fn beta_unchecked(modes: &ModeFrequencies, omega_r: f64) -> f64 {
    let wz2 = modes.omega_z * modes.omega_z;
    (omega_r * (modes.omega_c - omega_r) - 0.5 * wz2) / wz2
}

/// Shape parameter β. Zero at both window edges, maximal at `ω_r = ω_c/2`.
pub fn shape_beta(modes: &ModeFrequencies, omega_r: f64) -> Result<f64> {
    // The endpoints are admitted so the roots themselves can be evaluated.
    if !(omega_r >= modes.omega_m && omega_r <= modes.omega_cap_m) {
        check_window(modes, omega_r)?;
    }
    Ok(beta_unchecked(modes, omega_r))
}

/// Normalized frequency `ω_z² / (2 ω_r (ω_c − ω_r))`; β = (1/s − 1)/2.
pub fn normalized_frequency(modes: &ModeFrequencies, omega_r: f64) -> f64 {
    modes.omega_z * modes.omega_z / (2.0 * omega_r * (modes.omega_c - omega_r))
}

/// Lower-branch rotation frequency giving the normalized frequency `s`.
pub fn omega_r_for_normalized_frequency(modes: &ModeFrequencies, s: f64) -> Result<f64> {
    let product = modes.omega_z * modes.omega_z / (2.0 * s);
    let disc = modes.omega_c * modes.omega_c - 4.0 * product;
    if !(s > 0.0 && disc >= 0.0) {
        return Err(Error::invalid(
            "normalized_freq",
            format!("{s} is not reachable for this trap"),
        ));
    }
    // lower root without cancellation: ω_r = product / upper root
    let upper = 0.5 * (modes.omega_c + disc.sqrt());
    Ok(product / upper)
}

/// Which typesetting of the β–α relation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AspectRelation {
    /// `k₁[(1−k₀²)^(−1/2) − sin⁻¹(k₀)/k₀]`, the depolarization-consistent form.
    SignRestored,
    /// `k₁[(1−k₀²)^(−1/2) · sin⁻¹(k₀)/k₀]`, the bracket read as a product.
    /// Its right side is ≥ 3 on (0, 1), so it has no oblate root for β > 0.
    ProductTypeset,
}

/// Right side minus left side of the β–α relation.
pub fn aspect_ratio_residual(alpha: f64, beta: f64, relation: AspectRelation) -> f64 {
    let k0_sq = (1.0 - alpha) * (1.0 + alpha);
    let k0 = k0_sq.sqrt();
    // (1 − k₀²)^(1/2) is α itself
    let k1 = 3.0 * alpha / k0_sq;
    let asin_ratio = k0.asin() / k0;
    let bracket = match relation {
        AspectRelation::SignRestored => 1.0 / alpha - asin_ratio,
        AspectRelation::ProductTypeset => asin_ratio / alpha,
    };
    k1 * bracket - 3.0 / (2.0 * beta + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AspectRatioRoot {
    pub alpha: f64,
    /// |residual| at the returned root.
    pub residual: f64,
    /// More than one sign change was found; the smallest root is returned.
    pub multiple_roots: bool,
}

fn check_oblate_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "beta",
            format!("oblate branch requires 0 < beta < 1, got {beta}"),
        ))
    }
}

/// Scans `f` on `[1e-6, 1 − 1e-6]` at 1e-3 spacing and bisects the first sign change.
fn bracketed_root(beta: f64, f: impl Fn(f64) -> f64) -> Result<AspectRatioRoot> {
    let steps = ((SCAN_HIGH - SCAN_LOW) / SCAN_STEP).ceil() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| (SCAN_LOW + i as f64 * SCAN_STEP).min(SCAN_HIGH))
        .collect();
    let samples: Vec<(f64, f64)> = grid.iter().map(|&a| (a, f(a))).collect();

    let brackets: Vec<(f64, f64, f64, f64)> = samples
        .windows(2)
        .filter(|w| w[0].1 == 0.0 || w[0].1.signum() != w[1].1.signum())
        .map(|w| (w[0].0, w[0].1, w[1].0, w[1].1))
        .collect();
    let Some(&(mut lo, mut f_lo, mut hi, f_hi)) = brackets.first() else {
        return Err(Error::NoBracket { beta, samples });
    };
    let multiple_roots = brackets.len() > 1;

    if f_lo != 0.0 {
        let mut f_hi = f_hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = f(mid);
            if f_mid == 0.0 {
                lo = mid;
                f_lo = 0.0;
                break;
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
        }
        if f_hi.abs() < f_lo.abs() {
            lo = hi;
            f_lo = f_hi;
        }
    }
    Ok(AspectRatioRoot {
        alpha: lo,
        residual: f_lo.abs(),
        multiple_roots,
    })
}

pub fn aspect_ratio_with(beta: f64, relation: AspectRelation) -> Result<AspectRatioRoot> {
    check_oblate_beta(beta)?;
    bracketed_root(beta, |a| aspect_ratio_residual(a, beta, relation))
}

/// Aspect ratio α ∈ (0, 1) of the oblate cloud for shape parameter β.
pub fn aspect_ratio_from_beta(beta: f64) -> Result<AspectRatioRoot> {
    aspect_ratio_with(beta, AspectRelation::SignRestored)
}

/// Axial depolarization factor of a uniform oblate spheroid, arctangent form.
pub fn axial_depolarization(alpha: f64) -> f64 {
    // e'² = 1/α² − 1
    let ep = ((1.0 - alpha) * (1.0 + alpha)).sqrt() / alpha;
    if ep < 1e-3 {
        // (e' − atan e')/e'³ = 1/3 − e'²/5 + e'⁴/7 − …
        let e2 = ep * ep;
        (1.0 + e2) * (1.0 / 3.0 - e2 / 5.0 + e2 * e2 / 7.0)
    } else {
        (1.0 + ep * ep) / (ep * ep * ep) * (ep - ep.atan())
    }
}

/// β as a function of α through `A_⊥ = (1 − A_z)/2`, `β = A_⊥/A_z`.
pub fn beta_from_depolarization(alpha: f64) -> f64 {
    let a_z = axial_depolarization(alpha);
    (1.0 - a_z) / (2.0 * a_z)
}

/// Independent aspect-ratio solution from uniform-spheroid depolarization factors.
pub fn oracle_aspect_ratio_depolarization(beta: f64) -> Result<AspectRatioRoot> {
    check_oblate_beta(beta)?;
    bracketed_root(beta, |a| beta_from_depolarization(a) - beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeParams {
    pub beta: f64,
    pub alpha: f64,
    pub k0: f64,
    pub k1: f64,
}

pub fn shape_params(beta: f64) -> Result<ShapeParams> {
    let alpha = aspect_ratio_from_beta(beta)?.alpha;
    let k0_sq = (1.0 - alpha) * (1.0 + alpha);
    Ok(ShapeParams {
        beta,
        alpha,
        k0: k0_sq.sqrt(),
        k1: 3.0 * alpha / k0_sq,
    })
}

/// Coulomb-versus-trap length scale `(q²/(4πε₀ m ω_z²))^(1/3)`, m.
pub fn coulomb_length_scale(species: &IonSpecies, omega_z: f64) -> f64 {
    (species.charge * species.charge
        / (4.0 * PI * VACUUM_PERMITTIVITY * species.mass * omega_z * omega_z))
        .cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpheroidGeometry {
    /// Equatorial radius, m.
    pub r_cl: f64,
    /// Axial half-extent, m.
    pub z_cl: f64,
    /// Number density, m⁻³.
    pub density_n: f64,
    pub ion_count: f64,
    /// Length scale, m.
    pub a0: f64,
}

impl SpheroidGeometry {
    pub fn alpha(&self) -> f64 {
        self.z_cl / self.r_cl
    }

    /// `(4/3) π n z_cl r_cl²`
    pub fn enclosed_ions(&self) -> f64 {
        4.0 / 3.0 * PI * self.density_n * self.z_cl * self.r_cl * self.r_cl
    }
}

/// `r_cl = a₀ [3/(2β+1) · N/α]^(1/3)`, `z_cl = α r_cl`, density from the uniform-spheroid count.
pub fn spheroid_dimensions(
    ion_count: f64,
    alpha: f64,
    beta: f64,
    omega_z: f64,
    species: &IonSpecies,
) -> Result<SpheroidGeometry> {
    if !(ion_count >= 1.0) {
        return Err(Error::invalid("ion_count", "need at least one ion"));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    if alpha >= 1.0 {
        return Err(Error::invalid("alpha", "prolate or spherical clouds are not modelled"));
    }
    if !(beta > -0.5) || !(omega_z > 0.0) {
        return Err(Error::invalid("beta", "requires 2 beta + 1 > 0 and omega_z > 0"));
    }
    let a0 = coulomb_length_scale(species, omega_z);
    let r_cl = a0 * (3.0 / (2.0 * beta + 1.0) * ion_count / alpha).cbrt();
    let z_cl = alpha * r_cl;
    let density_n = 3.0 * ion_count / (4.0 * PI * z_cl * r_cl * r_cl);
    Ok(SpheroidGeometry {
        r_cl,
        z_cl,
        density_n,
        ion_count,
        a0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarityReport {
    pub pass: bool,
    pub planar: bool,
    pub wall_dominated: bool,
    /// `PLANARITY_THRESHOLD − β`
    pub planarity_margin: f64,
    /// `β − δ`
    pub wall_margin: f64,
}

/// Disk-like cloud (β < 0.1) whose radial confinement beats the wall (β > δ).
pub fn planarity_check(beta: f64, delta: f64) -> PlanarityReport {
    let planarity_margin = PLANARITY_THRESHOLD - beta;
    let wall_margin = beta - delta;
    let planar = planarity_margin > 0.0;
    let wall_dominated = wall_margin > 0.0;
    PlanarityReport {
        pass: planar && wall_dominated,
        planar,
        wall_dominated,
        planarity_margin,
        wall_margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeSweepRow {
    pub omega_r_rad_s: f64,
    pub omega_r_over_omega_z: f64,
    pub normalized_freq: f64,
    pub beta: f64,
    /// `None` where β ≥ 1 (prolate, not modelled).
    pub alpha: Option<f64>,
    pub r_cl_m: Option<f64>,
    pub z_cl_m: Option<f64>,
}

/// Shape of an `ion_count` cloud at each rotation frequency of the grid.
pub fn shape_sweep(
    species: &IonSpecies,
    trap: &TrapConfig,
    omega_r_grid: &[f64],
    ion_count: f64,
) -> Result<Vec<ShapeSweepRow>> {
    if omega_r_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let modes = compute_modes(species, trap)?;
    omega_r_grid
        .par_iter()
        .map(|&omega_r| {
            check_window(&modes, omega_r)?;
            let beta = beta_unchecked(&modes, omega_r);
            let (alpha, r_cl, z_cl) = if beta < 1.0 {
                let alpha = aspect_ratio_from_beta(beta)?.alpha;
                let geo = spheroid_dimensions(ion_count, alpha, beta, modes.omega_z, species)?;
                (Some(alpha), Some(geo.r_cl), Some(geo.z_cl))
            } else {
                (None, None, None)
            };
            Ok(ShapeSweepRow {
                omega_r_rad_s: omega_r,
                omega_r_over_omega_z: omega_r / modes.omega_z,
                normalized_freq: normalized_frequency(&modes, omega_r),
                beta,
                alpha,
                r_cl_m: r_cl,
                z_cl_m: z_cl,
            })
        })
        .collect()
}

/// `n` rotation frequencies strictly inside the confinement window.
pub fn interior_grid(modes: &ModeFrequencies, n: usize) -> Vec<f64> {
    let (lo, hi) = (modes.omega_m, modes.omega_cap_m);
    (1..=n)
        .map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64)
        .collect()
}
