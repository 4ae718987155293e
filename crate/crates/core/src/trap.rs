//! Ion species, static trap fields and the stability condition.
//!
//! Conventions used throughout the crate:
//!
//! * the magnetic field points along +z;
//! * the trap potential is `V (2z² − x² − y²) / (4 z₀²)`, so the axial
//!   spring constant is `k_z = m ω_z² = q V / z₀²`;
//! * `k_z` is always the mechanical spring constant in N/m.

use serde::Serialize;

use crate::constants::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IonSpecies {
    pub name: String,
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
}

impl IonSpecies {
    pub fn new(name: impl Into<String>, mass: f64, charge: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
        }
        if !(charge.is_finite() && charge != 0.0) {
            return Err(Error::invalid("charge", "must be finite and non-zero"));
        }
        Ok(Self {
            name: name.into(),
            mass,
            charge,
        })
    }

    /// ⁴⁰Ca⁺ with the bare 39.9626 u atomic mass (no electron-mass correction).
    pub fn calcium40() -> Self {
        Self {
            name: "Ca+".to_string(),
            mass: 39.9626 * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
        }
    }

    /// Looks up a built-in species by label.
    pub fn builtin(label: &str) -> Option<Self> {
        match label.to_ascii_lowercase().as_str() {
            "ca" | "ca+" | "ca40" | "40ca+" | "calcium" => Some(Self::calcium40()),
            _ => None,
        }
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapConfig {
    /// Axial magnetic field, T.
    pub b_field: f64,
    /// Trap voltage, V.
    pub trap_voltage: f64,
    /// Characteristic trap length z₀, m.
    pub char_length_z0: f64,
}

impl TrapConfig {
    pub fn new(b_field: f64, trap_voltage: f64, char_length_z0: f64) -> Result<Self> {
        for (name, v) in [
            ("b_field", b_field),
            ("trap_voltage", trap_voltage),
            ("char_length_z0", char_length_z0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(Self {
            b_field,
            trap_voltage,
            char_length_z0,
        })
    }

    pub fn with_voltage(&self, trap_voltage: f64) -> Result<Self> {
        Self::new(self.b_field, trap_voltage, self.char_length_z0)
    }

    pub fn with_b_field(&self, b_field: f64) -> Result<Self> {
        Self::new(b_field, self.trap_voltage, self.char_length_z0)
    }
}

/// Input angular velocity about the x axis, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RotationInput {
    pub omega_x: f64,
}

impl RotationInput {
    pub fn new(omega_x: f64) -> Result<Self> {
        if !omega_x.is_finite() {
            return Err(Error::invalid("omega_x", "must be finite"));
        }
        Ok(Self { omega_x })
    }

    pub fn is_zero(&self) -> bool {
        self.omega_x == 0.0
    }

    pub fn vector(&self) -> [f64; 3] {
        [self.omega_x, 0.0, 0.0]
    }
}

/// Mechanical axial spring constant `k_z = q V / z₀²` (N/m), so that `ω_z = √(k_z/m)`.
///
/// The charge enters with its magnitude; for negative ions the trap voltage
/// sign is assumed flipped accordingly.
pub fn axial_spring_constant(species: &IonSpecies, trap: &TrapConfig) -> f64 {
    species.charge.abs() * trap.trap_voltage / (trap.char_length_z0 * trap.char_length_z0)
}

pub fn cyclotron_angular_frequency(species: &IonSpecies, trap: &TrapConfig) -> f64 {
    species.charge.abs() * trap.b_field / species.mass
}

pub fn axial_angular_frequency(species: &IonSpecies, trap: &TrapConfig) -> f64 {
    (axial_spring_constant(species, trap) / species.mass).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub omega_z: f64,
    /// ω_c/√2, rad/s.
    pub limit: f64,
    /// `limit − omega_z`, rad/s. Non-positive when unstable.
    pub margin: f64,
}

impl StabilityReport {
    pub fn into_result(self) -> Result<Self> {
        if self.stable {
            Ok(self)
        } else {
            Err(Error::Unstable {
                omega_z: self.omega_z,
                limit: self.limit,
            })
        }
    }
}

/// Stable trapping requires `ω_z < ω_c/√2`.
pub fn validate_stability(species: &IonSpecies, trap: &TrapConfig) -> StabilityReport {
    let omega_z = axial_angular_frequency(species, trap);
    let limit = cyclotron_angular_frequency(species, trap) / std::f64::consts::SQRT_2;
    let margin = limit - omega_z;
    StabilityReport {
        stable: margin > 0.0,
        omega_z,
        limit,
        margin,
    }
}

/// Voltage at which `ω_z = ω_c/√2`: `V = |q| B² z₀² / (2m)`.
pub fn stability_edge_voltage(species: &IonSpecies, b_field: f64, z0: f64) -> f64 {
    species.charge.abs() * b_field * b_field * z0 * z0 / (2.0 * species.mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ca() -> IonSpecies {
        IonSpecies::calcium40()
    }

    #[test]
    fn spring_constant_at_10v() {
        let trap = TrapConfig::new(1.0, 10.0, 0.01).unwrap();
        let k = axial_spring_constant(&ca(), &trap);
        assert_relative_eq!(k, ELEMENTARY_CHARGE * 10.0 / 1e-4, max_relative = 1e-15);
        let fz = (k / ca().mass).sqrt() / (2.0 * PI);
        assert!((fz - 78.2e3).abs() / 78.2e3 < 1e-3, "fz = {fz}");
    }

    #[test]
    fn axial_frequency_at_100v() {
        let trap = TrapConfig::new(1.0, 100.0, 0.01).unwrap();
        let fz = axial_angular_frequency(&ca(), &trap) / (2.0 * PI);
        assert!((fz - 247e3).abs() / 247e3 < 0.005, "fz = {fz}");
    }

    #[test]
    fn spring_constant_linear_in_voltage_and_independent_of_field() {
        for &b in &[0.5, 1.0, 2.0, 3.0] {
            for &v in &[1.0, 10.0, 37.0, 100.0] {
                let a = axial_spring_constant(&ca(), &TrapConfig::new(b, v, 0.01).unwrap());
                let d = axial_spring_constant(&ca(), &TrapConfig::new(b, 2.0 * v, 0.01).unwrap());
                let other_b = axial_spring_constant(&ca(), &TrapConfig::new(1.0, v, 0.01).unwrap());
                assert_relative_eq!(d, 2.0 * a, max_relative = 1e-15);
                assert_relative_eq!(a, other_b, max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn stable_at_10v() {
        let r = validate_stability(&ca(), &TrapConfig::new(1.0, 10.0, 0.01).unwrap());
        assert!(r.stable);
        assert_relative_eq!(r.limit / (2.0 * PI), 384.26e3 / 2f64.sqrt(), max_relative = 1e-4);
    }

    #[test]
    fn boundary_has_zero_margin() {
        let v = stability_edge_voltage(&ca(), 1.0, 0.01);
        assert!((v - 120.0).abs() / 120.0 < 0.01, "edge = {v}");
        let r = validate_stability(&ca(), &TrapConfig::new(1.0, v, 0.01).unwrap());
        assert!(r.margin.abs() < 1e-9 * r.limit);
        let above = validate_stability(&ca(), &TrapConfig::new(1.0, v * 1.001, 0.01).unwrap());
        assert!(!above.stable);
        assert!(above.into_result().is_err());
    }

    #[test]
    fn stability_monotone_in_voltage() {
        let mut seen_unstable = false;
        for i in 1..=300 {
            let r = validate_stability(&ca(), &TrapConfig::new(1.0, i as f64, 0.01).unwrap());
            if seen_unstable {
                assert!(!r.stable, "stable again at {i} V");
            }
            seen_unstable |= !r.stable;
        }
        assert!(seen_unstable);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(IonSpecies::new("x", 0.0, 1.0).is_err());
        assert!(IonSpecies::new("x", 1.0, 0.0).is_err());
        assert!(TrapConfig::new(0.0, 1.0, 1.0).is_err());
        assert!(TrapConfig::new(1.0, -1.0, 1.0).is_err());
        assert!(TrapConfig::new(1.0, 1.0, f64::NAN).is_err());
        assert!(RotationInput::new(f64::INFINITY).is_err());
        assert!(RotationInput::new(-3.0).is_ok());
    }
}
