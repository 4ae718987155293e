//! Physical constants (CODATA 2018 exact/recommended values, SI units).

use serde::Serialize;

/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Reduced Planck constant, J s.
pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;
/// Euler's number. Used for the optimal-duration decoherence factor e^{Γτ} at Γτ = 1.
pub const EULER_NUMBER: f64 = std::f64::consts::E;

/// Snapshot of the pinned constants, printed by `iongyro --constants`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub elementary_charge: f64,
    pub atomic_mass_unit: f64,
    pub vacuum_permittivity: f64,
    pub reduced_planck: f64,
    pub euler_number: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
        elementary_charge: ELEMENTARY_CHARGE,
        atomic_mass_unit: ATOMIC_MASS_UNIT,
        vacuum_permittivity: VACUUM_PERMITTIVITY,
        reduced_planck: REDUCED_PLANCK,
        euler_number: EULER_NUMBER,
    };

    /// Coulomb constant 1/(4πε₀).
    pub fn coulomb_constant(&self) -> f64 {
        1.0 / (4.0 * std::f64::consts::PI * self.vacuum_permittivity)
    }

    pub fn as_rows(&self) -> [(&'static str, f64, &'static str); 5] {
        [
            ("elementary_charge", self.elementary_charge, "C"),
            ("atomic_mass_unit", self.atomic_mass_unit, "kg"),
            ("vacuum_permittivity", self.vacuum_permittivity, "F/m"),
            ("reduced_planck", self.reduced_planck, "J s"),
            ("euler_number", self.euler_number, "1"),
        ]
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}
