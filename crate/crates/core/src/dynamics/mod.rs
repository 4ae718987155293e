//! Single-ion equation of motion with Coriolis, quadrupole electric and
//! Lorentz forces:
//!
//! ```text
//! a = −2 Ω × v + (qV / 2mz₀²)·(x, y, −2z) + (q/m) v × B
//! ```
//!
//! Sign convention: the electric term is the negative gradient of
//! `qV(2z² − x² − y²)/(4z₀²)` (restoring along z, defocusing radially), and
//! the Lorentz force is `q v × B` with `B = B ẑ`. For a positive ion both
//! radial modes then circulate clockwise seen from +z, the magnetron motion
//! following the E × B drift.

mod spectrum;

pub use spectrum::{extract_spectrum, Coordinate, Spectrum, SpectralPeak};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modes::ModeFrequencies;
use crate::trap::{IonSpecies, RotationInput, TrapConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ParticleState {
    /// m
    pub position: [f64; 3],
    /// m/s
    pub velocity: [f64; 3],
}

impl ParticleState {
    pub fn new(position: [f64; 3], velocity: [f64; 3]) -> Self {
        Self { position, velocity }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.velocity.iter())
            .all(|c| c.is_finite())
    }

    /// Ion displaced along z and released from rest.
    pub fn axial_offset(z: f64) -> Self {
        Self::new([0.0, 0.0, z], [0.0; 3])
    }

    /// Superposition of pure magnetron, modified-cyclotron and axial motion at t = 0:
    /// both radial circles start on +x and circulate in the sense fixed by the charge sign.
    pub fn from_mode_amplitudes(
        species: &IonSpecies,
        modes: &ModeFrequencies,
        magnetron_radius: f64,
        cyclotron_radius: f64,
        axial_amplitude: f64,
    ) -> Self {
        let sense = species.charge.signum();
        let vy = -sense
            * (modes.omega_m * magnetron_radius + modes.omega_cap_m * cyclotron_radius);
        Self::new(
            [magnetron_radius + cyclotron_radius, 0.0, axial_amplitude],
            [0.0, vy, 0.0],
        )
    }

    /// Pure magnetron orbit of the given radius (cold cyclotron and axial modes).
    pub fn magnetron_orbit(species: &IonSpecies, modes: &ModeFrequencies, radius: f64) -> Self {
        Self::from_mode_amplitudes(species, modes, radius, 0.0, 0.0)
    }

    fn axpy(&self, h: f64, d: &ParticleState) -> ParticleState {
        let mut out = *self;
        for i in 0..3 {
            out.position[i] += h * d.position[i];
            out.velocity[i] += h * d.velocity[i];
        }
        out
    }

    fn radius_xy(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Precomputed force coefficients for one (species, trap, rotation) triple.
#[derive(Debug, Clone, Copy)]
struct ForceModel {
    /// qV / (2 m z₀²)
    electric: f64,
    /// q/m · B (vector along z)
    lorentz: [f64; 3],
    omega: [f64; 3],
}

impl ForceModel {
    fn new(species: &IonSpecies, trap: &TrapConfig, rot: &RotationInput) -> Self {
        let qm = species.charge_to_mass();
        let z0 = trap.char_length_z0;
        Self {
            electric: qm.abs() * trap.trap_voltage / (2.0 * z0 * z0),
            lorentz: [0.0, 0.0, qm * trap.b_field],
            omega: rot.vector(),
        }
    }

    #[inline]
    fn derivative(&self, s: &ParticleState) -> ParticleState {
        let [x, y, z] = s.position;
        let v = s.velocity;
        let coriolis = cross(self.omega, v);
        let lorentz = cross(v, self.lorentz);
        let e = self.electric;
        ParticleState {
            position: v,
            velocity: [
                -2.0 * coriolis[0] + e * x + lorentz[0],
                -2.0 * coriolis[1] + e * y + lorentz[1],
                -2.0 * coriolis[2] - 2.0 * e * z + lorentz[2],
            ],
        }
    }
}

/// Time derivative (velocity, acceleration) of the single-ion state.
pub fn eom_derivative(
    state: &ParticleState,
    species: &IonSpecies,
    trap: &TrapConfig,
    rot: &RotationInput,
) -> ParticleState {
    ForceModel::new(species, trap, rot).derivative(state)
}

/// Kinetic plus electrostatic energy in the lab frame, J.
pub fn energy(state: &ParticleState, species: &IonSpecies, trap: &TrapConfig) -> f64 {
    let [x, y, z] = state.position;
    let v2: f64 = state.velocity.iter().map(|c| c * c).sum();
    let z0 = trap.char_length_z0;
    0.5 * species.mass * v2
        + species.charge.abs() * trap.trap_voltage * (2.0 * z * z - x * x - y * y)
            / (4.0 * z0 * z0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegratorMethod {
    Rk4,
    /// Dormand–Prince 5(4). `abs_tol` is relative to the initial radial/axial
    /// extent of the orbit (and that extent times the fastest mode frequency
    /// for velocities).
    Rk45 { rel_tol: f64, abs_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    /// s; initial step for RK45.
    pub time_step: f64,
    pub total_time: f64,
    pub method: IntegratorMethod,
    pub sample_stride: usize,
}

impl IntegratorConfig {
    pub fn rk4(time_step: f64, total_time: f64, sample_stride: usize) -> Self {
        Self {
            time_step,
            total_time,
            method: IntegratorMethod::Rk4,
            sample_stride,
        }
    }

    /// Fixed-step RK4 with `steps_per_period` steps per modified-cyclotron period.
    pub fn for_modes(
        modes: &ModeFrequencies,
        steps_per_period: usize,
        total_time: f64,
        sample_stride: usize,
    ) -> Self {
        Self::rk4(
            modes.fastest_period() / steps_per_period as f64,
            total_time,
            sample_stride,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_step.is_finite() && self.time_step > 0.0) {
            return Err(Error::invalid("time_step", "must be positive"));
        }
        if !(self.total_time.is_finite() && self.total_time >= self.time_step) {
            return Err(Error::invalid("total_time", "must be at least one time step"));
        }
        if self.sample_stride == 0 {
            return Err(Error::invalid("sample_stride", "must be at least 1"));
        }
        if let IntegratorMethod::Rk45 { rel_tol, abs_tol } = self.method {
            for (name, tol) in [("rel_tol", rel_tol), ("abs_tol", abs_tol)] {
                if !(tol > 0.0 && tol <= 1e-2) {
                    return Err(Error::invalid(name, "must lie in (0, 1e-2]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMetadata {
    pub species: IonSpecies,
    pub trap: TrapConfig,
    pub rotation: RotationInput,
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ParticleState>,
    pub metadata: TrajectoryMetadata,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Energy at every sample. Only defined for inertial (Ω = 0) runs.
    pub fn energies(&self) -> Result<Vec<f64>> {
        if !self.metadata.rotation.is_zero() {
            return Err(Error::invalid(
                "rotation",
                "energy is not conserved for a trajectory with rotation input",
            ));
        }
        let m = &self.metadata;
        Ok(self
            .states
            .iter()
            .map(|s| energy(s, &m.species, &m.trap))
            .collect())
    }

    /// Maximum |E − E₀| / |E₀| over the run.
    pub fn relative_energy_drift(&self) -> Result<f64> {
        let e = self.energies()?;
        let e0 = e[0];
        Ok(e.iter().map(|v| (v - e0).abs()).fold(0.0, f64::max) / e0.abs())
    }

    /// Mean of the x and y extents of the orbit.
    pub fn xy_diameter(&self) -> f64 {
        let extent = |i: usize| {
            let (lo, hi) = self
                .states
                .iter()
                .map(|s| s.position[i])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            hi - lo
        };
        0.5 * (extent(0) + extent(1))
    }

    fn tail(&self, discard_fraction: f64) -> usize {
        ((self.len() as f64) * discard_fraction.clamp(0.0, 1.0)).floor() as usize
    }

    /// Peak |z| after dropping the first `discard_fraction` of the samples.
    pub fn peak_z_amplitude(&self, discard_fraction: f64) -> f64 {
        self.states[self.tail(discard_fraction)..]
            .iter()
            .map(|s| s.position[2].abs())
            .fold(0.0, f64::max)
    }

    /// Amplitude of the z component oscillating at `omega` (rad/s), by
    /// demodulation over a whole number of periods after the discarded lead-in.
    pub fn z_component_amplitude(&self, omega: f64, discard_fraction: f64) -> f64 {
        let start = self.tail(discard_fraction);
        let t0 = self.times[start];
        let period = 2.0 * std::f64::consts::PI / omega;
        let span = self.times[self.len() - 1] - t0;
        let t_end = t0 + (span / period).floor().max(1.0) * period;
        let (mut c, mut s, mut n) = (0.0, 0.0, 0usize);
        for (t, st) in self.times[start..].iter().zip(&self.states[start..]) {
            if *t >= t_end {
                break;
            }
            let ph = omega * (t - t0);
            c += st.position[2] * ph.cos();
            s += st.position[2] * ph.sin();
            n += 1;
        }
        2.0 * c.hypot(s) / n as f64
    }
}

/// Integrates the single-ion equation of motion.
pub fn integrate(
    state0: ParticleState,
    species: &IonSpecies,
    trap: &TrapConfig,
    rot: &RotationInput,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    crate::trap::validate_stability(species, trap).into_result()?;
    if !state0.is_finite() {
        return Err(Error::NonFinite { time: 0.0 });
    }
    let model = ForceModel::new(species, trap, rot);
    let metadata = TrajectoryMetadata {
        species: species.clone(),
        trap: *trap,
        rotation: *rot,
        integrator: *cfg,
    };
    let (times, states) = match cfg.method {
        IntegratorMethod::Rk4 => run_rk4(&model, state0, cfg)?,
        IntegratorMethod::Rk45 { rel_tol, abs_tol } => {
            let modes = crate::modes::compute_modes(species, trap)?;
            let length = state0
                .radius_xy()
                .max(state0.position[2].abs())
                .max(1e-9);
            let scale = ErrorScale {
                rel_tol,
                abs_position: abs_tol * length,
                abs_velocity: abs_tol * length * modes.omega_cap_m,
            };
            run_dopri(&model, state0, cfg, scale)?
        }
    };
    Ok(Trajectory {
        times,
        states,
        metadata,
    })
}

fn rk4_step(model: &ForceModel, s: &ParticleState, h: f64) -> ParticleState {
    let k1 = model.derivative(s);
    let k2 = model.derivative(&s.axpy(0.5 * h, &k1));
    let k3 = model.derivative(&s.axpy(0.5 * h, &k2));
    let k4 = model.derivative(&s.axpy(h, &k3));
    let mut out = *s;
    for i in 0..3 {
        out.position[i] += h / 6.0
            * (k1.position[i] + 2.0 * k2.position[i] + 2.0 * k3.position[i] + k4.position[i]);
        out.velocity[i] += h / 6.0
            * (k1.velocity[i] + 2.0 * k2.velocity[i] + 2.0 * k3.velocity[i] + k4.velocity[i]);
    }
    out
}

type Samples = (Vec<f64>, Vec<ParticleState>);

fn run_rk4(model: &ForceModel, state0: ParticleState, cfg: &IntegratorConfig) -> Result<Samples> {
    let h = cfg.time_step;
    let steps = (cfg.total_time / h).round() as usize;
    let n_samples = steps / cfg.sample_stride + 1;
    let mut times = Vec::with_capacity(n_samples);
    let mut states = Vec::with_capacity(n_samples);
    times.push(0.0);
    states.push(state0);
    let mut s = state0;
    for k in 1..=steps {
        s = rk4_step(model, &s, h);
        if k % cfg.sample_stride == 0 {
            let t = k as f64 * h;
            if !s.is_finite() {
                return Err(Error::NonFinite { time: t });
            }
            times.push(t);
            states.push(s);
        }
    }
    if !s.is_finite() {
        return Err(Error::NonFinite {
            time: steps as f64 * h,
        });
    }
    Ok((times, states))
}

#[derive(Debug, Clone, Copy)]
struct ErrorScale {
    rel_tol: f64,
    abs_position: f64,
    abs_velocity: f64,
}

// Dormand–Prince 5(4) tableau. The force law is autonomous, so the nodes c_i never appear.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (fifth minus fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(s: &ParticleState, h: f64, terms: &[(f64, &ParticleState)]) -> ParticleState {
    let mut out = *s;
    for (w, k) in terms {
        for i in 0..3 {
            out.position[i] += h * w * k.position[i];
            out.velocity[i] += h * w * k.velocity[i];
        }
    }
    out
}

fn run_dopri(
    model: &ForceModel,
    state0: ParticleState,
    cfg: &IntegratorConfig,
    scale: ErrorScale,
) -> Result<Samples> {
    let mut times = vec![0.0];
    let mut states = vec![state0];
    let mut t = 0.0;
    let mut s = state0;
    let mut h = cfg.time_step;
    let mut accepted = 0usize;
    let mut k1 = model.derivative(&s);
    let end = cfg.total_time;

    while t < end {
        if h <= 16.0 * f64::EPSILON * t.abs().max(cfg.time_step) {
            return Err(Error::StepUnderflow { time: t });
        }
        let last = t + h >= end;
        let h_try = if last { end - t } else { h };

        let k2 = model.derivative(&combine(&s, h_try, &[(A21, &k1)]));
        let k3 = model.derivative(&combine(&s, h_try, &[(A31, &k1), (A32, &k2)]));
        let k4 = model.derivative(&combine(&s, h_try, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = model.derivative(&combine(
            &s,
            h_try,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        ));
        let k6 = model.derivative(&combine(
            &s,
            h_try,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let next = combine(
            &s,
            h_try,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let k7 = model.derivative(&next);
        let err_state = combine(
            &ParticleState::default(),
            h_try,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );

        let mut sum = 0.0;
        for i in 0..3 {
            let sp = scale.abs_position
                + scale.rel_tol * s.position[i].abs().max(next.position[i].abs());
            let sv = scale.abs_velocity
                + scale.rel_tol * s.velocity[i].abs().max(next.velocity[i].abs());
            sum += (err_state.position[i] / sp).powi(2) + (err_state.velocity[i] / sv).powi(2);
        }
        if !next.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        // an overflowing error norm is a rejection, not a failure
        let err = match (sum / 6.0).sqrt() {
            e if e.is_nan() => f64::INFINITY,
            e => e,
        };

        if err <= 1.0 {
            t = if last { end } else { t + h_try };
            s = next;
            k1 = k7;
            accepted += 1;
            if accepted.is_multiple_of(cfg.sample_stride) || last {
                times.push(t);
                states.push(s);
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if !(last && err <= 1.0) {
            h = h_try * factor;
        }
    }
    Ok((times, states))
}
