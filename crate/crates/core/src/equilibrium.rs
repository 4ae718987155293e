//! N-ion equilibrium in the frame co-rotating with the rotating wall.
//!
//! The time-independent potential is
//!
//! ```text
//! Φ = Σᵢ ½m[ω_r(ω_c − ω_r) − ω_z²/2](xᵢ² + yᵢ²) + Σᵢ ½mω_z² zᵢ²
//!   + Σᵢ ½mδω_z² (xᵢ² − yᵢ²) + Σ_{i<j} q² / (4πε₀ |rᵢ − rⱼ|)
//! ```
//!
//! with the wall axes rotated by the drive phase θ when θ ≠ 0. Each Coulomb
//! pair is counted once.
//!
//! Relaxation runs in reduced units: length `ℓ = (q²/(4πε₀ m ω_z²))^(1/3)`,
//! energy `m ω_z² ℓ²`. In these units the potential reads
//! `Σ ½[β(x²+y²) + δ(...)(x²−y²) + z²] + Σ_{i<j} 1/r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::VACUUM_PERMITTIVITY;
use crate::error::{Error, Result};
use crate::modes::ModeFrequencies;
use crate::shape::{
    aspect_ratio_from_beta, coulomb_length_scale, shape_beta, spheroid_dimensions,
    RotatingWallConfig,
};
use crate::trap::IonSpecies;

/// Below this ion count pair sums run on one thread.
const PARALLEL_THRESHOLD: usize = 96;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IonConfiguration {
    /// Rotating-frame positions, m.
    pub positions: Vec<[f64; 3]>,
}

impl IonConfiguration {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("positions", "all coordinates must be finite"));
        }
        let config = Self { positions };
        config.check_distinct()?;
        Ok(config)
    }

    pub fn ion_count(&self) -> usize {
        self.positions.len()
    }

    fn check_distinct(&self) -> Result<()> {
        for (i, a) in self.positions.iter().enumerate() {
            for (j, b) in self.positions.iter().enumerate().skip(i + 1) {
                if a == b {
                    return Err(Error::CoincidentIons { i, j });
                }
            }
        }
        Ok(())
    }
}

/// Quadratic trap coefficients in reduced units plus the SI scales.
#[derive(Debug, Clone, Copy)]
struct ReducedModel {
    /// Coefficients of ½(cxx x² + 2 cxy xy + cyy y² + z²).
    cxx: f64,
    cxy: f64,
    cyy: f64,
    length: f64,
    energy: f64,
    force: f64,
}

impl ReducedModel {
    fn new(species: &IonSpecies, modes: &ModeFrequencies, wall: &RotatingWallConfig) -> Self {
        let wz2 = modes.omega_z * modes.omega_z;
        let beta = (wall.omega_r * (modes.omega_c - wall.omega_r) - 0.5 * wz2) / wz2;
        let (s, c) = (2.0 * wall.theta).sin_cos();
        let length = coulomb_length_scale(species, modes.omega_z);
        let force = species.mass * wz2 * length;
        Self {
            cxx: beta + wall.delta * c,
            cxy: wall.delta * s,
            cyy: beta - wall.delta * c,
            length,
            energy: force * length,
            force,
        }
    }

    fn trap_energy(&self, p: &[f64; 3]) -> f64 {
        let [x, y, z] = *p;
        0.5 * (self.cxx * x * x + 2.0 * self.cxy * x * y + self.cyy * y * y + z * z)
    }

    fn energy(&self, x: &[[f64; 3]]) -> f64 {
        let n = x.len();
        let per_ion = |i: usize| -> f64 {
            let pi = x[i];
            let mut e = self.trap_energy(&pi);
            for pj in &x[i + 1..] {
                let d = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
                e += 1.0 / (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            }
            e
        };
        let terms: Vec<f64> = if n >= PARALLEL_THRESHOLD {
            (0..n).into_par_iter().map(per_ion).collect()
        } else {
            (0..n).map(per_ion).collect()
        };
        terms.iter().sum()
    }

    fn gradient(&self, x: &[[f64; 3]]) -> Vec<[f64; 3]> {
        let per_ion = |i: usize| -> [f64; 3] {
            let [px, py, pz] = x[i];
            let mut g = [
                self.cxx * px + self.cxy * py,
                self.cxy * px + self.cyy * py,
                pz,
            ];
            for (j, pj) in x.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = [px - pj[0], py - pj[1], pz - pj[2]];
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let inv3 = 1.0 / (r2 * r2.sqrt());
                g[0] -= d[0] * inv3;
                g[1] -= d[1] * inv3;
                g[2] -= d[2] * inv3;
            }
            g
        };
        if x.len() >= PARALLEL_THRESHOLD {
            (0..x.len()).into_par_iter().map(per_ion).collect()
        } else {
            (0..x.len()).map(per_ion).collect()
        }
    }

    fn reduce(&self, config: &IonConfiguration) -> Vec<[f64; 3]> {
        config
            .positions
            .iter()
            .map(|p| [p[0] / self.length, p[1] / self.length, p[2] / self.length])
            .collect()
    }

    fn restore(&self, x: &[[f64; 3]]) -> IonConfiguration {
        IonConfiguration {
            positions: x
                .iter()
                .map(|p| [p[0] * self.length, p[1] * self.length, p[2] * self.length])
                .collect(),
        }
    }
}

/// Rotating-frame potential energy of the configuration, J.
pub fn rotating_frame_potential(
    config: &IonConfiguration,
    species: &IonSpecies,
    modes: &ModeFrequencies,
    wall: &RotatingWallConfig,
) -> Result<f64> {
    config.check_distinct()?;
    let m = species.mass;
    let wz2 = modes.omega_z * modes.omega_z;
    let radial = wall.omega_r * (modes.omega_c - wall.omega_r) - 0.5 * wz2;
    let (s, c) = (2.0 * wall.theta).sin_cos();
    let coulomb = species.charge * species.charge / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);

    let mut energy = 0.0;
    for (i, &[x, y, z]) in config.positions.iter().enumerate() {
        energy += 0.5 * m * radial * (x * x + y * y);
        energy += 0.5 * m * wz2 * z * z;
        energy += 0.5 * m * wall.delta * wz2 * ((x * x - y * y) * c + 2.0 * x * y * s);
        for &[xj, yj, zj] in &config.positions[i + 1..] {
            let r = ((x - xj).powi(2) + (y - yj).powi(2) + (z - zj).powi(2)).sqrt();
            energy += coulomb / r;
        }
    }
    Ok(energy)
}

/// Force on each ion, N (negative gradient of [`rotating_frame_potential`]).
pub fn forces(
    config: &IonConfiguration,
    species: &IonSpecies,
    modes: &ModeFrequencies,
    wall: &RotatingWallConfig,
) -> Result<Vec<[f64; 3]>> {
    config.check_distinct()?;
    let model = ReducedModel::new(species, modes, wall);
    let g = model.gradient(&model.reduce(config));
    Ok(g
        .into_iter()
        .map(|g| [-g[0] * model.force, -g[1] * model.force, -g[2] * model.force])
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSearch {
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Largest single-ion displacement per step, in units of the Coulomb length.
    pub max_displacement: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 40,
            max_displacement: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationConfig {
    pub max_iterations: usize,
    /// Largest residual force component accepted at convergence, N.
    pub force_tolerance: f64,
    pub initial_seed: u64,
    pub annealing_restarts: usize,
    /// Standard deviation of the restart kicks, in units of the Coulomb length.
    pub restart_noise: f64,
    pub step_control: LineSearch,
    /// Quasi-Newton history length.
    pub history: usize,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            force_tolerance: 1e-24,
            initial_seed: 1,
            annealing_restarts: 2,
            restart_noise: 0.1,
            step_control: LineSearch::default(),
            history: 12,
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.force_tolerance > 0.0) {
            return Err(Error::invalid("force_tolerance", "must be positive"));
        }
        let ls = &self.step_control;
        if !(ls.armijo > 0.0 && ls.armijo < 0.5 && ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::invalid("step_control", "need 0 < armijo < 0.5, 0 < shrink < 1"));
        }
        if !(ls.max_displacement > 0.0) || self.history == 0 {
            return Err(Error::invalid("step_control", "need positive displacement cap and history"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub ion_count: usize,
    pub iterations: usize,
    pub restarts_used: usize,
    pub restarts_improved: usize,
    pub initial_energy_j: f64,
    pub final_energy_j: f64,
    pub max_force_n: f64,
    pub force_tolerance_n: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxed {
    pub config: IonConfiguration,
    pub report: ConvergenceReport,
}

struct Minimum {
    x: Vec<[f64; 3]>,
    energy: f64,
    max_grad: f64,
    iterations: usize,
}

fn dot(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| p[0] * q[0] + p[1] * q[1] + p[2] * q[2])
        .sum()
}

fn max_abs(a: &[[f64; 3]]) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Limited-memory BFGS with backtracking line search. Never accepts a step
/// that raises the energy beyond round-off.
/// Quasi-Newton pairs (s_k, y_k, 1/(y_k·s_k)).
type History = std::collections::VecDeque<(Vec<[f64; 3]>, Vec<[f64; 3]>, f64)>;

fn minimize(model: &ReducedModel, mut x: Vec<[f64; 3]>, tol: f64, cfg: &RelaxationConfig) -> Minimum {
    let ls = cfg.step_control;
    let mut energy = model.energy(&x);
    let mut grad = model.gradient(&x);
    let mut history = History::with_capacity(cfg.history);
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        let gmax = max_abs(&grad);
        if gmax < tol {
            break;
        }
        iterations += 1;

        // two-loop recursion
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                for k in 0..3 {
                    qi[k] -= a * yi[k];
                }
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().flatten().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                for k in 0..3 {
                    qi[k] += (a - b) * si[k];
                }
            }
        }
        let mut dir: Vec<[f64; 3]> = q.iter().map(|v| [-v[0], -v[1], -v[2]]).collect();
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = grad.iter().map(|v| [-v[0], -v[1], -v[2]]).collect();
            slope = -dot(&grad, &grad);
        }

        let dmax = dir
            .iter()
            .map(|d| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
            .fold(0.0, f64::max);
        let mut t = if dmax > ls.max_displacement {
            ls.max_displacement / dmax
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..=ls.max_backtracks {
            let trial: Vec<[f64; 3]> = x
                .iter()
                .zip(&dir)
                .map(|(p, d)| [p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2]])
                .collect();
            let e_trial = model.energy(&trial);
            let armijo = e_trial <= energy + ls.armijo * t * slope;
            // round-off regime: energy flat to machine precision, accept if the
            // directional derivative shows progress
            let flat = !armijo
                && e_trial.is_finite()
                && (e_trial - energy).abs() <= 1e-13 * energy.abs().max(1.0);
            if armijo || flat {
                let g_trial = model.gradient(&trial);
                if armijo || dot(&g_trial, &dir) >= 0.9 * slope && max_abs(&g_trial) < gmax {
                    accepted = Some((trial, e_trial, g_trial));
                    break;
                }
            }
            t *= ls.shrink;
        }

        let Some((trial, e_trial, g_trial)) = accepted else {
            if history.is_empty() {
                // steepest descent stalled: nothing more to gain
                break;
            }
            history.clear();
            continue;
        };

        let s: Vec<[f64; 3]> = trial
            .iter()
            .zip(&x)
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
            .collect();
        let y: Vec<[f64; 3]> = g_trial
            .iter()
            .zip(&grad)
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
            .collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == cfg.history {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = trial;
        energy = e_trial.min(energy);
        grad = g_trial;
    }

    Minimum {
        max_grad: max_abs(&grad),
        energy: model.energy(&x),
        x,
        iterations,
    }
}

/// Jittered hexagonal patch sized to the cold-fluid radius of an N-ion cloud, reduced units.
fn initial_patch(n: usize, beta: f64, model: &ReducedModel, species: &IonSpecies, modes: &ModeFrequencies, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let r_cl = if beta > 0.0 && beta < 1.0 {
        aspect_ratio_from_beta(beta)
            .ok()
            .and_then(|root| spheroid_dimensions(n as f64, root.alpha, beta, modes.omega_z, species).ok())
            .map(|g| g.r_cl / model.length)
    } else {
        None
    }
    .unwrap_or_else(|| (n as f64).sqrt());
    let spacing = if n > 1 {
        r_cl * (2.0 * std::f64::consts::PI / (3f64.sqrt() * n as f64)).sqrt()
    } else {
        1.0
    };

    let k = ((n as f64).sqrt() as i64) + 2;
    let mut sites: Vec<(f64, f64)> = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let x = spacing * (i as f64 + 0.5 * j as f64);
            let y = spacing * (0.5 * 3f64.sqrt() * j as f64);
            sites.push((x, y));
        }
    }
    sites.sort_by(|a, b| {
        (a.0 * a.0 + a.1 * a.1)
            .total_cmp(&(b.0 * b.0 + b.1 * b.1))
            .then(a.1.atan2(a.0).total_cmp(&b.1.atan2(b.0)))
    });
    let jitter = 0.05 * spacing;
    sites
        .into_iter()
        .take(n)
        .map(|(x, y)| {
            [
                x + jitter * rng.random_range(-1.0..1.0),
                y + jitter * rng.random_range(-1.0..1.0),
                jitter * rng.random_range(-1.0..1.0),
            ]
        })
        .collect()
}

fn check_relaxable(species: &IonSpecies, modes: &ModeFrequencies, wall: &RotatingWallConfig) -> Result<f64> {
    let _ = species;
    let beta = shape_beta(modes, wall.omega_r)?;
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", "radial confinement must be positive"));
    }
    if !(beta > wall.delta) {
        return Err(Error::invalid(
            "delta",
            format!("wall strength {} must stay below beta = {beta}", wall.delta),
        ));
    }
    Ok(beta)
}

/// Relaxes `n` ions from a seeded hexagonal start.
pub fn relax(
    n: usize,
    species: &IonSpecies,
    modes: &ModeFrequencies,
    wall: &RotatingWallConfig,
    cfg: &RelaxationConfig,
) -> Result<Relaxed> {
    if n == 0 {
        return Err(Error::invalid("ion_count", "need at least one ion"));
    }
    let beta = check_relaxable(species, modes, wall)?;
    let model = ReducedModel::new(species, modes, wall);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.initial_seed);
    let start = initial_patch(n, beta, &model, species, modes, &mut rng);
    relax_reduced(model, start, cfg, &mut rng)
}

/// Relaxes a given starting configuration.
pub fn relax_from(
    start: &IonConfiguration,
    species: &IonSpecies,
    modes: &ModeFrequencies,
    wall: &RotatingWallConfig,
    cfg: &RelaxationConfig,
) -> Result<Relaxed> {
    if start.ion_count() == 0 {
        return Err(Error::invalid("ion_count", "need at least one ion"));
    }
    start.check_distinct()?;
    check_relaxable(species, modes, wall)?;
    let model = ReducedModel::new(species, modes, wall);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.initial_seed);
    relax_reduced(model, model.reduce(start), cfg, &mut rng)
}

fn relax_reduced(
    model: ReducedModel,
    start: Vec<[f64; 3]>,
    cfg: &RelaxationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Relaxed> {
    cfg.validate()?;
    let n = start.len();
    let tol = cfg.force_tolerance / model.force;
    let initial_energy = model.energy(&start);

    let mut best = minimize(&model, start, tol, cfg);
    let mut iterations = best.iterations;
    let mut improved = 0;
    let normal = rand_distr_normal();
    for _ in 0..cfg.annealing_restarts {
        let kicked: Vec<[f64; 3]> = best
            .x
            .iter()
            .map(|p| {
                [
                    p[0] + cfg.restart_noise * normal(rng),
                    p[1] + cfg.restart_noise * normal(rng),
                    p[2] + cfg.restart_noise * normal(rng),
                ]
            })
            .collect();
        let candidate = minimize(&model, kicked, tol, cfg);
        iterations += candidate.iterations;
        let better_energy = candidate.energy < best.energy - 1e-12 * best.energy.abs();
        let best_converged = best.max_grad < tol;
        let cand_converged = candidate.max_grad < tol;
        if (cand_converged && (!best_converged || better_energy))
            || (!best_converged && !cand_converged && candidate.max_grad < best.max_grad)
        {
            best = candidate;
            improved += 1;
        }
    }

    let report = ConvergenceReport {
        converged: best.max_grad < tol,
        ion_count: n,
        iterations,
        restarts_used: cfg.annealing_restarts,
        restarts_improved: improved,
        initial_energy_j: initial_energy * model.energy,
        final_energy_j: best.energy * model.energy,
        max_force_n: best.max_grad * model.force,
        force_tolerance_n: cfg.force_tolerance,
        seed: cfg.initial_seed,
    };
    let config = model.restore(&best.x);
    if report.converged {
        Ok(Relaxed { config, report })
    } else {
        Err(Error::NotConverged {
            report,
            best: Box::new(config),
        })
    }
}

/// Box–Muller standard normal sampler.
fn rand_distr_normal() -> impl Fn(&mut ChaCha8Rng) -> f64 {
    |rng: &mut ChaCha8Rng| {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Equilibrium separation of two ions in the plane, m: `m ω_⊥² d/2 = q²/(4πε₀ d²)`
/// along the weaker in-plane axis (`ω_⊥² = (β − δ) ω_z²`).
pub fn two_ion_spacing(species: &IonSpecies, modes: &ModeFrequencies, wall: &RotatingWallConfig) -> Result<f64> {
    let beta = check_relaxable(species, modes, wall)?;
    let w_perp2 = (beta - wall.delta) * modes.omega_z * modes.omega_z;
    let coulomb = species.charge * species.charge / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);
    Ok((2.0 * coulomb / (species.mass * w_perp2)).cbrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacingStats {
    pub median_m: f64,
    pub mean_m: f64,
    pub std_m: f64,
    pub min_m: f64,
    pub max_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredShape {
    /// z-extent / r-extent from the extremal ions.
    pub alpha_md: f64,
    /// Uniform-spheroid estimate from second moments: √(5⟨z²⟩) / √(5⟨r²⟩/2).
    pub alpha_moments: f64,
    /// Largest radial distance from the centroid, m.
    pub r_cl_md: f64,
    /// Largest |z| from the centroid, m.
    pub z_extent_md: f64,
    pub r_cl_moments: f64,
    pub z_cl_moments: f64,
    /// Nearest-neighbour distances.
    pub spacing: SpacingStats,
    /// Fewer than 20 ions.
    pub low_confidence: bool,
}

pub fn measured_shape(config: &IonConfiguration) -> MeasuredShape {
    let n = config.ion_count();
    let nf = n as f64;
    let mut c = [0.0; 3];
    for p in &config.positions {
        for k in 0..3 {
            c[k] += p[k] / nf;
        }
    }
    let rel: Vec<[f64; 3]> = config
        .positions
        .iter()
        .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
        .collect();
    let r_max = rel.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let z_max = rel.iter().map(|p| p[2].abs()).fold(0.0, f64::max);
    let r2 = rel.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / nf;
    let z2 = rel.iter().map(|p| p[2] * p[2]).sum::<f64>() / nf;
    let r_cl_moments = (2.5 * r2).sqrt();
    let z_cl_moments = (5.0 * z2).sqrt();

    let nearest: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = rel[i];
            rel.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| {
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let spacing = if n >= 2 {
        let mut sorted = nearest.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let mean = sorted.iter().sum::<f64>() / nf;
        let var = sorted.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / nf;
        SpacingStats {
            median_m: median,
            mean_m: mean,
            std_m: var.sqrt(),
            min_m: sorted[0],
            max_m: sorted[n - 1],
        }
    } else {
        SpacingStats {
            median_m: f64::NAN,
            mean_m: f64::NAN,
            std_m: f64::NAN,
            min_m: f64::NAN,
            max_m: f64::NAN,
        }
    };
    MeasuredShape {
        alpha_md: if r_max > 0.0 { z_max / r_max } else { f64::NAN },
        alpha_moments: if r_cl_moments > 0.0 {
            z_cl_moments / r_cl_moments
        } else {
            f64::NAN
        },
        r_cl_md: r_max,
        z_extent_md: z_max,
        r_cl_moments,
        z_cl_moments,
        spacing,
        low_confidence: n < 20,
    }
}
