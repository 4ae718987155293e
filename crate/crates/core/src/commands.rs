//! Subcommand pipelines shared by the CLI and the integration tests. Each
//! writes its data files into an output directory and returns a report.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{CloudRadius, RunConfig};
use crate::dynamics::{extract_spectrum, integrate, Coordinate, ParticleState};
use crate::equilibrium::{measured_shape, relax, ConvergenceReport, IonConfiguration, MeasuredShape};
use crate::error::{Error, Result};
use crate::modes::{compute_modes, freq_difference_sweep, ModeFrequencies, ModeFrequenciesHz};
use crate::output::{
    format_number, write_crystal_csv, write_json, write_shape_csv, write_spectrum_csv,
    write_sweep_csv, write_table, write_trajectory_csv,
};
use crate::response::{cloud_average_amplitude, z_amplitude, OscillatorParams};
use crate::sensing::{BudgetInputs, EnsembleSpec, ODFParams, SensitivityBudget};
use crate::shape::{
    aspect_ratio_from_beta, interior_grid, omega_r_for_normalized_frequency, shape_beta, shape_sweep,
    spheroid_dimensions, ShapeSweepRow,
};
use crate::trap::{stability_edge_voltage, validate_stability, RotationInput, StabilityReport, TrapConfig};

/// Fraction of each trajectory dropped before amplitude estimates.
pub const LEAD_IN_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureReport {
    pub figure: u8,
    pub files: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
}

impl FigureReport {
    fn new(figure: u8) -> Self {
        Self {
            figure,
            files: Vec::new(),
            metrics: BTreeMap::new(),
            checks: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn file(&mut self, path: &Path) {
        self.files.push(path.display().to_string());
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    fn check(&mut self, name: &str, pass: bool) {
        self.checks.insert(name.to_string(), pass);
    }

    pub fn summary(&self) -> String {
        let mut s = format!("figure {}\n", self.figure);
        for f in &self.files {
            s += &format!("  wrote {f}\n");
        }
        for (k, v) in &self.metrics {
            s += &format!("  {k} = {v:.6e}\n");
        }
        for (k, v) in &self.checks {
            s += &format!("  {k}: {}\n", if *v { "ok" } else { "FAILED" });
        }
        for w in &self.warnings {
            s += &format!("  warning: {w}\n");
        }
        s
    }
}

fn voltage_tag(v: f64) -> String {
    format!("{}V", format_number(v))
}

// ---- modes ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModesReport {
    pub trap: TrapConfig,
    pub species: String,
    pub frequencies: ModeFrequenciesHz,
    pub stability: StabilityReport,
    pub stability_edge_voltage_v: f64,
}

impl ModesReport {
    pub fn summary(&self) -> String {
        let f = &self.frequencies;
        format!(
            "{} at B = {} T, V = {} V, z0 = {} m\n  magnetron           f_m  = {:>12.3} Hz\n  axial               f_z  = {:>12.3} Hz\n  modified cyclotron  f_+  = {:>12.3} Hz\n  cyclotron           f_c  = {:>12.3} Hz\n  stability edge      V    = {:>12.3} V\n",
            self.species,
            self.trap.b_field,
            self.trap.trap_voltage,
            self.trap.char_length_z0,
            f.f_m_hz,
            f.f_z_hz,
            f.f_cap_m_hz,
            f.f_c_hz,
            self.stability_edge_voltage_v
        )
    }
}

pub fn cmd_modes(cfg: &RunConfig, csv_dir: Option<&Path>) -> Result<ModesReport> {
    let species = cfg.species()?;
    let trap = cfg.trap()?;
    let modes = compute_modes(&species, &trap)?;
    let report = ModesReport {
        trap,
        species: species.name.clone(),
        frequencies: modes.hz_table(),
        stability: validate_stability(&species, &trap),
        stability_edge_voltage_v: stability_edge_voltage(&species, trap.b_field, trap.char_length_z0),
    };
    if let Some(dir) = csv_dir {
        let f = &report.frequencies;
        let mut w = csv::Writer::from_path(dir.join("modes.csv"))?;
        w.write_record(["mode", "freq_hz"])?;
        for (name, v) in [
            ("magnetron", f.f_m_hz),
            ("axial", f.f_z_hz),
            ("modified_cyclotron", f.f_cap_m_hz),
            ("cyclotron", f.f_c_hz),
        ] {
            w.write_record([name.to_string(), format_number(v)])?;
        }
        w.flush()?;
    }
    Ok(report)
}

// ---- figures 1-2 ------------------------------------------------------------

fn fig12_setup(cfg: &RunConfig) -> Result<(crate::trap::IonSpecies, TrapConfig, ModeFrequencies)> {
    let species = cfg.species()?;
    let trap = TrapConfig::new(cfg.b_field_t, cfg.fig12_trap_voltage_v, cfg.z0_m)?;
    let modes = compute_modes(&species, &trap)?;
    Ok((species, trap, modes))
}

pub fn fig1(cfg: &RunConfig, dir: &Path) -> Result<FigureReport> {
    let (species, trap, modes) = fig12_setup(cfg)?;
    let mut rep = FigureReport::new(1);
    let r = cfg.fig12_magnetron_radius_m;
    let total = cfg.fig12_magnetron_periods * 2.0 * PI / modes.omega_m;
    let traj = integrate(
        ParticleState::magnetron_orbit(&species, &modes, r),
        &species,
        &trap,
        &RotationInput::default(),
        &cfg.integrator(&modes, total)?,
    )?;
    let path = dir.join("fig1_trajectory.csv");
    write_trajectory_csv(&path, &traj)?;
    rep.file(&path);
    let diameter = traj.xy_diameter();
    rep.metric("xy_diameter_m", diameter);
    rep.metric("expected_diameter_m", 2.0 * r);
    rep.check("diameter_within_1pct", (diameter / (2.0 * r) - 1.0).abs() < 0.01);
    rep.metric("relative_energy_drift", traj.relative_energy_drift()?);

    // all three modes excited, for the spectral cross-check
    let spectral_total = 20.0 * 2.0 * PI / modes.omega_m;
    let mixed = integrate(
        ParticleState::from_mode_amplitudes(&species, &modes, r, 0.1 * r, 0.2 * r),
        &species,
        &trap,
        &RotationInput::default(),
        &cfg.integrator(&modes, spectral_total)?,
    )?;
    let spectrum = extract_spectrum(&mixed, Coordinate::Diagonal)?;
    let path = dir.join("fig1_spectrum.csv");
    write_spectrum_csv(&path, &spectrum)?;
    rep.file(&path);
    rep.metric("spectrum_resolution_hz", spectrum.resolution_hz);
    let mut peaks: Vec<f64> = spectrum.peaks.iter().take(3).map(|p| p.frequency_hz).collect();
    peaks.sort_by(f64::total_cmp);
    for (name, (closed, found)) in ["magnetron", "axial", "modified_cyclotron"]
        .iter()
        .zip([modes.f_m(), modes.f_z(), modes.f_cap_m()].into_iter().zip(peaks.iter()))
    {
        rep.metric(&format!("{name}_closed_form_hz"), closed);
        rep.metric(&format!("{name}_spectral_hz"), *found);
        rep.check(
            &format!("{name}_within_one_bin"),
            (closed - found).abs() <= spectrum.resolution_hz,
        );
    }
    if peaks.len() < 3 {
        rep.warnings
            .push(format!("expected three spectral peaks, found {}", peaks.len()));
    }
    Ok(rep)
}

pub fn fig2(cfg: &RunConfig, dir: &Path) -> Result<FigureReport> {
    let (species, trap, modes) = fig12_setup(cfg)?;
    let mut rep = FigureReport::new(2);
    let r = cfg.fig12_magnetron_radius_m;
    let omega_x = cfg.fig12_omega_x_rad_s;
    let total = cfg.fig12_magnetron_periods * 2.0 * PI / modes.omega_m;
    let traj = integrate(
        ParticleState::magnetron_orbit(&species, &modes, r),
        &species,
        &trap,
        &RotationInput::new(omega_x)?,
        &cfg.integrator(&modes, total)?,
    )?;
    let path = dir.join("fig2_trajectory.csv");
    write_trajectory_csv(&path, &traj)?;
    rep.file(&path);

    let peak = traj.peak_z_amplitude(LEAD_IN_FRACTION);
    let driven = traj.z_component_amplitude(modes.omega_m, LEAD_IN_FRACTION);
    let closed = z_amplitude(
        omega_x,
        r,
        &OscillatorParams::new(modes.omega_z, modes.omega_m, f64::INFINITY)?,
    )?
    .z_single;
    rep.metric("peak_z_m", peak);
    rep.metric("driven_z_amplitude_m", driven);
    rep.metric("closed_form_driven_z_m", closed);
    rep.check("peak_within_factor_3_of_2e-10", peak > 2e-10 / 3.0 && peak < 6e-10);
    rep.check("driven_matches_closed_form_5pct", (driven / closed - 1.0).abs() < 0.05);
    Ok(rep)
}

// ---- figure 3 ---------------------------------------------------------------

pub fn fig3(cfg: &RunConfig, dir: &Path) -> Result<FigureReport> {
    let species = cfg.species()?;
    let mut rep = FigureReport::new(3);
    let sweep = freq_difference_sweep(&species, cfg.z0_m, &cfg.fig3_b_list_t, &cfg.fig3_voltages())?;
    let path = dir.join("fig3_freq_difference.csv");
    write_sweep_csv(&path, &sweep)?;
    rep.file(&path);
    rep.warnings.extend(sweep.warnings.iter().cloned());
    let stable = sweep.stable_rows().count();
    rep.metric("stable_points", stable as f64);
    rep.metric("gap_points", (sweep.rows.len() - stable) as f64);
    rep.check("all_stable_positive", sweep.stable_rows().all(|(_, d)| d > 0.0));
    for b in &cfg.fig3_b_list_t {
        rep.metric(
            &format!("stability_edge_{}T_v", format_number(*b)),
            stability_edge_voltage(&species, *b, cfg.z0_m),
        );
        if let Some(v) = sweep.stability_edge(*b) {
            rep.metric(&format!("last_stable_grid_voltage_{}T_v", format_number(*b)), v);
        }
    }
    Ok(rep)
}

// ---- figures 4-6 ------------------------------------------------------------

/// Lower-branch normalized frequencies from the voltage's minimum up to `s_max`.
fn normalized_grid(modes: &ModeFrequencies, s_lo: f64, s_hi: f64, n: usize) -> Result<Vec<f64>> {
    (1..=n)
        .map(|i| {
            let s = s_lo + (s_hi - s_lo) * i as f64 / (n + 1) as f64;
            omega_r_for_normalized_frequency(modes, s)
        })
        .collect()
}

/// Smallest normalized frequency reachable at this trap point (ω_r = ω_c/2).
fn min_normalized(modes: &ModeFrequencies) -> f64 {
    2.0 * modes.omega_z * modes.omega_z / (modes.omega_c * modes.omega_c)
}

pub const FIG4_S_MAX: f64 = 0.99;

pub fn fig4(cfg: &RunConfig, dir: &Path) -> Result<FigureReport> {
    let species = cfg.species()?;
    let mut rep = FigureReport::new(4);
    let n_ions = cfg.n_ions as f64;
    let mut traps = Vec::new();
    for &v in &cfg.shape_voltages_v {
        let trap = TrapConfig::new(cfg.b_field_t, v, cfg.z0_m)?;
        let modes = compute_modes(&species, &trap)?;
        let grid = normalized_grid(&modes, min_normalized(&modes), 1.0, cfg.shape_points)?;
        let rows = shape_sweep(&species, &trap, &grid, n_ions)?;
        let path = dir.join(format!("fig4_shape_{}.csv", voltage_tag(v)));
        write_shape_csv(&path, &rows)?;
        rep.file(&path);
        traps.push((v, trap, modes));
    }

    // collapse on the normalized range every voltage reaches
    let s_lo = traps
        .iter()
        .map(|(_, _, m)| min_normalized(m))
        .fold(0.0, f64::max);
    let n = cfg.shape_points;
    let s_grid: Vec<f64> = (0..n)
        .map(|i| s_lo + (FIG4_S_MAX - s_lo) * (i as f64 + 0.5) / n as f64)
        .collect();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (_, trap, modes) in &traps {
        let grid = s_grid
            .iter()
            .map(|&s| omega_r_for_normalized_frequency(modes, s))
            .collect::<Result<Vec<_>>>()?;
        let rows = shape_sweep(&species, trap, &grid, n_ions)?;
        columns.push(rows.iter().map(|r| r.alpha.unwrap_or(f64::NAN)).collect());
    }
    let mut header = vec!["normalized_freq".to_string()];
    header.extend(traps.iter().map(|(v, _, _)| format!("alpha_{}", voltage_tag(*v))));
    header.push("max_rel_dev".to_string());
    let mut worst: f64 = 0.0;
    let table: Vec<Vec<f64>> = s_grid
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let alphas: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            let dev = max_pairwise_relative(&alphas);
            worst = worst.max(dev);
            let mut row = vec![s];
            row.extend(alphas);
            row.push(dev);
            row
        })
        .collect();
    let path = dir.join("fig4_collapse.csv");
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&path, &header_refs, &table)?;
    rep.file(&path);
    rep.metric("collapse_s_min", s_lo);
    rep.metric("collapse_max_rel_dev", worst);
    rep.check("collapse_within_1e-10", worst < 1e-10);
    Ok(rep)
}

/// Largest `|a_i − a_j| / max(|a_i|, |a_j|)` over all pairs.
pub fn max_pairwise_relative(values: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            let d = (a - b).abs() / a.abs().max(b.abs());
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaProfile {
    pub max_alpha: f64,
    pub argmax_omega_r_over_omega_z: f64,
    /// α non-decreasing before the maximum and non-increasing after it.
    pub rises_then_falls: bool,
    /// Both ends of the sweep lie below the maximum.
    pub interior_maximum: bool,
}

pub fn alpha_profile(rows: &[ShapeSweepRow]) -> Option<AlphaProfile> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.alpha.map(|a| (r.omega_r_over_omega_z, a)))
        .collect();
    let (imax, &(x_at, a_max)) = pts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let rising = pts[..=imax].windows(2).all(|w| w[1].1 >= w[0].1);
    let falling = pts[imax..].windows(2).all(|w| w[1].1 <= w[0].1);
    Some(AlphaProfile {
        max_alpha: a_max,
        argmax_omega_r_over_omega_z: x_at,
        rises_then_falls: rising && falling,
        interior_maximum: imax > 0 && imax + 1 < pts.len(),
    })
}

pub fn fig5(cfg: &RunConfig, dir: &Path) -> Result<FigureReport> {
    let species = cfg.species()?;
    let mut rep = FigureReport::new(5);
    for &v in &cfg.shape_voltages_v {
        let trap = TrapConfig::new(cfg.b_field_t, v, cfg.z0_m)?;
        let modes = compute_modes(&species, &trap)?;
        let rows = shape_sweep(&species, &trap, &interior_grid(&modes, cfg.shape_points), cfg.n_ions as f64)?;
        let path = dir.join(format!("fig5_shape_{}.csv", voltage_tag(v)));
        write_shape_csv(&path, &rows)?;
        rep.file(&path);
        if let Some(p) = alpha_profile(&rows) {
            let tag = voltage_tag(v);
            rep.metric(&format!("max_alpha_{tag}"), p.max_alpha);
            rep.metric(&format!("argmax_omega_r_over_omega_z_{tag}"), p.argmax_omega_r_over_omega_z);
            rep.check(&format!("disk_spheroid_disk_{tag}"), p.rises_then_falls && p.interior_maximum);
        }
        if let Ok(beta) = shape_beta(&modes, modes.omega_z) {
            if beta > 0.0 && beta < 1.0 {
                let a = aspect_ratio_from_beta(beta)?.alpha;
                rep.metric(&format!("alpha_at_omega_z_{}", voltage_tag(v)), a);
            }
        }
    }
    Ok(rep)
}

pub fn fig6(cfg: &RunConfig, dir: &Path) -> Result<FigureReport> {
    let species = cfg.species()?;
    let trap = cfg.trap()?;
    let modes = compute_modes(&species, &trap)?;
    let mut rep = FigureReport::new(6);
    let grid: Vec<f64> = cfg.fig6_ratios.iter().map(|r| r * modes.omega_z).collect();
    let rows = shape_sweep(&species, &trap, &grid, cfg.n_ions as f64)?;
    let path = dir.join("fig6_shapes.csv");
    write_shape_csv(&path, &rows)?;
    rep.file(&path);

    const OUTLINE_POINTS: usize = 73;
    let mut outline = Vec::new();
    for r in &rows {
        if let (Some(rc), Some(zc)) = (r.r_cl_m, r.z_cl_m) {
            for k in 0..OUTLINE_POINTS {
                let phi = 2.0 * PI * k as f64 / (OUTLINE_POINTS - 1) as f64;
                outline.push([r.omega_r_over_omega_z, phi, rc * phi.cos(), zc * phi.sin()]);
            }
        } else {
            rep.warnings.push(format!(
                "omega_r/omega_z = {} gives beta = {} (prolate), outline skipped",
                r.omega_r_over_omega_z, r.beta
            ));
        }
    }
    let path = dir.join("fig6_outlines.csv");
    write_table(&path, &["omega_r_over_omega_z", "phi_rad", "r_m", "z_m"], &outline)?;
    rep.file(&path);
    for (ratio, r) in cfg.fig6_ratios.iter().zip(&rows) {
        if let Some(a) = r.alpha {
            rep.metric(&format!("alpha_at_ratio_{}", format_number(*ratio)), a);
        }
    }
    Ok(rep)
}

pub fn cmd_fig(id: u8, cfg: &RunConfig, dir: &Path) -> Result<FigureReport> {
    match id {
        1 => fig1(cfg, dir),
        2 => fig2(cfg, dir),
        3 => fig3(cfg, dir),
        4 => fig4(cfg, dir),
        5 => fig5(cfg, dir),
        6 => fig6(cfg, dir),
        _ => Err(Error::invalid("figure", format!("unknown figure {id}, expected 1..6"))),
    }
}

// ---- budget -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub schema_version: u32,
    pub frequencies: ModeFrequenciesHz,
    pub omega_r_rad_s: f64,
    pub beta: f64,
    pub alpha: f64,
    pub cloud_radius_m: f64,
    /// `"config"` or `"cold_fluid"`.
    pub cloud_radius_source: String,
    pub cold_fluid_radius_m: f64,
    pub quality_factor: f64,
    pub transfer_gain: f64,
    /// Axial amplitude of the outermost ion per unit rotation rate, m per rad/s.
    pub z_outermost_per_rad_s: f64,
    pub budget: SensitivityBudget,
}

impl BudgetReport {
    pub fn summary(&self) -> String {
        let b = &self.budget;
        format!(
            "operating point: f_z = {:.1} Hz, omega_r = {:.4e} rad/s, beta = {:.4}, alpha = {:.4}\n\
             cloud radius        {:.4} cm ({})\n\
             z outermost / rad/s {:.4} cm\n\
             scale factor        {:.4} cm per rad/s\n\
             single-shot dZ_c    {:.3} pm\n\
             amplitude ASD       {:.3} pm/sqrt(Hz) at {} shots/s\n\
             rotation ASD        {:.3e} rad/s/sqrt(Hz)\n\
             angle random walk   {:.3e} rad/sqrt(h)\n",
            self.frequencies.f_z_hz,
            self.omega_r_rad_s,
            self.beta,
            self.alpha,
            self.cloud_radius_m * 100.0,
            self.cloud_radius_source,
            self.z_outermost_per_rad_s * 100.0,
            b.scale_factor * 100.0,
            b.delta_zc_single_shot * 1e12,
            b.amplitude_asd * 1e12,
            format_number(b.repetitions_per_s),
            b.rotation_asd,
            b.arw
        )
    }
}

pub fn cmd_budget(cfg: &RunConfig) -> Result<BudgetReport> {
    let species = cfg.species()?;
    let modes = compute_modes(&species, &cfg.trap()?)?;
    let omega_r = cfg.wall_omega_r(&modes);
    let beta = shape_beta(&modes, omega_r)?;
    let alpha = aspect_ratio_from_beta(beta)?.alpha;
    let geo = spheroid_dimensions(cfg.n_ions as f64, alpha, beta, modes.omega_z, &species)?;
    let (r_cl, source) = match cfg.cloud_radius {
        CloudRadius::Fixed(r) => (r, "config"),
        CloudRadius::Auto => (geo.r_cl, "cold_fluid"),
    };
    let osc = OscillatorParams::new(modes.omega_z, omega_r, cfg.quality_factor)?;
    let response = cloud_average_amplitude(r_cl, 1.0, &osc)?;
    let budget = SensitivityBudget::compute(&BudgetInputs {
        ensemble: EnsembleSpec::new(cfg.sensing_n_ions)?,
        odf: ODFParams::new(cfg.odf_force_n, cfg.tau_s, cfg.gamma_per_s)?,
        cycle_time: cfg.cycle_time_s,
        scale_factor: response.z_avg,
    })?;
    Ok(BudgetReport {
        schema_version: budget.schema_version,
        frequencies: modes.hz_table(),
        omega_r_rad_s: omega_r,
        beta,
        alpha,
        cloud_radius_m: r_cl,
        cloud_radius_source: source.to_string(),
        cold_fluid_radius_m: geo.r_cl,
        quality_factor: cfg.quality_factor,
        transfer_gain: crate::response::transfer_gain(&osc),
        z_outermost_per_rad_s: response.z_single,
        budget,
    })
}

// ---- crystal ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrystalReport {
    pub convergence: ConvergenceReport,
    pub shape: MeasuredShape,
    pub cold_fluid_alpha: f64,
    pub cold_fluid_r_cl_m: f64,
    pub beta: f64,
    pub delta: f64,
    pub files: Vec<String>,
}

impl CrystalReport {
    pub fn summary(&self) -> String {
        let c = &self.convergence;
        let s = &self.shape;
        let mut out = format!(
            "relaxed {} ions: converged = {}, iterations = {}, restarts = {}\n\
             max residual force {:.3e} N, energy {:.6e} -> {:.6e} J\n\
             alpha (extent) {:.4}, alpha (moments) {:.4}, cold fluid {:.4}\n\
             radius (extent) {:.4e} m, cold fluid {:.4e} m\n\
             nearest-neighbour spacing median {:.3e} m (min {:.3e}, max {:.3e})\n",
            c.ion_count,
            c.converged,
            c.iterations,
            c.restarts_used,
            c.max_force_n,
            c.initial_energy_j,
            c.final_energy_j,
            s.alpha_md,
            s.alpha_moments,
            self.cold_fluid_alpha,
            s.r_cl_md,
            self.cold_fluid_r_cl_m,
            s.spacing.median_m,
            s.spacing.min_m,
            s.spacing.max_m,
        );
        if s.low_confidence {
            out += "warning: fewer than 20 ions, shape statistics are low-confidence\n";
        }
        for f in &self.files {
            out += &format!("wrote {f}\n");
        }
        out
    }
}

/// Relaxes the crystal and writes `crystal.csv` and `crystal_report.json`.
/// On non-convergence the best configuration is still written, then the error returned.
pub fn cmd_crystal(cfg: &RunConfig, dir: &Path) -> Result<CrystalReport> {
    let species = cfg.species()?;
    let modes = compute_modes(&species, &cfg.trap()?)?;
    let wall = cfg.wall(&modes)?;
    let beta = shape_beta(&modes, wall.omega_r)?;
    let (cold_alpha, cold_r) = match aspect_ratio_from_beta(beta) {
        Ok(root) => (
            root.alpha,
            spheroid_dimensions(cfg.n_ions.max(1) as f64, root.alpha, beta, modes.omega_z, &species)?.r_cl,
        ),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let csv_path = dir.join("crystal.csv");
    let json_path = dir.join("crystal_report.json");
    let files = vec![csv_path.display().to_string(), json_path.display().to_string()];

    let (config, convergence, failure): (IonConfiguration, ConvergenceReport, Option<Error>) =
        match relax(cfg.n_ions, &species, &modes, &wall, &cfg.relaxation()) {
            Ok(r) => (r.config, r.report, None),
            Err(Error::NotConverged { report, best }) => (
                (*best).clone(),
                report.clone(),
                Some(Error::NotConverged { report, best }),
            ),
            Err(e) => return Err(e),
        };
    let report = CrystalReport {
        shape: measured_shape(&config),
        convergence,
        cold_fluid_alpha: cold_alpha,
        cold_fluid_r_cl_m: cold_r,
        beta,
        delta: wall.delta,
        files,
    };
    write_crystal_csv(&csv_path, &config)?;
    write_json(&json_path, &report)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Output directory, created if missing.
pub fn prepare_output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.resolved_output_dir();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_relative() {
        assert_eq!(max_pairwise_relative(&[1.0, 1.0, 1.0]), 0.0);
        assert!((max_pairwise_relative(&[1.0, 2.0]) - 0.5).abs() < 1e-15);
        assert_eq!(max_pairwise_relative(&[1.0, f64::NAN]), f64::INFINITY);
    }

    #[test]
    fn unknown_figure() {
        let dir = tempfile::tempdir().unwrap();
        assert!(cmd_fig(7, &RunConfig::default(), dir.path()).is_err());
    }

    #[test]
    fn budget_defaults_reach_headline_numbers() {
        let r = cmd_budget(&RunConfig::default()).unwrap();
        assert!((r.budget.rotation_asd / 3.0e-9 - 1.0).abs() < 0.15);
        assert!((r.budget.arw / 1.8e-7 - 1.0).abs() < 0.15);
        assert_eq!(r.cloud_radius_source, "config");
    }
}
