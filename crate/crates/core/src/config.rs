//! Run configuration: a flat `key = value` text format with `#` comments.
//!
//! Every key has a default at the reference operating point (Ca⁺, 1 T,
//! 100 V, z₀ = 1 cm, ω_r = ω_z, N = 1000, Q = 10⁶). Later assignments win, so
//! command-line overrides are applied as extra lines after the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dynamics::{IntegratorConfig, IntegratorMethod};
use crate::equilibrium::RelaxationConfig;
use crate::error::{Error, Result};
use crate::modes::{linspace, ModeFrequencies};
use crate::shape::RotatingWallConfig;
use crate::trap::{IonSpecies, RotationInput, TrapConfig};

pub const OUTPUT_DIR_ENV: &str = "IONGYRO_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallFrequency {
    /// Multiple of ω_z.
    RatioToAxial(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CloudRadius {
    Fixed(f64),
    /// Cold-fluid prediction for `n_ions`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub species: String,
    pub b_field_t: f64,
    pub trap_voltage_v: f64,
    pub z0_m: f64,
    pub omega_x_rad_s: f64,
    pub omega_r: WallFrequency,
    pub delta: f64,
    pub theta_rad: f64,
    pub n_ions: usize,
    pub sensing_n_ions: u64,
    pub quality_factor: f64,
    pub odf_force_n: f64,
    pub gamma_per_s: f64,
    pub tau_s: f64,
    pub cycle_time_s: f64,
    pub cloud_radius: CloudRadius,
    pub seed: u64,

    pub method: Method,
    pub steps_per_period: usize,
    pub sample_stride: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,

    pub relax_max_iterations: usize,
    pub relax_force_tolerance_n: f64,
    pub relax_restarts: usize,
    pub relax_restart_noise: f64,

    pub fig12_trap_voltage_v: f64,
    pub fig12_omega_x_rad_s: f64,
    pub fig12_magnetron_radius_m: f64,
    pub fig12_magnetron_periods: f64,
    pub fig3_b_list_t: Vec<f64>,
    pub fig3_v_min_v: f64,
    pub fig3_v_max_v: f64,
    pub fig3_v_points: usize,
    pub shape_voltages_v: Vec<f64>,
    pub shape_points: usize,
    pub fig6_ratios: Vec<f64>,

    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            species: "Ca40".into(),
            b_field_t: 1.0,
            trap_voltage_v: 100.0,
            z0_m: 0.01,
            omega_x_rad_s: 1.0,
            omega_r: WallFrequency::RatioToAxial(1.0),
            delta: 0.01,
            theta_rad: 0.0,
            n_ions: 1000,
            sensing_n_ions: 10_000,
            quality_factor: 1e6,
            odf_force_n: 100e-24,
            gamma_per_s: 100.0,
            tau_s: 10e-3,
            cycle_time_s: 50e-3,
            cloud_radius: CloudRadius::Fixed(0.022e-2),
            seed: 1,
            method: Method::Rk4,
            steps_per_period: 200,
            sample_stride: 10,
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            relax_max_iterations: 50_000,
            relax_force_tolerance_n: 1e-24,
            relax_restarts: 2,
            relax_restart_noise: 0.1,
            fig12_trap_voltage_v: 10.0,
            fig12_omega_x_rad_s: 10.0,
            fig12_magnetron_radius_m: 25e-6,
            fig12_magnetron_periods: 3.0,
            fig3_b_list_t: vec![1.0, 2.0, 3.0],
            fig3_v_min_v: 2.0,
            fig3_v_max_v: 150.0,
            fig3_v_points: 50,
            shape_voltages_v: vec![10.0, 50.0, 100.0],
            shape_points: 200,
            fig6_ratios: vec![0.5, 0.65, 0.777, 0.9, 1.0, 1.08],
            output_dir: None,
        }
    }
}

fn float(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::ConfigParse {
            line: 0,
            message: format!("`{key}` expects a number, got `{v}`"),
        })
}

fn uint<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>().map_err(|_| Error::ConfigParse {
        line: 0,
        message: format!("`{key}` expects a non-negative integer, got `{v}`"),
    })
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| float(key, s.trim())).collect()
}

fn num(v: f64) -> String {
    crate::output::format_number(v)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Every key with its current value, in documentation order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (ratio, absolute) = match self.omega_r {
            WallFrequency::RatioToAxial(r) => (num(r), String::new()),
            WallFrequency::Absolute(w) => (String::new(), num(w)),
        };
        let mut out = vec![
            ("species", self.species.clone()),
            ("b_field_t", num(self.b_field_t)),
            ("trap_voltage_v", num(self.trap_voltage_v)),
            ("z0_m", num(self.z0_m)),
            ("omega_x_rad_s", num(self.omega_x_rad_s)),
        ];
        if absolute.is_empty() {
            out.push(("omega_r_over_omega_z", ratio));
        } else {
            out.push(("omega_r_rad_s", absolute));
        }
        out.extend([
            ("delta", num(self.delta)),
            ("theta_rad", num(self.theta_rad)),
            ("n_ions", self.n_ions.to_string()),
            ("sensing_n_ions", self.sensing_n_ions.to_string()),
            ("quality_factor", num(self.quality_factor)),
            ("odf_force_n", num(self.odf_force_n)),
            ("gamma_per_s", num(self.gamma_per_s)),
            ("tau_s", num(self.tau_s)),
            ("cycle_time_s", num(self.cycle_time_s)),
            (
                "cloud_radius_m",
                match self.cloud_radius {
                    CloudRadius::Fixed(r) => num(r),
                    CloudRadius::Auto => "auto".into(),
                },
            ),
            ("seed", self.seed.to_string()),
            (
                "integrator",
                match self.method {
                    Method::Rk4 => "rk4".into(),
                    Method::Rk45 => "rk45".into(),
                },
            ),
            ("steps_per_period", self.steps_per_period.to_string()),
            ("sample_stride", self.sample_stride.to_string()),
            ("rel_tol", num(self.rel_tol)),
            ("abs_tol", num(self.abs_tol)),
            ("relax_max_iterations", self.relax_max_iterations.to_string()),
            ("relax_force_tolerance_n", num(self.relax_force_tolerance_n)),
            ("relax_restarts", self.relax_restarts.to_string()),
            ("relax_restart_noise", num(self.relax_restart_noise)),
            ("fig12_trap_voltage_v", num(self.fig12_trap_voltage_v)),
            ("fig12_omega_x_rad_s", num(self.fig12_omega_x_rad_s)),
            ("fig12_magnetron_radius_m", num(self.fig12_magnetron_radius_m)),
            ("fig12_magnetron_periods", num(self.fig12_magnetron_periods)),
            ("fig3_b_list_t", join(&self.fig3_b_list_t)),
            ("fig3_v_min_v", num(self.fig3_v_min_v)),
            ("fig3_v_max_v", num(self.fig3_v_max_v)),
            ("fig3_v_points", self.fig3_v_points.to_string()),
            ("shape_voltages_v", join(&self.shape_voltages_v)),
            ("shape_points", self.shape_points.to_string()),
            ("fig6_ratios", join(&self.fig6_ratios)),
        ]);
        if let Some(dir) = &self.output_dir {
            out.push(("output_dir", dir.display().to_string()));
        }
        out
    }

    /// Serializes to the text format; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        if v.is_empty() {
            return Err(Error::MissingField(key.to_string()));
        }
        match key {
            "species" => self.species = v.to_string(),
            "b_field_t" => self.b_field_t = float(key, v)?,
            "trap_voltage_v" => self.trap_voltage_v = float(key, v)?,
            "z0_m" => self.z0_m = float(key, v)?,
            "omega_x_rad_s" => self.omega_x_rad_s = float(key, v)?,
            "omega_r_over_omega_z" => self.omega_r = WallFrequency::RatioToAxial(float(key, v)?),
            "omega_r_rad_s" => self.omega_r = WallFrequency::Absolute(float(key, v)?),
            "delta" => self.delta = float(key, v)?,
            "theta_rad" => self.theta_rad = float(key, v)?,
            "n_ions" => self.n_ions = uint(key, v)?,
            "sensing_n_ions" => self.sensing_n_ions = uint(key, v)?,
            "quality_factor" => self.quality_factor = float(key, v)?,
            "odf_force_n" => self.odf_force_n = float(key, v)?,
            "gamma_per_s" => self.gamma_per_s = float(key, v)?,
            "tau_s" => self.tau_s = float(key, v)?,
            "cycle_time_s" => self.cycle_time_s = float(key, v)?,
            "cloud_radius_m" => {
                self.cloud_radius = if v.eq_ignore_ascii_case("auto") {
                    CloudRadius::Auto
                } else {
                    CloudRadius::Fixed(float(key, v)?)
                }
            }
            "seed" => self.seed = uint(key, v)?,
            "integrator" => {
                self.method = match v.to_ascii_lowercase().as_str() {
                    "rk4" => Method::Rk4,
                    "rk45" => Method::Rk45,
                    _ => {
                        return Err(Error::ConfigParse {
                            line: 0,
                            message: format!("`integrator` must be rk4 or rk45, got `{v}`"),
                        })
                    }
                }
            }
            "steps_per_period" => self.steps_per_period = uint(key, v)?,
            "sample_stride" => self.sample_stride = uint(key, v)?,
            "rel_tol" => self.rel_tol = float(key, v)?,
            "abs_tol" => self.abs_tol = float(key, v)?,
            "relax_max_iterations" => self.relax_max_iterations = uint(key, v)?,
            "relax_force_tolerance_n" => self.relax_force_tolerance_n = float(key, v)?,
            "relax_restarts" => self.relax_restarts = uint(key, v)?,
            "relax_restart_noise" => self.relax_restart_noise = float(key, v)?,
            "fig12_trap_voltage_v" => self.fig12_trap_voltage_v = float(key, v)?,
            "fig12_omega_x_rad_s" => self.fig12_omega_x_rad_s = float(key, v)?,
            "fig12_magnetron_radius_m" => self.fig12_magnetron_radius_m = float(key, v)?,
            "fig12_magnetron_periods" => self.fig12_magnetron_periods = float(key, v)?,
            "fig3_b_list_t" => self.fig3_b_list_t = list(key, v)?,
            "fig3_v_min_v" => self.fig3_v_min_v = float(key, v)?,
            "fig3_v_max_v" => self.fig3_v_max_v = float(key, v)?,
            "fig3_v_points" => self.fig3_v_points = uint(key, v)?,
            "shape_voltages_v" => self.shape_voltages_v = list(key, v)?,
            "shape_points" => self.shape_points = uint(key, v)?,
            "fig6_ratios" => self.fig6_ratios = list(key, v)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigParse {
                    line: i + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            self.set(key.trim(), value).map_err(|e| match e {
                Error::ConfigParse { message, .. } => Error::ConfigParse {
                    line: i + 1,
                    message,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(Error::ConfigParse {
                line: 0,
                message: format!("override `{assignment}` is not of the form key=value"),
            });
        };
        self.set(key.trim(), value)
    }

    pub fn species(&self) -> Result<IonSpecies> {
        IonSpecies::builtin(&self.species)
            .ok_or_else(|| Error::invalid("species", format!("unknown species `{}`", self.species)))
    }

    pub fn trap(&self) -> Result<TrapConfig> {
        TrapConfig::new(self.b_field_t, self.trap_voltage_v, self.z0_m)
    }

    pub fn rotation(&self) -> Result<RotationInput> {
        RotationInput::new(self.omega_x_rad_s)
    }

    pub fn wall_omega_r(&self, modes: &ModeFrequencies) -> f64 {
        match self.omega_r {
            WallFrequency::RatioToAxial(r) => r * modes.omega_z,
            WallFrequency::Absolute(w) => w,
        }
    }

    pub fn wall(&self, modes: &ModeFrequencies) -> Result<RotatingWallConfig> {
        RotatingWallConfig::new(modes, self.wall_omega_r(modes), self.delta, self.theta_rad)
    }

    /// Integrator settings for a run of `total_time` seconds.
    pub fn integrator(&self, modes: &ModeFrequencies, total_time: f64) -> Result<IntegratorConfig> {
        if self.steps_per_period == 0 {
            return Err(Error::invalid("steps_per_period", "must be positive"));
        }
        let mut cfg = IntegratorConfig::for_modes(modes, self.steps_per_period, total_time, self.sample_stride);
        if self.method == Method::Rk45 {
            cfg.method = IntegratorMethod::Rk45 {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn relaxation(&self) -> RelaxationConfig {
        RelaxationConfig {
            max_iterations: self.relax_max_iterations,
            force_tolerance: self.relax_force_tolerance_n,
            initial_seed: self.seed,
            annealing_restarts: self.relax_restarts,
            restart_noise: self.relax_restart_noise,
            ..RelaxationConfig::default()
        }
    }

    pub fn fig3_voltages(&self) -> Vec<f64> {
        linspace(self.fig3_v_min_v, self.fig3_v_max_v, self.fig3_v_points)
    }

    /// Explicit setting, then the environment, then the working directory.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_reference_point() {
        let c = RunConfig::default();
        assert_eq!(c.species().unwrap(), IonSpecies::calcium40());
        assert_eq!((c.b_field_t, c.trap_voltage_v, c.z0_m), (1.0, 100.0, 0.01));
        assert_eq!(c.omega_r, WallFrequency::RatioToAxial(1.0));
        assert_eq!((c.n_ions, c.quality_factor), (1000, 1e6));
    }

    #[test]
    fn parse_with_comments_and_overrides() {
        let text = "# header\ntrap_voltage_v = 10   # low\n\nomega_r_rad_s = 5e4\nfig3_b_list_t = 1, 2.5\n";
        let mut c = RunConfig::parse(text).unwrap();
        assert_eq!(c.trap_voltage_v, 10.0);
        assert_eq!(c.omega_r, WallFrequency::Absolute(5e4));
        assert_eq!(c.fig3_b_list_t, vec![1.0, 2.5]);
        c.apply_override("cloud_radius_m=auto").unwrap();
        assert_eq!(c.cloud_radius, CloudRadius::Auto);
    }

    #[test]
    fn errors_name_the_problem() {
        assert!(matches!(RunConfig::parse("bogus = 1"), Err(Error::UnknownKey(k)) if k == "bogus"));
        assert!(matches!(RunConfig::parse("tau_s ="), Err(Error::MissingField(k)) if k == "tau_s"));
        assert!(matches!(
            RunConfig::parse("\n\nz0_m = abc"),
            Err(Error::ConfigParse { line: 3, .. })
        ));
        assert!(matches!(RunConfig::parse("just words"), Err(Error::ConfigParse { line: 1, .. })));
        assert!(RunConfig::default().apply_override("novalue").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_override("omega_r_rad_s=123.5").unwrap();
        c.apply_override("integrator=rk45").unwrap();
        c.apply_override("output_dir=/tmp/x").unwrap();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_text()).unwrap(), d);
    }
}
