//! CSV and JSON writers. Numbers use Rust's shortest round-trip formatting
//! (exponent form outside `[1e-4, 1e7)`), so identical inputs give
//! byte-identical files. Missing values are `nan`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::dynamics::{Spectrum, Trajectory};
use crate::equilibrium::IonConfiguration;
use crate::error::Result;
use crate::modes::FreqDifferenceSweep;
use crate::shape::ShapeSweepRow;

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "x", "y", "z", "vx", "vy", "vz"];
pub const SPECTRUM_HEADER: [&str; 2] = ["freq_hz", "power"];
pub const SWEEP_HEADER: [&str; 3] = ["b_tesla", "v_volts", "fz_minus_fm_hz"];
pub const SHAPE_HEADER: [&str; 7] = [
    "omega_r_rad_s",
    "omega_r_over_omega_z",
    "normalized_freq",
    "beta",
    "alpha",
    "r_cl_m",
    "z_cl_m",
];
pub const CRYSTAL_HEADER: [&str; 4] = ["ion_index", "x_m", "y_m", "z_m"];

pub fn format_number(v: f64) -> String {
    let mag = v.abs();
    if v.is_nan() {
        "nan".to_string()
    } else if v == 0.0 || !v.is_finite() || (1e-4..1e7).contains(&mag) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes a header and rows of numbers.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|&v| format_number(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_table(
        path,
        &TRAJECTORY_HEADER,
        traj.times.iter().zip(&traj.states).map(|(t, s)| {
            [
                *t,
                s.position[0],
                s.position[1],
                s.position[2],
                s.velocity[0],
                s.velocity[1],
                s.velocity[2],
            ]
        }),
    )
}

pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> Result<()> {
    write_table(path, &SPECTRUM_HEADER, spectrum.bins.iter().map(|&(f, p)| [f, p]))
}

pub fn write_sweep_csv(path: &Path, sweep: &FreqDifferenceSweep) -> Result<()> {
    write_table(
        path,
        &SWEEP_HEADER,
        sweep
            .rows
            .iter()
            .map(|r| [r.b_tesla, r.v_volts, r.fz_minus_fm_hz.unwrap_or(f64::NAN)]),
    )
}

pub fn write_shape_csv(path: &Path, rows: &[ShapeSweepRow]) -> Result<()> {
    write_table(
        path,
        &SHAPE_HEADER,
        rows.iter().map(|r| {
            [
                r.omega_r_rad_s,
                r.omega_r_over_omega_z,
                r.normalized_freq,
                r.beta,
                r.alpha.unwrap_or(f64::NAN),
                r.r_cl_m.unwrap_or(f64::NAN),
                r.z_cl_m.unwrap_or(f64::NAN),
            ]
        }),
    )
}

pub fn write_crystal_csv(path: &Path, config: &IonConfiguration) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CRYSTAL_HEADER)?;
    for (i, p) in config.positions.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format_number(p[0]),
            format_number(p[1]),
            format_number(p[2]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(to_json(value)?.as_bytes())?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::SweepRow;

    #[test]
    fn gap_rows_are_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let sweep = FreqDifferenceSweep {
            rows: vec![
                SweepRow {
                    b_tesla: 1.0,
                    v_volts: 2.0,
                    fz_minus_fm_hz: Some(0.5),
                },
                SweepRow {
                    b_tesla: 1.0,
                    v_volts: 200.0,
                    fz_minus_fm_hz: None,
                },
            ],
            warnings: vec![],
        };
        write_sweep_csv(&path, &sweep).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "b_tesla,v_volts,fz_minus_fm_hz\n1,2,0.5\n1,200,nan\n");
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1.0, -2.5, 1e-4, 9.99e6, 1e7, 1.0693953275709176e-10, -3e-300, 6.02e23] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_number(1.5e-10), "1.5e-10");
        assert_eq!(format_number(120.5), "120.5");
        assert_eq!(format_number(f64::NAN), "nan");
    }

    #[test]
    fn crystal_rows_indexed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let c = IonConfiguration::new(vec![[1e-6, 0.0, -2e-6], [0.0, 3e-6, 0.0]]).unwrap();
        write_crystal_csv(&path, &c).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "ion_index,x_m,y_m,z_m\n0,1e-6,0,-2e-6\n1,0,3e-6,0\n");
    }
}
