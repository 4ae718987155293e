//! Periodogram peak picking for trajectory coordinates.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use super::Trajectory;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 4096;

/// Peaks below this fraction of the strongest bin are treated as leakage.
/// The 4-term Blackman–Harris window keeps sidelobes near 1e-9 in power.
const RELATIVE_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coordinate {
    X,
    Y,
    Z,
    /// (x + y + z)/√3, sees every mode at once.
    Diagonal,
}

impl Coordinate {
    fn read(&self, p: &[f64; 3]) -> f64 {
        match self {
            Coordinate::X => p[0],
            Coordinate::Y => p[1],
            Coordinate::Z => p[2],
            Coordinate::Diagonal => (p[0] + p[1] + p[2]) / 3f64.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPeak {
    pub frequency_hz: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// One-sided bins: (frequency Hz, power).
    pub bins: Vec<(f64, f64)>,
    /// Sorted by descending power.
    pub peaks: Vec<SpectralPeak>,
    /// 1 / total_time, Hz.
    pub resolution_hz: f64,
}

fn blackman_harris(n: usize) -> Vec<f64> {
    const A: [f64; 4] = [0.35875, 0.48829, 0.14128, 0.01168];
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / denom;
            A[0] - A[1] * x.cos() + A[2] * (2.0 * x).cos() - A[3] * (3.0 * x).cos()
        })
        .collect()
}

pub fn extract_spectrum(traj: &Trajectory, coordinate: Coordinate) -> Result<Spectrum> {
    let n = traj.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            need: MIN_SAMPLES,
        });
    }
    let dt = (traj.times[n - 1] - traj.times[0]) / (n - 1) as f64;
    let uniform = traj
        .times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt);
    if !uniform {
        return Err(Error::NonUniformSampling);
    }

    let raw: Vec<f64> = traj
        .states
        .iter()
        .map(|s| coordinate.read(&s.position))
        .collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let window = blackman_harris(n);
    let mut buf: Vec<Complex<f64>> = raw
        .iter()
        .zip(&window)
        .map(|(v, w)| Complex::new((v - mean) * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let df = 1.0 / (n as f64 * dt);
    let half = n / 2;
    let power: Vec<f64> = buf[..=half].iter().map(|c| c.norm_sqr()).collect();
    let bins = power
        .iter()
        .enumerate()
        .map(|(k, &p)| (k as f64 * df, p))
        .collect();

    let max = power.iter().copied().fold(0.0, f64::max);
    let mut peaks = Vec::new();
    if max > 0.0 {
        let floor = max * RELATIVE_FLOOR;
        for k in 1..half {
            let (a, b, c) = (power[k - 1], power[k], power[k + 1]);
            if b > floor && b > a && b >= c {
                // log-parabolic interpolation of the main lobe
                let (la, lb, lc) = (a.max(f64::MIN_POSITIVE).ln(), b.ln(), c.max(f64::MIN_POSITIVE).ln());
                let denom = la - 2.0 * lb + lc;
                let shift = if denom < 0.0 {
                    (0.5 * (la - lc) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                };
                peaks.push(SpectralPeak {
                    frequency_hz: (k as f64 + shift) * df,
                    power: b,
                });
            }
        }
        peaks.sort_by(|p, q| q.power.total_cmp(&p.power));
    }

    Ok(Spectrum {
        bins,
        peaks,
        resolution_hz: 1.0 / traj.total_time(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegratorConfig, ParticleState};
    use crate::modes::compute_modes;
    use crate::trap::{IonSpecies, RotationInput, TrapConfig};

    fn run(state: impl Fn(&IonSpecies, &crate::modes::ModeFrequencies) -> ParticleState, total: f64) -> (Trajectory, crate::modes::ModeFrequencies) {
        let sp = IonSpecies::calcium40();
        let trap = TrapConfig::new(1.0, 10.0, 0.01).unwrap();
        let m = compute_modes(&sp, &trap).unwrap();
        let cfg = IntegratorConfig::for_modes(&m, 200, total, 10);
        let traj = integrate(state(&sp, &m), &sp, &trap, &RotationInput::default(), &cfg).unwrap();
        (traj, m)
    }

    #[test]
    fn pure_axial_single_peak() {
        let (traj, m) = run(|_, _| ParticleState::axial_offset(1e-6), 2e-3);
        let spec = extract_spectrum(&traj, Coordinate::Z).unwrap();
        assert_eq!(spec.peaks.len(), 1, "{:?}", spec.peaks);
        assert!((spec.peaks[0].frequency_hz - m.f_z()).abs() < spec.resolution_hz);
        assert!((spec.peaks[0].frequency_hz - 78.2e3).abs() < 78.2e3 * 1e-3);
    }

    #[test]
    fn zero_signal_has_no_peaks() {
        let (traj, _) = run(|_, _| ParticleState::default(), 1e-3);
        let spec = extract_spectrum(&traj, Coordinate::X).unwrap();
        assert!(spec.peaks.is_empty());
    }

    #[test]
    fn mixed_modes_give_three_peaks() {
        let (traj, m) = run(
            |sp, m| ParticleState::from_mode_amplitudes(sp, m, 25e-6, 2e-6, 5e-6),
            4e-3,
        );
        let spec = extract_spectrum(&traj, Coordinate::Diagonal).unwrap();
        assert_eq!(spec.peaks.len(), 3, "{:?}", spec.peaks);
        let mut f: Vec<f64> = spec.peaks.iter().map(|p| p.frequency_hz).collect();
        f.sort_by(f64::total_cmp);
        for (got, want) in f.iter().zip([m.f_m(), m.f_z(), m.f_cap_m()]) {
            assert!((got - want).abs() < spec.resolution_hz, "{got} vs {want}");
        }
    }

    #[test]
    fn too_short() {
        let (traj, _) = run(|_, _| ParticleState::axial_offset(1e-6), 1e-4);
        assert!(matches!(
            extract_spectrum(&traj, Coordinate::Z),
            Err(Error::TooFewSamples { .. })
        ));
    }
}
