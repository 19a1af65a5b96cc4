//! Pulse-ensemble simulation of fringe scans with pump fluctuations and
//! monitor-channel post-selection.
//!
//! Every scan position draws from its own ChaCha8 stream, seeded by the scan
//! seed with the position index as stream number, so scans are reproducible
//! regardless of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::distance_to_phase;
use crate::detection::{sample_gaussian_reading, DetectorModel};
use crate::error::{check_non_negative, check_positive, Error, Result};
use crate::interferometer::{InterferometerConfig, SensitivityCurve, SensitivityRow, SLOPE_FLOOR};

/// Pulses per scan position in the reference experiment.
pub const DEFAULT_PULSES: usize = 4000;
/// Smallest ensemble accepted by [`run_scan`].
pub const MIN_PULSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpModel {
    /// Mean pulse energy, μJ.
    pub mean_energy: f64,
    /// Pulse-energy standard deviation, μJ.
    pub sigma_energy: f64,
    /// Gains scale as `(E / mean_energy)^gain_exponent`.
    pub gain_exponent: f64,
}

impl Default for PumpModel {
    fn default() -> Self {
        Self::from_g2(20.0, 1.00001, 0.5).expect("valid defaults")
    }
}

impl PumpModel {
    pub fn new(mean_energy: f64, sigma_energy: f64, gain_exponent: f64) -> Result<Self> {
        check_positive("pump_mean_energy", mean_energy)?;
        check_non_negative("pump_sigma_energy", sigma_energy)?;
        check_non_negative("pump_gain_exponent", gain_exponent)?;
        Ok(Self {
            mean_energy,
            sigma_energy,
            gain_exponent,
        })
    }

    /// Pump whose intensity correlation is `g2`: `σ = mean·√(g2 − 1)`.
    pub fn from_g2(mean_energy: f64, g2: f64, gain_exponent: f64) -> Result<Self> {
        if !(g2.is_finite() && g2 >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "pump_g2",
                value: g2,
                reason: "Gaussian pulse energies have g2 >= 1",
            });
        }
        Self::new(mean_energy, mean_energy * (g2 - 1.0).sqrt(), gain_exponent)
    }

    /// `1 + (σ/mean)²`.
    pub fn g2(&self) -> f64 {
        1.0 + (self.sigma_energy / self.mean_energy).powi(2)
    }

    /// One pulse energy; Gaussian, kept strictly positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma_energy == 0.0 {
            return self.mean_energy;
        }
        let normal = Normal::new(self.mean_energy, self.sigma_energy).expect("validated pump");
        normal.sample(rng).max(f64::MIN_POSITIVE)
    }

    /// Gain multiplier for a pulse of energy `energy`.
    pub fn gain_scale(&self, energy: f64) -> f64 {
        (energy / self.mean_energy).powf(self.gain_exponent)
    }
}

/// `g⁽²⁾(0) = ⟨I²⟩/⟨I⟩²`, evaluated as `1 + ⟨(I − ⟨I⟩)²⟩/⟨I⟩²`.
pub fn g2(intensities: &[f64]) -> Result<f64> {
    if intensities.is_empty() {
        return Err(Error::InsufficientData("g2 of an empty sample".into()));
    }
    if intensities.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::DegenerateData("intensities must be finite and non-negative".into()));
    }
    let n = intensities.len() as f64;
    let mean = intensities.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::DegenerateData("g2 of a zero-mean sample".into()));
    }
    let var = intensities.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(1.0 + var / (mean * mean))
}

/// Pump-monitor channel: a multimode high-gain PDC crystal on a photodiode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorModel {
    /// Monitor-crystal gain at the mean pump energy.
    pub r_pp: f64,
    /// Number of independent modes reaching the monitor.
    pub modes: f64,
    /// Additive detector noise, photons.
    pub noise: f64,
}

impl Default for MonitorModel {
    fn default() -> Self {
        Self {
            r_pp: 4.0,
            modes: 1e5,
            noise: 290.0,
        }
    }
}

impl MonitorModel {
    pub fn new(r_pp: f64, modes: f64, noise: f64) -> Result<Self> {
        check_positive("monitor_r_pp", r_pp)?;
        check_positive("monitor_modes", modes)?;
        check_non_negative("monitor_noise", noise)?;
        Ok(Self { r_pp, modes, noise })
    }

    /// Mean monitor photons for a gain multiplier.
    pub fn mean(&self, gain_scale: f64) -> f64 {
        self.modes * (self.r_pp * gain_scale).sinh().powi(2)
    }

    /// Photon-number variance of `modes` independent squeezed vacua.
    pub fn variance(&self, gain_scale: f64) -> f64 {
        let n = (self.r_pp * gain_scale).sinh().powi(2);
        self.modes * 2.0 * n * (n + 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, gain_scale: f64, rng: &mut R) -> f64 {
        sample_gaussian_reading(self.mean(gain_scale), self.variance(gain_scale), self.noise, rng)
    }
}

/// Detector noise applied to signal readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseMode {
    /// Flat detector noise, photons.
    Constant(f64),
    /// Flux-dependent noise of the detector model.
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub pump_energy: f64,
    pub monitor_reading: f64,
    pub signal_reading: f64,
}

/// Keeps pulses whose monitor reading lies in `[lo, hi]`, preserving order.
pub fn post_select(records: &[PulseRecord], window: (f64, f64)) -> Vec<PulseRecord> {
    records
        .iter()
        .filter(|r| r.monitor_reading >= window.0 && r.monitor_reading <= window.1)
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub position_mm: f64,
    pub phi: f64,
    /// Pulses drawn at this position.
    pub n_pulses: usize,
    pub n_pulses_kept: usize,
    pub mean_photons: f64,
    /// Sample standard deviation of the kept readings.
    pub std_photons: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub rows: Vec<ScanRow>,
}

impl FringeScan {
    /// Validates row ordering and counts.
    pub fn new(rows: Vec<ScanRow>) -> Result<Self> {
        for pair in rows.windows(2) {
            if !(pair[1].position_mm > pair[0].position_mm) {
                return Err(Error::DegenerateData(format!(
                    "scan positions must increase strictly ({} follows {})",
                    pair[1].position_mm, pair[0].position_mm
                )));
            }
        }
        if let Some(row) = rows.iter().find(|r| r.n_pulses_kept > r.n_pulses) {
            return Err(Error::DegenerateData(format!(
                "position {} keeps {} of {} pulses",
                row.position_mm, row.n_pulses_kept, row.n_pulses
            )));
        }
        Ok(Self { rows })
    }

    /// Fraction of drawn pulses surviving post-selection.
    pub fn kept_fraction(&self) -> f64 {
        let drawn: usize = self.rows.iter().map(|r| r.n_pulses).sum();
        let kept: usize = self.rows.iter().map(|r| r.n_pulses_kept).sum();
        if drawn == 0 {
            0.0
        } else {
            kept as f64 / drawn as f64
        }
    }
}

/// Everything [`run_scan`] needs beyond the physical models.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    /// Crystal displacements, mm, strictly increasing.
    pub positions_mm: Vec<f64>,
    /// Fringe period in displacement, mm.
    pub period_mm: f64,
    /// Phase at zero displacement.
    pub phi0: f64,
    pub n_pulses: usize,
    /// Accepted monitor readings, photons.
    pub window: (f64, f64),
    pub seed: u64,
    pub monitor: MonitorModel,
    pub noise: NoiseMode,
    /// Include the photon-number variance of the light; off gives noiseless optics.
    pub quantum_noise: bool,
}

impl ScanSettings {
    /// `count` positions evenly spaced over `[start, end]`.
    pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count)
                .map(|k| start + (end - start) * k as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

/// Scan plus ensemble diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub scan: FringeScan,
    /// `g⁽²⁾(0)` of every drawn pump energy.
    pub pump_g2: f64,
}

/// Simulates pulses at one position and returns every record.
pub fn simulate_position(
    cfg: &InterferometerConfig,
    pump: &PumpModel,
    detector: &DetectorModel,
    settings: &ScanSettings,
    phi: f64,
    index: usize,
) -> Vec<PulseRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    rng.set_stream(index as u64);
    let fixed = (pump.sigma_energy == 0.0).then(|| pulse_moments(cfg, 1.0, phi, settings.quantum_noise));
    (0..settings.n_pulses)
        .map(|_| {
            let energy = pump.sample(&mut rng);
            let scale = pump.gain_scale(energy);
            let monitor_reading = settings.monitor.sample(scale, &mut rng);
            let (mean, var) = fixed.unwrap_or_else(|| pulse_moments(cfg, scale, phi, settings.quantum_noise));
            let signal_reading = match settings.noise {
                NoiseMode::Constant(noise) => sample_gaussian_reading(mean, var, noise, &mut rng),
                NoiseMode::Profile => detector.sample_reading(mean, var, &mut rng),
            };
            PulseRecord {
                pump_energy: energy,
                monitor_reading,
                signal_reading,
            }
        })
        .collect()
}

fn pulse_moments(cfg: &InterferometerConfig, scale: f64, phi: f64, quantum_noise: bool) -> (f64, f64) {
    let pulse = InterferometerConfig {
        r1: cfg.r1 * scale,
        r2_abs: cfg.r2_abs * scale,
        ..*cfg
    };
    let mean = pulse.observed_mean(phi);
    let var = if quantum_noise { pulse.optical_variance(phi) } else { 0.0 };
    (mean, var)
}

/// Runs a fringe scan: per position, draws pulses, post-selects on the monitor
/// window, and aggregates the kept signal readings.
pub fn run_scan(
    cfg: &InterferometerConfig,
    pump: &PumpModel,
    detector: &DetectorModel,
    settings: &ScanSettings,
) -> Result<ScanOutcome> {
    cfg.validate()?;
    if settings.n_pulses < MIN_PULSES {
        return Err(Error::InsufficientData(format!(
            "{} pulses per position, at least {MIN_PULSES} required",
            settings.n_pulses
        )));
    }
    let (lo, hi) = settings.window;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::InvalidParameter {
            name: "window",
            value: lo,
            reason: "window lower bound must be below the upper bound",
        });
    }
    if settings.positions_mm.is_empty() {
        return Err(Error::InsufficientData("scan has no positions".into()));
    }
    let phis = settings
        .positions_mm
        .iter()
        .map(|&d| distance_to_phase(d, settings.period_mm, settings.phi0))
        .collect::<Result<Vec<_>>>()?;

    let per_position = settings
        .positions_mm
        .par_iter()
        .zip(phis.par_iter())
        .enumerate()
        .map(|(index, (&position_mm, &phi))| {
            let records = simulate_position(cfg, pump, detector, settings, phi, index);
            let kept = post_select(&records, settings.window);
            if kept.is_empty() {
                return Err(Error::EmptyWindow { position_mm, lo, hi });
            }
            let (mean, std) = mean_std(kept.iter().map(|r| r.signal_reading));
            let energies: Vec<f64> = records.iter().map(|r| r.pump_energy).collect();
            Ok((
                ScanRow {
                    position_mm,
                    phi,
                    n_pulses: records.len(),
                    n_pulses_kept: kept.len(),
                    mean_photons: mean,
                    std_photons: std,
                },
                energies,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let energies: Vec<f64> = per_position.iter().flat_map(|(_, e)| e.iter().copied()).collect();
    let rows = per_position.into_iter().map(|(row, _)| row).collect();
    Ok(ScanOutcome {
        scan: FringeScan::new(rows)?,
        pump_g2: g2(&energies)?,
    })
}

/// Mean and sample standard deviation (zero for a single value).
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Data-driven phase sensitivity: slopes from finite differences of the scan
/// means (central inside, one-sided and flagged at the ends), noise from the
/// per-position standard deviations.
pub fn estimate_sensitivity(scan: &FringeScan) -> Result<SensitivityCurve> {
    let rows = &scan.rows;
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "sensitivity estimate needs at least 3 positions, got {}",
            rows.len()
        )));
    }
    let sem = |r: &ScanRow| r.std_photons / (r.n_pulses_kept.max(1) as f64).sqrt();
    let last = rows.len() - 1;
    let out = (0..rows.len())
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == last => (last - 1, last),
                i => (i - 1, i + 1),
            };
            let dphi = rows[b].phi - rows[a].phi;
            let slope = (rows[b].mean_photons - rows[a].mean_photons) / dphi;
            let slope_err = (sem(&rows[a]).powi(2) + sem(&rows[b]).powi(2)).sqrt() / dphi.abs();
            let row = &rows[i];
            let singular = slope.abs() < SLOPE_FLOOR;
            let delta_phi = if singular {
                f64::INFINITY
            } else {
                row.std_photons / slope.abs()
            };
            let delta_phi_err = (!singular && row.n_pulses_kept > 1).then(|| {
                let rel_std = 1.0 / (2.0 * (row.n_pulses_kept as f64 - 1.0));
                delta_phi * (rel_std + (slope_err / slope).powi(2)).sqrt()
            });
            SensitivityRow {
                phi: row.phi,
                mean_out: row.mean_photons,
                noise: row.std_photons,
                slope,
                delta_phi,
                singular,
                one_sided: i == 0 || i == last,
                delta_phi_err,
            }
        })
        .collect();
    Ok(SensitivityCurve { rows: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::DARK_FRINGE_DETECTOR_NOISE;

    fn settings(n_pulses: usize, window: (f64, f64)) -> ScanSettings {
        ScanSettings {
            positions_mm: ScanSettings::linspace(-13.0, 13.0, 11),
            period_mm: 52.0,
            phi0: 0.0,
            n_pulses,
            window,
            seed: 7,
            monitor: MonitorModel::default(),
            noise: NoiseMode::Constant(DARK_FRINGE_DETECTOR_NOISE),
            quantum_noise: true,
        }
    }

    fn red() -> InterferometerConfig {
        InterferometerConfig::from_n_inside(2.1, 5.2, 0.97, 0.77, 4.5, 0.97, DARK_FRINGE_DETECTOR_NOISE).unwrap()
    }

    #[test]
    fn pump_defaults() {
        let pump = PumpModel::default();
        assert_eq!(pump.mean_energy, 20.0);
        assert!((pump.g2() - 1.00001).abs() < 1e-15);
        assert!((pump.sigma_energy - 20.0 * 1e-5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_pump_is_exact() {
        let pump = PumpModel::new(20.0, 0.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(pump.sample(&mut rng), 20.0);
        assert_eq!(pump.gain_scale(20.0), 1.0);
    }

    #[test]
    fn pump_rejects_bad_inputs() {
        assert!(PumpModel::new(0.0, 1.0, 0.5).is_err());
        assert!(PumpModel::new(1.0, -1.0, 0.5).is_err());
        assert!(PumpModel::from_g2(1.0, 0.9, 0.5).is_err());
    }

    #[test]
    fn g2_basics() {
        assert_eq!(g2(&[3.0; 10]).unwrap(), 1.0);
        assert!(g2(&[]).is_err());
        assert!(g2(&[0.0, 0.0]).is_err());
        assert!(g2(&[1.0, -1.0]).is_err());
        assert!((g2(&[1.0, 3.0]).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn post_select_keeps_order() {
        let recs: Vec<_> = [5.0, 1.0, 3.0, 9.0]
            .iter()
            .map(|&m| PulseRecord {
                pump_energy: 1.0,
                monitor_reading: m,
                signal_reading: m * 2.0,
            })
            .collect();
        assert_eq!(post_select(&recs, (f64::NEG_INFINITY, f64::INFINITY)), recs);
        let kept = post_select(&recs, (2.0, 6.0));
        assert_eq!(kept, vec![recs[0], recs[2]]);
        assert_eq!(post_select(&recs, (3.0, 3.0 + 1e-9)), vec![recs[2]]);
    }

    #[test]
    fn noiseless_scan_equals_closed_form() {
        let cfg = InterferometerConfig { detector_noise: 0.0, ..red() };
        let pump = PumpModel::new(20.0, 0.0, 0.5).unwrap();
        let mut s = settings(100, (f64::NEG_INFINITY, f64::INFINITY));
        s.noise = NoiseMode::Constant(0.0);
        s.quantum_noise = false;
        let out = run_scan(&cfg, &pump, &DetectorModel::default(), &s).unwrap();
        for row in &out.scan.rows {
            let expected = cfg.observed_mean(row.phi);
            assert!((row.mean_photons - expected).abs() <= 1e-12 * expected);
            assert!(row.std_photons <= 1e-9 * expected);
        }
        assert_eq!(out.pump_g2, 1.0);
        assert_eq!(out.scan.kept_fraction(), 1.0);
    }

    #[test]
    fn scans_are_reproducible() {
        let s = settings(200, (f64::NEG_INFINITY, f64::INFINITY));
        let a = run_scan(&red(), &PumpModel::default(), &DetectorModel::default(), &s).unwrap();
        let b = run_scan(&red(), &PumpModel::default(), &DetectorModel::default(), &s).unwrap();
        assert_eq!(a, b);
        let mut other = s.clone();
        other.seed = 8;
        let c = run_scan(&red(), &PumpModel::default(), &DetectorModel::default(), &other).unwrap();
        assert_ne!(a.scan, c.scan);
    }

    #[test]
    fn empty_window_is_an_error() {
        let s = settings(200, (0.0, 1.0));
        let err = run_scan(&red(), &PumpModel::default(), &DetectorModel::default(), &s).unwrap_err();
        assert!(matches!(err, Error::EmptyWindow { .. }));
    }

    #[test]
    fn scan_preconditions() {
        let mut s = settings(50, (f64::NEG_INFINITY, f64::INFINITY));
        assert!(run_scan(&red(), &PumpModel::default(), &DetectorModel::default(), &s).is_err());
        s.n_pulses = 200;
        s.window = (2.0, 1.0);
        assert!(run_scan(&red(), &PumpModel::default(), &DetectorModel::default(), &s).is_err());
    }

    #[test]
    fn scan_rows_must_increase() {
        let row = ScanRow {
            position_mm: 0.0,
            phi: 0.0,
            n_pulses: 10,
            n_pulses_kept: 10,
            mean_photons: 1.0,
            std_photons: 1.0,
        };
        assert!(FringeScan::new(vec![row, row]).is_err());
        assert!(FringeScan::new(vec![ScanRow { n_pulses_kept: 11, ..row }]).is_err());
    }

    #[test]
    fn constant_scan_is_singular_everywhere() {
        let rows = (0..5)
            .map(|k| ScanRow {
                position_mm: k as f64,
                phi: 0.1 * k as f64,
                n_pulses: 100,
                n_pulses_kept: 100,
                mean_photons: 42.0,
                std_photons: 3.0,
            })
            .collect();
        let curve = estimate_sensitivity(&FringeScan::new(rows).unwrap()).unwrap();
        assert!(curve.rows.iter().all(|r| r.singular));
        assert!(curve.best().is_none());
        assert!(curve.rows[0].one_sided && curve.rows[4].one_sided && !curve.rows[2].one_sided);
    }

    #[test]
    fn too_few_positions_rejected() {
        assert!(estimate_sensitivity(&FringeScan::default()).is_err());
    }
}
