//! Flat `key = value` run configuration.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines are ignored; keys may appear at most once; unknown keys are
//! rejected. Lists are comma-separated. Every key is optional and defaults to
//! the values in [`RunConfig::default`].

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use su11_core::analysis::{period, DEFAULT_DELTA_N_AIR};
use su11_core::detection::DetectorModel;
use su11_core::interferometer::InterferometerConfig;
use su11_core::montecarlo::{MonitorModel, NoiseMode, PumpModel, ScanSettings, DEFAULT_PULSES, MIN_PULSES};

use crate::error::{CliError, Result};

/// Detector noise model used for Monte-Carlo signal readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McNoise {
    /// Flat noise equal to `detector_noise`, as in the analytic model.
    Constant,
    /// Flux-dependent noise of the detector model.
    Profile,
}

/// Photons emitted by the second crystal alone into the filtered mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum N2Setting {
    /// `ν sinh²|r2|` from the configured gains.
    Auto,
    /// Unknown: gains are extracted with the high-gain approximation.
    None,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub r1: f64,
    pub r2_abs: f64,
    pub mu: f64,
    pub eta: f64,
    /// Photons inside the interferometer; fixes `ν = n_inside / sinh² r1`.
    pub n_inside: f64,
    pub visibility: f64,
    pub detector_noise: f64,

    pub detector_gain: f64,
    pub detector_knee: f64,
    pub detector_deficit: f64,
    pub detector_noise_linear: f64,
    pub detector_noise_dark: f64,
    pub mc_detector_noise: McNoise,

    pub pump_mean_energy: f64,
    pub pump_g2: f64,
    pub pump_gain_exponent: f64,
    pub monitor_r_pp: f64,
    pub monitor_modes: f64,
    pub monitor_noise: f64,
    /// Post-selection window relative to the mean monitor reading.
    pub window_lo: f64,
    pub window_hi: f64,

    pub lambda_p_nm: f64,
    pub delta_n_air: f64,
    pub phi0: f64,
    pub scan_start_mm: f64,
    pub scan_end_mm: f64,
    pub scan_points: usize,
    pub n_pulses: usize,

    pub fringe_points: usize,
    pub eta_grid: Vec<f64>,
    pub n2: N2Setting,
    pub seed: u64,
    pub out: Option<String>,
    pub summary: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let detector = DetectorModel::default();
        Self {
            r1: 2.1,
            r2_abs: 5.2,
            mu: 0.97,
            eta: 0.77,
            n_inside: 4.5,
            visibility: 0.97,
            detector_noise: 1000.0,
            detector_gain: detector.gain(),
            detector_knee: detector.knee(),
            detector_deficit: detector.deficit(),
            detector_noise_linear: detector.noise_linear(),
            detector_noise_dark: detector.noise_dark(),
            mc_detector_noise: McNoise::Constant,
            pump_mean_energy: 20.0,
            pump_g2: 1.00001,
            pump_gain_exponent: 0.5,
            monitor_r_pp: 4.0,
            monitor_modes: 1e5,
            monitor_noise: 290.0,
            window_lo: 0.98,
            window_hi: 1.02,
            lambda_p_nm: 400.0,
            delta_n_air: DEFAULT_DELTA_N_AIR,
            phi0: 0.0,
            scan_start_mm: -13.0,
            scan_end_mm: 13.0,
            scan_points: 53,
            n_pulses: DEFAULT_PULSES,
            fringe_points: 256,
            eta_grid: (1..=10).map(|k| k as f64 / 10.0).collect(),
            n2: N2Setting::Auto,
            seed: 1,
            out: None,
            summary: None,
        }
    }
}

const KEYS: &[&str] = &[
    "r1",
    "r2_abs",
    "mu",
    "eta",
    "n_inside",
    "visibility",
    "detector_noise",
    "detector_gain",
    "detector_knee",
    "detector_deficit",
    "detector_noise_linear",
    "detector_noise_dark",
    "mc_detector_noise",
    "pump_mean_energy",
    "pump_g2",
    "pump_gain_exponent",
    "monitor_r_pp",
    "monitor_modes",
    "monitor_noise",
    "window_lo",
    "window_hi",
    "lambda_p_nm",
    "delta_n_air",
    "phi0",
    "scan_start_mm",
    "scan_end_mm",
    "scan_points",
    "n_pulses",
    "fringe_points",
    "eta_grid",
    "n2",
    "seed",
    "out",
    "summary",
];

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| CliError::config(key, format!("`{value}` is not a number")))
}

fn parse_finite(key: &str, value: &str) -> Result<f64> {
    let v = parse_f64(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("`{value}` is not finite")))
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| CliError::config(key, format!("`{value}` is not a non-negative integer")))
}

impl RunConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}", idx + 1), format!("expected `key = value`, found `{line}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(CliError::config(key, format!("duplicate key on line {}", idx + 1)));
            }
            cfg.set(key, value)?;
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "r1" => self.r1 = parse_finite(key, value)?,
            "r2_abs" => self.r2_abs = parse_finite(key, value)?,
            "mu" => self.mu = parse_finite(key, value)?,
            "eta" => self.eta = parse_finite(key, value)?,
            "n_inside" => self.n_inside = parse_finite(key, value)?,
            "visibility" => self.visibility = parse_finite(key, value)?,
            "detector_noise" => self.detector_noise = parse_finite(key, value)?,
            "detector_gain" => self.detector_gain = parse_finite(key, value)?,
            "detector_knee" => self.detector_knee = parse_finite(key, value)?,
            "detector_deficit" => self.detector_deficit = parse_finite(key, value)?,
            "detector_noise_linear" => self.detector_noise_linear = parse_finite(key, value)?,
            "detector_noise_dark" => self.detector_noise_dark = parse_finite(key, value)?,
            "mc_detector_noise" => {
                self.mc_detector_noise = match value {
                    "constant" => McNoise::Constant,
                    "profile" => McNoise::Profile,
                    _ => return Err(CliError::config(key, format!("expected `constant` or `profile`, found `{value}`"))),
                }
            }
            "pump_mean_energy" => self.pump_mean_energy = parse_finite(key, value)?,
            "pump_g2" => self.pump_g2 = parse_finite(key, value)?,
            "pump_gain_exponent" => self.pump_gain_exponent = parse_finite(key, value)?,
            "monitor_r_pp" => self.monitor_r_pp = parse_finite(key, value)?,
            "monitor_modes" => self.monitor_modes = parse_finite(key, value)?,
            "monitor_noise" => self.monitor_noise = parse_finite(key, value)?,
            "window_lo" => self.window_lo = parse_f64(key, value)?,
            "window_hi" => self.window_hi = parse_f64(key, value)?,
            "lambda_p_nm" => self.lambda_p_nm = parse_finite(key, value)?,
            "delta_n_air" => self.delta_n_air = parse_finite(key, value)?,
            "phi0" => self.phi0 = parse_finite(key, value)?,
            "scan_start_mm" => self.scan_start_mm = parse_finite(key, value)?,
            "scan_end_mm" => self.scan_end_mm = parse_finite(key, value)?,
            "scan_points" => self.scan_points = parse_usize(key, value)?,
            "n_pulses" => self.n_pulses = parse_usize(key, value)?,
            "fringe_points" => self.fringe_points = parse_usize(key, value)?,
            "eta_grid" => {
                self.eta_grid = value
                    .split(',')
                    .map(|v| parse_finite(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "n2" => {
                self.n2 = match value {
                    "auto" => N2Setting::Auto,
                    "none" => N2Setting::None,
                    v => N2Setting::Value(parse_finite(key, v)?),
                }
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| CliError::config(key, format!("`{value}` is not an unsigned 64-bit integer")))?
            }
            "out" => self.out = Some(value.to_string()).filter(|v| !v.is_empty()),
            "summary" => self.summary = Some(value.to_string()).filter(|v| !v.is_empty()),
            _ => return Err(CliError::config(key, "unknown key")),
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "r1" => self.r1.to_string(),
            "r2_abs" => self.r2_abs.to_string(),
            "mu" => self.mu.to_string(),
            "eta" => self.eta.to_string(),
            "n_inside" => self.n_inside.to_string(),
            "visibility" => self.visibility.to_string(),
            "detector_noise" => self.detector_noise.to_string(),
            "detector_gain" => self.detector_gain.to_string(),
            "detector_knee" => self.detector_knee.to_string(),
            "detector_deficit" => self.detector_deficit.to_string(),
            "detector_noise_linear" => self.detector_noise_linear.to_string(),
            "detector_noise_dark" => self.detector_noise_dark.to_string(),
            "mc_detector_noise" => match self.mc_detector_noise {
                McNoise::Constant => "constant".into(),
                McNoise::Profile => "profile".into(),
            },
            "pump_mean_energy" => self.pump_mean_energy.to_string(),
            "pump_g2" => self.pump_g2.to_string(),
            "pump_gain_exponent" => self.pump_gain_exponent.to_string(),
            "monitor_r_pp" => self.monitor_r_pp.to_string(),
            "monitor_modes" => self.monitor_modes.to_string(),
            "monitor_noise" => self.monitor_noise.to_string(),
            "window_lo" => self.window_lo.to_string(),
            "window_hi" => self.window_hi.to_string(),
            "lambda_p_nm" => self.lambda_p_nm.to_string(),
            "delta_n_air" => self.delta_n_air.to_string(),
            "phi0" => self.phi0.to_string(),
            "scan_start_mm" => self.scan_start_mm.to_string(),
            "scan_end_mm" => self.scan_end_mm.to_string(),
            "scan_points" => self.scan_points.to_string(),
            "n_pulses" => self.n_pulses.to_string(),
            "fringe_points" => self.fringe_points.to_string(),
            "eta_grid" => self
                .eta_grid
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(", "),
            "n2" => match self.n2 {
                N2Setting::Auto => "auto".into(),
                N2Setting::None => "none".into(),
                N2Setting::Value(v) => v.to_string(),
            },
            "seed" => self.seed.to_string(),
            "out" => self.out.clone().unwrap_or_default(),
            "summary" => self.summary.clone().unwrap_or_default(),
            _ => unreachable!("key list and accessor agree"),
        }
    }

    /// Canonical serialization; [`RunConfig::parse`] inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.interferometer()?;
        self.detector()?;
        self.pump()?;
        self.monitor()?;
        self.period_mm()?;
        if !(self.window_lo < self.window_hi) {
            return Err(CliError::config("window_lo", "must be below window_hi"));
        }
        if self.scan_points < 3 {
            return Err(CliError::config("scan_points", "at least 3 positions are needed"));
        }
        if !(self.scan_end_mm > self.scan_start_mm) {
            return Err(CliError::config("scan_end_mm", "must exceed scan_start_mm"));
        }
        if self.n_pulses < MIN_PULSES {
            return Err(CliError::config("n_pulses", format!("at least {MIN_PULSES} pulses per position")));
        }
        if self.fringe_points < 2 {
            return Err(CliError::config("fringe_points", "at least 2 points are needed"));
        }
        if self.eta_grid.is_empty() || self.eta_grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(CliError::config("eta_grid", "values must lie in (0, 1]"));
        }
        if let N2Setting::Value(v) = self.n2 {
            if !(v > 0.0) {
                return Err(CliError::config("n2", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn interferometer(&self) -> Result<InterferometerConfig> {
        if !(self.n_inside > 0.0) {
            return Err(CliError::config("n_inside", "must be positive"));
        }
        InterferometerConfig::from_n_inside(
            self.r1,
            self.r2_abs,
            self.mu,
            self.eta,
            self.n_inside,
            self.visibility,
            self.detector_noise,
        )
        .map_err(CliError::from_config)
    }

    pub fn detector(&self) -> Result<DetectorModel> {
        DetectorModel::new(
            self.detector_gain,
            self.detector_knee,
            self.detector_deficit,
            self.detector_noise_linear,
            self.detector_noise_dark,
        )
        .map_err(CliError::from_config)
    }

    pub fn pump(&self) -> Result<PumpModel> {
        PumpModel::from_g2(self.pump_mean_energy, self.pump_g2, self.pump_gain_exponent).map_err(CliError::from_config)
    }

    pub fn monitor(&self) -> Result<MonitorModel> {
        MonitorModel::new(self.monitor_r_pp, self.monitor_modes, self.monitor_noise).map_err(CliError::from_config)
    }

    /// Fringe period in crystal displacement, mm.
    pub fn period_mm(&self) -> Result<f64> {
        period(self.lambda_p_nm * 1e-6, self.delta_n_air).map_err(|e| match e {
            su11_core::Error::InvalidParameter { name: "lambda_p", .. } => {
                CliError::config("lambda_p_nm", "must be positive")
            }
            _ => CliError::config("delta_n_air", "must be positive"),
        })
    }

    /// Post-selection window in monitor photons.
    pub fn window_photons(&self) -> Result<(f64, f64)> {
        let nominal = self.monitor()?.mean(1.0);
        Ok((self.window_lo * nominal, self.window_hi * nominal))
    }

    /// Second-crystal photon number used for exact gain extraction, if any.
    pub fn n2_photons(&self) -> Result<Option<f64>> {
        Ok(match self.n2 {
            N2Setting::Auto => Some(self.interferometer()?.n_second()),
            N2Setting::None => None,
            N2Setting::Value(v) => Some(v),
        })
    }

    pub fn scan_settings(&self, points: usize) -> Result<ScanSettings> {
        Ok(ScanSettings {
            positions_mm: ScanSettings::linspace(self.scan_start_mm, self.scan_end_mm, points),
            period_mm: self.period_mm()?,
            phi0: self.phi0,
            n_pulses: self.n_pulses,
            window: self.window_photons()?,
            seed: self.seed,
            monitor: self.monitor()?,
            noise: match self.mc_detector_noise {
                McNoise::Constant => NoiseMode::Constant(self.detector_noise),
                McNoise::Profile => NoiseMode::Profile,
            },
            quantum_noise: true,
        })
    }
}
