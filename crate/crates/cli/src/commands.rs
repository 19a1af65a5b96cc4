//! Subcommand implementations. Each returns the file contents it would emit.

use std::f64::consts::PI;

use serde::Serialize;
use su11_core::analysis::{fit_fringe, FitResult, FringePoint, GainInputs};
use su11_core::montecarlo::{estimate_sensitivity, run_scan};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{fmt_f64, parse_numeric_csv, Table, FRINGE_COLUMNS, SCAN_COLUMNS, SWEEP_COLUMNS};

fn meta(cfg: &RunConfig, command: &str) -> Vec<(String, String)> {
    vec![
        ("command".into(), command.into()),
        ("seed".into(), cfg.seed.to_string()),
        ("config_sha256".into(), cfg.hash()),
    ]
}

/// Phase grid `φ_k = −π/2 + πk/N`, `k = 0..N`, covering one fringe period and containing `φ = 0` for even `N`.
pub fn phase_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| -PI / 2.0 + PI * k as f64 / points as f64)
        .collect()
}

/// Mean output, noise and sensitivity over one fringe period.
pub fn cmd_fringe(cfg: &RunConfig, points: usize) -> Result<String> {
    if points < 2 {
        return Err(CliError::config("--grid", "at least 2 phase points are needed"));
    }
    let model = cfg.interferometer()?;
    let mut table = Table::new(meta(cfg, "fringe"), &FRINGE_COLUMNS);
    for row in model.sensitivity_curve(&phase_grid(points)).rows {
        table.push(vec![
            fmt_f64(row.phi),
            fmt_f64(row.mean_out),
            fmt_f64(row.noise),
            fmt_f64(row.delta_phi),
            row.singular.to_string(),
        ]);
    }
    Ok(table.to_csv())
}

/// `η_k = k/N`, `k = 1..=N`.
pub fn eta_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|k| k as f64 / points as f64).collect()
}

/// Best sensitivity against the shot-noise limit for each detection efficiency.
pub fn cmd_sweep(cfg: &RunConfig, etas: &[f64]) -> Result<String> {
    if etas.is_empty() || etas.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(CliError::config("eta_grid", "values must lie in (0, 1]"));
    }
    let model = cfg.interferometer()?;
    let rows = model.sweep_eta(etas, cfg.n_inside)?;
    let mut table = Table::new(meta(cfg, "sweep"), &SWEEP_COLUMNS);
    for r in rows {
        table.push(vec![
            fmt_f64(r.eta),
            fmt_f64(r.delta_phi_min),
            fmt_f64(r.snl),
            fmt_f64(r.ratio),
            fmt_f64(r.phi_opt),
        ]);
    }
    Ok(table.to_csv())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub seed: u64,
    pub config_sha256: String,
    pub positions: usize,
    pub pulses_per_position: usize,
    pub window_lo_photons: f64,
    pub window_hi_photons: f64,
    pub pump_g2: f64,
    pub kept_fraction: f64,
    pub delta_phi_min_est_rad: f64,
    pub delta_phi_min_err_rad: f64,
    pub phi_at_min_rad: f64,
    pub analytic_delta_phi_min_rad: f64,
    pub analytic_phi_opt_rad: f64,
    /// `(estimate − analytic) / statistical error`.
    pub z_score: f64,
}

/// Output of [`cmd_montecarlo`].
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOutput {
    pub csv: String,
    pub summary: MonteCarloSummary,
}

impl MonteCarloOutput {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("serializable summary");
        s.push('\n');
        s
    }
}

/// Simulated fringe scan with post-selection, and its sensitivity summary.
pub fn cmd_montecarlo(cfg: &RunConfig, points: usize) -> Result<MonteCarloOutput> {
    if points < 3 {
        return Err(CliError::config("--grid", "at least 3 scan positions are needed"));
    }
    let model = cfg.interferometer()?;
    let settings = cfg.scan_settings(points)?;
    let outcome = run_scan(&model, &cfg.pump()?, &cfg.detector()?, &settings)?;
    let curve = estimate_sensitivity(&outcome.scan)?;
    let best = curve
        .best()
        .ok_or_else(|| CliError::Data("no interior scan position has a usable slope".into()))?;
    let err = best.delta_phi_err.unwrap_or(f64::NAN);
    let analytic = model.min_sensitivity();

    let mut m = meta(cfg, "montecarlo");
    m.push(("window_photons".into(), format!("[{}, {}]", settings.window.0, settings.window.1)));
    m.push(("pulses_per_position".into(), settings.n_pulses.to_string()));
    let mut table = Table::new(m, &SCAN_COLUMNS);
    for row in &outcome.scan.rows {
        table.push(vec![
            fmt_f64(row.position_mm),
            fmt_f64(row.phi),
            row.n_pulses_kept.to_string(),
            fmt_f64(row.mean_photons),
            fmt_f64(row.std_photons),
        ]);
    }
    Ok(MonteCarloOutput {
        csv: table.to_csv(),
        summary: MonteCarloSummary {
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            positions: outcome.scan.rows.len(),
            pulses_per_position: settings.n_pulses,
            window_lo_photons: settings.window.0,
            window_hi_photons: settings.window.1,
            pump_g2: outcome.pump_g2,
            kept_fraction: outcome.scan.kept_fraction(),
            delta_phi_min_est_rad: best.delta_phi,
            delta_phi_min_err_rad: err,
            phi_at_min_rad: best.phi,
            analytic_delta_phi_min_rad: analytic.delta_phi_min,
            analytic_phi_opt_rad: analytic.phi_opt,
            z_score: (best.delta_phi - analytic.delta_phi_min) / err,
        },
    })
}

/// Known quantities for the fit; unset fields fall back to the configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOverrides {
    pub eta: Option<f64>,
    pub mu: Option<f64>,
    pub n_inside: Option<f64>,
    pub n2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub result: FitResult,
    pub points: usize,
    pub eta: f64,
    pub mu: f64,
    pub n_inside: f64,
    pub n2: Option<f64>,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable report");
        s.push('\n');
        s
    }
}

/// Fits `A sin²(φ−φ0) + B` to a fringe or scan CSV and extracts gains.
///
/// Scan files (with `n_pulses_kept` and `std_photons`) are weighted by the
/// standard error of each mean; fringe files are fitted unweighted.
pub fn cmd_fit(cfg: &RunConfig, csv_text: &str, overrides: FitOverrides) -> Result<FitReport> {
    let table = parse_numeric_csv(csv_text)?;
    let phi = table.require("phi_rad")?;
    let mean = table.require("mean_photons")?;
    let weights = match (table.column_index("n_pulses_kept"), table.column_index("std_photons")) {
        (Some(n), Some(s)) => Some((n, s)),
        _ => None,
    };
    let points: Vec<FringePoint> = table
        .rows
        .iter()
        .map(|row| FringePoint {
            phi: row[phi],
            value: row[mean],
            sigma: weights
                .filter(|&(n, s)| row[n] > 1.0 && row[s] > 0.0)
                .map(|(n, s)| row[s] / row[n].sqrt()),
        })
        .collect();

    let eta = overrides.eta.unwrap_or(cfg.eta);
    let mu = overrides.mu.unwrap_or(cfg.mu);
    let n_inside = overrides.n_inside.unwrap_or(cfg.n_inside);
    for (key, v) in [("--eta", eta), ("--mu", mu)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(CliError::config(key, format!("value {v} must lie in (0, 1]")));
        }
    }
    if !(n_inside > 0.0) {
        return Err(CliError::config("--n-inside", format!("value {n_inside} must be positive")));
    }
    let n2 = match overrides.n2 {
        Some(v) if v > 0.0 => Some(v),
        Some(v) => return Err(CliError::config("--n2", format!("value {v} must be positive"))),
        None => cfg.n2_photons()?,
    };

    let fit = fit_fringe(&points)?;
    let result = FitResult::from_fit(
        fit,
        Some(GainInputs {
            eta,
            mu,
            n_inside,
            n2,
        }),
    )?;
    Ok(FitReport {
        result,
        points: points.len(),
        eta,
        mu,
        n_inside,
        n2,
    })
}
