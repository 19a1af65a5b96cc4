//! The unseeded SU(1,1) interferometer with direct detection.
//!
//! The optical chain is vacuum → DOPA1 squeeze `(r1, θ = 0)` → internal loss
//! `mu` → phase `phi` → DOPA2 squeeze `(|r2|, θ = π)` → detection loss
//! `eta · nu`. Internal loss is lumped in front of the phase; with that
//! placement the Gaussian pipeline reproduces the closed-form output
//! `ην[μ|S(φ)|² + (1−μ) sinh²|r2|]` exactly, and `φ = 0` is the dark fringe.
//!
//! Noise per pulse is `ΔN² = Var(n) + B + ΔN_d²`: the Gaussian photon-number
//! variance, a Poissonian visibility background `B`, and additive detector
//! noise.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, check_unit_interval, Error, Result};
use crate::gaussian::{GaussianState, SqueezeParams};

/// Slopes below this (photons/rad) are treated as stationary points.
pub const SLOPE_FLOOR: f64 = 1e-9;
/// Coarse grid size on `(0, π/2]` before golden-section refinement.
pub const COARSE_GRID: usize = 2048;
/// Gains from which `sinh r ≈ cosh r ≈ e^r / 2` is used.
pub const HIGH_GAIN_MIN: f64 = 1.5;
/// Photon noise near the dark fringe, where the detector is sub-linear.
pub const DARK_FRINGE_DETECTOR_NOISE: f64 = 1000.0;
/// Detector noise in its linear regime.
pub const LINEAR_DETECTOR_NOISE: f64 = 290.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    /// DOPA1 gain.
    pub r1: f64,
    /// DOPA2 gain magnitude.
    pub r2_abs: f64,
    /// Internal transmission between the amplifiers.
    pub mu: f64,
    /// Detection efficiency in the filtered bandwidth.
    pub eta: f64,
    /// Transmission of the squeezed mode through the spatial/spectral filters.
    pub nu: f64,
    pub visibility: f64,
    /// Additive detector noise, photons per pulse.
    pub detector_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub phi: f64,
    pub mean_out: f64,
    pub noise: f64,
    pub slope: f64,
    /// `noise / |slope|`, or infinity at flagged rows.
    pub delta_phi: f64,
    pub singular: bool,
    /// Slope taken from a one-sided difference (scan endpoints).
    pub one_sided: bool,
    /// Statistical uncertainty of `delta_phi` for data-driven estimates.
    pub delta_phi_err: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityCurve {
    /// Best row among those that are neither singular nor one-sided.
    pub fn best(&self) -> Option<&SensitivityRow> {
        self.rows
            .iter()
            .filter(|r| !r.singular && !r.one_sided && r.delta_phi.is_finite())
            .min_by(|a, b| a.delta_phi.total_cmp(&b.delta_phi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinSensitivity {
    pub phi_opt: f64,
    pub delta_phi_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub delta_phi_min: f64,
    pub snl: f64,
    pub ratio: f64,
    pub phi_opt: f64,
}

/// `S(φ) = sinh r1 cosh r2 e^{−iφ} − cosh r1 sinh r2 e^{iφ}`.
pub fn s_amplitude(r1: f64, r2_abs: f64, phi: f64) -> Complex64 {
    let a = r1.sinh() * r2_abs.cosh();
    let b = r1.cosh() * r2_abs.sinh();
    Complex64::from_polar(a, -phi) - Complex64::from_polar(b, phi)
}

/// `|S(φ)|² = a² + b² − 2ab cos 2φ`, evaluated without complex rounding.
fn s_norm_sqr(r1: f64, r2_abs: f64, phi: f64) -> f64 {
    // a² + b² − 2ab = sinh²(r2 − r1), so the fringe part is 4ab sin²φ.
    let ab = r1.sinh() * r1.cosh() * r2_abs.sinh() * r2_abs.cosh();
    (r2_abs - r1).sinh().powi(2) + 4.0 * ab * phi.sin().powi(2)
}

/// Shot-noise-limited phase sensitivity for `n_inside` photons inside the interferometer.
pub fn snl(n_inside: f64) -> Result<f64> {
    check_positive("n_inside", n_inside)?;
    Ok(1.0 / (2.0 * n_inside.sqrt()))
}

/// Shot-noise limit of a single Schmidt mode, `1 / (2 sinh r1)`.
pub fn single_mode_snl(r1: f64) -> f64 {
    1.0 / (2.0 * r1.sinh())
}

/// Variance contributed by the visibility background.
///
/// The background is modelled as Poissonian light.
pub fn background_variance(background: f64) -> f64 {
    background
}

impl InterferometerConfig {
    pub fn new(
        r1: f64,
        r2_abs: f64,
        mu: f64,
        eta: f64,
        nu: f64,
        visibility: f64,
        detector_noise: f64,
    ) -> Result<Self> {
        let cfg = Self {
            r1,
            r2_abs,
            mu,
            eta,
            nu,
            visibility,
            detector_noise,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Lossless, noiseless, unit-visibility interferometer.
    pub fn ideal(r1: f64, r2_abs: f64) -> Result<Self> {
        Self::new(r1, r2_abs, 1.0, 1.0, 1.0, 1.0, 0.0)
    }

    /// Configuration whose filtered-mode transmission reproduces `n_inside`
    /// photons inside the interferometer: `ν = n_inside / sinh²(r1)`.
    pub fn from_n_inside(
        r1: f64,
        r2_abs: f64,
        mu: f64,
        eta: f64,
        n_inside: f64,
        visibility: f64,
        detector_noise: f64,
    ) -> Result<Self> {
        check_positive("r1", r1)?;
        let mut nu = n_inside / r1.sinh().powi(2);
        // n_inside = sinh² r1 should give exactly unit transmission.
        if nu > 1.0 && nu <= 1.0 + 1e-12 {
            nu = 1.0;
        }
        Self::new(r1, r2_abs, mu, eta, nu, visibility, detector_noise)
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("r1", self.r1)?;
        check_non_negative("r2_abs", self.r2_abs)?;
        check_unit_interval("mu", self.mu)?;
        check_unit_interval("eta", self.eta)?;
        check_unit_interval("nu", self.nu)?;
        check_unit_interval("visibility", self.visibility)?;
        if self.visibility == 0.0 {
            return Err(Error::InvalidParameter {
                name: "visibility",
                value: 0.0,
                reason: "zero visibility is degenerate",
            });
        }
        check_non_negative("detector_noise", self.detector_noise)?;
        Ok(())
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let cfg = Self { eta, ..*self };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Both gains at least [`HIGH_GAIN_MIN`].
    pub fn is_high_gain(&self) -> bool {
        self.r1 >= HIGH_GAIN_MIN && self.r2_abs >= HIGH_GAIN_MIN
    }

    /// Photons inside the interferometer within the filter bandwidths, `ν sinh² r1`.
    pub fn n_inside(&self) -> f64 {
        self.nu * self.r1.sinh().powi(2)
    }

    /// Photons the second crystal alone emits into the filtered mode, `ν sinh² |r2|`.
    pub fn n_second(&self) -> f64 {
        self.nu * self.r2_abs.sinh().powi(2)
    }

    /// Closed-form mean output photon number.
    pub fn mean_output_closed(&self, phi: f64) -> f64 {
        let s2 = s_norm_sqr(self.r1, self.r2_abs, phi);
        self.eta * self.nu * (self.mu * s2 + (1.0 - self.mu) * self.r2_abs.sinh().powi(2))
    }

    /// Analytic `d⟨N_f⟩/dφ`.
    pub fn mean_slope(&self, phi: f64) -> f64 {
        let ab = self.r1.sinh() * self.r1.cosh() * self.r2_abs.sinh() * self.r2_abs.cosh();
        self.eta * self.nu * self.mu * 4.0 * ab * (2.0 * phi).sin()
    }

    /// Fringe amplitude of the closed form: `⟨N_f⟩ = A sin²φ + ⟨N_f(0)⟩` with
    /// `A = ημν sinh 2r1 sinh 2|r2|`.
    pub fn fringe_amplitude(&self) -> f64 {
        self.eta * self.mu * self.nu * (2.0 * self.r1).sinh() * (2.0 * self.r2_abs).sinh()
    }

    /// High-gain form `ημ n_inside e^{2|r2|} sin²φ + B`.
    ///
    /// Valid for `r1, |r2| >= HIGH_GAIN_MIN`; relative to the fringe peak it
    /// deviates from [`Self::mean_output_closed`] by at most
    /// `HIGH_GAIN_ERROR_SCALE · e^{−2 min(r1, |r2|)}` when `n_inside = ν sinh² r1`
    /// and `B` is the phase-independent internal-loss term.
    pub fn mean_output_approx(&self, phi: f64, n_inside: f64, background: f64) -> f64 {
        self.high_gain_amplitude(n_inside) * phi.sin().powi(2) + background
    }

    /// `ημ n_inside e^{2|r2|}`.
    pub fn high_gain_amplitude(&self, n_inside: f64) -> f64 {
        self.eta * self.mu * n_inside * (2.0 * self.r2_abs).exp()
    }

    /// Phase-independent internal-loss term in the high-gain limit, `ην(1−μ)e^{2|r2|}/4`.
    pub fn high_gain_internal_background(&self) -> f64 {
        self.eta * self.nu * (1.0 - self.mu) * (2.0 * self.r2_abs).exp() / 4.0
    }

    /// Gaussian output state from the full optical chain.
    pub fn output_state(&self, phi: f64) -> GaussianState {
        let dopa1 = SqueezeParams::new(self.r1, 0.0).expect("validated gain");
        let dopa2 = SqueezeParams::new(self.r2_abs, PI).expect("validated gain");
        GaussianState::squeezed_vacuum(dopa1)
            .apply_loss(self.mu)
            .expect("validated transmission")
            .apply_rotation(phi)
            .apply_squeeze(dopa2)
            .apply_loss(self.eta * self.nu)
            .expect("validated transmission")
    }

    /// Constant background `B` equivalent to the configured visibility, from
    /// `V = A / (A + 2B)` with `A = ημ n_inside e^{2|r2|}`.
    pub fn visibility_background(&self, n_inside: f64) -> Result<f64> {
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "visibility",
                value: self.visibility,
                reason: "visibility must lie in (0, 1]",
            });
        }
        check_non_negative("n_inside", n_inside)?;
        let amplitude = self.high_gain_amplitude(n_inside);
        Ok(amplitude * (1.0 - self.visibility) / (2.0 * self.visibility))
    }

    /// Visibility background for this configuration's own `n_inside`.
    pub fn background(&self) -> f64 {
        self.visibility_background(self.n_inside())
            .expect("validated visibility")
    }

    /// Mean photon number registered at the detector, background included.
    pub fn observed_mean(&self, phi: f64) -> f64 {
        self.mean_output_closed(phi) + self.background()
    }

    /// Per-pulse photon variance excluding detector noise.
    pub fn optical_variance(&self, phi: f64) -> f64 {
        self.output_state(phi).photon_var() + background_variance(self.background())
    }

    /// Total per-pulse noise `ΔN`, photons.
    pub fn output_noise(&self, phi: f64) -> f64 {
        (self.optical_variance(phi) + self.detector_noise.powi(2)).sqrt()
    }

    pub fn sensitivity_row(&self, phi: f64) -> SensitivityRow {
        let slope = self.mean_slope(phi);
        let noise = self.output_noise(phi);
        let singular = slope.abs() < SLOPE_FLOOR;
        SensitivityRow {
            phi,
            mean_out: self.observed_mean(phi),
            noise,
            slope,
            delta_phi: if singular { f64::INFINITY } else { noise / slope.abs() },
            singular,
            one_sided: false,
            delta_phi_err: None,
        }
    }

    /// Error-propagation phase sensitivity; infinite at stationary points.
    pub fn sensitivity(&self, phi: f64) -> f64 {
        self.sensitivity_row(phi).delta_phi
    }

    pub fn sensitivity_curve(&self, phis: &[f64]) -> SensitivityCurve {
        SensitivityCurve {
            rows: phis.iter().map(|&phi| self.sensitivity_row(phi)).collect(),
        }
    }

    pub fn min_sensitivity(&self) -> MinSensitivity {
        self.min_sensitivity_with_grid(COARSE_GRID)
    }

    /// Minimum of `Δφ` over `(0, π/2]`: grid search on `grid` points, then
    /// golden-section refinement around the best grid point.
    pub fn min_sensitivity_with_grid(&self, grid: usize) -> MinSensitivity {
        let grid = grid.max(2);
        let step = FRAC_PI_2 / grid as f64;
        let (best_idx, best) = (1..=grid)
            .map(|k| (k, self.sensitivity(k as f64 * step)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty grid");
        if !best.is_finite() {
            return MinSensitivity {
                phi_opt: best_idx as f64 * step,
                delta_phi_min: f64::INFINITY,
            };
        }
        let lo = (best_idx - 1) as f64 * step;
        let hi = ((best_idx + 1) as f64 * step).min(FRAC_PI_2);
        let (phi, value) = golden_section(|phi| self.sensitivity(phi), lo, hi, 1e-10);
        if value <= best {
            MinSensitivity {
                phi_opt: phi,
                delta_phi_min: value,
            }
        } else {
            MinSensitivity {
                phi_opt: best_idx as f64 * step,
                delta_phi_min: best,
            }
        }
    }

    /// Best sensitivity relative to the shot-noise limit at `n_inside`, for
    /// each detection efficiency.
    pub fn sweep_eta(&self, etas: &[f64], n_inside: f64) -> Result<Vec<SweepRow>> {
        let reference = snl(n_inside)?;
        let configs = etas
            .iter()
            .map(|&eta| {
                if eta <= 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "eta",
                        value: eta,
                        reason: "swept detection efficiency must lie in (0, 1]",
                    });
                }
                self.with_eta(eta)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(configs
            .par_iter()
            .map(|cfg| {
                let best = cfg.min_sensitivity();
                SweepRow {
                    eta: cfg.eta,
                    delta_phi_min: best.delta_phi_min,
                    snl: reference,
                    ratio: best.delta_phi_min / reference,
                    phi_opt: best.phi_opt,
                }
            })
            .collect())
    }
}

/// Relative-to-peak error scale of [`InterferometerConfig::mean_output_approx`].
pub const HIGH_GAIN_ERROR_SCALE: f64 = 3.0;

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
