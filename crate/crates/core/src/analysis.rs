//! Fringe analysis: distance→phase conversion, `A sin²(φ−φ0) + B` fitting,
//! visibility, and gain/transmission extraction.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::montecarlo::FringeScan;

/// Default air-dispersion difference between pump and PDC wavelengths.
pub const DEFAULT_DELTA_N_AIR: f64 = 1.5385e-5;
/// Iteration cap of the fringe fit.
pub const FIT_MAX_ITERATIONS: usize = 200;
/// Relative parameter-step tolerance of the fringe fit.
pub const FIT_TOLERANCE: f64 = 1e-10;
/// Minimum number of points for a fringe fit.
pub const FIT_MIN_POINTS: usize = 5;

/// Crystal-separation period of the interference fringe, `2λ_p / δn_air`,
/// in the unit of `lambda_p`.
pub fn period(lambda_p: f64, delta_n_air: f64) -> Result<f64> {
    check_positive("lambda_p", lambda_p)?;
    check_positive("delta_n_air", delta_n_air)?;
    Ok(2.0 * lambda_p / delta_n_air)
}

/// Phase at crystal displacement `d` for fringe period `period`: `φ0 + π d / D`.
pub fn distance_to_phase(d: f64, period: f64, phi0: f64) -> Result<f64> {
    check_positive("period", period)?;
    Ok(phi0 + PI * d / period)
}

/// Fringe visibility `A / (A + 2B)` of `A sin²φ + B`.
pub fn visibility(amplitude: f64, background: f64) -> f64 {
    amplitude / (amplitude + 2.0 * background)
}

/// DOPA1 gain and filtered-mode transmission from the photon numbers measured
/// with each crystal alone and the DOPA2 gain.
///
/// `r1 = asinh(√(n_inside/n2) sinh|r2|)`, `ν = n_inside / sinh² r1`.
pub fn extract_gains(n_inside: f64, n2: f64, r2_abs: f64) -> Result<(f64, f64)> {
    check_positive("n_inside", n_inside)?;
    check_positive("n2", n2)?;
    check_positive("r2_abs", r2_abs)?;
    let (r1, nu) = forward_gains(n_inside, n2, r2_abs);
    if nu > 1.0 {
        return Err(Error::Inconsistent(format!(
            "mode transmission {nu:.4} exceeds 1 (n_inside = {n_inside}, n2 = {n2}, |r2| = {r2_abs})"
        )));
    }
    Ok((r1, nu))
}

fn forward_gains(n_inside: f64, n2: f64, r2_abs: f64) -> (f64, f64) {
    let r1 = ((n_inside / n2).sqrt() * r2_abs.sinh()).asinh();
    (r1, n_inside / r1.sinh().powi(2))
}

/// One fringe sample: phase, mean photons, and optional standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringePoint {
    pub phi: f64,
    pub value: f64,
    pub sigma: Option<f64>,
}

/// Least-squares fit of `A sin²(φ−φ0) + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub amplitude: f64,
    pub background: f64,
    /// Normalized into `(−π/2, π/2]`.
    pub phase_offset: f64,
    pub amplitude_err: f64,
    pub background_err: f64,
    pub phase_offset_err: f64,
    /// Norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub weighted: bool,
    pub iterations: usize,
}

impl FringeFit {
    pub fn model(&self, phi: f64) -> f64 {
        self.amplitude * (phi - self.phase_offset).sin().powi(2) + self.background
    }
}

/// How `|r2|` was obtained from the fitted amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMethod {
    /// `|r2| = ln(A / (ημ n_inside)) / 2`.
    HighGain,
    /// Solves `A = ημν sinh 2r1 sinh 2|r2|` with `(r1, ν)` from [`extract_gains`].
    Exact,
}

/// Fit outcome with derived physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub fit: FringeFit,
    pub visibility: Option<f64>,
    pub r2_abs: Option<f64>,
    pub r2_abs_err: Option<f64>,
    pub r2_method: Option<GainMethod>,
    pub r1: Option<f64>,
    pub nu: Option<f64>,
}

/// Known parameters for turning the fitted amplitude into gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainInputs {
    pub eta: f64,
    pub mu: f64,
    pub n_inside: f64,
    /// Photons emitted by DOPA2 alone into the filtered mode.
    pub n2: Option<f64>,
}

/// Fits a fringe with Levenberg–Marquardt on `A sin²(φ−φ0) + B`.
///
/// Points carrying a `sigma` are weighted by `1/σ²` and the covariance is
/// `(JᵀWJ)⁻¹`; otherwise the covariance is scaled by the reduced χ².
pub fn fit_fringe(points: &[FringePoint]) -> Result<FringeFit> {
    if points.len() < FIT_MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "fringe fit needs at least {FIT_MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.phi.is_finite() && p.value.is_finite())) {
        return Err(Error::DegenerateData("non-finite phase or photon value".into()));
    }
    let weighted = points.iter().all(|p| p.sigma.is_some());
    let weights: Vec<f64> = points
        .iter()
        .map(|p| match (weighted, p.sigma) {
            (true, Some(s)) if s > 0.0 && s.is_finite() => Ok(1.0 / s),
            (true, _) => Err(Error::DegenerateData(format!(
                "point at phi = {} has a non-positive standard error",
                p.phi
            ))),
            (false, _) => Ok(1.0),
        })
        .collect::<Result<_>>()?;
    let (phi_min, phi_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.phi), hi.max(p.phi)));
    if phi_max - phi_min == 0.0 {
        return Err(Error::DegenerateData("all points share one phase".into()));
    }
    if phi_max - phi_min < FRAC_PI_2 * (1.0 - 1e-9) {
        return Err(Error::InsufficientData(format!(
            "phase span {:.4} rad is below half a fringe period",
            phi_max - phi_min
        )));
    }

    let (min_idx, max_val) = points.iter().enumerate().fold((0, f64::NEG_INFINITY), |(idx, hi), (i, p)| {
        (if p.value < points[idx].value { i } else { idx }, hi.max(p.value))
    });
    let min_val = points[min_idx].value;
    if max_val == min_val {
        return Err(Error::DegenerateData("constant photon numbers".into()));
    }
    let mut params = Vector3::new(max_val - min_val, min_val, points[min_idx].phi);

    let residuals = |p: &Vector3<f64>| -> Vec<f64> {
        points
            .iter()
            .zip(&weights)
            .map(|(pt, w)| w * (pt.value - (p[0] * (pt.phi - p[2]).sin().powi(2) + p[1])))
            .collect()
    };
    let normal_equations = |p: &Vector3<f64>| -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (pt, w) in points.iter().zip(&weights) {
            let x = pt.phi - p[2];
            let s = x.sin();
            let r = w * (pt.value - (p[0] * s * s + p[1]));
            let j = Vector3::new(w * s * s, *w, -w * p[0] * (2.0 * x).sin());
            jtj += j * j.transpose();
            jtr += j * r;
        }
        (jtj, jtr)
    };
    let cost_of = |p: &Vector3<f64>| residuals(p).iter().map(|r| r * r).sum::<f64>();

    let mut cost = cost_of(&params);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&params);
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = params + step;
            let trial_cost = cost_of(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                last_change = (0..3)
                    .map(|i| step[i].abs() / params[i].abs().max(1.0))
                    .fold(0.0, f64::max);
                params = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || last_change <= FIT_TOLERANCE || cost == 0.0 {
            // A rejected step at every damping level means no descent is left.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            last_change,
        });
    }

    let (jtj, _) = normal_equations(&params);
    let dof = points.len().saturating_sub(3).max(1) as f64;
    let reduced_chi2 = cost / dof;
    let covariance = jtj
        .try_inverse()
        .ok_or_else(|| Error::DegenerateData("singular fit covariance".into()))?;
    let scale = if weighted { 1.0 } else { reduced_chi2 };
    let errs = Vector3::from_fn(|i, _| (covariance[(i, i)] * scale).max(0.0).sqrt());

    let (mut a, mut b, mut phi0) = (params[0], params[1], params[2]);
    if a < 0.0 {
        b += a;
        a = -a;
        phi0 -= FRAC_PI_2;
    }
    Ok(FringeFit {
        amplitude: a,
        background: b,
        phase_offset: wrap_half_period(phi0),
        amplitude_err: errs[0],
        background_err: errs[1],
        phase_offset_err: errs[2],
        residual_norm: cost.sqrt(),
        reduced_chi2,
        weighted,
        iterations,
    })
}

/// Maps an angle onto `(−π/2, π/2]`.
fn wrap_half_period(phi: f64) -> f64 {
    let wrapped = phi - PI * (phi / PI).round();
    if wrapped <= -FRAC_PI_2 {
        wrapped + PI
    } else {
        wrapped
    }
}

/// `|r2|` from the fitted amplitude in the high-gain form.
pub fn r2_high_gain(amplitude: f64, eta: f64, mu: f64, n_inside: f64) -> Result<f64> {
    check_positive("amplitude", amplitude)?;
    check_positive("eta", eta)?;
    check_positive("mu", mu)?;
    check_positive("n_inside", n_inside)?;
    Ok((amplitude / (eta * mu * n_inside)).ln() / 2.0)
}

/// `ln A(|r2|)` for the exact fringe amplitude `2ημ n_inside coth r1 sinh 2|r2|`.
fn ln_exact_amplitude(r2_abs: f64, eta: f64, mu: f64, n_inside: f64, n2: f64) -> f64 {
    let (r1, _) = forward_gains(n_inside, n2, r2_abs);
    (2.0 * eta * mu * n_inside).ln() - r1.tanh().ln() + (2.0 * r2_abs).sinh().ln()
}

/// `|r2|` solving `A = ημν sinh 2r1 sinh 2|r2|`, with `(r1, ν)` tied to `|r2|`
/// through the measured single-crystal photon numbers.
pub fn r2_exact(amplitude: f64, eta: f64, mu: f64, n_inside: f64, n2: f64) -> Result<f64> {
    check_positive("amplitude", amplitude)?;
    check_positive("eta", eta)?;
    check_positive("mu", mu)?;
    check_positive("n_inside", n_inside)?;
    check_positive("n2", n2)?;
    let target = amplitude.ln();
    let f = |r: f64| ln_exact_amplitude(r, eta, mu, n_inside, n2) - target;
    let (mut lo, mut hi) = (1e-9, 30.0);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::Inconsistent(format!(
            "fringe amplitude {amplitude} is not reachable with n_inside = {n_inside}, n2 = {n2}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl FitResult {
    pub fn from_fit(fit: FringeFit, gains: Option<GainInputs>) -> Result<Self> {
        let visibility = (fit.amplitude > 0.0 && fit.background >= 0.0)
            .then(|| visibility(fit.amplitude, fit.background));
        let mut out = Self {
            fit,
            visibility,
            r2_abs: None,
            r2_abs_err: None,
            r2_method: None,
            r1: None,
            nu: None,
        };
        let Some(g) = gains else {
            return Ok(out);
        };
        let rel_a = fit.amplitude_err / fit.amplitude;
        match g.n2 {
            None => {
                out.r2_abs = Some(r2_high_gain(fit.amplitude, g.eta, g.mu, g.n_inside)?);
                out.r2_abs_err = Some(rel_a / 2.0);
                out.r2_method = Some(GainMethod::HighGain);
            }
            Some(n2) => {
                let r2 = r2_exact(fit.amplitude, g.eta, g.mu, g.n_inside, n2)?;
                let h = 1e-6 * r2.max(1e-3);
                let dlna = (ln_exact_amplitude(r2 + h, g.eta, g.mu, g.n_inside, n2)
                    - ln_exact_amplitude(r2 - h, g.eta, g.mu, g.n_inside, n2))
                    / (2.0 * h);
                let (r1, nu) = extract_gains(g.n_inside, n2, r2)?;
                out.r2_abs = Some(r2);
                out.r2_abs_err = Some(rel_a / dlna);
                out.r2_method = Some(GainMethod::Exact);
                out.r1 = Some(r1);
                out.nu = Some(nu);
            }
        }
        Ok(out)
    }
}

/// Fits a fringe scan, weighting each position by its standard error of the mean.
pub fn fit_scan(scan: &FringeScan, gains: Option<GainInputs>) -> Result<FitResult> {
    let points: Vec<FringePoint> = scan
        .rows
        .iter()
        .map(|row| FringePoint {
            phi: row.phi,
            value: row.mean_photons,
            sigma: (row.n_pulses_kept > 1 && row.std_photons > 0.0)
                .then(|| row.std_photons / (row.n_pulses_kept as f64).sqrt()),
        })
        .collect();
    FitResult::from_fit(fit_fringe(&points)?, gains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn synthetic(a: f64, b: f64, phi0: f64, n: usize) -> Vec<FringePoint> {
        (0..n)
            .map(|k| {
                let phi = -FRAC_PI_2 + PI * k as f64 / (n - 1) as f64;
                FringePoint {
                    phi,
                    value: a * (phi - phi0).sin().powi(2) + b,
                    sigma: None,
                }
            })
            .collect()
    }

    #[test]
    fn period_values() {
        assert_abs_diff_eq!(period(400e-6, DEFAULT_DELTA_N_AIR).unwrap(), 52.0, epsilon = 0.1);
        assert_abs_diff_eq!(period(800e-6, DEFAULT_DELTA_N_AIR).unwrap(), 104.0, epsilon = 0.2);
        let d = period(400e-6, DEFAULT_DELTA_N_AIR).unwrap();
        assert_relative_eq!(period(400e-6, 2.0 * DEFAULT_DELTA_N_AIR).unwrap(), d / 2.0, max_relative = 1e-15);
        assert!(period(0.0, 1e-5).is_err());
        assert!(period(1.0, -1e-5).is_err());
    }

    #[test]
    fn phase_conversion() {
        assert_abs_diff_eq!(distance_to_phase(52.0, 52.0, 0.0).unwrap(), PI, epsilon = 1e-12);
        assert_eq!(distance_to_phase(0.0, 52.0, 0.4).unwrap(), 0.4);
        assert_abs_diff_eq!(distance_to_phase(26.0, 52.0, 0.0).unwrap(), FRAC_PI_2, epsilon = 1e-12);
        assert!(distance_to_phase(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn visibility_values() {
        assert_eq!(visibility(10.0, 0.0), 1.0);
        assert_eq!(visibility(10.0, 5.0), 0.5);
    }

    #[test]
    fn extraction_examples() {
        let (r1, nu) = extract_gains(4.8, 80.0, 3.9).unwrap();
        assert_abs_diff_eq!(r1, 2.50, epsilon = 0.01);
        assert_abs_diff_eq!(nu, 0.131, epsilon = 0.001);
        let (r1, nu) = extract_gains(4.8, 2437.0, 5.2).unwrap();
        assert_abs_diff_eq!(r1, 2.10, epsilon = 0.01);
        assert_abs_diff_eq!(nu, 0.297, epsilon = 0.001);
        let (r1, nu) = extract_gains(3.0, 3.0, 1.7).unwrap();
        assert_relative_eq!(r1, 1.7, max_relative = 1e-12);
        assert_relative_eq!(nu, 3.0 / 1.7f64.sinh().powi(2), max_relative = 1e-12);
    }

    #[test]
    fn extraction_rejects_unphysical() {
        assert!(matches!(extract_gains(4.8, 1e6, 1.0), Err(Error::Inconsistent(_))));
        assert!(extract_gains(0.0, 1.0, 1.0).is_err());
        assert!(extract_gains(1.0, -1.0, 1.0).is_err());
        assert!(extract_gains(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_fit_recovers_parameters() {
        let fit = fit_fringe(&synthetic(8000.0, 100.0, 0.3, 41)).unwrap();
        assert_relative_eq!(fit.amplitude, 8000.0, max_relative = 1e-6);
        assert_relative_eq!(fit.background, 100.0, max_relative = 1e-6);
        assert_relative_eq!(fit.phase_offset, 0.3, max_relative = 1e-6);
        assert!(!fit.weighted);
    }

    #[test]
    fn fit_is_invariant_under_pi_shifts() {
        let base = synthetic(500.0, 20.0, -0.2, 31);
        let shifted: Vec<_> = base
            .iter()
            .map(|p| FringePoint {
                phi: p.phi + 3.0 * PI,
                ..*p
            })
            .collect();
        let a = fit_fringe(&base).unwrap();
        let b = fit_fringe(&shifted).unwrap();
        assert_relative_eq!(a.amplitude, b.amplitude, max_relative = 1e-8);
        assert_relative_eq!(a.background, b.background, max_relative = 1e-8);
        assert_abs_diff_eq!(a.phase_offset, b.phase_offset, epsilon = 1e-8);
    }

    #[test]
    fn fit_preconditions() {
        assert!(matches!(
            fit_fringe(&synthetic(1.0, 1.0, 0.0, 4)),
            Err(Error::InsufficientData(_))
        ));
        let same_phase: Vec<_> = (0..6)
            .map(|k| FringePoint {
                phi: 0.2,
                value: k as f64,
                sigma: None,
            })
            .collect();
        assert!(matches!(fit_fringe(&same_phase), Err(Error::DegenerateData(_))));
        let narrow: Vec<_> = synthetic(1.0, 1.0, 0.0, 9)
            .into_iter()
            .map(|p| FringePoint { phi: p.phi * 0.1, ..p })
            .collect();
        assert!(matches!(fit_fringe(&narrow), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn high_gain_r2_round_trip() {
        let (eta, mu, n_inside, r2): (f64, f64, f64, f64) = (0.77, 0.97, 4.8, 3.9);
        let a = eta * mu * n_inside * (2.0 * r2).exp();
        let fit = fit_fringe(&synthetic(a, 250.0, 0.05, 53)).unwrap();
        let res = FitResult::from_fit(
            fit,
            Some(GainInputs {
                eta,
                mu,
                n_inside,
                n2: None,
            }),
        )
        .unwrap();
        assert_relative_eq!(res.r2_abs.unwrap(), r2, max_relative = 1e-6);
        assert_eq!(res.r2_method, Some(GainMethod::HighGain));
    }

    #[test]
    fn exact_r2_round_trip() {
        let (eta, mu, r1, r2, nu): (f64, f64, f64, f64, f64) = (0.77, 0.97, 2.1, 5.2, 0.29);
        let n_inside = nu * r1.sinh().powi(2);
        let n2 = nu * r2.sinh().powi(2);
        let a = eta * mu * nu * (2.0 * r1).sinh() * (2.0 * r2).sinh();
        let got = r2_exact(a, eta, mu, n_inside, n2).unwrap();
        assert_relative_eq!(got, r2, max_relative = 1e-10);
        let (r1_back, nu_back) = extract_gains(n_inside, n2, got).unwrap();
        assert_relative_eq!(r1_back, r1, max_relative = 1e-9);
        assert_relative_eq!(nu_back, nu, max_relative = 1e-9);
        assert!(r2_exact(1e-3, eta, mu, n_inside, n2).is_err());
    }

    #[test]
    fn half_period_wrapping() {
        for phi in [-4.0, -1.0, 0.0, 0.5, 1.57, 2.0, 7.0] {
            let w = wrap_half_period(phi);
            assert!(w > -FRAC_PI_2 && w <= FRAC_PI_2);
            assert_abs_diff_eq!((phi - w) / PI, ((phi - w) / PI).round(), epsilon = 1e-12);
        }
    }
}
