//! Charge-integrating detector: calibration curve, its inverse, and additive noise.
//!
//! Below the knee the response has a quadratic deficit,
//!
//! ```text
//! R(N) = gain · (N − d·k/2 · (1 − (1 − N/k)²)),   N < k
//! R(N) = gain · (N − d·k/2),                      N ≥ k
//! ```
//!
//! which matches value and slope at the knee `k`. The slope rises linearly
//! from `gain·(1 − d)` at zero flux to `gain` at the knee.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Pulse-area units per photon in the linear regime.
    gain: f64,
    /// Photons per pulse above which the response is linear.
    knee: f64,
    /// Fractional slope deficit at zero flux, in `[0, 1)`.
    deficit: f64,
    /// Detector noise in the linear regime, photons.
    noise_linear: f64,
    /// Detector noise at zero flux, photons.
    noise_dark: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            gain: 1.0,
            knee: 2000.0,
            deficit: 0.5,
            noise_linear: 290.0,
            noise_dark: 1000.0,
        }
    }
}

impl DetectorModel {
    pub fn new(gain: f64, knee: f64, deficit: f64, noise_linear: f64, noise_dark: f64) -> Result<Self> {
        check_positive("detector_gain", gain)?;
        check_positive("detector_knee", knee)?;
        if !(0.0..1.0).contains(&deficit) {
            return Err(Error::InvalidParameter {
                name: "detector_deficit",
                value: deficit,
                reason: "must lie in [0, 1) to keep the response strictly increasing",
            });
        }
        check_non_negative("detector_noise_linear", noise_linear)?;
        check_non_negative("detector_noise_dark", noise_dark)?;
        Ok(Self {
            gain,
            knee,
            deficit,
            noise_linear,
            noise_dark,
        })
    }

    /// Linear detector with a flat noise floor.
    pub fn linear(gain: f64, noise: f64) -> Result<Self> {
        Self::new(gain, 1.0, 0.0, noise, noise)
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn knee(&self) -> f64 {
        self.knee
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn noise_linear(&self) -> f64 {
        self.noise_linear
    }

    pub fn noise_dark(&self) -> f64 {
        self.noise_dark
    }

    /// Offset of the linear asymptote, `R(N) = gain·N + offset` for `N ≥ knee`.
    pub fn offset(&self) -> f64 {
        -self.gain * self.deficit * self.knee / 2.0
    }

    /// Pulse area for a mean photon number.
    pub fn response(&self, photons: f64) -> Result<f64> {
        check_non_negative("photons", photons)?;
        if photons >= self.knee {
            return Ok(self.gain * photons + self.offset());
        }
        let x = photons / self.knee;
        let deficit = self.deficit * self.knee / 2.0 * (1.0 - (1.0 - x) * (1.0 - x));
        Ok(self.gain * (photons - deficit))
    }

    /// `dR/dN`.
    pub fn response_slope(&self, photons: f64) -> f64 {
        if photons >= self.knee {
            self.gain
        } else {
            self.gain * (1.0 - self.deficit * (1.0 - photons / self.knee))
        }
    }

    /// Photon number producing a given pulse area.
    ///
    /// Below the knee this solves `(d/2)x² + (1−d)x − u = 0` for `x = N/k`
    /// with `u = area/(gain·k)`, in a cancellation-free form.
    pub fn invert_response(&self, area: f64) -> Result<f64> {
        if !(area.is_finite() && area >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "area",
                value: area,
                reason: "pulse area must be finite and not below the zero-flux response",
            });
        }
        let knee_area = self.gain * self.knee + self.offset();
        if area >= knee_area {
            return Ok((area - self.offset()) / self.gain);
        }
        let u = area / (self.gain * self.knee);
        let lin = 1.0 - self.deficit;
        let x = 2.0 * u / (lin + (lin * lin + 2.0 * self.deficit * u).sqrt());
        Ok(x * self.knee)
    }

    /// Detector noise in photons: `noise_dark` at zero flux, easing down to
    /// `noise_linear` at the knee with a smoothstep profile.
    pub fn noise_at(&self, photons: f64) -> f64 {
        let t = (photons / self.knee).clamp(0.0, 1.0);
        let s = t * t * (3.0 - 2.0 * t);
        self.noise_linear + (self.noise_dark - self.noise_linear) * (1.0 - s)
    }

    /// One per-pulse reading with total variance `true_var + noise_at(true_mean)²`.
    pub fn sample_reading<R: Rng + ?Sized>(&self, true_mean: f64, true_var: f64, rng: &mut R) -> f64 {
        sample_gaussian_reading(true_mean, true_var, self.noise_at(true_mean), rng)
    }
}

/// Gaussian reading with mean `true_mean` and variance `true_var + noise²`.
///
/// Readings are baseline-subtracted charges, so electronic noise can push
/// them below zero; they are not clamped.
pub fn sample_gaussian_reading<R: Rng + ?Sized>(true_mean: f64, true_var: f64, noise: f64, rng: &mut R) -> f64 {
    let std = (true_var.max(0.0) + noise * noise).sqrt();
    if std == 0.0 {
        return true_mean;
    }
    let normal = Normal::new(true_mean, std).expect("finite standard deviation");
    normal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn response_anchors() {
        let m = DetectorModel::default();
        assert_eq!(m.response(0.0).unwrap(), 0.0);
        let n = 2.0 * m.knee();
        let asymptote = m.gain() * n + m.offset();
        assert_relative_eq!(m.response(n).unwrap(), asymptote, max_relative = 1e-9);
        assert!(m.response_slope(m.knee() / 10.0) < m.gain());
        assert!(m.response(-1.0).is_err());
    }

    #[test]
    fn response_is_continuous_with_matching_slope_at_knee() {
        let m = DetectorModel::new(3.0, 1500.0, 0.7, 290.0, 1000.0).unwrap();
        let below = m.response(1500.0 - 1e-6).unwrap();
        let at = m.response(1500.0).unwrap();
        assert_abs_diff_eq!(below, at, epsilon = 1e-4);
        let h = 1e-3;
        let left = (m.response(1500.0 - h).unwrap() - m.response(1500.0 - 2.0 * h).unwrap()) / h;
        assert_relative_eq!(left, 3.0, max_relative = 1e-5);
    }

    #[test]
    fn round_trip() {
        let m = DetectorModel::default();
        for n in [10.0, 2000.0, 1e6] {
            let back = m.invert_response(m.response(n).unwrap()).unwrap();
            assert!((back - n).abs() / n <= 1e-8, "{n} -> {back}");
        }
        assert_eq!(m.invert_response(0.0).unwrap(), 0.0);
        assert!(m.invert_response(-1.0).is_err());
    }

    #[test]
    fn linear_asymptote_inverse() {
        let m = DetectorModel::default();
        let area = 7.5e5;
        assert_relative_eq!(
            m.invert_response(area).unwrap(),
            (area - m.offset()) / m.gain(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn noise_profile() {
        let m = DetectorModel::default();
        assert_eq!(m.noise_at(1e6), 290.0);
        assert_eq!(m.noise_at(0.0), 1000.0);
        assert_eq!(m.noise_at(2000.0), 290.0);
        let mut last = f64::INFINITY;
        for k in 0..=300 {
            let v = m.noise_at(k as f64 * 10.0);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DetectorModel::new(0.0, 2000.0, 0.5, 290.0, 1000.0).is_err());
        assert!(DetectorModel::new(1.0, 0.0, 0.5, 290.0, 1000.0).is_err());
        assert!(DetectorModel::new(1.0, 2000.0, 1.0, 290.0, 1000.0).is_err());
        assert!(DetectorModel::new(1.0, 2000.0, 0.5, -1.0, 1000.0).is_err());
    }

    #[test]
    fn noiseless_reading_is_exact() {
        let m = DetectorModel::linear(1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(m.sample_reading(1234.5, 0.0, &mut rng), 1234.5);
    }

    #[test]
    fn reading_is_deterministic_per_seed() {
        let m = DetectorModel::default();
        let a = m.sample_reading(500.0, 100.0, &mut ChaCha8Rng::seed_from_u64(9));
        let b = m.sample_reading(500.0, 100.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
