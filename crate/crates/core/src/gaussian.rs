//! Single-mode Gaussian states.
//!
//! Quadratures are `x = a + a†` and `p = -i(a - a†)`, so the vacuum covariance
//! is the identity and a squeezed vacuum of gain `r` has variances `e^{±2r}`.
//! With this normalisation the mean photon number of a zero-mean state is
//! `(Tr V - 2) / 4`.
//!
//! A squeeze `S(r, θ)` stretches the quadrature at angle `θ/2` in the phase
//! plane by `e^r` and compresses the orthogonal one by `e^{-r}`; `θ = 0`
//! amplifies `x`. Consequently `S(r, θ + π) = S(r, θ)⁻¹`.
//!
//! The Wigner function is evaluated in the rescaled coordinates
//! `x' = x/√2, p' = p/√2` (vacuum variance 1/2), where it is a normalised
//! density with peak `1/π` for any pure state.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};

use crate::error::{check_finite, check_unit_interval, Error, Result};

/// Smallest admissible `det(cov)` for a physical state.
pub const UNCERTAINTY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    mean: Vector2<f64>,
    cov: Matrix2<f64>,
}

/// Squeeze magnitude and phase of one degenerate parametric amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParams {
    r: f64,
    theta: f64,
}

impl SqueezeParams {
    /// `theta` is wrapped into `[0, 2π)`.
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        check_finite("r", r)?;
        check_finite("theta", theta)?;
        if r < 0.0 {
            return Err(Error::InvalidParameter {
                name: "r",
                value: r,
                reason: "squeeze magnitude must be non-negative",
            });
        }
        let mut theta = theta.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        Ok(Self { r, theta })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Symplectic matrix `R(θ/2) diag(e^r, e^-r) R(θ/2)ᵀ`.
    pub fn matrix(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        let (sh, ch) = (self.r.sinh(), self.r.cosh());
        Matrix2::new(ch + sh * c, sh * s, sh * s, ch - sh * c)
    }
}

pub fn rotation_matrix(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

impl GaussianState {
    /// Builds a state from explicit moments, checking symmetry, positivity
    /// and the uncertainty bound.
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cov",
                value: f64::NAN,
                reason: "moments must be finite",
            });
        }
        if cov[(0, 1)] != cov[(1, 0)] {
            return Err(Error::InvalidParameter {
                name: "cov",
                value: cov[(0, 1)] - cov[(1, 0)],
                reason: "covariance must be symmetric",
            });
        }
        let det = cov.determinant();
        if cov[(0, 0)] <= 0.0 || det <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "cov",
                value: det,
                reason: "covariance must be positive definite",
            });
        }
        if det < 1.0 - UNCERTAINTY_SLACK {
            return Err(Error::InvalidParameter {
                name: "cov",
                value: det,
                reason: "covariance violates the uncertainty bound det >= 1",
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn vacuum() -> Self {
        Self {
            mean: Vector2::zeros(),
            cov: Matrix2::identity(),
        }
    }

    /// Thermal state with mean occupation `n`.
    pub fn thermal(n: f64) -> Result<Self> {
        crate::error::check_non_negative("n", n)?;
        Ok(Self {
            mean: Vector2::zeros(),
            cov: Matrix2::identity() * (2.0 * n + 1.0),
        })
    }

    /// Squeezed vacuum `S(r, θ)|0⟩`.
    pub fn squeezed_vacuum(p: SqueezeParams) -> Self {
        Self::vacuum().apply_squeeze(p)
    }

    pub fn mean(&self) -> &Vector2<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix2<f64> {
        &self.cov
    }

    fn congruence(&self, m: &Matrix2<f64>) -> Self {
        Self {
            mean: m * self.mean,
            cov: symmetrize(m * self.cov * m.transpose()),
        }
    }

    pub fn apply_squeeze(&self, p: SqueezeParams) -> Self {
        self.congruence(&p.matrix())
    }

    pub fn apply_rotation(&self, phi: f64) -> Self {
        self.congruence(&rotation_matrix(phi))
    }

    /// Pure-loss channel of transmission `eta`: `V → ηV + (1-η)I`.
    pub fn apply_loss(&self, eta: f64) -> Result<Self> {
        check_unit_interval("eta", eta)?;
        Ok(Self {
            mean: self.mean * eta.sqrt(),
            cov: symmetrize(self.cov * eta + Matrix2::identity() * (1.0 - eta)),
        })
    }

    pub fn photon_mean(&self) -> f64 {
        let n = (self.cov.trace() - 2.0) / 4.0 + self.mean.norm_squared() / 4.0;
        n.max(0.0)
    }

    pub fn photon_var(&self) -> f64 {
        let v = &self.cov;
        // Tr V² for symmetric V, written without forming the product.
        let tr_sq = v[(0, 0)] * v[(0, 0)] + v[(1, 1)] * v[(1, 1)] + 2.0 * v[(0, 1)] * v[(0, 1)];
        let var = (tr_sq - 2.0) / 8.0 + self.mean.dot(&(v * self.mean)) / 4.0;
        var.max(0.0)
    }

    pub fn det(&self) -> f64 {
        det2(&self.cov)
    }

    /// Wigner function at `(x, p)` in vacuum-variance-1/2 units.
    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        // σ = V/2, displacement d/√2.
        let sigma = self.cov * 0.5;
        let det = det2(&sigma);
        let dx = x - self.mean[0] / std::f64::consts::SQRT_2;
        let dp = p - self.mean[1] / std::f64::consts::SQRT_2;
        let quad = (sigma[(1, 1)] * dx * dx - 2.0 * sigma[(0, 1)] * dx * dp + sigma[(0, 0)] * dp * dp) / det;
        (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
    }

    /// Uhlmann fidelity between two single-mode Gaussian states.
    pub fn fidelity(&self, other: &GaussianState) -> f64 {
        let sum = self.cov + other.cov;
        let big_delta = det2(&sum);
        let small_delta = ((det2(&self.cov) - 1.0) * (det2(&other.cov) - 1.0)).max(0.0);
        // 2 / (√(Δ+δ) − √δ) rewritten without the subtraction.
        let prefactor = 2.0 * ((big_delta + small_delta).sqrt() + small_delta.sqrt()) / big_delta;
        let u = self.mean - other.mean;
        let quad = (sum[(1, 1)] * u[0] * u[0] - 2.0 * sum[(0, 1)] * u[0] * u[1] + sum[(0, 0)] * u[1] * u[1])
            / big_delta;
        (prefactor * (-0.5 * quad).exp()).clamp(0.0, 1.0)
    }
}

fn det2(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

fn symmetrize(mut m: Matrix2<f64>) -> Matrix2<f64> {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    m[(0, 1)] = off;
    m[(1, 0)] = off;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sq(r: f64, theta: f64) -> SqueezeParams {
        SqueezeParams::new(r, theta).unwrap()
    }

    #[test]
    fn vacuum_moments() {
        let v = GaussianState::vacuum();
        assert_eq!(*v.cov(), Matrix2::identity());
        assert_eq!(v.photon_mean(), 0.0);
        assert_eq!(v.photon_var(), 0.0);
    }

    #[test]
    fn squeeze_scales_quadratures() {
        let s = GaussianState::squeezed_vacuum(sq(1.0, 0.0));
        assert_abs_diff_eq!(s.cov()[(0, 0)], (2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.cov()[(1, 1)], (-2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.det(), 1.0, epsilon = 1e-12);
        let unchanged = GaussianState::vacuum().apply_squeeze(sq(0.0, 1.3));
        assert_eq!(unchanged, GaussianState::vacuum());
    }

    #[test]
    fn squeeze_with_opposite_phase_is_inverse() {
        let base = GaussianState::squeezed_vacuum(sq(0.7, 0.4)).apply_rotation(0.9);
        let back = base.apply_squeeze(sq(1.1, 2.0)).apply_squeeze(sq(1.1, 2.0 + PI));
        for (a, b) in back.cov().iter().zip(base.cov().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn squeeze_rejects_bad_parameters() {
        assert!(SqueezeParams::new(f64::NAN, 0.0).is_err());
        assert!(SqueezeParams::new(f64::INFINITY, 0.0).is_err());
        assert!(SqueezeParams::new(-0.1, 0.0).is_err());
        let p = SqueezeParams::new(0.5, -PI / 2.0).unwrap();
        assert_abs_diff_eq!(p.theta(), 1.5 * PI, epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_swaps_quadratures() {
        let s = GaussianState::squeezed_vacuum(sq(1.0, 0.0)).apply_rotation(PI / 2.0);
        assert_abs_diff_eq!(s.cov()[(0, 0)], (-2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.cov()[(1, 1)], (2.0f64).exp(), epsilon = 1e-12);
        assert_eq!(s.cov()[(0, 1)], s.cov()[(1, 0)]);
    }

    #[test]
    fn loss_endpoints() {
        let s = GaussianState::squeezed_vacuum(sq(1.0, 0.3));
        assert_eq!(s.apply_loss(1.0).unwrap(), s);
        assert_eq!(*s.apply_loss(0.0).unwrap().cov(), Matrix2::identity());
        assert!(s.apply_loss(1.5).is_err());
        assert!(s.apply_loss(-0.01).is_err());
        let half = s.apply_loss(0.5).unwrap();
        assert_abs_diff_eq!(half.photon_mean(), 0.5 * 1f64.sinh().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn squeezed_photon_statistics() {
        let s = GaussianState::squeezed_vacuum(sq(1.5, 0.0));
        assert_abs_diff_eq!(s.photon_mean(), 1.5f64.sinh().powi(2), epsilon = 1e-12);
        let s1 = GaussianState::squeezed_vacuum(sq(1.0, 0.0));
        let n = 1f64.sinh().powi(2);
        assert_abs_diff_eq!(s1.photon_var(), 2.0 * n * (n + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(s1.photon_var(), 6.577, epsilon = 1e-3);
    }

    #[test]
    fn thermal_variance_is_bose_einstein() {
        let t = GaussianState::new(Vector2::zeros(), Matrix2::identity() * 3.0).unwrap();
        assert_abs_diff_eq!(t.photon_mean(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.photon_var(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn interferometer_photon_number_matches_filtered_mode() {
        // ν = 0.375 filtering of r = 1.5 gives the 1.7-photon working point.
        let s = GaussianState::squeezed_vacuum(sq(1.5, 0.0)).apply_loss(0.375).unwrap();
        assert_abs_diff_eq!(s.photon_mean(), 1.70, epsilon = 0.005);
    }

    #[test]
    fn constructor_rejects_unphysical_moments() {
        let z = Vector2::zeros();
        assert!(GaussianState::new(z, Matrix2::new(1.0, 0.1, 0.2, 1.0)).is_err());
        assert!(GaussianState::new(z, Matrix2::new(0.5, 0.0, 0.0, 0.5)).is_err());
        assert!(GaussianState::new(z, Matrix2::new(-1.0, 0.0, 0.0, -1.0)).is_err());
        assert!(GaussianState::new(z, Matrix2::new(2.0, 0.0, 0.0, 0.5)).is_ok());
    }

    #[test]
    fn fidelity_basics() {
        let v = GaussianState::vacuum();
        let s = GaussianState::squeezed_vacuum(sq(1.0, 0.0));
        assert_abs_diff_eq!(s.fidelity(&s), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.fidelity(&s), s.fidelity(&v), epsilon = 1e-15);
        assert_abs_diff_eq!(v.fidelity(&s), 1.0 / 1f64.cosh(), epsilon = 1e-12);
        // Coherent states |α⟩, |β⟩: F = exp(-|α-β|²).
        let a = GaussianState::new(Vector2::new(2.0, 0.0), Matrix2::identity()).unwrap();
        let b = GaussianState::new(Vector2::new(0.0, 2.0), Matrix2::identity()).unwrap();
        assert_abs_diff_eq!(a.fidelity(&b), (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn coherent_photon_statistics() {
        // |α|² = 4 for d = (4, 0).
        let a = GaussianState::new(Vector2::new(4.0, 0.0), Matrix2::identity()).unwrap();
        assert_abs_diff_eq!(a.photon_mean(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.photon_var(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn wigner_peak_values() {
        assert_abs_diff_eq!(GaussianState::vacuum().wigner(0.0, 0.0), 1.0 / PI, epsilon = 1e-15);
        let s = GaussianState::squeezed_vacuum(sq(1.0, 0.0));
        assert_abs_diff_eq!(s.wigner(0.0, 0.0), 1.0 / PI, epsilon = 1e-12);
    }

    #[test]
    fn wigner_is_normalised() {
        let s = GaussianState::squeezed_vacuum(sq(0.8, 0.7))
            .apply_loss(0.6)
            .unwrap()
            .apply_rotation(0.3);
        let (half, n) = (12.0, 1200);
        let h = 2.0 * half / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let x = -half + (i as f64 + 0.5) * h;
            for j in 0..n {
                let p = -half + (j as f64 + 0.5) * h;
                total += s.wigner(x, p);
            }
        }
        assert_abs_diff_eq!(total * h * h, 1.0, epsilon = 1e-3);
    }
}
