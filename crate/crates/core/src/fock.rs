//! Truncated Fock-space density matrices.
//!
//! This module is the brute-force reference for the Gaussian engine: squeezers
//! are dense matrix exponentials of the truncated generator, losses are Kraus
//! sums of the amplitude-damping channel. It is exact up to truncation and
//! intended for small gains only.
//!
//! Phase conventions match [`crate::gaussian`]: the squeeze generator is
//! `(r/2)(e^{iθ} a†² − e^{−iθ} a²)`, so `θ = 0` amplifies `x = a + a†`, and a
//! phase-plane rotation by `φ` is `exp(iφ n)`.
//!
//! Truncation is tracked through a squeeze budget: the sum of all squeeze
//! magnitudes applied since the vacuum. Rotations and losses never increase
//! the largest covariance eigenvalue, so the photon-number tail of a squeezed
//! vacuum at the budget bounds the population that would fall beyond the
//! cutoff. That tail is reported as the state's leakage.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_finite, check_unit_interval, Error, Result};

pub const DEFAULT_CUTOFF: usize = 256;
pub const MIN_CUTOFF: usize = 16;
/// Largest truncation leakage accepted by the constructors.
pub const LEAKAGE_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FockState {
    rho: DMatrix<Complex64>,
    squeeze_budget: f64,
}

/// Result of [`FockState::diagnose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockDiagnostics {
    pub hermiticity_error: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub leakage: f64,
}

/// Probability mass of a squeezed vacuum of gain `r` on photon numbers `>= cutoff`.
pub fn squeezed_vacuum_tail(r: f64, cutoff: usize) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let t2 = r.tanh().powi(2);
    // p_m = P(n = 2m); p_{m+1} = p_m t² (2m+1)/(2m+2).
    let mut p = 1.0 / r.cosh();
    let mut m = 0usize;
    while 2 * m < cutoff {
        p *= t2 * (2 * m + 1) as f64 / (2 * m + 2) as f64;
        m += 1;
    }
    let mut tail = 0.0;
    loop {
        tail += p;
        p *= t2 * (2 * m + 1) as f64 / (2 * m + 2) as f64;
        m += 1;
        // Terms decay at least geometrically with ratio t².
        if p == 0.0 || p * t2 / (1.0 - t2) <= tail * 1e-17 {
            break;
        }
    }
    tail
}

/// Largest squeeze whose truncation leakage at `cutoff` stays within [`LEAKAGE_LIMIT`].
pub fn max_squeeze(cutoff: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while squeezed_vacuum_tail(hi, cutoff) <= LEAKAGE_LIMIT {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if squeezed_vacuum_tail(mid, cutoff) <= LEAKAGE_LIMIT {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < MIN_CUTOFF {
        return Err(Error::InvalidParameter {
            name: "cutoff",
            value: cutoff as f64,
            reason: "Fock cutoff must be at least 16",
        });
    }
    Ok(())
}

fn check_budget(budget: f64, cutoff: usize) -> Result<f64> {
    let leakage = squeezed_vacuum_tail(budget, cutoff);
    if leakage > LEAKAGE_LIMIT {
        return Err(Error::Truncation {
            cutoff,
            r: budget,
            r_max: max_squeeze(cutoff),
            leakage,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(leakage)
}

/// Dense unitary `exp((r/2)(e^{iθ} a†² − e^{−iθ} a²))` on the truncated space.
pub fn squeeze_operator(r: f64, theta: f64, cutoff: usize) -> DMatrix<Complex64> {
    let mut gen = DMatrix::<Complex64>::zeros(cutoff, cutoff);
    let phase = Complex64::from_polar(0.5 * r, theta);
    for n in 0..cutoff.saturating_sub(2) {
        let amp = (((n + 1) * (n + 2)) as f64).sqrt();
        gen[(n + 2, n)] = phase * amp;
        gen[(n, n + 2)] = -phase.conj() * amp;
    }
    gen.exp()
}

/// `ln n!` for `n <= size`.
fn ln_factorials(size: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(size + 1);
    table.push(0.0);
    for n in 1..=size {
        table.push(table[n - 1] + (n as f64).ln());
    }
    table
}

/// Kraus amplitudes `c[m][k] = sqrt(C(m+k, k) η^m (1−η)^k)` for `m + k < d`.
fn damping_amplitudes(eta: f64, d: usize) -> DMatrix<f64> {
    let lf = ln_factorials(d);
    let (ln_eta, ln_loss) = (eta.ln(), (1.0 - eta).ln());
    DMatrix::from_fn(d, d, |m, k| {
        if m + k >= d {
            return 0.0;
        }
        let ln_binom = lf[m + k] - lf[m] - lf[k];
        let mut ln_c = ln_binom;
        if m > 0 {
            ln_c += m as f64 * ln_eta;
        }
        if k > 0 {
            ln_c += k as f64 * ln_loss;
        }
        (0.5 * ln_c).exp()
    })
}

/// Loss applied to a photon-number distribution: `p'_m = Σ_k C(m+k,k) η^m (1−η)^k p_{m+k}`.
pub fn attenuate_distribution(p: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_unit_interval("eta", eta)?;
    let d = p.len();
    if eta == 1.0 {
        return Ok(p.to_vec());
    }
    if eta == 0.0 {
        let mut out = vec![0.0; d];
        if d > 0 {
            out[0] = p.iter().sum();
        }
        return Ok(out);
    }
    let c = damping_amplitudes(eta, d);
    Ok((0..d)
        .map(|m| (0..d - m).map(|k| c[(m, k)] * c[(m, k)] * p[m + k]).sum())
        .collect())
}

/// Mean and variance of a photon-number distribution.
pub fn distribution_moments(p: &[f64]) -> (f64, f64) {
    let (mut s1, mut s2) = (0.0, 0.0);
    for (n, &pn) in p.iter().enumerate() {
        let n = n as f64;
        s1 += n * pn;
        s2 += n * n * pn;
    }
    (s1, (s2 - s1 * s1).max(0.0))
}

impl FockState {
    /// Wraps an explicit density matrix. The matrix is taken as given: call
    /// [`FockState::diagnose`] to check it.
    pub fn from_density_matrix(rho: DMatrix<Complex64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: rho.ncols() as f64,
                reason: "density matrix must be square",
            });
        }
        check_cutoff(rho.nrows())?;
        Ok(Self {
            rho,
            squeeze_budget: 0.0,
        })
    }

    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        check_cutoff(cutoff)?;
        if n >= cutoff {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                reason: "Fock index beyond cutoff",
            });
        }
        let mut rho = DMatrix::zeros(cutoff, cutoff);
        rho[(n, n)] = Complex64::new(1.0, 0.0);
        Ok(Self {
            rho,
            squeeze_budget: 0.0,
        })
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        Self::fock(0, cutoff)
    }

    /// `S(r, θ)|0⟩⟨0|S(r, θ)†`, rejected when the cutoff cannot hold it.
    pub fn squeezed_vacuum(r: f64, theta: f64, cutoff: usize) -> Result<Self> {
        check_cutoff(cutoff)?;
        check_finite("theta", theta)?;
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                value: r,
                reason: "squeeze magnitude must be finite and non-negative",
            });
        }
        check_budget(r, cutoff)?;
        let u = squeeze_operator(r, theta, cutoff);
        let psi = u.column(0);
        let rho = psi * psi.adjoint();
        Ok(Self {
            rho,
            squeeze_budget: r,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn squeeze_budget(&self) -> f64 {
        self.squeeze_budget
    }

    /// Upper estimate of the population lost to truncation.
    pub fn leakage(&self) -> f64 {
        squeezed_vacuum_tail(self.squeeze_budget, self.cutoff())
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        self.rho.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn apply_unitary(&self, u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        u * &self.rho * u.adjoint()
    }

    pub fn apply_squeeze(&self, r: f64, theta: f64) -> Result<Self> {
        self.apply_squeeze_with(&squeeze_operator(r, theta, self.cutoff()), r)
    }

    /// Applies a precomputed squeeze operator of magnitude `r`.
    pub fn apply_squeeze_with(&self, op: &DMatrix<Complex64>, r: f64) -> Result<Self> {
        let budget = self.squeeze_budget + r;
        check_budget(budget, self.cutoff())?;
        Ok(Self {
            rho: self.apply_unitary(op),
            squeeze_budget: budget,
        })
    }

    /// Phase-plane rotation `exp(iφn) ρ exp(−iφn)`.
    pub fn apply_rotation(&self, phi: f64) -> Self {
        let d = self.cutoff();
        let phases: Vec<Complex64> = (0..d)
            .map(|n| Complex64::from_polar(1.0, phi * n as f64))
            .collect();
        let rho = DMatrix::from_fn(d, d, |m, n| self.rho[(m, n)] * phases[m] * phases[n].conj());
        Self {
            rho,
            squeeze_budget: self.squeeze_budget,
        }
    }

    /// Amplitude-damping channel of transmission `eta` as a Kraus sum.
    pub fn apply_loss(&self, eta: f64) -> Result<Self> {
        check_unit_interval("eta", eta)?;
        let d = self.cutoff();
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let mut rho = DMatrix::<Complex64>::zeros(d, d);
        if eta == 0.0 {
            rho[(0, 0)] = Complex64::new(self.trace(), 0.0);
        } else {
            let c = damping_amplitudes(eta, d);
            for m in 0..d {
                for n in 0..d {
                    let kmax = d - m.max(n);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..kmax {
                        acc += self.rho[(m + k, n + k)] * (c[(m, k)] * c[(n, k)]);
                    }
                    rho[(m, n)] = acc;
                }
            }
        }
        Ok(Self {
            rho,
            squeeze_budget: self.squeeze_budget,
        })
    }

    /// Exact photon-number mean and variance from the diagonal.
    pub fn photon_stats(&self) -> (f64, f64) {
        distribution_moments(&self.photon_distribution())
    }

    pub fn diagnose(&self) -> FockDiagnostics {
        let hermiticity_error = (&self.rho - self.rho.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        let min_eigenvalue = herm
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        FockDiagnostics {
            hermiticity_error,
            trace: self.trace(),
            min_eigenvalue,
            leakage: self.leakage(),
        }
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &FockState) -> f64 {
        let diff = &self.rho - &other.rho;
        let herm = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
        0.5 * herm.symmetric_eigenvalues().iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Photon statistics of the full two-amplifier chain, computed in Fock space:
/// vacuum → squeeze(r1, 0) → loss(mu) → rotate(phi) → squeeze(r2_abs, π) → loss(detection).
pub fn chain_photon_stats(
    r1: f64,
    r2_abs: f64,
    mu: f64,
    detection: f64,
    phi: f64,
    cutoff: usize,
) -> Result<(f64, f64)> {
    let state = FockState::squeezed_vacuum(r1, 0.0, cutoff)?
        .apply_loss(mu)?
        .apply_rotation(phi)
        .apply_squeeze(r2_abs, std::f64::consts::PI)?
        .apply_loss(detection)?;
    Ok(state.photon_stats())
}

/// Reusable Fock-space chain for sweeping many phases and detection
/// efficiencies at fixed gains and internal transmission.
///
/// Only the diagonal of the state after the second squeezer is formed, and
/// the final loss acts on that distribution directly, which is exact because
/// the damping channel maps diagonal entries to diagonal entries.
pub struct ChainOracle {
    inner: FockState,
    second: DMatrix<Complex64>,
    r2_abs: f64,
}

impl ChainOracle {
    pub fn new(r1: f64, r2_abs: f64, mu: f64, cutoff: usize) -> Result<Self> {
        let first = FockState::squeezed_vacuum(r1, 0.0, cutoff)?;
        let second = squeeze_operator(r2_abs, std::f64::consts::PI, cutoff);
        Self::from_parts(&first, second, r2_abs, mu)
    }

    /// Builds the chain from a prepared first-amplifier state and a
    /// precomputed second squeezer (`θ = π`, magnitude `r2_abs`), so that
    /// sweeps over `mu` reuse the matrix exponentials.
    pub fn from_parts(
        first: &FockState,
        second: DMatrix<Complex64>,
        r2_abs: f64,
        mu: f64,
    ) -> Result<Self> {
        if second.nrows() != first.cutoff() {
            return Err(Error::InvalidParameter {
                name: "second",
                value: second.nrows() as f64,
                reason: "squeeze operator dimension differs from the state cutoff",
            });
        }
        check_budget(first.squeeze_budget + r2_abs, first.cutoff())?;
        Ok(Self {
            inner: first.apply_loss(mu)?,
            second,
            r2_abs,
        })
    }

    /// Photon-number distribution after the second squeezer, before detection loss.
    pub fn distribution_before_detection(&self, phi: f64) -> Vec<f64> {
        let rotated = self.inner.apply_rotation(phi);
        let u = &self.second;
        let right = &rotated.rho * u.adjoint();
        let d = u.nrows();
        (0..d)
            .map(|j| {
                (0..d)
                    .map(|a| u[(j, a)] * right[(a, j)])
                    .sum::<Complex64>()
                    .re
            })
            .collect()
    }

    pub fn stats(&self, phi: f64, detection: f64) -> Result<(f64, f64)> {
        let p = attenuate_distribution(&self.distribution_before_detection(phi), detection)?;
        Ok(distribution_moments(&p))
    }

    pub fn r2_abs(&self) -> f64 {
        self.r2_abs
    }
}

/// Fock-space chain with the second squeezer and detection loss taken in the
/// Heisenberg picture.
///
/// The state after the first squeezer, internal loss and phase is evolved as
/// a truncated density matrix. The output photon number is then evaluated as
/// `b†b` with `b = S₂† a S₂ = a cosh|r2| − a† sinh|r2|`, which holds exactly for
/// the squeeze operator. Only the first squeeze enters the truncation budget,
/// so gain pairs whose sum exceeds what a Schrödinger-picture chain can hold
/// at the same cutoff remain accessible.
pub struct HeisenbergChainOracle {
    /// `Σ_{i−j=k} ρ_ij (N)_ji` and the same for `N²`, indexed by `k + d − 1`.
    first: Vec<Complex64>,
    second: Vec<Complex64>,
}

impl HeisenbergChainOracle {
    pub fn new(r1: f64, r2_abs: f64, mu: f64, cutoff: usize) -> Result<Self> {
        Self::from_state(&FockState::squeezed_vacuum(r1, 0.0, cutoff)?, r2_abs, mu)
    }

    /// Builds the oracle from a prepared first-amplifier state, so sweeps over
    /// `r2_abs` and `mu` reuse its matrix exponential.
    pub fn from_state(first: &FockState, r2_abs: f64, mu: f64) -> Result<Self> {
        check_finite("r2_abs", r2_abs)?;
        let d = first.cutoff();
        let a = DMatrix::<f64>::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
        let b = a.scale(r2_abs.cosh()) - a.transpose().scale(r2_abs.sinh());
        let n_out = b.transpose() * &b;
        let n_out_sq = &n_out * &n_out;
        let lossy = first.apply_loss(mu)?;
        let rho = lossy.rho();
        let mut sums = (vec![Complex64::new(0.0, 0.0); 2 * d - 1], vec![Complex64::new(0.0, 0.0); 2 * d - 1]);
        for j in 0..d {
            for i in 0..d {
                let k = i + d - 1 - j;
                sums.0[k] += rho[(i, j)] * n_out[(j, i)];
                sums.1[k] += rho[(i, j)] * n_out_sq[(j, i)];
            }
        }
        Ok(Self {
            first: sums.0,
            second: sums.1,
        })
    }

    /// `(⟨N⟩, ⟨N²⟩)` after the phase `phi` and the second squeezer, before
    /// detection loss. The phase multiplies `ρ_ij` by `e^{iφ(i−j)}`.
    pub fn raw_moments(&self, phi: f64) -> (f64, f64) {
        let offset = (self.first.len() as f64 - 1.0) / 2.0;
        let (mut m1, mut m2) = (0.0, 0.0);
        for (k, (c1, c2)) in self.first.iter().zip(&self.second).enumerate() {
            let phase = Complex64::from_polar(1.0, phi * (k as f64 - offset));
            m1 += (c1 * phase).re;
            m2 += (c2 * phase).re;
        }
        (m1, m2)
    }

    /// Output mean and variance after a detection loss `detection`.
    pub fn stats(&self, phi: f64, detection: f64) -> Result<(f64, f64)> {
        check_unit_interval("detection", detection)?;
        let (m1, m2) = self.raw_moments(phi);
        let var = m2 - m1 * m1;
        Ok((
            detection * m1,
            detection * detection * var + detection * (1.0 - detection) * m1,
        ))
    }
}
