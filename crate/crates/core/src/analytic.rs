//! Closed-form steady-state photon distribution.
//!
//! The populations are
//!
//! ```text
//! P_q = Z⁻¹ Σ_{m=0}^{2s-q} C_mm (q+m)! (2s-q)! / [q! (2s-q-m)!]
//! Z   =     Σ_{m=0}^{2s}   C_mm (2s+m+1)! (m!)² / [(2s-m)! (2m+1)!]
//! C_mm = |σ|^{-2m} |Γ(1+m+iφ*) / (m! Γ(1+iφ*))|²
//! ```
//!
//! Factorials overflow doubles long before `2s = 200`, so every term is
//! carried as a logarithm and summed with a running-maximum log-sum-exp. The
//! Gamma ratio is the finite product `Π_{k=1}^{m} (k + iφ*)`, which needs no
//! complex log-Gamma.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{validity_warnings, ModelParams, ScaledParams};

/// Largest `n` for which `ln n!` is tabulated. `Z` needs `(4s+1)!`.
pub const LOG_FACTORIAL_LEN: usize = 4096;

/// Largest `2s` the analytic engine accepts.
pub const MAX_TWO_S: u32 = ((LOG_FACTORIAL_LEN - 2) / 2) as u32;

fn log_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LOG_FACTORIAL_LEN);
        let mut acc = 0.0f64;
        table.push(0.0);
        for k in 1..LOG_FACTORIAL_LEN {
            acc += (k as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln n!` from the shared table.
pub fn ln_factorial(n: usize) -> f64 {
    log_factorials()[n]
}

/// `ln Σ exp(x_i)`, shifted by the maximum. Returns `-inf` for an empty input.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Steady-state populations `P_q`, `q = 0..=q_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
}

impl PhotonDistribution {
    /// Wraps a population vector. Entries must be finite and non-negative;
    /// normalization is the caller's responsibility.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty photon distribution".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidInput(format!("population {bad} is not a probability")));
        }
        Ok(PhotonDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn q_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Population in levels `q >= from`.
    pub fn tail_mass(&self, from: usize) -> f64 {
        self.probs.iter().skip(from).sum()
    }
}

/// Mean photon number and zero-delay intensity correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarObservables {
    pub mean_n: f64,
    /// `G²(0) = ⟨a†²a²⟩`
    pub g2_unnorm: f64,
    /// `G²(0)/⟨n⟩²`, `None` when `⟨n⟩ = 0`.
    pub g2: Option<f64>,
}

impl ScalarObservables {
    fn from_moments(mean_n: f64, g2_unnorm: f64) -> Self {
        let g2 = (mean_n > 0.0).then(|| g2_unnorm / (mean_n * mean_n));
        ScalarObservables { mean_n, g2_unnorm, g2 }
    }
}

/// `ln C_mm`.
///
/// Uses `Γ(1+m+z)/Γ(1+z) = Π_{k=1}^{m} (k+z)` with `z = iφ*`:
/// `ln C_mm = −2m ln|σ| + Σ_k ln|k+z|² − 2 ln m!`.
pub fn log_cmm(scaled: &ScaledParams, m: u32) -> Result<f64> {
    if m == 0 {
        return Ok(0.0);
    }
    if scaled.omega == 0.0 {
        return Err(Error::InvalidInput("C_mm vanishes for m > 0 when the drive is zero".into()));
    }
    let series = log_cmm_series(scaled, m as usize)?;
    Ok(series[m as usize])
}

/// `ln C_mm` for `m = 0..=m_max`, built by the same product recurrence.
fn log_cmm_series(scaled: &ScaledParams, m_max: usize) -> Result<Vec<f64>> {
    // z = iφ*  =>  Re z = Im φ, Im z = Re φ
    let (z_re, z_im) = (scaled.phi.im, scaled.phi.re);
    let log_sigma_sq = 2.0 * scaled.sigma.norm().ln();
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..=m_max {
        let kf = k as f64;
        let re = kf + z_re;
        acc += (re * re + z_im * z_im).ln() - log_sigma_sq - 2.0 * kf.ln();
        out.push(acc);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ln C_mm"));
    }
    Ok(out)
}

/// Both routes to `ln Z`: the closed form and the sum of the unnormalized `P_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalization {
    pub closed: f64,
    pub direct: f64,
}

/// Relative tolerance between the two normalization routes.
pub const NORMALIZATION_RTOL: f64 = 1e-10;

fn unnormalized(scaled: &ScaledParams) -> Result<(Vec<f64>, LogNormalization)> {
    let two_s = scaled.two_s as usize;
    if scaled.two_s > MAX_TWO_S {
        return Err(Error::InvalidParameter(format!("two_s must be <= {MAX_TWO_S}, got {two_s}")));
    }
    let lf = log_factorials();
    let lc = log_cmm_series(scaled, two_s)?;

    let mut terms = Vec::with_capacity(two_s + 1);
    let mut log_num = Vec::with_capacity(two_s + 1);
    for q in 0..=two_s {
        terms.clear();
        terms.extend(
            (0..=two_s - q).map(|m| lc[m] + lf[q + m] + lf[two_s - q] - lf[q] - lf[two_s - q - m]),
        );
        log_num.push(log_sum_exp(&terms));
    }

    terms.clear();
    terms.extend(
        (0..=two_s).map(|m| lc[m] + lf[two_s + m + 1] + 2.0 * lf[m] - lf[two_s - m] - lf[2 * m + 1]),
    );
    let norm = LogNormalization { closed: log_sum_exp(&terms), direct: log_sum_exp(&log_num) };
    if !(norm.closed.is_finite() && norm.direct.is_finite()) || log_num.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("log-domain population sums"));
    }
    Ok((log_num, norm))
}

/// Computes `ln Z` both ways.
pub fn log_normalization(scaled: &ScaledParams) -> Result<LogNormalization> {
    if scaled.omega == 0.0 {
        return Ok(LogNormalization { closed: 0.0, direct: 0.0 });
    }
    unnormalized(scaled).map(|(_, norm)| norm)
}

/// Closed-form steady-state distribution over `q = 0..=2s`.
///
/// Logs a warning (without failing) when the parameters leave the
/// weak-excitation regime, see [`crate::model::validity_warnings`].
pub fn photon_distribution(scaled: &ScaledParams) -> Result<PhotonDistribution> {
    let two_s = scaled.two_s as usize;
    if scaled.omega == 0.0 {
        let mut probs = vec![0.0; two_s + 1];
        probs[0] = 1.0;
        return PhotonDistribution::new(probs);
    }
    let (log_num, norm) = unnormalized(scaled)?;
    if ((norm.closed - norm.direct).exp_m1()).abs() > NORMALIZATION_RTOL {
        return Err(Error::NormalizationMismatch { closed: norm.closed, direct: norm.direct });
    }
    let probs: Vec<f64> = log_num.iter().map(|l| (l - norm.direct).exp()).collect();
    let dist = PhotonDistribution::new(probs)?;

    for w in validity_warnings(scaled, Some(observables(&dist).mean_n)) {
        log::warn!("closed-form solution outside its weak-excitation regime: {w:?}");
    }
    Ok(dist)
}

/// `⟨n⟩ = Σ q P_q`, `G²(0) = Σ q(q−1) P_q`.
pub fn observables(dist: &PhotonDistribution) -> ScalarObservables {
    let (mean_n, g2_unnorm) = dist.probs.iter().enumerate().fold((0.0, 0.0), |(n, g), (q, p)| {
        let q = q as f64;
        (n + q * p, g + q * (q - 1.0) * p)
    });
    ScalarObservables::from_moments(mean_n, g2_unnorm)
}

/// The `α = 0` oscillator: a coherent state with `⟨n⟩ = ε²/(κ²+Δ²)`.
pub fn linear_limit(params: &ModelParams) -> ScalarObservables {
    let mean_n = params.epsilon.powi(2) / (params.kappa.powi(2) + params.delta.powi(2));
    ScalarObservables {
        mean_n,
        g2_unnorm: mean_n * mean_n,
        g2: (params.epsilon > 0.0).then_some(1.0),
    }
}
