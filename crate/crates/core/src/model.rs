//! Physical and scaled parameters of the driven Kerr oscillator.
//!
//! The physical picture is the rotating-frame Hamiltonian
//!
//! ```text
//! H = -Δ a†a ∓ α a†²a² + ε (a† + a)
//! ```
//!
//! with photon loss at amplitude rate κ. The closed-form steady state works
//! instead with a pseudo-spin of `2s` excitations and the scaled quantities
//! `Ω = ε/√(2s)` and `γ = κ/2s`. That representation is only accurate while
//! `⟨a†a⟩/2s ≪ 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Sign of the photon-photon interaction term.
///
/// `Attractive` is the minus sign in front of `α a†²a²` and puts the
/// multi-photon resonances at negative detuning. `Repulsive` mirrors every
/// detuning curve through `Δ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NonlinearSign {
    #[default]
    Attractive,
    Repulsive,
}

impl NonlinearSign {
    /// Coefficient multiplying `α n(n-1)` in the Hamiltonian diagonal.
    pub fn kerr_coefficient(self) -> f64 {
        match self {
            NonlinearSign::Attractive => -1.0,
            NonlinearSign::Repulsive => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            NonlinearSign::Attractive => NonlinearSign::Repulsive,
            NonlinearSign::Repulsive => NonlinearSign::Attractive,
        }
    }
}

/// Physical parameters in absolute frequency units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Pump detuning `Δ = ω_L − ω`.
    pub delta: f64,
    /// Kerr nonlinearity magnitude. Zero is allowed and gives the linear oscillator.
    pub alpha: f64,
    /// Coherent drive amplitude.
    pub epsilon: f64,
    /// Field decay rate. The photon number decays at `2κ`.
    pub kappa: f64,
    pub sign: NonlinearSign,
}

impl ModelParams {
    pub fn new(delta: f64, alpha: f64, epsilon: f64, kappa: f64, sign: NonlinearSign) -> Result<Self> {
        let params = ModelParams { delta, alpha, epsilon, kappa, sign };
        params.validate()?;
        Ok(params)
    }

    /// Builds physical parameters from the scaled `(Ω, γ, 2s)` description.
    pub fn from_scaled(
        delta: f64,
        alpha: f64,
        omega: f64,
        gamma: f64,
        two_s: u32,
        sign: NonlinearSign,
    ) -> Result<Self> {
        check_two_s(two_s)?;
        let n = f64::from(two_s);
        Self::new(delta, alpha, omega * n.sqrt(), gamma * n, sign)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be finite, got {}", self.delta)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be > 0, got {}", self.kappa)));
        }
        Ok(())
    }

    pub fn with_delta(self, delta: f64) -> Self {
        ModelParams { delta, ..self }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        ModelParams { epsilon, ..self }
    }

    /// Same oscillator with the interaction sign flipped and the detuning negated.
    pub fn mirrored(self) -> Self {
        ModelParams { delta: -self.delta, sign: self.sign.flipped(), ..self }
    }
}

/// Parameters of the closed-form steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams {
    pub two_s: u32,
    /// `Ω = ε/√(2s)`
    pub omega: f64,
    /// `γ = κ/2s`
    pub gamma: f64,
    pub sigma: Complex64,
    pub phi: Complex64,
    pub delta: f64,
    pub alpha: f64,
    pub sign: NonlinearSign,
}

fn check_two_s(two_s: u32) -> Result<()> {
    if two_s == 0 {
        return Err(Error::InvalidParameter("two_s must be >= 1".into()));
    }
    Ok(())
}

/// Maps physical parameters onto the scaled picture with `2s` excitations.
pub fn scale(params: &ModelParams, two_s: u32) -> Result<ScaledParams> {
    check_two_s(two_s)?;
    params.validate()?;
    let n = f64::from(two_s);
    let mut scaled = ScaledParams {
        two_s,
        omega: params.epsilon / n.sqrt(),
        gamma: params.kappa / n,
        sigma: Complex64::new(0.0, 0.0),
        phi: Complex64::new(0.0, 0.0),
        delta: params.delta,
        alpha: params.alpha,
        sign: params.sign,
    };
    let (sigma, phi) = resolve_sign_convention(&scaled);
    scaled.sigma = sigma;
    scaled.phi = phi;
    Ok(scaled)
}

/// Inverse of [`scale`].
pub fn unscale(scaled: &ScaledParams) -> ModelParams {
    let n = f64::from(scaled.two_s);
    ModelParams {
        delta: scaled.delta,
        alpha: scaled.alpha,
        epsilon: scaled.omega * n.sqrt(),
        kappa: scaled.gamma * n,
        sign: scaled.sign,
    }
}

/// Returns `(σ, φ)` for the interaction sign of `scaled`.
///
/// Attractive: `σ = Ω/(γ + iα)`, `φ = (2sα + Δ)/(γ + iα)`.
/// Repulsive:  `σ = Ω/(γ − iα)`, `φ = −(2sα − Δ)/(γ − iα)`.
///
/// The pairing was fixed by comparison with the truncated-Fock steady state
/// (see `analytic` tests); the repulsive branch makes `⟨n⟩(Δ)` the exact
/// mirror image of the attractive one.
pub fn resolve_sign_convention(scaled: &ScaledParams) -> (Complex64, Complex64) {
    let two_s_alpha = f64::from(scaled.two_s) * scaled.alpha;
    match scaled.sign {
        NonlinearSign::Attractive => {
            let denom = Complex64::new(scaled.gamma, scaled.alpha);
            (scaled.omega / denom, (two_s_alpha + scaled.delta) / denom)
        }
        NonlinearSign::Repulsive => {
            let denom = Complex64::new(scaled.gamma, -scaled.alpha);
            (scaled.omega / denom, -(two_s_alpha - scaled.delta) / denom)
        }
    }
}

/// Warnings raised when the closed-form solution is used outside its regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidityWarning {
    /// `Ω ≥ α`: the weak-excitation expansion no longer holds.
    StrongDrive { omega: f64, alpha: f64 },
    /// `⟨n⟩/2s` above the threshold; the pseudo-spin is no longer far from saturation.
    HighFilling { mean_n: f64, two_s: u32 },
}

/// Filling fraction `⟨n⟩/2s` above which [`ValidityWarning::HighFilling`] fires.
pub const MAX_FILLING: f64 = 0.02;

pub fn validity_warnings(scaled: &ScaledParams, mean_n: Option<f64>) -> Vec<ValidityWarning> {
    let mut out = Vec::new();
    if scaled.omega >= scaled.alpha {
        out.push(ValidityWarning::StrongDrive { omega: scaled.omega, alpha: scaled.alpha });
    }
    if let Some(mean_n) = mean_n {
        if mean_n / f64::from(scaled.two_s) > MAX_FILLING {
            out.push(ValidityWarning::HighFilling { mean_n, two_s: scaled.two_s });
        }
    }
    out
}
