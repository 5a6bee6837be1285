//! Truncated-Fock master-equation solver.
//!
//! The density matrix obeys
//!
//! ```text
//! dρ/dt = −i[H, ρ] − κ([a†, aρ] + [ρa†, a])
//!       = −i[H, ρ] + κ(2aρa† − a†aρ − ρa†a)
//! ```
//!
//! so the photon number decays at rate `2κ` and the undriven `α = 0`
//! oscillator relaxes to a coherent state with `⟨n⟩ = ε²/(κ² + Δ²)`.
//!
//! # Vectorization
//!
//! Superoperators act on the column-stacked density matrix: element
//! `ρ[(i, j)]` lives at index `i + dim·j`, and `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::analytic::{observables, PhotonDistribution, ScalarObservables};
use crate::error::{Error, Result};
use crate::model::ModelParams;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Fock-space truncation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig {
    /// Number of retained levels `|0⟩..|dim−1⟩`.
    pub dim: usize,
    /// Largest acceptable population in the top two levels.
    pub tail_tol: f64,
    /// Hard cap for automatic truncation doubling.
    pub max_dim: usize,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig { dim: 20, tail_tol: 1e-10, max_dim: 80 }
    }
}

impl FockConfig {
    pub fn new(dim: usize, tail_tol: f64) -> Result<Self> {
        let cfg = FockConfig { dim, tail_tol, max_dim: FockConfig::default().max_dim.max(dim) };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_dim(self, max_dim: usize) -> Self {
        FockConfig { max_dim, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidParameter(format!("Fock dimension must be >= 2, got {}", self.dim)));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::InvalidParameter(format!("tail tolerance must lie in (0, 1), got {}", self.tail_tol)));
        }
        if self.max_dim < self.dim {
            return Err(Error::InvalidParameter(format!(
                "maximum Fock dimension {} is below the starting dimension {}",
                self.max_dim, self.dim
            )));
        }
        Ok(())
    }
}

/// Density matrix in the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

/// Deviations of a [`DensityMatrix`] from a physical state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// `max |ρ − ρ†|`
    pub hermiticity: f64,
    /// `|Tr ρ − 1|`
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl Diagnostics {
    pub const HERMITICITY_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    pub fn is_physical(&self) -> bool {
        self.hermiticity <= Self::HERMITICITY_TOL
            && self.trace_error <= Self::TRACE_TOL
            && self.min_eigenvalue >= -Self::POSITIVITY_TOL
    }
}

impl DensityMatrix {
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "density matrix must be square with dim >= 2, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(DensityMatrix { entries })
    }

    /// `|n⟩⟨n|`
    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidInput(format!("Fock level {n} outside dimension {dim}")));
        }
        let mut m = DMatrix::zeros(dim, dim);
        m[(n, n)] = ONE;
        Self::from_matrix(m)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock(dim, 0)
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn pure(state: &DVector<Complex64>) -> Result<Self> {
        Self::from_matrix(state * state.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Column-stacked vector, see the module docs.
    pub fn to_vec(&self) -> DVector<Complex64> {
        DVector::from_column_slice(self.entries.as_slice())
    }

    /// Inverse of [`DensityMatrix::to_vec`].
    pub fn from_column_stacked(dim: usize, v: &DVector<Complex64>) -> Result<Self> {
        if v.len() != dim * dim {
            return Err(Error::InvalidInput(format!("vector of length {} is not {dim}x{dim}", v.len())));
        }
        Self::from_matrix(DMatrix::from_column_slice(dim, dim, v.as_slice()))
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let adj = self.entries.adjoint();
        let hermiticity = (&self.entries - &adj).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let trace_error = (self.trace() - ONE).norm();
        // Eigenvalues of the Hermitian part; the anti-Hermitian part is reported separately.
        let herm = (&self.entries + &adj) * Complex64::new(0.5, 0.0);
        let min_eigenvalue = herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        Diagnostics { hermiticity, trace_error, min_eigenvalue }
    }

    /// Population of the two highest retained levels.
    pub fn tail_population(&self) -> f64 {
        let d = self.dim();
        self.entries[(d - 1, d - 1)].re + self.entries[(d - 2, d - 2)].re
    }
}

/// Annihilation operator on `dim` levels.
pub fn annihilation(dim: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// `H = −Δ n ∓ α n(n−1) + ε(a† + a)` in the number basis.
pub fn build_hamiltonian(params: &ModelParams, cfg: &FockConfig) -> DMatrix<Complex64> {
    hamiltonian(params, cfg.dim)
}

fn hamiltonian(params: &ModelParams, dim: usize) -> DMatrix<Complex64> {
    let kerr = params.sign.kerr_coefficient() * params.alpha;
    let mut h = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        let nf = n as f64;
        h[(n, n)] = Complex64::new(-params.delta * nf + kerr * nf * (nf - 1.0), 0.0);
        if n + 1 < dim {
            let off = Complex64::new(params.epsilon * (nf + 1.0).sqrt(), 0.0);
            h[(n, n + 1)] = off;
            h[(n + 1, n)] = off;
        }
    }
    h
}

/// Non-zero Liouvillian entries `(row, col, value)` in column-stacked order.
///
/// For `ρ_ij` at `i + dim·j`, with `h_n` the Hamiltonian diagonal:
///
/// ```text
/// (Lρ)_ij = [−i(h_i − h_j) − κ(i + j)] ρ_ij
///         − iε(√(i+1) ρ_{i+1,j} + √i ρ_{i−1,j})
///         + iε(√(j+1) ρ_{i,j+1} + √j ρ_{i,j−1})
///         + 2κ √((i+1)(j+1)) ρ_{i+1,j+1}
/// ```
fn liouvillian_entries(params: &ModelParams, dim: usize) -> Vec<(usize, usize, Complex64)> {
    let kerr = params.sign.kerr_coefficient() * params.alpha;
    let diag: Vec<f64> = (0..dim).map(|n| n as f64).map(|n| -params.delta * n + kerr * n * (n - 1.0)).collect();
    let sq: Vec<f64> = (0..=dim).map(|n| (n as f64).sqrt()).collect();
    let (eps, kappa) = (params.epsilon, params.kappa);
    let idx = |i: usize, j: usize| i + dim * j;

    let mut out = Vec::with_capacity(6 * dim * dim);
    for j in 0..dim {
        for i in 0..dim {
            let row = idx(i, j);
            out.push((row, row, Complex64::new(-kappa * (i + j) as f64, -(diag[i] - diag[j]))));
            if eps != 0.0 {
                if i + 1 < dim {
                    out.push((row, idx(i + 1, j), Complex64::new(0.0, -eps * sq[i + 1])));
                }
                if i > 0 {
                    out.push((row, idx(i - 1, j), Complex64::new(0.0, -eps * sq[i])));
                }
                if j + 1 < dim {
                    out.push((row, idx(i, j + 1), Complex64::new(0.0, eps * sq[j + 1])));
                }
                if j > 0 {
                    out.push((row, idx(i, j - 1), Complex64::new(0.0, eps * sq[j])));
                }
            }
            if i + 1 < dim && j + 1 < dim {
                out.push((row, idx(i + 1, j + 1), Complex64::new(2.0 * kappa * sq[i + 1] * sq[j + 1], 0.0)));
            }
        }
    }
    out
}

/// Liouvillian superoperator (`dim² × dim²`) acting on column-stacked `ρ`.
///
/// Equivalent to `−i(I⊗H − Hᵀ⊗I) + κ(2 ā⊗a − I⊗a†a − (a†a)ᵀ⊗I)`.
pub fn build_liouvillian(params: &ModelParams, cfg: &FockConfig) -> DMatrix<Complex64> {
    dense_liouvillian(params, cfg.dim)
}

fn dense_liouvillian(params: &ModelParams, dim: usize) -> DMatrix<Complex64> {
    let n2 = dim * dim;
    let mut l = DMatrix::zeros(n2, n2);
    for (r, c, v) in liouvillian_entries(params, dim) {
        l[(r, c)] += v;
    }
    l
}

/// `max |L vec(ρ)| / max |L|`, the relative steady-state residual.
pub fn steady_state_residual(params: &ModelParams, rho: &DensityMatrix) -> f64 {
    let op = SparseOperator::new(rho.dim() * rho.dim(), liouvillian_entries(params, rho.dim()));
    let scale = op.vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut r = vec![ZERO; op.row_start.len() - 1];
    op.apply(rho.entries.as_slice(), &mut r);
    r.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

/// Banded matrix with `lower` sub-diagonals and room for `lower + upper`
/// super-diagonals of pivoting fill-in.
struct BandedSystem {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandedSystem {
    fn new(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        BandedSystem { n, lower, upper, width, data: vec![ZERO; n * width] }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.lower - r)
    }

    fn add(&mut self, r: usize, c: usize, v: Complex64) {
        let k = self.at(r, c);
        self.data[k] += v;
    }

    /// Gaussian elimination with partial pivoting, applied to `rhs` in
    /// place. Returns `None` on an exactly zero pivot.
    fn solve(mut self, mut rhs: Vec<Complex64>) -> Option<Vec<Complex64>> {
        let (n, kl) = (self.n, self.lower);
        let reach = kl + self.upper;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let pivot = (k..=last_row)
                .max_by(|&a, &b| self.data[self.at(a, k)].norm().total_cmp(&self.data[self.at(b, k)].norm()))
                .expect("non-empty pivot range");
            if self.data[self.at(pivot, k)] == ZERO {
                return None;
            }
            if pivot != k {
                for c in k..=last_col {
                    let (a, b) = (self.at(k, c), self.at(pivot, c));
                    self.data.swap(a, b);
                }
                rhs.swap(k, pivot);
            }
            let head = self.data[self.at(k, k)];
            for r in k + 1..=last_row {
                let f = self.data[self.at(r, k)] / head;
                if f == ZERO {
                    continue;
                }
                for c in k + 1..=last_col {
                    let upd = f * self.data[self.at(k, c)];
                    let t = self.at(r, c);
                    self.data[t] -= upd;
                }
                let rk = rhs[k];
                rhs[r] -= f * rk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut acc = rhs[k];
            for c in k + 1..=last_col {
                acc -= self.data[self.at(k, c)] * rhs[c];
            }
            rhs[k] = acc / self.data[self.at(k, k)];
        }
        Some(rhs)
    }
}

fn finish_steady_state(dim: usize, x: &[Complex64]) -> Result<DensityMatrix> {
    if x.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Singular { dim });
    }
    let rho = DMatrix::from_column_slice(dim, dim, x);
    let mut rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = rho.trace().re;
    if !(tr.is_finite() && tr != 0.0) {
        return Err(Error::Singular { dim });
    }
    rho /= Complex64::new(tr, 0.0);
    DensityMatrix::from_matrix(rho)
}

/// Largest dimension for which the dense fallback is attempted.
const DENSE_FALLBACK_MAX_DIM: usize = 40;

/// Steady state by dense LU: `L vec(ρ) = 0` with the equation for `ρ_00`
/// replaced by `Tr ρ = 1`.
pub fn steady_state_dense_at_dim(params: &ModelParams, dim: usize) -> Result<DensityMatrix> {
    params.validate()?;
    check_dim(dim)?;
    let mut l = dense_liouvillian(params, dim);
    let n2 = dim * dim;
    for c in 0..n2 {
        l[(0, c)] = ZERO;
    }
    for i in 0..dim {
        l[(0, i + dim * i)] = ONE;
    }
    let mut b = DVector::zeros(n2);
    b[0] = ONE;
    let x = l.lu().solve(&b).ok_or(Error::Singular { dim })?;
    finish_steady_state(dim, x.as_slice())
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("Fock dimension must be >= 2, got {dim}")));
    }
    Ok(())
}

/// Steady state at a fixed truncation, without tail checks.
///
/// Solves the same trace-constrained system as [`steady_state_dense_at_dim`].
/// Writing the trace row as a rank-one update of the row `ρ_00 = 1`
/// (Sherman–Morrison) shows the solution is `y / Tr y`, where `y` solves the
/// system with `ρ_00` pinned to one. That system keeps the Liouvillian's band
/// structure (half-bandwidth `dim + 1`), so the cost is `O(dim⁴)` instead of
/// `O(dim⁶)`. Falls back to the dense solve if the banded elimination breaks
/// down.
pub fn steady_state_at_dim(params: &ModelParams, dim: usize) -> Result<DensityMatrix> {
    params.validate()?;
    check_dim(dim)?;
    let n2 = dim * dim;
    let band = dim + 1;
    let mut sys = BandedSystem::new(n2, band, band);
    for (r, c, v) in liouvillian_entries(params, dim) {
        if r != 0 {
            sys.add(r, c, v);
        }
    }
    sys.add(0, 0, ONE);
    let mut rhs = vec![ZERO; n2];
    rhs[0] = ONE;

    match sys.solve(rhs).map(|y| finish_steady_state(dim, &y)) {
        Some(Ok(rho)) => Ok(rho),
        _ if dim <= DENSE_FALLBACK_MAX_DIM => {
            log::debug!("banded steady-state solve failed at dim {dim}, using dense LU");
            steady_state_dense_at_dim(params, dim)
        }
        _ => Err(Error::Singular { dim }),
    }
}

/// Steady state, doubling the truncation until the top two levels hold at
/// most `cfg.tail_tol` (or `cfg.max_dim` is reached).
pub fn steady_state(params: &ModelParams, cfg: &FockConfig) -> Result<DensityMatrix> {
    cfg.validate()?;
    let mut dim = cfg.dim;
    loop {
        let rho = steady_state_at_dim(params, dim)?;
        let tail = rho.tail_population();
        if tail <= cfg.tail_tol {
            return Ok(rho);
        }
        if dim >= cfg.max_dim {
            return Err(Error::NoConvergence { dim, tail, tol: cfg.tail_tol });
        }
        log::debug!("tail population {tail:e} at dim {dim}, escalating");
        dim = (dim * 2).min(cfg.max_dim);
    }
}

/// Row-compressed Liouvillian for repeated mat-vec products.
struct SparseOperator {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    fn new(n: usize, mut entries: Vec<(usize, usize, Complex64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        let mut next = 0;
        for r in 0..n {
            row_start.push(cols.len());
            while next < entries.len() && entries[next].0 == r {
                cols.push(entries[next].1);
                vals.push(entries[next].2);
                next += 1;
            }
        }
        row_start.push(cols.len());
        SparseOperator { row_start, cols, vals }
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (s, e) = (self.row_start[r], self.row_start[r + 1]);
            *o = self.cols[s..e].iter().zip(&self.vals[s..e]).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    fn norm_inf(&self) -> f64 {
        (0..self.row_start.len() - 1)
            .map(|r| self.vals[self.row_start[r]..self.row_start[r + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Trace drift beyond which [`evolve`] reports an instability.
pub const EVOLVE_TRACE_TOL: f64 = 1e-6;

/// Classical fourth-order Runge–Kutta integration of `dρ/dt = Lρ`.
///
/// The step is shrunk so an integer number of steps lands on `t_final`.
/// RK4 is stable for `dt·ρ(L) ≲ 2.8`; keeping `dt·‖L‖_∞ < 1`, see
/// [`max_stable_step`], is comfortably inside that. A blown-up run is
/// reported as [`Error::Unstable`].
pub fn evolve(
    rho0: &DensityMatrix,
    params: &ModelParams,
    cfg: &FockConfig,
    dt: f64,
    t_final: f64,
) -> Result<DensityMatrix> {
    params.validate()?;
    if rho0.dim() != cfg.dim {
        return Err(Error::InvalidInput(format!(
            "initial state has dimension {}, configuration expects {}",
            rho0.dim(),
            cfg.dim
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be > 0, got {dt}")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("final time must be >= 0, got {t_final}")));
    }
    if t_final == 0.0 {
        return Ok(rho0.clone());
    }

    let dim = cfg.dim;
    let op = SparseOperator::new(dim * dim, liouvillian_entries(params, dim));
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let hc = Complex64::new(h, 0.0);
    let trace0 = rho0.trace();

    let n2 = dim * dim;
    let mut y: Vec<Complex64> = rho0.entries.as_slice().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; n2], vec![ZERO; n2], vec![ZERO; n2], vec![ZERO; n2]);
    let mut tmp = vec![ZERO; n2];
    let half = hc * 0.5;
    let sixth = hc / 6.0;

    for step in 1..=steps {
        op.apply(&y, &mut k1);
        for i in 0..n2 {
            tmp[i] = y[i] + half * k1[i];
        }
        op.apply(&tmp, &mut k2);
        for i in 0..n2 {
            tmp[i] = y[i] + half * k2[i];
        }
        op.apply(&tmp, &mut k3);
        for i in 0..n2 {
            tmp[i] = y[i] + hc * k3[i];
        }
        op.apply(&tmp, &mut k4);
        for i in 0..n2 {
            y[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        if step % 64 == 0 || step == steps {
            check_run(&y, dim, trace0, step)?;
        }
    }
    DensityMatrix::from_matrix(DMatrix::from_column_slice(dim, dim, &y))
}

fn check_run(y: &[Complex64], dim: usize, trace0: Complex64, step: usize) -> Result<()> {
    let scale = trace0.norm().max(1.0);
    if let Some(z) = y.iter().find(|z| !(z.re.is_finite() && z.im.is_finite()) || z.norm() > scale * (1.0 + 1e-6)) {
        return Err(Error::Unstable { step, reason: format!("element {z} outside the physical range") });
    }
    let trace: Complex64 = (0..dim).map(|i| y[i + dim * i]).sum();
    let drift = (trace - trace0).norm();
    if drift > EVOLVE_TRACE_TOL {
        return Err(Error::Unstable { step, reason: format!("trace drifted by {drift:e}") });
    }
    Ok(())
}

/// Time step satisfying `dt·‖L‖_∞ = 1` for the given parameters.
pub fn max_stable_step(params: &ModelParams, cfg: &FockConfig) -> f64 {
    1.0 / SparseOperator::new(cfg.dim * cfg.dim, liouvillian_entries(params, cfg.dim)).norm_inf()
}

/// Overlaps `⟨Ψ±|ρ|Ψ±⟩` with `|Ψ±⟩ = (|0⟩ ± |1⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityPair {
    pub phi_plus: f64,
    pub phi_minus: f64,
}

/// Scalar observables, entangled-state fidelities and the populations of `ρ`.
///
/// Populations below zero (solver round-off) are clamped to zero.
pub fn observables_full(rho: &DensityMatrix) -> (ScalarObservables, FidelityPair, PhotonDistribution) {
    let diag: Vec<f64> = (0..rho.dim()).map(|n| rho.get(n, n).re.max(0.0)).collect();
    let dist = PhotonDistribution::new(diag).expect("clamped populations are non-negative");
    let low = 0.5 * (rho.get(0, 0).re + rho.get(1, 1).re);
    let coherence = rho.get(0, 1).re;
    let fid = FidelityPair { phi_plus: low + coherence, phi_minus: low - coherence };
    (observables(&dist), fid, dist)
}
