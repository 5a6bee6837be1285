//! Parameter sweeps, peak detection and the nonlinearity estimator.
//!
//! `⟨n⟩(Δ)` of the driven Kerr oscillator has a peak at each multi-photon
//! resonance `Δ + α(m+n−1) = 0`. Neighbouring peaks are therefore `α` apart,
//! and measuring the peak spacing measures `α`.

use rayon::prelude::*;

use crate::analytic::{self, PhotonDistribution, ScalarObservables};
use crate::error::{Error, Result};
use crate::lindblad::{self, FidelityPair, FockConfig};
use crate::model::{scale, ModelParams, NonlinearSign};

/// Default minimum peak prominence, in photons.
pub const DEFAULT_PROMINENCE: f64 = 0.005;

/// Uniform grid of `steps` points from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let grid = Grid { min, max, steps };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidParameter(format!(
                "grid requires finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidParameter(format!("grid requires >= 2 steps, got {}", self.steps)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| if i == last { self.max } else { self.min + (self.max - self.min) * i as f64 / last as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Analytic,
    Numeric,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Numeric => "numeric",
        }
    }
}

/// Full result of one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub observables: ScalarObservables,
    /// Only the numeric engine resolves coherences.
    pub fidelity: Option<FidelityPair>,
    pub distribution: PhotonDistribution,
}

/// Evaluates one parameter point with the chosen engine.
pub fn evaluate_point(
    params: &ModelParams,
    two_s: u32,
    engine: Engine,
    cfg: Option<&FockConfig>,
) -> Result<PointResult> {
    match engine {
        Engine::Analytic => {
            let distribution = analytic::photon_distribution(&scale(params, two_s)?)?;
            Ok(PointResult { observables: analytic::observables(&distribution), fidelity: None, distribution })
        }
        Engine::Numeric => {
            let cfg = cfg.ok_or_else(|| Error::InvalidInput("numeric engine requires a Fock configuration".into()))?;
            let rho = lindblad::steady_state(params, cfg)?;
            let (observables, fidelity, distribution) = lindblad::observables_full(&rho);
            Ok(PointResult { observables, fidelity: Some(fidelity), distribution })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub mean_n: f64,
    pub g2: Option<f64>,
    pub phi_plus: Option<f64>,
    pub phi_minus: Option<f64>,
}

impl From<&PointResult> for SweepRow {
    fn from(p: &PointResult) -> Self {
        SweepRow {
            mean_n: p.observables.mean_n,
            g2: p.observables.g2,
            phi_plus: p.fidelity.map(|f| f.phi_plus),
            phi_minus: p.fidelity.map(|f| f.phi_minus),
        }
    }
}

/// Observables on a grid, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_name: &'static str,
    pub axis: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub engine: Engine,
}

impl SweepResult {
    pub fn mean_n(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_n).collect()
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }
}

fn run_grid<F>(axis_name: &'static str, axis: Vec<f64>, engine: Engine, point: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<PointResult> + Sync,
{
    // Collect every point first so the reported error is the first failing
    // grid point regardless of scheduling.
    let results: Vec<Result<SweepRow>> = axis
        .par_iter()
        .map(|&value| {
            point(value).map(|p| SweepRow::from(&p)).map_err(|e| Error::AtGridPoint {
                axis: axis_name,
                value,
                source: Box::new(e),
            })
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis_name, axis, rows, engine })
}

/// Sweeps the detuning over `grid`, holding every other parameter fixed.
pub fn sweep_detuning(
    params: &ModelParams,
    two_s: u32,
    grid: &Grid,
    engine: Engine,
    cfg: Option<&FockConfig>,
) -> Result<SweepResult> {
    grid.validate()?;
    params.validate()?;
    if engine == Engine::Numeric && cfg.is_none() {
        return Err(Error::InvalidInput("numeric engine requires a Fock configuration".into()));
    }
    run_grid("delta", grid.values(), engine, |d| evaluate_point(&params.with_delta(d), two_s, engine, cfg))
}

/// Sweeps the scaled drive `Ω` over `omega_grid`, with `ε = Ω√(2s)`.
pub fn sweep_drive(
    params: &ModelParams,
    two_s: u32,
    omega_grid: &Grid,
    engine: Engine,
    cfg: Option<&FockConfig>,
) -> Result<SweepResult> {
    omega_grid.validate()?;
    params.validate()?;
    if omega_grid.min < 0.0 {
        return Err(Error::InvalidParameter(format!("drive grid must be >= 0, got min {}", omega_grid.min)));
    }
    if two_s == 0 {
        return Err(Error::InvalidParameter("two_s must be >= 1".into()));
    }
    if engine == Engine::Numeric && cfg.is_none() {
        return Err(Error::InvalidInput("numeric engine requires a Fock configuration".into()));
    }
    let root = f64::from(two_s).sqrt();
    run_grid("omega", omega_grid.values(), engine, |omega| {
        evaluate_point(&params.with_epsilon(omega * root), two_s, engine, cfg)
    })
}

/// A local maximum with its topographic prominence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Parabolic vertex through the maximum and its two neighbours.
    pub position: f64,
    pub index: usize,
    pub prominence: f64,
}

/// Strict local maxima of `values` whose prominence reaches `min_prominence`.
///
/// Prominence is the height above the higher of the two bases. Each base is
/// the lowest point between the peak and the nearest higher sample on that
/// side, or the end of the data.
pub fn find_peaks(axis: &[f64], values: &[f64], min_prominence: f64) -> Result<Vec<Peak>> {
    if axis.len() != values.len() {
        return Err(Error::InvalidInput("axis and values differ in length".into()));
    }
    if values.len() < 3 {
        return Err(Error::InvalidInput(format!("peak detection needs >= 3 points, got {}", values.len())));
    }
    if min_prominence.is_nan() || min_prominence <= 0.0 {
        return Err(Error::InvalidParameter(format!("prominence must be > 0, got {min_prominence}")));
    }

    let mut peaks = Vec::new();
    for i in 1..values.len() - 1 {
        let y = values[i];
        if !(y > values[i - 1] && y > values[i + 1]) {
            continue;
        }
        let left = values[..i].iter().rev().take_while(|v| **v <= y).fold(y, |m, v| m.min(*v));
        let right = values[i + 1..].iter().take_while(|v| **v <= y).fold(y, |m, v| m.min(*v));
        let prominence = y - left.max(right);
        if prominence >= min_prominence {
            peaks.push(Peak { position: parabolic_vertex(axis, values, i), index: i, prominence });
        }
    }
    Ok(peaks)
}

fn parabolic_vertex(x: &[f64], y: &[f64], i: usize) -> f64 {
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let d0 = (x1 - x0) * (y1 - y2);
    let d1 = (x1 - x2) * (y1 - y0);
    let denom = d0 - d1;
    if denom == 0.0 {
        return x1;
    }
    x1 - 0.5 * ((x1 - x0) * d0 - (x1 - x2) * d1) / denom
}

/// Positions of the `⟨n⟩` peaks of a sweep, in increasing order.
pub fn detect_peaks(result: &SweepResult, min_prominence: f64) -> Result<Vec<f64>> {
    Ok(find_peaks(&result.axis, &result.mean_n(), min_prominence)?.into_iter().map(|p| p.position).collect())
}

/// Nonlinearity estimate from peak spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakEstimate {
    pub peak_positions: Vec<f64>,
    pub spacings: Vec<f64>,
    /// Median spacing.
    pub alpha_hat: f64,
    /// `max |spacing − alpha_hat|`
    pub spread: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Estimates `α` as the median spacing of increasing peak positions.
pub fn estimate_alpha(peaks: &[f64]) -> Result<PeakEstimate> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientPeaks { found: peaks.len() });
    }
    let spacings: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    if spacings.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(Error::InvalidInput("peak positions must be strictly increasing".into()));
    }
    let alpha_hat = median(&spacings);
    let spread = spacings.iter().map(|s| (s - alpha_hat).abs()).fold(0.0, f64::max);
    Ok(PeakEstimate { peak_positions: peaks.to_vec(), spacings, alpha_hat, spread })
}

/// Detunings of the resonances `Δ + α(m+n−1) = 0` (attractive) over
/// `0 ≤ n < m ≤ max_order`, sorted and deduplicated. Repulsive negates them.
pub fn predict_resonances(alpha: f64, sign: NonlinearSign, max_order: u32) -> Vec<f64> {
    let mut orders: Vec<u32> = (1..=max_order).flat_map(|m| (0..m).map(move |n| m + n - 1)).collect();
    orders.sort_unstable();
    orders.dedup();
    let mut out: Vec<f64> = orders
        .into_iter()
        .map(|k| match sign {
            NonlinearSign::Attractive if k > 0 => -alpha * f64::from(k),
            _ => alpha * f64::from(k),
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values() {
        let g = Grid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.step(), 0.5);
        assert!(Grid::new(1.0, 1.0, 5).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        let g = Grid::new(-7.0, 1.0, 1601).unwrap().values();
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*g.last().unwrap(), 1.0);
    }

    #[test]
    fn monotone_ramp_has_no_peaks() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        assert!(find_peaks(&x, &x, 1e-3).unwrap().is_empty());
    }

    #[test]
    fn lorentzian_triplet() {
        let grid = Grid::new(-3.0, 1.0, 801).unwrap();
        let x = grid.values();
        let w: f64 = 0.01;
        let y: Vec<f64> = x
            .iter()
            .map(|x| [-2.0, -1.0, 0.0].iter().map(|c| w * w / ((x - c).powi(2) + w * w)).sum())
            .collect();
        let peaks = find_peaks(&x, &y, 0.02).unwrap();
        assert_eq!(peaks.len(), 3);
        for (p, c) in peaks.iter().zip([-2.0, -1.0, 0.0]) {
            assert!((p.position - c).abs() < 0.5 * grid.step(), "{p:?}");
        }
    }

    #[test]
    fn parabolic_refinement_is_exact_for_parabolas() {
        let x = [0.0, 0.1, 0.2];
        let y: Vec<f64> = x.iter().map(|x| -(x - 0.13f64).powi(2)).collect();
        assert!((parabolic_vertex(&x, &y, 1) - 0.13).abs() < 1e-12);
    }

    #[test]
    fn prominence_filters_small_bumps() {
        let x: Vec<f64> = (0..7).map(f64::from).collect();
        let y = [0.0, 1.0, 0.5, 0.52, 0.5, 2.0, 0.0];
        let all = find_peaks(&x, &y, 1e-6).unwrap();
        assert_eq!(all.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1, 3, 5]);
        assert!((all[1].prominence - 0.02).abs() < 1e-12);
        assert!((all[0].prominence - 0.5).abs() < 1e-12);
        let big = find_peaks(&x, &y, 0.1).unwrap();
        assert_eq!(big.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1, 5]);
    }

    #[test]
    fn peak_detection_preconditions() {
        assert!(find_peaks(&[0.0, 1.0], &[0.0, 1.0], 0.1).is_err());
        assert!(find_peaks(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn estimate_from_unit_spacing() {
        let e = estimate_alpha(&[-2.0, -1.0, 0.0]).unwrap();
        assert_eq!(e.alpha_hat, 1.0);
        assert_eq!(e.spread, 0.0);
        let e = estimate_alpha(&[0.0, 3.0]).unwrap();
        assert_eq!((e.alpha_hat, e.spread), (3.0, 0.0));
        assert_eq!(estimate_alpha(&[1.0]), Err(Error::InsufficientPeaks { found: 1 }));
        assert!(estimate_alpha(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn median_ignores_one_outlier() {
        let e = estimate_alpha(&[0.0, 1.0, 2.0, 2.3, 3.3]).unwrap();
        assert!((e.alpha_hat - 1.0).abs() < 1e-12);
        assert!((e.spread - 0.7).abs() < 1e-12);
    }

    #[test]
    fn resonance_orders() {
        assert_eq!(predict_resonances(1.0, NonlinearSign::Attractive, 1), vec![0.0]);
        assert_eq!(predict_resonances(2.0, NonlinearSign::Attractive, 2), vec![-4.0, -2.0, 0.0]);
        assert_eq!(predict_resonances(1.0, NonlinearSign::Repulsive, 2), vec![0.0, 1.0, 2.0]);
        let r = predict_resonances(0.5, NonlinearSign::Attractive, 4);
        assert_eq!(r.len(), 7);
        assert!(r.windows(2).all(|w| (w[1] - w[0] - 0.5).abs() < 1e-15));
        assert!(predict_resonances(1.0, NonlinearSign::Attractive, 0).is_empty());
    }

    #[test]
    fn zero_drive_sweep_is_dark() {
        let p = ModelParams::new(0.0, 1.0, 0.0, 0.05, NonlinearSign::Attractive).unwrap();
        let grid = Grid::new(-3.0, 1.0, 9).unwrap();
        let cfg = FockConfig::new(6, 1e-10).unwrap();
        for engine in [Engine::Analytic, Engine::Numeric] {
            let r = sweep_detuning(&p, 50, &grid, engine, Some(&cfg)).unwrap();
            assert!(r.rows.iter().all(|row| row.mean_n == 0.0 || row.mean_n.abs() < 1e-14));
            assert_eq!(r.rows[0].phi_plus.is_some(), engine == Engine::Numeric);
        }
    }

    #[test]
    fn numeric_sweep_requires_config() {
        let p = ModelParams::new(0.0, 1.0, 0.1, 0.05, NonlinearSign::Attractive).unwrap();
        let grid = Grid::new(-1.0, 1.0, 3).unwrap();
        assert!(sweep_detuning(&p, 50, &grid, Engine::Numeric, None).is_err());
        assert!(sweep_drive(&p, 50, &Grid::new(-0.1, 0.1, 3).unwrap(), Engine::Analytic, None).is_err());
    }

    #[test]
    fn solver_errors_name_the_grid_point() {
        let p = ModelParams::new(0.0, 0.0, 0.5, 0.1, NonlinearSign::Attractive).unwrap();
        let cfg = FockConfig::new(4, 1e-10).unwrap().with_max_dim(8);
        let grid = Grid::new(-1.0, 0.0, 2).unwrap();
        let err = sweep_detuning(&p, 50, &grid, Engine::Numeric, Some(&cfg)).unwrap_err();
        match err {
            Error::AtGridPoint { axis, value, .. } => assert_eq!((axis, value), ("delta", -1.0)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(err.root(), Error::NoConvergence { .. }));
    }
}
