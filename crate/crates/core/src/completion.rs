//! Low-rank PSD completion of packed matrices from sampled elements.
//!
//! The completed matrix is `L^T L` with `L` an `r x d` factor fitted by
//! L-BFGS to the observed lower-triangle positions:
//! `f(L) = sum_{(i,j) in Omega} ((L^T L)_ij - M_ij)^2`.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize, LbfgsConfig, LbfgsResult, Termination};
use crate::rdm::{PackedRDM, SpinSector};

/// Residual, relative to the observed sum of squares, treated as an exact
/// fit when deciding whether further starts are needed.
pub const EXACT_FIT: f64 = 1e-10;

/// Number of unique positions (lower triangle with diagonal).
pub fn unique_count(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position `(row, col)`, `row >= col`, of lower-triangle index `t`.
fn lower_position(t: usize) -> (usize, usize) {
    let mut row = (((8 * t + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    while row * (row + 1) / 2 > t {
        row -= 1;
    }
    while (row + 1) * (row + 2) / 2 <= t {
        row += 1;
    }
    (row, t - row * (row + 1) / 2)
}

/// The observed set of positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub sector: Option<SpinSector>,
    pub d: usize,
    /// Sorted, duplicate-free `(row, col)` with `row >= col`.
    indices: Vec<(usize, usize)>,
    pub seed: u64,
}

impl SampleSet {
    /// Builds a set from arbitrary positions; each is folded into the lower
    /// triangle and duplicates are dropped.
    pub fn from_indices(
        d: usize,
        positions: impl IntoIterator<Item = (usize, usize)>,
        seed: u64,
    ) -> Result<Self> {
        let mut indices: Vec<(usize, usize)> = positions
            .into_iter()
            .map(|(a, b)| (a.max(b), a.min(b)))
            .collect();
        if let Some(&(r, _)) = indices.iter().find(|(r, _)| *r >= d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r + 1,
            });
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self {
            sector: None,
            d,
            indices,
            seed,
        })
    }

    /// Every unique position.
    pub fn full(d: usize) -> Self {
        Self {
            sector: None,
            d,
            indices: (0..unique_count(d)).map(lower_position).collect(),
            seed: 0,
        }
    }

    pub fn with_sector(mut self, sector: SpinSector) -> Self {
        self.sector = Some(sector);
        self
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn n_sample(&self) -> usize {
        self.indices.len()
    }

    pub fn f_sample(&self) -> f64 {
        self.indices.len() as f64 / unique_count(self.d) as f64
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.indices
            .binary_search(&(row.max(col), row.min(col)))
            .is_ok()
    }
}

/// Uniform sample of `n_sample` unique positions without replacement.
pub fn sample_uniform(d: usize, n_sample: usize, seed: u64) -> Result<SampleSet> {
    let unique = unique_count(d);
    if n_sample == 0 || n_sample > unique {
        return Err(Error::BudgetExceedsUnique {
            requested: n_sample,
            unique,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, unique, n_sample).into_vec();
    picked.sort_unstable();
    Ok(SampleSet {
        sector: None,
        d,
        indices: picked.into_iter().map(lower_position).collect(),
        seed,
    })
}

/// Fraction of unique elements equal to the number of free parameters of a
/// rank-`r` symmetric `d x d` matrix: `(2rd - r^2 + r) / (d(d+1))`.
pub fn info_bound(r: usize, d: usize) -> f64 {
    let (r, d) = (r as f64, d as f64);
    (2.0 * r * d - r * r + r) / (d * (d + 1.0))
}

/// The `r x d` factor of a completed matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    pub l: DMatrix<f64>,
}

impl LowRankFactor {
    pub fn rank(&self) -> usize {
        self.l.nrows()
    }

    /// `L^T L`.
    pub fn completed(&self) -> DMatrix<f64> {
        self.l.transpose() * &self.l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    pub r: usize,
    pub eps0: f64,
    pub kappa: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub n_trials: usize,
    pub success_quorum: f64,
    pub seed: u64,
    /// L-BFGS memory.
    pub memory: usize,
    /// Independent starts per completion; the lowest objective wins.
    pub restarts: usize,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            r: 1,
            eps0: 0.01,
            kappa: 0.5,
            max_iter: 15_000,
            grad_tol: 1e-8,
            n_trials: 10,
            success_quorum: 0.9,
            seed: 0,
            memory: 10,
            restarts: 8,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r >= 1
            && self.eps0 > 0.0
            && self.kappa > 0.0
            && self.max_iter >= 1
            && self.grad_tol > 0.0
            && self.n_trials >= 1
            && self.success_quorum > 0.0
            && self.success_quorum <= 1.0
            && self.memory >= 1
            && self.restarts >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSystem(format!(
                "invalid completion config {self:?}"
            )))
        }
    }

    fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            memory: self.memory,
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            ..LbfgsConfig::default()
        }
    }
}

/// Result of one completion.
#[derive(Debug, Clone)]
pub struct CompletionOutcome {
    pub factor: LowRankFactor,
    pub completed: DMatrix<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    /// Objective after each accepted step.
    pub objective_trace: Vec<f64>,
}

impl CompletionOutcome {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&f64::NAN)
    }
}

/// Objective and gradient of the factor fit. `x` holds `L` column-major.
pub fn objective(
    x: &[f64],
    r: usize,
    sample: &SampleSet,
    observed: &DMatrix<f64>,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut f = 0.0;
    for &(i, j) in sample.indices() {
        let li = &x[i * r..(i + 1) * r];
        let lj = &x[j * r..(j + 1) * r];
        let v: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
        let res = v - observed[(i, j)];
        f += res * res;
        let w = 2.0 * res;
        for s in 0..r {
            let (a, b) = (li[s], lj[s]);
            grad[i * r + s] += w * b;
            grad[j * r + s] += w * a;
        }
    }
    f
}

/// Trace estimate for initialization: from the observed diagonal when any is
/// sampled, otherwise the fallback.
fn trace_estimate(observed: &DMatrix<f64>, sample: &SampleSet, fallback: Option<f64>) -> f64 {
    let diag: Vec<f64> = sample
        .indices()
        .iter()
        .filter(|(i, j)| i == j)
        .map(|&(i, _)| observed[(i, i)])
        .collect();
    let est = if !diag.is_empty() {
        diag.iter().sum::<f64>() / diag.len() as f64 * sample.d as f64
    } else if let Some(t) = fallback {
        t
    } else {
        let n = sample.n_sample().max(1) as f64;
        sample
            .indices()
            .iter()
            .map(|&(i, j)| observed[(i, j)].abs())
            .sum::<f64>()
            / n
            * sample.d as f64
    };
    if est.is_finite() && est > 0.0 {
        est
    } else {
        fallback.filter(|t| *t > 0.0).unwrap_or(1.0)
    }
}

/// Completes a symmetric matrix from the entries of `observed` at the
/// sampled positions; other entries of `observed` are ignored.
/// `trace_hint` is used to scale the initial factor when no diagonal entry
/// is observed.
pub fn complete_matrix(
    observed: &DMatrix<f64>,
    sample: &SampleSet,
    r: usize,
    trace_hint: Option<f64>,
    cfg: &CompletionConfig,
) -> Result<CompletionOutcome> {
    let d = sample.d;
    if observed.nrows() != d || observed.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: observed.nrows(),
        });
    }
    if r == 0 || r > d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: r,
        });
    }
    if sample.n_sample() == 0 {
        return Err(Error::BudgetExceedsUnique {
            requested: 0,
            unique: unique_count(d),
        });
    }
    let trace = trace_estimate(observed, sample, trace_hint);
    let sigma = (trace / (r * d) as f64).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|_| Error::NonFiniteObjective)?;
    // a fit this close to zero residual cannot be improved by another start
    let scale: f64 = sample
        .indices()
        .iter()
        .map(|&(i, j)| observed[(i, j)].powi(2))
        .sum();
    let exact = EXACT_FIT * scale;
    let mut best: Option<LbfgsResult> = None;
    for k in 0..cfg.restarts as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed
                ^ sample.seed.rotate_left(29)
                ^ 0x9e37_79b9
                ^ k.wrapping_mul(0xa076_1d64_78bd_642f),
        );
        let x0: Vec<f64> = (0..r * d).map(|_| normal.sample(&mut rng)).collect();
        let res = minimize(
            |x, g| objective(x, r, sample, observed, g),
            x0,
            &cfg.lbfgs(),
        );
        if res.termination == Termination::NonFinite || !res.f.is_finite() {
            continue;
        }
        let done = res.converged() && res.f <= exact;
        if best.as_ref().is_none_or(|b| res.f < b.f) {
            best = Some(res);
        }
        if done {
            break;
        }
    }
    let res = best.ok_or(Error::NonFiniteObjective)?;
    let l = DMatrix::from_column_slice(r, d, &res.x);
    let factor = LowRankFactor { l };
    let completed = factor.completed();
    Ok(CompletionOutcome {
        completed,
        converged: res.converged(),
        termination: res.termination,
        iterations: res.iterations,
        objective_trace: res.trace,
        factor,
    })
}

/// Completes one packed sector. Returns the factor, the completed sector,
/// the convergence flag and the objective trace.
pub fn complete(
    observed: &PackedRDM,
    sample: &SampleSet,
    cfg: &CompletionConfig,
) -> Result<(LowRankFactor, PackedRDM, bool, Vec<f64>)> {
    let hint = observed.meta().trace_target(observed.sector());
    let out = complete_matrix(observed.matrix(), sample, cfg.r, Some(hint), cfg)?;
    let completed = observed.with_matrix(out.completed)?;
    Ok((out.factor, completed, out.converged, out.objective_trace))
}

/// Geometric grid from 0.5x to 8x the information bound, plus full
/// sampling; values above one are dropped.
pub fn default_grid(r: usize, d: usize) -> Vec<f64> {
    let ib = info_bound(r, d);
    let points = 11;
    let mut grid: Vec<f64> = (0..points)
        .map(|k| 0.5 * ib * 16f64.powf(k as f64 / (points - 1) as f64))
        .filter(|&f| f < 1.0)
        .collect();
    grid.push(1.0);
    grid
}

/// One point of an error-vs-sampling curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    pub f_sample: f64,
    pub n_sample: usize,
    /// Mean and standard deviation of the error over converged trials.
    #[serde(with = "crate::serde_nan")]
    pub mean_error: f64,
    #[serde(with = "crate::serde_nan")]
    pub std_error: f64,
    /// Fraction of all trials with error at most `eps0`.
    pub success_fraction: f64,
    pub n_converged: usize,
    pub errors: Vec<f64>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FsampleSearch {
    pub f_star: Option<f64>,
    pub curve: Vec<GridPoint>,
    /// Samplings used at `f_star`, one per trial.
    pub samples_at_star: Vec<SampleSet>,
}

/// Seed of trial `t` at grid point `g`.
pub fn trial_seed(base: u64, g: usize, t: usize) -> u64 {
    base.wrapping_mul(0x5851_f42d_4c95_7f2d)
        .wrapping_add((g as u64) << 20)
        .wrapping_add(t as u64)
}

/// Number of samples for fraction `f`, at least one.
pub fn n_for_fraction(d: usize, f: f64) -> usize {
    let u = unique_count(d);
    ((f * u as f64).round() as usize).clamp(1, u)
}

/// Runs `n_trials` completions of `model` at each grid fraction. With
/// `full_curve` false the scan stops at the first fraction that meets the
/// quorum.
pub fn find_fsample_matrix(
    model: &DMatrix<f64>,
    trace_hint: Option<f64>,
    cfg: &CompletionConfig,
    grid: &[f64],
    full_curve: bool,
) -> Result<FsampleSearch> {
    cfg.validate()?;
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidSystem(
            "grid must be ascending within (0, 1]".into(),
        ));
    }
    let d = model.nrows();
    let norm = model.norm();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let mut curve = Vec::with_capacity(grid.len());
    let mut f_star = None;
    let mut samples_at_star = Vec::new();
    for (g, &f) in grid.iter().enumerate() {
        let n = n_for_fraction(d, f);
        let trials: Vec<Result<(SampleSet, f64, bool)>> = (0..cfg.n_trials)
            .into_par_iter()
            .map(|t| {
                let s = sample_uniform(d, n, trial_seed(cfg.seed, g, t))?;
                let out = complete_matrix(model, &s, cfg.r, trace_hint, cfg)?;
                let err = (&out.completed - model).norm() / norm;
                Ok((s, err, out.converged))
            })
            .collect();
        let trials: Vec<(SampleSet, f64, bool)> = trials.into_iter().collect::<Result<_>>()?;
        let errors: Vec<f64> = trials.iter().map(|t| t.1).collect();
        let converged: Vec<bool> = trials.iter().map(|t| t.2).collect();
        let ok: Vec<f64> = trials.iter().filter(|t| t.2).map(|t| t.1).collect();
        let (mean, std) = mean_std(&ok);
        let success =
            errors.iter().filter(|&&e| e <= cfg.eps0).count() as f64 / errors.len() as f64;
        curve.push(GridPoint {
            f_sample: f,
            n_sample: n,
            mean_error: mean,
            std_error: std,
            success_fraction: success,
            n_converged: ok.len(),
            errors,
            converged,
        });
        if f_star.is_none() && success >= cfg.success_quorum {
            f_star = Some(f);
            samples_at_star = trials.into_iter().map(|t| t.0).collect();
            if !full_curve {
                break;
            }
        }
    }
    Ok(FsampleSearch {
        f_star,
        curve,
        samples_at_star,
    })
}

/// Smallest grid fraction at which completions of the model reach `eps0`
/// in at least `success_quorum` of the trials.
pub fn find_fsample(
    model: &PackedRDM,
    cfg: &CompletionConfig,
    grid: &[f64],
) -> Result<FsampleSearch> {
    let hint = model.meta().trace_target(model.sector());
    let mut res = find_fsample_matrix(model.matrix(), Some(hint), cfg, grid, true)?;
    if res.f_star.is_none() {
        return Err(Error::NoFeasiblePoint);
    }
    for s in &mut res.samples_at_star {
        s.sector = Some(model.sector());
    }
    Ok(res)
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Random `d x d` PSD matrix of exact rank `r` with unit-scale entries.
pub fn synthetic_low_rank(d: usize, r: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let g = DMatrix::from_fn(r, d, |_, _| normal.sample(&mut rng));
    g.transpose() * g / d as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lower_positions_enumerate_triangle() {
        let mut t = 0;
        for row in 0..20 {
            for col in 0..=row {
                assert_eq!(lower_position(t), (row, col));
                t += 1;
            }
        }
    }

    #[test]
    fn full_sampling() {
        let s = sample_uniform(7, unique_count(7), 3).unwrap();
        assert_eq!(
            s,
            SampleSet {
                seed: 3,
                ..SampleSet::full(7)
            }
        );
        assert_eq!(s.f_sample(), 1.0);
        assert!(matches!(
            sample_uniform(3, 7, 0),
            Err(Error::BudgetExceedsUnique { .. })
        ));
        assert!(sample_uniform(3, 0, 0).is_err());
    }

    #[test]
    fn single_draw_is_uniform() {
        let mut counts = [0usize; 3];
        let draws = 100_000;
        for seed in 0..draws {
            let s = sample_uniform(2, 1, seed).unwrap();
            let t = match s.indices()[0] {
                (0, 0) => 0,
                (1, 0) => 1,
                (1, 1) => 2,
                other => panic!("{other:?}"),
            };
            counts[t] += 1;
        }
        let p = 1.0 / 3.0;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn info_bound_values() {
        assert!((info_bound(1, 3) - 0.5).abs() < 1e-15);
        for d in 1..=50 {
            assert!((info_bound(d, d) - 1.0).abs() < 1e-12);
            for r in 1..d {
                assert!(info_bound(r + 1, d) >= info_bound(r, d));
            }
        }
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let e = completion_fd_error(seed);
            assert!(e < 1e-6, "seed {seed}: {e}");
        }
    }

    fn completion_fd_error(seed: u64) -> f64 {
        let (d, r) = (9, 3);
        let m = synthetic_low_rank(d, 4, seed);
        let s = sample_uniform(d, 25, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..r * d).map(|_| normal.sample(&mut rng)).collect();
        let dir: Vec<f64> = (0..r * d).map(|_| normal.sample(&mut rng)).collect();
        let mut g = vec![0.0; r * d];
        let mut scratch = vec![0.0; r * d];
        objective(&x, r, &s, &m, &mut g);
        let h = 1e-6;
        let shift =
            |sgn: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(a, b)| a + sgn * h * b).collect() };
        let fp = objective(&shift(1.0), r, &s, &m, &mut scratch);
        let fm = objective(&shift(-1.0), r, &s, &m, &mut scratch);
        let fd = (fp - fm) / (2.0 * h);
        let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        (fd - an).abs() / an.abs()
    }

    #[test]
    fn full_observation_recovers_exact_low_rank() {
        let m = synthetic_low_rank(12, 3, 1);
        let cfg = CompletionConfig {
            r: 3,
            ..Default::default()
        };
        let out = complete_matrix(&m, &SampleSet::full(12), 3, None, &cfg).unwrap();
        assert!((&out.completed - &m).norm() / m.norm() < 1e-6);
        assert!(out.converged);
    }

    #[test]
    fn reported_objective_matches_factor() {
        let m = synthetic_low_rank(10, 2, 2);
        let s = sample_uniform(10, 30, 5).unwrap();
        let cfg = CompletionConfig {
            r: 2,
            max_iter: 20,
            ..Default::default()
        };
        let out = complete_matrix(&m, &s, 2, None, &cfg).unwrap();
        let mut g = vec![0.0; 20];
        let x: Vec<f64> = out.factor.l.as_slice().to_vec();
        let f = objective(&x, 2, &s, &m, &mut g);
        assert!((f - out.final_objective()).abs() <= 1e-12 * f.max(1e-300));
    }

    #[test]
    fn completion_is_deterministic() {
        let m = synthetic_low_rank(10, 2, 3);
        let s = sample_uniform(10, 35, 9).unwrap();
        let cfg = CompletionConfig {
            r: 2,
            seed: 4,
            ..Default::default()
        };
        let a = complete_matrix(&m, &s, 2, None, &cfg).unwrap();
        let b = complete_matrix(&m, &s, 2, None, &cfg).unwrap();
        assert_eq!(a.completed, b.completed);
    }

    #[test]
    fn find_fsample_full_grid_point_is_feasible() {
        let m = synthetic_low_rank(10, 2, 6);
        let cfg = CompletionConfig {
            r: 2,
            n_trials: 3,
            ..Default::default()
        };
        let res = find_fsample_matrix(&m, None, &cfg, &[1.0], false).unwrap();
        assert_eq!(res.f_star, Some(1.0));
        assert_eq!(res.samples_at_star.len(), 3);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid(2, 40);
        assert_eq!(g.len(), 12);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let g = default_grid(10, 12);
        assert!(g.iter().all(|&f| f <= 1.0));
    }

    proptest! {
        #[test]
        fn samples_are_unique_and_in_range(d in 1usize..30, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let n = ((frac * unique_count(d) as f64) as usize).max(1);
            let s = sample_uniform(d, n, seed).unwrap();
            prop_assert_eq!(s.n_sample(), n);
            prop_assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.indices().iter().all(|&(r, c)| r < d && c <= r));
            prop_assert!(s.f_sample() > 0.0 && s.f_sample() <= 1.0);
        }

        #[test]
        fn completed_is_psd_with_bounded_rank(seed in 0u64..20) {
            let m = synthetic_low_rank(8, 3, seed);
            let s = sample_uniform(8, 20, seed).unwrap();
            let cfg = CompletionConfig { r: 2, max_iter: 50, ..Default::default() };
            let out = complete_matrix(&m, &s, 2, None, &cfg).unwrap();
            let eig = out.completed.clone().symmetric_eigenvalues();
            let scale = out.completed.norm();
            prop_assert!(eig.iter().all(|&v| v >= -1e-9 * scale));
            prop_assert!(eig.iter().filter(|v| v.abs() > 1e-9 * scale).count() <= 2);
        }
    }
}
