//! Shot budgets: the standard scheme, where every string gets the same
//! shot count and the raw reconstruction must meet the target, and the
//! completion scheme, where a fraction of quartets is measured and the
//! rest is filled in by low-rank completion.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::{calibrate, measure_elements, Calibration, CalibrationConfig};
use super::scheme::{MeasuredRdm, MeasurementScheme, Selection};
use crate::completion::{complete_matrix, mean_std, CompletionConfig, SampleSet};
use crate::error::{Error, Result};
use crate::rdm::{rel_error_set, OneRDM, PackedRDM, SpinRDMSet, SpinSector};

/// Shots spent by one plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotBudget {
    pub m_per_string: u64,
    pub n_settings: usize,
    pub total_shots: u64,
    /// Switching cost per setting, in shots.
    pub c: f64,
    /// `total_shots + c * n_settings`.
    pub total_cost: f64,
    /// `total_shots / standard total_shots`.
    pub f_m: f64,
}

impl ShotBudget {
    pub fn new(m: u64, n_settings: usize, c: f64, standard_total: u64) -> Self {
        let total_shots = m * n_settings as u64;
        Self {
            m_per_string: m,
            n_settings,
            total_shots,
            c,
            total_cost: total_shots as f64 + c * n_settings as f64,
            f_m: total_shots as f64 / standard_total as f64,
        }
    }
}

/// Seed of trial `t` of a calibration or plan point.
fn trial_seed(base: u64, a: u64, t: usize) -> u64 {
    base.wrapping_mul(0x2545_f491_4f6c_dd1d)
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(t as u64)
}

/// Shot count at which the raw reconstruction from all strings has mean
/// error below `eps0`.
pub fn calibrate_standard(
    scheme: &MeasurementScheme,
    p: &SpinRDMSet,
    d: &OneRDM,
    eps0: f64,
    cfg: &CalibrationConfig,
) -> Result<Calibration> {
    let all = scheme.all_quartets();
    calibrate(
        |m| {
            let errs: Vec<f64> = (0..cfg.n_trials)
                .into_par_iter()
                .map(|t| {
                    let out = scheme.measure(p, d, &all, Some(m), trial_seed(cfg.seed, 0, t))?;
                    rel_error_set(&out.values, p)
                })
                .collect::<Result<_>>()?;
            Ok(mean_std(&errs).0)
        },
        eps0,
        cfg,
    )
}

/// Completes every sector of a measurement at the given ranks. A rank of
/// zero, or a sector with no measured element, yields a zero sector.
/// Returns the completed set and a convergence flag per sector.
pub fn complete_measured(
    measured: &MeasuredRdm,
    ranks: [usize; 3],
    cfg: &CompletionConfig,
) -> Result<(SpinRDMSet, [bool; 3])> {
    let meta = measured.values.meta();
    let mut out = SpinRDMSet::zeros(meta);
    let mut converged = [true; 3];
    for s in SpinSector::ALL {
        let sample = measured.sample(s);
        let r = ranks[s as usize].min(sample.d);
        if r == 0 || sample.n_sample() == 0 {
            continue;
        }
        let observed = measured.values.sector(s).matrix();
        let res = complete_matrix(observed, sample, r, Some(meta.trace_target(s)), cfg)?;
        converged[s as usize] = res.converged;
        out.replace(PackedRDM::new(s, meta, res.completed)?)?;
    }
    Ok((out, converged))
}

/// Uniformly chosen indices out of `n`, a fraction `f` of them (at least
/// one), sorted.
fn sample_fraction(n: usize, f: f64, seed: u64) -> Vec<usize> {
    let k = ((f * n as f64).round() as usize).clamp(1, n);
    let mut picked = index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Uniformly chosen quartet indices, sorted.
pub fn sample_quartets(n_quartets: usize, f: f64, seed: u64) -> Vec<usize> {
    sample_fraction(n_quartets, f, seed)
}

/// Unit drawn uniformly when subsampling a measurement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingUnit {
    /// Whole quartets; all three elements of a quartet are kept.
    #[default]
    Quartet,
    /// Single packed elements; each drawn element's quartet is measured and
    /// only the drawn elements are kept.
    Element,
}

/// A fraction `f` of the scheme's quartets or elements.
pub fn select(scheme: &MeasurementScheme, unit: SamplingUnit, f: f64, seed: u64) -> Selection {
    match unit {
        SamplingUnit::Quartet => Selection::quartets(sample_quartets(scheme.n_quartets(), f, seed)),
        SamplingUnit::Element => {
            let all = scheme.elements();
            let picked = sample_fraction(all.len(), f, seed);
            let mut quartets: Vec<usize> = picked.iter().map(|&i| all[i].1).collect();
            quartets.sort_unstable();
            quartets.dedup();
            Selection {
                quartets,
                elements: Some(picked.iter().map(|&i| all[i].0).collect()),
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanConfig {
    pub eps0: f64,
    /// Switching cost per measured string, in shots.
    pub switch_cost: f64,
    pub n_trials: usize,
    /// Quartet fractions to scan, ascending, ending at 1.
    pub grid: Vec<f64>,
    pub cap: u64,
    pub seed: u64,
    /// Completion rank per sector in `SpinSector::ALL` order.
    pub ranks: [usize; 3],
    pub completion: CompletionConfig,
    /// Standard-scheme shot count, kept as a fallback candidate.
    pub m_standard: Option<u64>,
    pub unit: SamplingUnit,
    /// Bisection steps on `m` below the best doubling point.
    pub refine_steps: usize,
}

impl PlanConfig {
    pub fn new(ranks: [usize; 3], eps0: f64) -> Self {
        Self {
            eps0,
            switch_cost: 0.0,
            n_trials: 10,
            grid: default_quartet_grid(),
            cap: 10_000_000_000,
            seed: 0,
            ranks,
            completion: CompletionConfig {
                eps0,
                ..CompletionConfig::default()
            },
            m_standard: None,
            unit: SamplingUnit::Quartet,
            refine_steps: 1,
        }
    }
}

/// Quartet fractions 0.1, 0.2, ..., 1.
pub fn default_quartet_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// One `(m, f)` evaluation of the planner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanPoint {
    pub m: u64,
    pub f_sample: f64,
    #[serde(with = "crate::serde_nan")]
    pub mean_error: f64,
    #[serde(with = "crate::serde_nan")]
    pub std_error: f64,
    pub mean_settings: f64,
    /// Mean of `(m + c) * settings` over the samplings.
    pub cost: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoisyPlan {
    pub m: u64,
    pub f_sample: f64,
    pub cost: f64,
    /// The standard scheme won (no completion).
    pub uses_standard: bool,
    /// Every evaluated point, for error-vs-fraction plots per `m`.
    pub curves: Vec<PlanPoint>,
}

/// Searches shot count and quartet fraction for the cheapest completion
/// plan whose mean error on the model is below `eps0`. `m` doubles from 1;
/// for each `m` the grid is scanned from full sampling downwards and stops
/// at the first infeasible fraction. The search ends once even the
/// cheapest fraction at the current `m` costs more than the best plan.
/// The standard plan competes when `m_standard` is set.
pub fn plan_noisy(
    scheme: &MeasurementScheme,
    p: &SpinRDMSet,
    d: &OneRDM,
    cfg: &PlanConfig,
) -> Result<NoisyPlan> {
    if cfg.grid.is_empty() || cfg.grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSystem(
            "plan grid must be strictly ascending".into(),
        ));
    }
    let n_all = scheme.strings().len();
    // samplings fixed across m so curves for different m are comparable
    let samplings: Vec<Vec<Selection>> = cfg
        .grid
        .iter()
        .enumerate()
        .map(|(g, &f)| {
            (0..cfg.n_trials)
                .map(|t| select(scheme, cfg.unit, f, trial_seed(cfg.seed, g as u64 + 1, t)))
                .collect()
        })
        .collect();
    let mean_settings: Vec<f64> = samplings
        .iter()
        .map(|per_f| {
            per_f
                .iter()
                .map(|s| scheme.settings_for(&s.quartets).len())
                .sum::<usize>() as f64
                / per_f.len() as f64
        })
        .collect();
    let min_settings = mean_settings.iter().cloned().fold(f64::INFINITY, f64::min);

    let evaluate = |m: u64, g: usize| -> Result<PlanPoint> {
        let errs: Vec<f64> = samplings[g]
            .par_iter()
            .enumerate()
            .map(|(t, sel)| {
                let shot_seed = trial_seed(cfg.seed ^ m.rotate_left(32), g as u64 + 1, t);
                let measured = scheme.measure_selection(p, d, sel, Some(m), shot_seed)?;
                let (completed, _) = complete_measured(&measured, cfg.ranks, &cfg.completion)?;
                rel_error_set(&completed, p)
            })
            .collect::<Result<_>>()?;
        let (mean, std) = mean_std(&errs);
        Ok(PlanPoint {
            m,
            f_sample: cfg.grid[g],
            mean_error: mean,
            std_error: std,
            mean_settings: mean_settings[g],
            cost: (m as f64 + cfg.switch_cost) * mean_settings[g],
            feasible: mean < cfg.eps0,
        })
    };

    // (cost, m, grid index or None for the standard plan)
    let mut best: Option<(f64, u64, Option<usize>)> = cfg
        .m_standard
        .map(|m0| ((m0 as f64 + cfg.switch_cost) * n_all as f64, m0, None));
    let mut curves = Vec::new();
    let mut m = 1u64;
    loop {
        if let Some((cost, ..)) = best {
            if (m as f64 + cfg.switch_cost) * min_settings >= cost {
                break;
            }
        }
        if m > cfg.cap {
            break;
        }
        for g in (0..cfg.grid.len()).rev() {
            let pt = evaluate(m, g)?;
            let (feasible, cost) = (pt.feasible, pt.cost);
            curves.push(pt);
            if !feasible {
                break;
            }
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, m, Some(g)));
            }
        }
        m = match m.checked_mul(2) {
            Some(v) => v,
            None => break,
        };
    }
    if let Some((_, m_best, Some(g))) = best {
        // noise differs per m, so a point may also fail above m_best
        let below = curves
            .iter()
            .filter(|pt| pt.f_sample == cfg.grid[g] && !pt.feasible && pt.m < m_best)
            .map(|pt| pt.m)
            .max()
            .unwrap_or(0);
        let (mut fail, mut pass) = (below.max(m_best / 2), m_best);
        for _ in 0..cfg.refine_steps {
            if pass - fail <= 1 {
                break;
            }
            let mid = fail + (pass - fail) / 2;
            let pt = evaluate(mid, g)?;
            let (feasible, cost) = (pt.feasible, pt.cost);
            curves.push(pt);
            if feasible {
                pass = mid;
                if best.is_none_or(|b| cost < b.0) {
                    best = Some((cost, mid, Some(g)));
                }
            } else {
                fail = mid;
            }
        }
    }
    let (cost, m, g) = best.ok_or(Error::NoFeasiblePoint)?;
    Ok(NoisyPlan {
        m,
        f_sample: g.map_or(1.0, |g| cfg.grid[g]),
        cost,
        uses_standard: g.is_none(),
        curves,
    })
}

/// Shot counts of the standard and the completion (noise-filtering) scheme
/// on a synthetic matrix with full element sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShotReduction {
    pub standard: Calibration,
    pub completion: Calibration,
    /// `m0 / m*`, equal to `1 / f_m` at full sampling.
    pub inverse_f_m: f64,
}

/// Compares the standard scheme with rank-`r` completion of all measured
/// elements, each element read directly with binomial noise.
pub fn synthetic_shot_reduction(
    target: &DMatrix<f64>,
    r: usize,
    eps0: f64,
    cal: &CalibrationConfig,
    completion: &CompletionConfig,
) -> Result<ShotReduction> {
    let d = target.nrows();
    let full = SampleSet::full(d);
    let norm = target.norm();
    let raw = |m: u64| -> Result<f64> {
        let errs: Vec<f64> = (0..cal.n_trials)
            .map(|t| {
                (measure_elements(target, &full, m, trial_seed(cal.seed, 0, t)) - target).norm()
                    / norm
            })
            .collect();
        Ok(mean_std(&errs).0)
    };
    let filtered = |m: u64| -> Result<f64> {
        let errs: Vec<f64> = (0..cal.n_trials)
            .into_par_iter()
            .map(|t| {
                let noisy = measure_elements(target, &full, m, trial_seed(cal.seed, 0, t));
                let out = complete_matrix(&noisy, &full, r, None, completion)?;
                Ok((&out.completed - target).norm() / norm)
            })
            .collect::<Result<_>>()?;
        Ok(mean_std(&errs).0)
    };
    let standard = calibrate(raw, eps0, cal)?;
    let completion = calibrate(filtered, eps0, cal)?;
    Ok(ShotReduction {
        inverse_f_m: standard.m0 as f64 / completion.m0 as f64,
        standard,
        completion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::synthetic_low_rank;
    use crate::rdm::SystemMeta;
    use crate::toy::{exact_rdms, ground_state, ToyFamily, ToyHamiltonian};

    fn hubbard_rdms(n: usize, na: usize, nb: usize) -> (SpinRDMSet, OneRDM) {
        let meta = SystemMeta::new(n, na, nb).unwrap();
        let h = ToyHamiltonian::new(
            ToyFamily::HubbardChain {
                hopping: 1.0,
                u: 4.0,
                periodic: false,
            },
            meta,
        )
        .unwrap();
        let (_, psi) = ground_state(&h).unwrap();
        let (d, p) = exact_rdms(&psi, meta).unwrap();
        (p, d)
    }

    #[test]
    fn element_selection_keeps_only_drawn_elements() {
        let (p, d) = hubbard_rdms(3, 2, 1);
        let scheme = MeasurementScheme::new(p.meta()).unwrap();
        let sel = select(&scheme, SamplingUnit::Element, 0.3, 5);
        let kept = sel.elements.as_ref().unwrap();
        assert_eq!(
            kept.len(),
            (0.3 * scheme.elements().len() as f64).round() as usize
        );
        let out = scheme.measure_selection(&p, &d, &sel, None, 0).unwrap();
        let written: usize = SpinSector::ALL
            .iter()
            .map(|&s| out.sample(s).n_sample())
            .sum();
        assert_eq!(written, kept.len());
        for e in kept {
            assert!((e.value(&out.values) - e.value(&p)).abs() < 1e-12);
        }
        let whole = select(&scheme, SamplingUnit::Quartet, 1.0, 5);
        assert_eq!(whole.quartets, scheme.all_quartets());
    }

    #[test]
    fn rotation_barely_changes_standard_shots() {
        use crate::coherence::{minimize_coherence, rotate_one_rdm, rotate_set, SectorBasis};
        use crate::rdm::{select_rank, spectrum};
        let (p, d) = hubbard_rdms(3, 2, 1);
        let meta = p.meta();
        let bases: Vec<SectorBasis> = SpinSector::ALL
            .iter()
            .filter(|&&s| p.sector(s).frobenius() > 0.0)
            .map(|&s| {
                let r = select_rank(p.sector(s), 0.01, 0.5).unwrap();
                SectorBasis::new(s, &spectrum(p.sector(s)).truncate(r))
            })
            .collect();
        let c = minimize_coherence(&bases, meta.n, &Default::default())
            .unwrap()
            .basis;
        let (pr, dr) = (rotate_set(&p, &c).unwrap(), rotate_one_rdm(&d, &c));
        let scheme = MeasurementScheme::new(meta).unwrap();
        let cal = CalibrationConfig::default();
        let m0 = calibrate_standard(&scheme, &p, &d, 0.01, &cal).unwrap().m0 as f64;
        let m1 = calibrate_standard(&scheme, &pr, &dr, 0.01, &cal)
            .unwrap()
            .m0 as f64;
        assert!(m1 / m0 <= 2.0 && m0 / m1 <= 2.0, "{m0} vs {m1}");
    }

    #[test]
    fn budget_bookkeeping() {
        let b = ShotBudget::new(10, 7, 2.0, 140);
        assert_eq!(b.total_shots, 70);
        assert_eq!(b.total_cost, 84.0);
        assert_eq!(b.f_m, 0.5);
    }

    #[test]
    fn standard_error_scales_as_inverse_sqrt_m() {
        let (p, d) = hubbard_rdms(3, 1, 1);
        let scheme = MeasurementScheme::new(p.meta()).unwrap();
        let all = scheme.all_quartets();
        let mean_err = |m: u64| -> f64 {
            let errs: Vec<f64> = (0..200)
                .map(|t| {
                    rel_error_set(
                        &scheme.measure(&p, &d, &all, Some(m), t).unwrap().values,
                        &p,
                    )
                    .unwrap()
                })
                .collect();
            errs.iter().map(|e| e * e).sum::<f64>().sqrt() / (errs.len() as f64).sqrt()
        };
        let ratio = mean_err(1000) / mean_err(2000);
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn loose_target_needs_one_shot() {
        let (p, d) = hubbard_rdms(2, 1, 1);
        let scheme = MeasurementScheme::new(p.meta()).unwrap();
        let cal = calibrate_standard(&scheme, &p, &d, 1e6, &CalibrationConfig::default()).unwrap();
        assert_eq!(cal.m0, 1);
    }

    #[test]
    fn planner_is_deterministic_and_never_worse_than_standard() {
        let (p, d) = hubbard_rdms(3, 1, 1);
        let scheme = MeasurementScheme::new(p.meta()).unwrap();
        let cal = calibrate_standard(&scheme, &p, &d, 0.05, &CalibrationConfig::default()).unwrap();
        let mut cfg = PlanConfig::new([0, 0, 3], 0.05);
        cfg.n_trials = 3;
        cfg.grid = vec![0.5, 1.0];
        cfg.m_standard = Some(cal.m0);
        let a = plan_noisy(&scheme, &p, &d, &cfg).unwrap();
        let b = plan_noisy(&scheme, &p, &d, &cfg).unwrap();
        assert_eq!((a.m, a.f_sample, a.cost), (b.m, b.f_sample, b.cost));
        assert_eq!(a.curves.len(), b.curves.len());
        assert!(a.cost <= (cal.m0 * scheme.strings().len() as u64) as f64);
    }

    #[test]
    fn completion_filters_noise_on_low_rank_targets() {
        let target = synthetic_low_rank(20, 1, 4);
        let cal = CalibrationConfig {
            n_trials: 4,
            refine_steps: 4,
            ..Default::default()
        };
        let cfg = CompletionConfig {
            r: 1,
            restarts: 2,
            ..Default::default()
        };
        let red = synthetic_shot_reduction(&target, 1, 0.02, &cal, &cfg).unwrap();
        assert!(red.inverse_f_m > 3.0, "{red:?}");
    }
}
