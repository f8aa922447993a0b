//! End-to-end runs over a model/target bundle pair, toy bundle generation
//! and report emission.
//!
//! The noiseless run selects a rank per sector on the model, rotates the
//! orbitals to lower coherence, searches the sampling fraction on the
//! model, completes the target with the same samplings and post-processes.
//! The noisy run calibrates the standard scheme on the target, plans shot
//! count and quartet fraction on the model, measures the target with the
//! plan, completes and normalizes.

mod bundle;
mod report;

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bundle::{RdmBundle, FORMAT as BUNDLE_FORMAT};
pub use report::{
    write_csv, write_sector_tables, RunKind, RunReport, SectorReport, ShotReport, StageReport,
};

use crate::coherence::{
    coherence, minimize_coherence, rotate_set, CoherenceConfig, RotationBasis, SectorBasis,
};
use crate::completion::{
    complete, default_grid, find_fsample, find_fsample_matrix, info_bound, mean_std,
    CompletionConfig, SampleSet,
};
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::measurement::{
    calibrate_standard, complete_measured, default_quartet_grid, plan_noisy, select, Calibration,
    CalibrationConfig, MeasurementScheme, NoisyPlan, PlanConfig, SamplingUnit, Selection,
    ShotBudget,
};
use crate::optim::LbfgsConfig;
use crate::postprocess::{postprocess, Mode, PostprocessConfig, PostprocessInput, Step};
use crate::rdm::{
    contract_to_1rdm, rel_error, rel_error_set, select_rank, spectrum, two_body_energy, OneRDM,
    SpinRDMSet, SpinSector, SystemMeta,
};
use crate::toy::{exact_rdms, ground_state, ToyFamily, ToyHamiltonian};

/// Default interaction scale of the cheap model in [`gen_toy`].
pub const MODEL_SCALE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub eps0: f64,
    pub kappa: f64,
    /// Rank for every sector instead of model-based selection.
    pub rank: Option<usize>,
    pub seed: u64,
    pub n_trials: usize,
    /// Noisy runs: switching cost per measured string, in shots.
    pub switch_cost: f64,
    /// Noiseless runs: minimize coherence before sampling.
    pub rotate: bool,
    pub coherence: CoherenceConfig,
    pub completion: CompletionConfig,
    /// Noiseless post-processing steps; noisy runs always normalize only.
    pub steps: Vec<Step>,
    /// Explicit sampling-fraction grid; default depends on rank and size.
    pub grid: Option<Vec<f64>>,
    pub quartet_grid: Vec<f64>,
    /// Noisy runs: draw quartets or single elements uniformly.
    pub sampling_unit: SamplingUnit,
    /// Bisection steps after the shot-count doubling, for both schemes.
    pub calibration_refine_steps: usize,
    pub shot_cap: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eps0: 0.01,
            kappa: 0.5,
            rank: None,
            seed: 0,
            n_trials: 10,
            switch_cost: 0.0,
            rotate: true,
            coherence: CoherenceConfig::default(),
            completion: CompletionConfig::default(),
            steps: Step::ALL.to_vec(),
            grid: None,
            quartet_grid: default_quartet_grid(),
            sampling_unit: SamplingUnit::Quartet,
            calibration_refine_steps: 1,
            shot_cap: 10_000_000_000,
        }
    }
}

impl RunConfig {
    fn completion_for(&self, r: usize) -> CompletionConfig {
        CompletionConfig {
            r,
            eps0: self.eps0,
            kappa: self.kappa,
            n_trials: self.n_trials,
            seed: self.seed,
            ..self.completion
        }
    }

    fn optimizer(&self) -> LbfgsConfig {
        LbfgsConfig {
            memory: self.completion.memory,
            max_iter: self.completion.max_iter,
            grad_tol: self.completion.grad_tol,
            ..LbfgsConfig::default()
        }
    }
}

/// Exact ground-state bundles of a toy Hamiltonian (target) and of the same
/// Hamiltonian with its interaction scaled by `model_scale` (model). Both
/// carry the unscaled integrals, so energies refer to the target system.
pub fn gen_toy(
    family: ToyFamily,
    meta: SystemMeta,
    model_scale: f64,
) -> Result<(RdmBundle, RdmBundle)> {
    let h = ToyHamiltonian::new(family, meta)?;
    let label = match &h.family {
        ToyFamily::HubbardChain { .. } => "site",
        ToyFamily::RandomTwoBody { .. } => "random",
    };
    let exact = |ham: &ToyHamiltonian| -> Result<(OneRDM, SpinRDMSet)> {
        let (_, psi) = ground_state(ham)?;
        exact_rdms(&psi, meta)
    };
    let (d_t, p_t) = exact(&h)?;
    let (d_m, p_m) = if model_scale == 1.0 {
        (d_t.clone(), p_t.clone())
    } else {
        exact(&h.with_integrals(h.ints.with_interaction_scaled(model_scale))?)?
    };
    let make = |p, d, producer: String| RdmBundle {
        basis_label: label.into(),
        producer,
        rdm: p,
        one_rdm: Some(d),
        integrals: Some(h.ints.clone()),
    };
    Ok((
        make(
            p_m,
            d_m,
            format!("rdmc toy model, interaction x{model_scale}"),
        ),
        make(p_t, d_t, "rdmc toy target".into()),
    ))
}

/// Rank per sector: model-based selection, or the override clamped to the
/// sector size. Empty or zero model sectors get rank 0.
pub fn select_ranks(model: &SpinRDMSet, cfg: &RunConfig) -> Result<[usize; 3]> {
    let n = model.meta().n;
    let mut ranks = [0; 3];
    for s in SpinSector::ALL {
        let d = s.dim(n);
        let p = model.sector(s);
        if d == 0 || p.frobenius() == 0.0 {
            continue;
        }
        ranks[s as usize] = match cfg.rank {
            Some(r) => r.min(d),
            None => select_rank(p, cfg.eps0, cfg.kappa)?,
        };
    }
    Ok(ranks)
}

fn check_pair(model: &RdmBundle, target: &RdmBundle) -> Result<()> {
    if model.meta() != target.meta() {
        return Err(Error::InvalidSystem(format!(
            "model {:?} and target {:?} describe different systems",
            model.meta(),
            target.meta()
        )));
    }
    Ok(())
}

/// Per-trial results of one stage, collected into a report row.
fn stage_report(
    name: &str,
    results: &[SpinRDMSet],
    reference: &SpinRDMSet,
    e2: Option<(&crate::rdm::IntegralSet, f64)>,
    basis: &RotationBasis,
) -> Result<StageReport> {
    let eps: Vec<f64> = results
        .iter()
        .map(|p| rel_error_set(p, reference))
        .collect::<Result<_>>()?;
    let (epsilon, epsilon_std) = mean_std(&eps);
    let mut epsilon_sector = [0.0; 3];
    let mut min_eigenvalues = [f64::INFINITY; 3];
    for s in SpinSector::ALL {
        let d = s.dim(reference.meta().n);
        let mut errs = Vec::new();
        for p in results {
            if d > 0 {
                min_eigenvalues[s as usize] =
                    min_eigenvalues[s as usize].min(min_eigenvalue(p.sector(s).matrix()));
            }
            if let Ok(e) = rel_error(p.sector(s), reference.sector(s)) {
                errs.push(e);
            }
        }
        epsilon_sector[s as usize] = if errs.is_empty() {
            0.0
        } else {
            mean_std(&errs).0
        };
        if d == 0 {
            min_eigenvalues[s as usize] = 0.0;
        }
    }
    let e2_error_per_trial = match e2 {
        Some((ints, e_ref)) => {
            let inverse = basis.inverse();
            Some(
                results
                    .iter()
                    .map(|p| Ok((two_body_energy(&rotate_set(p, &inverse)?, ints)? - e_ref).abs()))
                    .collect::<Result<Vec<f64>>>()?,
            )
        }
        None => None,
    };
    Ok(StageReport {
        stage: name.into(),
        epsilon,
        epsilon_std,
        epsilon_per_trial: eps,
        epsilon_sector,
        e2_error: e2_error_per_trial.as_ref().map(|v| mean_std(v).0),
        e2_error_per_trial,
        min_eigenvalues,
    })
}

fn stage_name(step: Step) -> &'static str {
    match step {
        Step::RestoreSampled => "restore-sampled",
        Step::NormalizeTrace => "normalize-trace",
        Step::ModelCorrection => "model-correction",
    }
}

fn empty_sector_report(s: SpinSector, d: usize, r: usize) -> SectorReport {
    SectorReport {
        sector: s.label().into(),
        d,
        r,
        info_bound: (r > 0).then(|| info_bound(r, d)),
        f_sample: None,
        n_sample: None,
        model_error: None,
        mu_before: None,
        mu_after: None,
        leverage_before: Vec::new(),
        leverage_after: Vec::new(),
        curve: Vec::new(),
    }
}

/// Rotation lowering the coherence of the model's leading eigenvectors,
/// with per-sector leverage before and after.
pub fn rotation_for(
    model: &SpinRDMSet,
    ranks: [usize; 3],
    cfg: &RunConfig,
) -> Result<(RotationBasis, Vec<SectorReport>)> {
    let n = model.meta().n;
    let mut reports: Vec<SectorReport> = SpinSector::ALL
        .iter()
        .map(|&s| empty_sector_report(s, s.dim(n), ranks[s as usize]))
        .collect();
    let active: Vec<SpinSector> = SpinSector::ALL
        .into_iter()
        .filter(|&s| ranks[s as usize] > 0)
        .collect();
    let bases: Vec<SectorBasis> = active
        .iter()
        .map(|&s| SectorBasis::new(s, &spectrum(model.sector(s)).truncate(ranks[s as usize])))
        .collect();
    let basis = if cfg.rotate && !bases.is_empty() {
        minimize_coherence(
            &bases,
            n,
            &CoherenceConfig {
                seed: cfg.seed,
                ..cfg.coherence
            },
        )?
        .basis
    } else {
        RotationBasis::identity(n)
    };
    let rotated = rotate_set(model, &basis)?;
    for &s in &active {
        let r = ranks[s as usize];
        let before = coherence(&spectrum(model.sector(s)).truncate(r));
        let after = coherence(&spectrum(rotated.sector(s)).truncate(r));
        let rep = &mut reports[s as usize];
        rep.mu_before = Some(before.mu);
        rep.mu_after = Some(after.mu);
        rep.leverage_before = before.per_row_leverage;
        rep.leverage_after = after.per_row_leverage;
    }
    Ok((basis, reports))
}

fn e2_reference(target: &RdmBundle) -> Result<Option<(&crate::rdm::IntegralSet, f64)>> {
    match &target.integrals {
        Some(ints) => Ok(Some((ints, two_body_energy(&target.rdm, ints)?))),
        None => Ok(None),
    }
}

/// Full error-vs-fraction curves of every sector of `model`, after the
/// same rank selection and rotation as a noiseless run. Unlike the run,
/// a sector with no feasible fraction is reported rather than an error.
pub fn sampling_curves(model: &SpinRDMSet, cfg: &RunConfig) -> Result<Vec<SectorReport>> {
    let n = model.meta().n;
    let ranks = select_ranks(model, cfg).map_err(|e| e.at("rank selection"))?;
    let (basis, mut sectors) = rotation_for(model, ranks, cfg).map_err(|e| e.at("coherence"))?;
    let rotated = rotate_set(model, &basis)?;
    for s in SpinSector::ALL {
        let r = ranks[s as usize];
        if r == 0 {
            continue;
        }
        let grid = cfg
            .grid
            .clone()
            .unwrap_or_else(|| default_grid(r, s.dim(n)));
        let p = rotated.sector(s);
        let search = find_fsample_matrix(
            p.matrix(),
            Some(p.meta().trace_target(s)),
            &cfg.completion_for(r),
            &grid,
            true,
        )
        .map_err(|e| e.at("sampling search"))?;
        let rep = &mut sectors[s as usize];
        if let Some(f) = search.f_star {
            let point = search
                .curve
                .iter()
                .find(|p| p.f_sample == f)
                .expect("f_star is on the curve");
            rep.f_sample = Some(f);
            rep.n_sample = Some(point.n_sample);
            rep.model_error = Some(point.mean_error);
        }
        rep.curve = search.curve;
    }
    Ok(sectors)
}

/// Shot plan computed on the model alone: the standard scheme is
/// calibrated on the model too, so `f_m` is a model-side estimate.
pub fn noisy_plan(model: &RdmBundle, cfg: &RunConfig) -> Result<(Calibration, NoisyPlan)> {
    let meta = model.meta();
    let ranks = select_ranks(&model.rdm, cfg).map_err(|e| e.at("rank selection"))?;
    let d = one_rdm_of(model)?;
    let scheme = MeasurementScheme::new(meta).map_err(|e| e.at("measurement maps"))?;
    let cal = calibrate_standard(&scheme, &model.rdm, &d, cfg.eps0, &calibration_config(cfg))
        .map_err(|e| e.at("standard calibration"))?;
    let plan = plan_noisy(&scheme, &model.rdm, &d, &plan_config(cfg, ranks, cal.m0))
        .map_err(|e| e.at("shot planning"))?;
    Ok((cal, plan))
}

fn calibration_config(cfg: &RunConfig) -> CalibrationConfig {
    CalibrationConfig {
        n_trials: cfg.n_trials,
        cap: cfg.shot_cap,
        refine_steps: cfg.calibration_refine_steps,
        seed: cfg.seed,
    }
}

fn plan_config(cfg: &RunConfig, ranks: [usize; 3], m_standard: u64) -> PlanConfig {
    PlanConfig {
        eps0: cfg.eps0,
        switch_cost: cfg.switch_cost,
        n_trials: cfg.n_trials,
        grid: cfg.quartet_grid.clone(),
        cap: cfg.shot_cap,
        seed: cfg.seed,
        ranks,
        completion: cfg.completion_for(1),
        m_standard: Some(m_standard),
        unit: cfg.sampling_unit,
        refine_steps: cfg.calibration_refine_steps,
    }
}

pub fn run_noiseless(model: &RdmBundle, target: &RdmBundle, cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    check_pair(model, target)?;
    let meta = model.meta();
    let n = meta.n;
    let ranks = select_ranks(&model.rdm, cfg).map_err(|e| e.at("rank selection"))?;
    let (basis, mut sectors) =
        rotation_for(&model.rdm, ranks, cfg).map_err(|e| e.at("coherence"))?;
    let model_rot = rotate_set(&model.rdm, &basis)?;
    let target_rot = rotate_set(&target.rdm, &basis)?;

    // per sector: sampling search on the model, then one sampling per trial
    let mut samples: Vec<[SampleSet; 3]> = (0..cfg.n_trials)
        .map(|t| SpinSector::ALL.map(|s| empty_sample(s, n, cfg.seed.wrapping_add(t as u64))))
        .collect();
    for s in SpinSector::ALL {
        let r = ranks[s as usize];
        if r == 0 {
            continue;
        }
        let d = s.dim(n);
        let ccfg = cfg.completion_for(r);
        let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(r, d));
        let search =
            find_fsample(model_rot.sector(s), &ccfg, &grid).map_err(|e| e.at("sampling search"))?;
        let f = search
            .f_star
            .expect("find_fsample returns a feasible point");
        let point = search
            .curve
            .iter()
            .find(|p| p.f_sample == f)
            .expect("f_star is on the curve");
        let rep = &mut sectors[s as usize];
        rep.f_sample = Some(f);
        rep.n_sample = Some(point.n_sample);
        rep.model_error = Some(point.mean_error);
        rep.curve = search.curve.clone();
        for (t, sample) in search.samples_at_star.into_iter().enumerate() {
            samples[t][s as usize] = sample;
        }
    }

    // complete model and target with identical samplings
    let trials: Vec<(SpinRDMSet, SpinRDMSet)> = samples
        .par_iter()
        .map(|smp| -> Result<(SpinRDMSet, SpinRDMSet)> {
            let mut tgt = SpinRDMSet::zeros(meta);
            let mut mdl = SpinRDMSet::zeros(meta);
            for s in SpinSector::ALL {
                let r = ranks[s as usize];
                if r == 0 {
                    continue;
                }
                let ccfg = cfg.completion_for(r);
                tgt.replace(complete(target_rot.sector(s), &smp[s as usize], &ccfg)?.1)?;
                mdl.replace(complete(model_rot.sector(s), &smp[s as usize], &ccfg)?.1)?;
            }
            Ok((tgt, mdl))
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at("target completion"))?;

    let pp = PostprocessConfig {
        steps: cfg.steps.clone(),
        mode: Mode::Noiseless,
    };
    let outcomes: Vec<_> = trials
        .iter()
        .zip(&samples)
        .map(|((tgt, mdl), smp)| {
            postprocess(
                PostprocessInput {
                    completed: tgt,
                    observed: Some(&target_rot),
                    samples: smp,
                    ranks,
                    model: Some((&model_rot, mdl)),
                },
                &pp,
            )
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at("post-processing"))?;

    let e2 = e2_reference(target)?;
    let completed: Vec<SpinRDMSet> = trials.iter().map(|t| t.0.clone()).collect();
    let mut stages = vec![stage_report(
        "completed",
        &completed,
        &target_rot,
        e2,
        &basis,
    )?];
    for (k, &step) in cfg.steps.iter().enumerate() {
        let results: Vec<SpinRDMSet> = outcomes.iter().map(|o| o.stages[k].1.clone()).collect();
        stages.push(stage_report(
            stage_name(step),
            &results,
            &target_rot,
            e2,
            &basis,
        )?);
    }
    finish(
        RunKind::Noiseless,
        cfg,
        model,
        target,
        ranks,
        Some(&basis),
        sectors,
        stages,
        e2,
        None,
        start,
    )
}

fn empty_sample(s: SpinSector, n: usize, seed: u64) -> SampleSet {
    SampleSet::from_indices(s.dim(n), Vec::new(), seed)
        .expect("empty sampling is valid")
        .with_sector(s)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    kind: RunKind,
    cfg: &RunConfig,
    model: &RdmBundle,
    target: &RdmBundle,
    ranks: [usize; 3],
    basis: Option<&RotationBasis>,
    sectors: Vec<SectorReport>,
    stages: Vec<StageReport>,
    e2: Option<(&crate::rdm::IntegralSet, f64)>,
    shots: Option<ShotReport>,
    start: Instant,
) -> Result<RunReport> {
    let last = stages.last().expect("at least the completion stage");
    Ok(RunReport {
        kind,
        config: cfg.clone(),
        meta: model.meta(),
        model_digest: model.digest()?,
        target_digest: target.digest()?,
        ranks,
        rotation: basis.map(|b| row_major(b.matrix())),
        epsilon: last.epsilon,
        e2_error: last.e2_error,
        e2_target: e2.map(|x| x.1),
        sectors,
        stages,
        shots,
        optimizer: cfg.optimizer(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect()
}

fn one_rdm_of(b: &RdmBundle) -> Result<OneRDM> {
    match &b.one_rdm {
        Some(d) => Ok(d.clone()),
        None => contract_to_1rdm(&b.rdm),
    }
}

pub fn run_noisy(model: &RdmBundle, target: &RdmBundle, cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    check_pair(model, target)?;
    let meta = model.meta();
    let ranks = select_ranks(&model.rdm, cfg).map_err(|e| e.at("rank selection"))?;
    let d_model = one_rdm_of(model)?;
    let d_target = one_rdm_of(target)?;
    let scheme = MeasurementScheme::new(meta).map_err(|e| e.at("measurement maps"))?;
    let n_all = scheme.strings().len();

    let cal = calibrate_standard(
        &scheme,
        &target.rdm,
        &d_target,
        cfg.eps0,
        &calibration_config(cfg),
    )
    .map_err(|e| e.at("standard calibration"))?;
    let standard_total = cal.m0 * n_all as u64;

    let plan = plan_noisy(
        &scheme,
        &model.rdm,
        &d_model,
        &plan_config(cfg, ranks, cal.m0),
    )
    .map_err(|e| e.at("shot planning"))?;

    // realize the plan once; repeats differ only in shot noise
    let mut uses_standard = plan.uses_standard;
    let standard = Selection::quartets(scheme.all_quartets());
    let mut selection = if uses_standard {
        standard.clone()
    } else {
        select(&scheme, cfg.sampling_unit, plan.f_sample, cfg.seed ^ 0x5eed)
    };
    let mut m = if uses_standard { cal.m0 } else { plan.m };
    let standard_cost = (cal.m0 as f64 + cfg.switch_cost) * n_all as f64;
    // the plan's cost is a mean over samplings; never pay more than standard
    if (m as f64 + cfg.switch_cost) * scheme.settings_for(&selection.quartets).len() as f64
        > standard_cost
    {
        uses_standard = true;
        selection = standard;
        m = cal.m0;
    }
    let budget = ShotBudget::new(
        m,
        scheme.settings_for(&selection.quartets).len(),
        cfg.switch_cost,
        standard_total,
    );

    let raw: Vec<SpinRDMSet> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| -> Result<SpinRDMSet> {
            let seed = cfg.seed.wrapping_add(1_000_003 * (t as u64 + 1));
            let measured =
                scheme.measure_selection(&target.rdm, &d_target, &selection, Some(m), seed)?;
            if uses_standard {
                Ok(measured.values)
            } else {
                Ok(complete_measured(&measured, ranks, &cfg.completion_for(1))?.0)
            }
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at("measurement and completion"))?;
    let normalized: Vec<SpinRDMSet> = raw
        .iter()
        .map(|p| {
            postprocess(
                PostprocessInput {
                    completed: p,
                    observed: None,
                    samples: &SpinSector::ALL.map(|s| empty_sample(s, meta.n, 0)),
                    ranks,
                    model: None,
                },
                &PostprocessConfig::full(Mode::Noisy),
            )
            .map(|o| o.result)
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at("post-processing"))?;

    let e2 = e2_reference(target)?;
    let ident = RotationBasis::identity(meta.n);
    let stages = vec![
        stage_report("completed", &raw, &target.rdm, e2, &ident)?,
        stage_report("normalize-trace", &normalized, &target.rdm, e2, &ident)?,
    ];
    let sectors = SpinSector::ALL
        .iter()
        .map(|&s| empty_sector_report(s, s.dim(meta.n), ranks[s as usize]))
        .collect();
    let shots = ShotReport {
        m_standard: cal.m0,
        standard_settings: n_all,
        standard_total_shots: standard_total,
        m,
        quartet_fraction: selection.quartets.len() as f64 / scheme.n_quartets() as f64,
        n_quartets: selection.quartets.len(),
        n_settings: budget.n_settings,
        total_shots: budget.total_shots,
        f_m: budget.f_m,
        switch_cost: cfg.switch_cost,
        total_cost: budget.total_cost,
        uses_standard,
        calibration: cal.curve,
        plan_curve: plan.curves,
    };
    finish(
        RunKind::Noisy,
        cfg,
        model,
        target,
        ranks,
        None,
        sectors,
        stages,
        e2,
        Some(shots),
        start,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hubbard(n: usize, na: usize, nb: usize, scale: f64) -> (RdmBundle, RdmBundle) {
        gen_toy(
            ToyFamily::HubbardChain {
                hopping: 1.0,
                u: 4.0,
                periodic: false,
            },
            SystemMeta::new(n, na, nb).unwrap(),
            scale,
        )
        .unwrap()
    }

    #[test]
    fn unit_scale_gives_identical_bundles() {
        let (m, t) = hubbard(3, 2, 1, 1.0);
        assert_eq!(m.rdm, t.rdm);
        let (m, t) = hubbard(3, 2, 1, MODEL_SCALE);
        assert_ne!(m.rdm, t.rdm);
        assert!(m.integrals == t.integrals);
    }

    #[test]
    fn too_large_is_rejected() {
        let r = gen_toy(
            ToyFamily::RandomTwoBody { seed: 1 },
            SystemMeta::new(7, 3, 3).unwrap(),
            0.8,
        );
        assert!(matches!(r, Err(Error::TooLarge(_))));
    }

    #[test]
    fn zero_sectors_get_rank_zero() {
        let (m, _) = hubbard(3, 1, 1, 1.0);
        let ranks = select_ranks(&m.rdm, &RunConfig::default()).unwrap();
        assert_eq!(ranks[SpinSector::AlphaAlpha as usize], 0);
        assert_eq!(ranks[SpinSector::BetaBeta as usize], 0);
        assert!(ranks[SpinSector::AlphaBeta as usize] > 0);
        let cfg = RunConfig {
            rank: Some(100),
            ..Default::default()
        };
        assert_eq!(
            select_ranks(&m.rdm, &cfg).unwrap()[SpinSector::AlphaBeta as usize],
            9
        );
    }

    #[test]
    fn noiseless_self_completion_meets_target() {
        let (m, _) = hubbard(3, 1, 1, 1.0);
        let cfg = RunConfig {
            n_trials: 3,
            ..Default::default()
        };
        let rep = run_noiseless(&m, &m, &cfg).unwrap();
        assert!(rep.stage("completed").unwrap().epsilon < cfg.eps0);
        // restore and normalize act before the correction, so it only
        // telescopes approximately
        assert!(
            rep.epsilon <= rep.stage("completed").unwrap().epsilon,
            "{}",
            rep.epsilon
        );
        let restored = rep.stage("restore-sampled").unwrap();
        assert!(restored.epsilon <= rep.stage("completed").unwrap().epsilon + 1e-15);
        assert!(rep.e2_error.is_some());
    }

    #[test]
    fn energy_fields_absent_without_integrals() {
        let (mut m, _) = hubbard(3, 1, 1, 1.0);
        m.integrals = None;
        let cfg = RunConfig {
            n_trials: 2,
            rotate: false,
            ..Default::default()
        };
        let rep = run_noiseless(&m, &m, &cfg).unwrap();
        assert!(rep.e2_error.is_none() && rep.e2_target.is_none());
        assert!(rep.stages.iter().all(|s| s.e2_error.is_none()));
    }

    #[test]
    fn mismatched_pair_is_rejected() {
        let (a, _) = hubbard(3, 1, 1, 1.0);
        let (b, _) = hubbard(3, 2, 1, 1.0);
        assert!(run_noiseless(&a, &b, &RunConfig::default()).is_err());
    }

    #[test]
    fn noisy_run_bookkeeping() {
        let (m, t) = hubbard(3, 1, 1, MODEL_SCALE);
        let cfg = RunConfig {
            n_trials: 3,
            eps0: 0.05,
            quartet_grid: vec![0.5, 1.0],
            ..Default::default()
        };
        let rep = run_noisy(&m, &t, &cfg).unwrap();
        let s = rep.shots.as_ref().unwrap();
        assert_eq!(s.total_shots, s.m * s.n_settings as u64);
        assert_eq!(s.f_m, s.total_shots as f64 / s.standard_total_shots as f64);
        assert!(s.total_cost <= (s.m_standard as f64 + s.switch_cost) * s.standard_settings as f64);
        let text = serde_json::to_string(&rep).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.epsilon.to_bits(), rep.epsilon.to_bits());
    }
}
