//! Corrections applied to completed 2-RDMs: restoring sampled elements,
//! per-sector trace normalization and model-error correction.

use serde::{Deserialize, Serialize};

use crate::completion::SampleSet;
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::rdm::{PackedRDM, SpinRDMSet, SpinSector, SystemMeta};

/// Whether observed values are exact or carry shot noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Noiseless,
    Noisy,
}

impl Mode {
    fn label(self) -> &'static str {
        match self {
            Mode::Noiseless => "noiseless",
            Mode::Noisy => "noisy",
        }
    }
}

/// Post-processing steps in their only valid order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    RestoreSampled,
    NormalizeTrace,
    ModelCorrection,
}

impl Step {
    pub const ALL: [Step; 3] = [
        Step::RestoreSampled,
        Step::NormalizeTrace,
        Step::ModelCorrection,
    ];

    fn noiseless_only(self) -> bool {
        !matches!(self, Step::NormalizeTrace)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessConfig {
    pub steps: Vec<Step>,
    pub mode: Mode,
}

impl PostprocessConfig {
    /// Every step valid in `mode`.
    pub fn full(mode: Mode) -> Self {
        let steps = match mode {
            Mode::Noiseless => Step::ALL.to_vec(),
            Mode::Noisy => vec![Step::NormalizeTrace],
        };
        Self { steps, mode }
    }

    pub fn none(mode: Mode) -> Self {
        Self {
            steps: Vec::new(),
            mode,
        }
    }

    /// Steps must be strictly increasing and allowed in the mode.
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.steps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::StepOrder(format!("{:?} after {:?}", w[1], w[0])));
        }
        if self.mode == Mode::Noisy && self.steps.iter().any(|s| s.noiseless_only()) {
            return Err(Error::ModeMismatch(self.mode.label()));
        }
        Ok(())
    }
}

/// Puts the observed values back on the sampled positions.
pub fn restore_sampled(
    completed: &PackedRDM,
    observed: &PackedRDM,
    sample: &SampleSet,
    mode: Mode,
) -> Result<PackedRDM> {
    if mode == Mode::Noisy {
        return Err(Error::ModeMismatch(mode.label()));
    }
    if completed.dim() != sample.d || observed.dim() != sample.d {
        return Err(Error::DimensionMismatch {
            expected: sample.d,
            got: completed.dim(),
        });
    }
    let mut out = completed.clone();
    for &(i, j) in sample.indices() {
        out.set(i, j, observed.get(i, j));
    }
    Ok(out)
}

/// Scales every sector to its electron-count trace. Sectors whose target is
/// zero (fewer than two same-spin electrons) are left untouched.
pub fn normalize_trace(p: &SpinRDMSet, meta: SystemMeta) -> Result<SpinRDMSet> {
    let mut out = p.clone();
    for s in SpinSector::ALL {
        let target = meta.trace_target(s);
        if target == 0.0 {
            continue;
        }
        let tr = p.sector(s).trace();
        if tr == 0.0 || !tr.is_finite() {
            return Err(Error::ZeroTrace(s));
        }
        out.replace(p.sector(s).scaled(target / tr))?;
    }
    Ok(out)
}

/// A completion together with the sampling it was built from.
#[derive(Debug, Clone, Copy)]
pub struct Completed<'a> {
    pub matrix: &'a PackedRDM,
    pub sample: &'a SampleSet,
    pub rank: usize,
}

/// Adds the model's completion error `P_M - completed_model` to the target.
pub fn model_correction(
    target: Completed<'_>,
    p_model: &PackedRDM,
    model: Completed<'_>,
) -> Result<PackedRDM> {
    if target.rank != model.rank || target.sample.indices() != model.sample.indices() {
        return Err(Error::SampleSetMismatch);
    }
    let corrected = target.matrix.matrix() + (p_model.matrix() - model.matrix.matrix());
    target.matrix.with_matrix(corrected)
}

/// Inputs of a full post-processing pass over the three sectors.
#[derive(Debug, Clone, Copy)]
pub struct PostprocessInput<'a> {
    pub completed: &'a SpinRDMSet,
    /// Observed values; only read on sampled positions.
    pub observed: Option<&'a SpinRDMSet>,
    pub samples: &'a [SampleSet; 3],
    pub ranks: [usize; 3],
    /// Exact model and its completion on the same samplings.
    pub model: Option<(&'a SpinRDMSet, &'a SpinRDMSet)>,
}

#[derive(Debug, Clone)]
pub struct PostprocessOutcome {
    pub result: SpinRDMSet,
    /// Result after each applied step, in order.
    pub stages: Vec<(Step, SpinRDMSet)>,
    /// Smallest eigenvalue per sector of the result. Never clipped.
    pub min_eigenvalues: [f64; 3],
}

pub fn postprocess(
    input: PostprocessInput<'_>,
    cfg: &PostprocessConfig,
) -> Result<PostprocessOutcome> {
    cfg.validate()?;
    let meta = input.completed.meta();
    let mut cur = input.completed.clone();
    let mut stages = Vec::with_capacity(cfg.steps.len());
    for &step in &cfg.steps {
        cur = match step {
            Step::RestoreSampled => {
                let observed = input.observed.ok_or_else(|| {
                    Error::InvalidSystem("restoring needs observed values".into())
                })?;
                let mut next = cur.clone();
                for s in SpinSector::ALL {
                    let sample = &input.samples[s as usize];
                    next.replace(restore_sampled(
                        cur.sector(s),
                        observed.sector(s),
                        sample,
                        cfg.mode,
                    )?)?;
                }
                next
            }
            Step::NormalizeTrace => normalize_trace(&cur, meta)?,
            Step::ModelCorrection => {
                let (p_m, completed_m) = input.model.ok_or_else(|| {
                    Error::InvalidSystem("model correction needs the model".into())
                })?;
                let mut next = cur.clone();
                for s in SpinSector::ALL {
                    let sample = &input.samples[s as usize];
                    let rank = input.ranks[s as usize];
                    let t = Completed {
                        matrix: cur.sector(s),
                        sample,
                        rank,
                    };
                    let m = Completed {
                        matrix: completed_m.sector(s),
                        sample,
                        rank,
                    };
                    next.replace(model_correction(t, p_m.sector(s), m)?)?;
                }
                next
            }
        };
        stages.push((step, cur.clone()));
    }
    let min_eigenvalues = SpinSector::ALL.map(|s| min_eigenvalue(cur.sector(s).matrix()));
    Ok(PostprocessOutcome {
        result: cur,
        stages,
        min_eigenvalues,
    })
}
