//! Run reports (JSON) and the comma-separated plot tables derived from them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::completion::GridPoint;
use crate::error::{Error, Result};
use crate::measurement::PlanPoint;
use crate::optim::LbfgsConfig;
use crate::rdm::SystemMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Noiseless,
    Noisy,
}

/// Per-sector outcome of rank selection, rotation and sampling search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorReport {
    pub sector: String,
    pub d: usize,
    pub r: usize,
    pub info_bound: Option<f64>,
    pub f_sample: Option<f64>,
    pub n_sample: Option<usize>,
    /// Mean model completion error at the chosen fraction.
    pub model_error: Option<f64>,
    pub mu_before: Option<f64>,
    pub mu_after: Option<f64>,
    pub leverage_before: Vec<f64>,
    pub leverage_after: Vec<f64>,
    pub curve: Vec<GridPoint>,
}

/// Target errors after one post-processing stage, over all trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub epsilon: f64,
    pub epsilon_std: f64,
    pub epsilon_per_trial: Vec<f64>,
    /// Mean relative error per sector, `aaaa, bbbb, abab`.
    pub epsilon_sector: [f64; 3],
    /// Mean `|E2 - E2(target)|` in Hartree; absent without integrals.
    pub e2_error: Option<f64>,
    pub e2_error_per_trial: Option<Vec<f64>>,
    /// Smallest eigenvalue per sector, minimized over trials.
    pub min_eigenvalues: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShotReport {
    /// Standard scheme: shots per string and strings measured.
    pub m_standard: u64,
    pub standard_settings: usize,
    pub standard_total_shots: u64,
    pub m: u64,
    pub quartet_fraction: f64,
    pub n_quartets: usize,
    pub n_settings: usize,
    pub total_shots: u64,
    /// `total_shots / standard_total_shots`.
    pub f_m: f64,
    pub switch_cost: f64,
    pub total_cost: f64,
    pub uses_standard: bool,
    pub calibration: Vec<(u64, f64)>,
    pub plan_curve: Vec<PlanPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: RunKind,
    pub config: RunConfig,
    pub meta: SystemMeta,
    pub model_digest: String,
    pub target_digest: String,
    pub ranks: [usize; 3],
    /// Orbital rotation applied before completion, row-major.
    pub rotation: Option<Vec<f64>>,
    pub sectors: Vec<SectorReport>,
    pub stages: Vec<StageReport>,
    /// Mean error after the last stage.
    pub epsilon: f64,
    pub e2_error: Option<f64>,
    pub e2_target: Option<f64>,
    pub shots: Option<ShotReport>,
    pub optimizer: LbfgsConfig,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic_text(path.as_ref(), &serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Writes every plot table of the report into `dir`.
    pub fn write_tables(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut written = write_sector_tables(&self.sectors, dir)?;

        let mut rows = Vec::new();
        for st in &self.stages {
            for (t, &eps) in st.epsilon_per_trial.iter().enumerate() {
                rows.push(StageRow {
                    stage: &st.stage,
                    trial: t,
                    epsilon: eps,
                    e2_error: st.e2_error_per_trial.as_ref().map(|v| v[t]),
                });
            }
        }
        write_csv(&dir.join("stages.csv"), &rows)?;
        written.push("stages.csv".into());

        if let Some(shots) = &self.shots {
            write_csv(&dir.join("plan.csv"), &shots.plan_curve)?;
            let cal: Vec<CalibrationRow> = shots
                .calibration
                .iter()
                .map(|&(m, mean_error)| CalibrationRow { m, mean_error })
                .collect();
            write_csv(&dir.join("calibration.csv"), &cal)?;
            written.push("plan.csv".into());
            written.push("calibration.csv".into());
        }
        Ok(written)
    }
}

/// Sampling curves (`fsample.csv`) and row leverage (`leverage.csv`) of
/// the given sectors; tables without rows are skipped.
pub fn write_sector_tables(sectors: &[SectorReport], dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut rows = Vec::new();
    for s in sectors {
        for p in &s.curve {
            rows.push(FsampleRow {
                sector: &s.sector,
                f_sample: p.f_sample,
                n_sample: p.n_sample,
                mean_error: p.mean_error,
                std_error: p.std_error,
                success_fraction: p.success_fraction,
                n_converged: p.n_converged,
            });
        }
    }
    if !rows.is_empty() {
        write_csv(&dir.join("fsample.csv"), &rows)?;
        written.push("fsample.csv".into());
    }

    let mut rows = Vec::new();
    for s in sectors {
        for (row, (&b, &a)) in s.leverage_before.iter().zip(&s.leverage_after).enumerate() {
            rows.push(LeverageRow {
                sector: &s.sector,
                row,
                leverage_before: b,
                leverage_after: a,
            });
        }
    }
    if !rows.is_empty() {
        write_csv(&dir.join("leverage.csv"), &rows)?;
        written.push("leverage.csv".into());
    }

    Ok(written)
}

#[derive(Serialize)]
struct FsampleRow<'a> {
    sector: &'a str,
    f_sample: f64,
    n_sample: usize,
    mean_error: f64,
    std_error: f64,
    success_fraction: f64,
    n_converged: usize,
}

#[derive(Serialize)]
struct LeverageRow<'a> {
    sector: &'a str,
    row: usize,
    leverage_before: f64,
    leverage_after: f64,
}

#[derive(Serialize)]
struct StageRow<'a> {
    stage: &'a str,
    trial: usize,
    epsilon: f64,
    e2_error: Option<f64>,
}

#[derive(Serialize)]
struct CalibrationRow {
    m: u64,
    mean_error: f64,
}

pub(crate) fn write_atomic_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes serializable rows as CSV with a header, atomically.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Table(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Table(e.to_string()))?;
    write_atomic_text(
        path,
        &String::from_utf8(bytes).expect("csv output is utf-8"),
    )
}
