use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rdmc::coherence::{rotate_integrals, rotate_one_rdm, rotate_set};
use rdmc::pipeline::{
    gen_toy, noisy_plan, rotation_for, run_noiseless, run_noisy, sampling_curves, select_ranks,
    write_csv, write_sector_tables, RdmBundle, RunConfig, RunReport, MODEL_SCALE,
};
use rdmc::rdm::{spectrum, SpinSector, SystemMeta};
use rdmc::toy::ToyFamily;
use rdmc::Result;

#[derive(Parser)]
#[command(
    name = "rdmc",
    version,
    about = "Low-rank 2-RDM completion, noise filtering and shot planning"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Target relative error
    #[arg(long, global = true, default_value_t = 0.01)]
    eps0: f64,
    /// Share of the error budget given to rank truncation
    #[arg(long, global = true, default_value_t = 0.5)]
    kappa: f64,
    /// Completion rank for every sector, overriding model-based selection
    #[arg(long, global = true)]
    rank: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Switching cost per measured string, in shots
    #[arg(long, global = true, default_value_t = 0.0)]
    switch_cost: f64,
    #[arg(long, global = true, default_value_t = 10)]
    trials: usize,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Hubbard,
    Random,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a toy model/target bundle pair to <out>/model and <out>/target
    Gen {
        #[arg(long, value_enum, default_value = "hubbard")]
        family: Family,
        #[arg(long, default_value_t = 4)]
        sites: usize,
        #[arg(long, default_value_t = 2)]
        n_alpha: usize,
        #[arg(long, default_value_t = 2)]
        n_beta: usize,
        #[arg(long, default_value_t = 1.0)]
        hopping: f64,
        #[arg(long, default_value_t = 4.0)]
        u: f64,
        #[arg(long)]
        periodic: bool,
        /// Interaction scale of the model Hamiltonian
        #[arg(long, default_value_t = MODEL_SCALE)]
        model_scale: f64,
    },
    /// Singular values per sector and their nonzero counts
    Spectrum {
        bundle: PathBuf,
        /// Values at or below this fraction of the largest count as zero
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Minimize coherence and write the rotated bundle and leverage table
    Rotate { bundle: PathBuf },
    /// Sampling-fraction curves on the model, or the shot plan with --noisy
    Plan {
        model: PathBuf,
        #[arg(long)]
        noisy: bool,
    },
    /// Noiseless run: complete the target from model-planned samples
    Complete { model: PathBuf, target: PathBuf },
    /// Noisy run: measure the target with the shot plan and complete
    Measure { model: PathBuf, target: PathBuf },
    /// Print a saved run report and write its tables
    Report { report: PathBuf },
}

fn config(c: &Common) -> RunConfig {
    RunConfig {
        eps0: c.eps0,
        kappa: c.kappa,
        rank: c.rank,
        seed: c.seed,
        n_trials: c.trials,
        switch_cost: c.switch_cost,
        ..RunConfig::default()
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
    std::fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumRow {
    sector: &'static str,
    index: usize,
    singular_value: f64,
}

#[derive(Serialize)]
struct RotationRow {
    row: usize,
    col: usize,
    value: f64,
}

fn summarize(rep: &RunReport) {
    println!("kind: {:?}", rep.kind);
    println!("ranks (aaaa, bbbb, abab): {:?}", rep.ranks);
    for s in &rep.sectors {
        if let Some(f) = s.f_sample {
            println!("{}: d {} r {} f_sample {:.4}", s.sector, s.d, s.r, f);
        }
    }
    for st in &rep.stages {
        match st.e2_error {
            Some(e2) => println!(
                "{:<18} eps {:.3e}  |dE2| {:.3e} Ha",
                st.stage, st.epsilon, e2
            ),
            None => println!("{:<18} eps {:.3e}", st.stage, st.epsilon),
        }
    }
    if let Some(sh) = &rep.shots {
        println!(
            "shots: m {} on {} strings, standard m {} on {} strings, f_m {:.4}{}",
            sh.m,
            sh.n_settings,
            sh.m_standard,
            sh.standard_settings,
            sh.f_m,
            if sh.uses_standard {
                " (standard plan)"
            } else {
                ""
            }
        );
    }
}

fn finish_run(rep: RunReport, out: &Path) -> Result<()> {
    rep.save(out.join("report.json"))?;
    rep.write_tables(out)?;
    summarize(&rep);
    println!("wrote {}", out.join("report.json").display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli.common);
    let out = cli.common.out.as_path();
    match cli.cmd {
        Cmd::Gen {
            family,
            sites,
            n_alpha,
            n_beta,
            hopping,
            u,
            periodic,
            model_scale,
        } => {
            let family = match family {
                Family::Hubbard => ToyFamily::HubbardChain {
                    hopping,
                    u,
                    periodic,
                },
                Family::Random => ToyFamily::RandomTwoBody {
                    seed: cli.common.seed,
                },
            };
            let meta = SystemMeta::new(sites, n_alpha, n_beta)?;
            let (model, target) = gen_toy(family, meta, model_scale).map_err(|e| e.at("gen"))?;
            model.save(out.join("model"))?;
            target.save(out.join("target"))?;
            println!(
                "wrote {} and {}",
                out.join("model").display(),
                out.join("target").display()
            );
        }
        Cmd::Spectrum { bundle, tol } => {
            let b = RdmBundle::load(&bundle).map_err(|e| e.at("load"))?;
            let mut rows = Vec::new();
            for s in SpinSector::ALL {
                let sv = spectrum(b.rdm.sector(s)).singular_values();
                let top = sv.first().cloned().unwrap_or(0.0);
                let nonzero = sv
                    .iter()
                    .filter(|&&v| v > tol * top.max(f64::MIN_POSITIVE))
                    .count();
                println!("{}: d {} nonzero {}", s.label(), sv.len(), nonzero);
                rows.extend(sv.into_iter().enumerate().map(|(index, singular_value)| {
                    SpectrumRow {
                        sector: s.label(),
                        index,
                        singular_value,
                    }
                }));
            }
            write_csv(&out.join("spectrum.csv"), &rows)?;
        }
        Cmd::Rotate { bundle } => {
            let b = RdmBundle::load(&bundle).map_err(|e| e.at("load"))?;
            let ranks = select_ranks(&b.rdm, &cfg).map_err(|e| e.at("rank selection"))?;
            let (basis, sectors) =
                rotation_for(&b.rdm, ranks, &cfg).map_err(|e| e.at("coherence"))?;
            for s in &sectors {
                if let (Some(before), Some(after)) = (s.mu_before, s.mu_after) {
                    println!("{}: r {} mu {:.4} -> {:.4}", s.sector, s.r, before, after);
                }
            }
            let c = basis.matrix();
            let rows: Vec<RotationRow> = (0..c.nrows())
                .flat_map(|row| {
                    (0..c.ncols()).map(move |col| RotationRow {
                        row,
                        col,
                        value: c[(row, col)],
                    })
                })
                .collect();
            write_csv(&out.join("rotation.csv"), &rows)?;
            let mut rotated = b.clone();
            rotated.rdm = rotate_set(&b.rdm, &basis)?;
            rotated.one_rdm = b.one_rdm.as_ref().map(|d| rotate_one_rdm(d, &basis));
            rotated.integrals = b
                .integrals
                .as_ref()
                .map(|i| rotate_integrals(i, &basis))
                .transpose()?;
            rotated.basis_label = format!("{} rotated", b.basis_label);
            rotated.save(out.join("rotated"))?;
            write_sector_tables(&sectors, out)?;
        }
        Cmd::Plan { model, noisy } => {
            let b = RdmBundle::load(&model).map_err(|e| e.at("load"))?;
            if noisy {
                let (cal, plan) = noisy_plan(&b, &cfg)?;
                write_csv(&out.join("plan.csv"), &plan.curves)?;
                write_json(&out.join("plan.json"), &(&cal, &plan))?;
                println!(
                    "standard m {}; plan m {} at quartet fraction {:.2}{}",
                    cal.m0,
                    plan.m,
                    plan.f_sample,
                    if plan.uses_standard {
                        " (standard plan)"
                    } else {
                        ""
                    }
                );
            } else {
                let sectors = sampling_curves(&b.rdm, &cfg)?;
                for s in &sectors {
                    if s.r == 0 {
                        continue;
                    }
                    let f = s.f_sample.map_or("none".to_string(), |f| format!("{f:.4}"));
                    println!(
                        "{}: d {} r {} info bound {:.4} f_sample {}",
                        s.sector,
                        s.d,
                        s.r,
                        s.info_bound.unwrap_or(f64::NAN),
                        f
                    );
                }
                write_sector_tables(&sectors, out)?;
            }
        }
        Cmd::Complete { model, target } => {
            let m = RdmBundle::load(&model).map_err(|e| e.at("load model"))?;
            let t = RdmBundle::load(&target).map_err(|e| e.at("load target"))?;
            finish_run(run_noiseless(&m, &t, &cfg)?, out)?;
        }
        Cmd::Measure { model, target } => {
            let m = RdmBundle::load(&model).map_err(|e| e.at("load model"))?;
            let t = RdmBundle::load(&target).map_err(|e| e.at("load target"))?;
            finish_run(run_noisy(&m, &t, &cfg)?, out)?;
        }
        Cmd::Report { report } => {
            let rep = RunReport::load(&report).map_err(|e| e.at("load report"))?;
            summarize(&rep);
            for name in rep.write_tables(out)? {
                println!("wrote {}", out.join(name).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
