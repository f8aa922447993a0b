//! Applies the post-processing steps one at a time to a completed target and
//! prints the error, trace and energy after each.
//!
//! cargo run --release --example postprocess

use rdmc::completion::{info_bound, n_for_fraction, sample_uniform, CompletionConfig, SampleSet};
use rdmc::measurement::{complete_measured, MeasuredRdm};
use rdmc::pipeline::{gen_toy, MODEL_SCALE};
use rdmc::postprocess::{postprocess, Mode, PostprocessConfig, PostprocessInput};
use rdmc::rdm::{rel_error_set, select_rank, two_body_energy, SpinRDMSet, SpinSector, SystemMeta};
use rdmc::toy::ToyFamily;

fn main() -> rdmc::Result<()> {
    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u: 1.0,
        periodic: false,
    };
    let meta = SystemMeta::new(4, 2, 2)?;
    let (model, target) = gen_toy(family, meta, MODEL_SCALE)?;
    let ints = target
        .integrals
        .clone()
        .expect("toy bundles carry integrals");

    // one uniform sampling per sector at 1.2x the information bound, shared
    // by target and model
    let mut ranks = [0; 3];
    let mut samples: Vec<SampleSet> = Vec::new();
    for s in SpinSector::ALL {
        let r = select_rank(model.rdm.sector(s), 0.01, 0.5)?;
        let d = s.dim(meta.n);
        ranks[s as usize] = r;
        let f = (1.2 * info_bound(r, d)).min(1.0);
        samples.push(sample_uniform(d, n_for_fraction(d, f), 3)?.with_sector(s));
    }
    let samples: [SampleSet; 3] = samples.try_into().expect("three sectors");
    let observe = |p: &SpinRDMSet| MeasuredRdm {
        values: p.clone(),
        samples: samples.clone(),
        quartets: Vec::new(),
        n_settings: 0,
        shots: None,
    };
    let cfg = CompletionConfig::default();
    let (completed, _) = complete_measured(&observe(&target.rdm), ranks, &cfg)?;
    let (completed_model, _) = complete_measured(&observe(&model.rdm), ranks, &cfg)?;

    let input = PostprocessInput {
        completed: &completed,
        observed: Some(&target.rdm),
        samples: &samples,
        ranks,
        model: Some((&model.rdm, &completed_model)),
    };
    let out = postprocess(input, &PostprocessConfig::full(Mode::Noiseless))?;
    let e2 = two_body_energy(&target.rdm, &ints)?;
    let report = |label: &str, p: &SpinRDMSet| -> rdmc::Result<()> {
        let traces: Vec<String> = p
            .sectors()
            .iter()
            .map(|s| format!("{:.4}", s.trace()))
            .collect();
        println!(
            "{label:<18} error {:.3e} traces [{}] |dE2| {:.3e} Ha",
            rel_error_set(p, &target.rdm)?,
            traces.join(" "),
            (two_body_energy(p, &ints)? - e2).abs()
        );
        Ok(())
    };
    report("completed", &completed)?;
    for (step, p) in &out.stages {
        report(&format!("{step:?}"), p)?;
    }
    println!(
        "smallest eigenvalues (not projected): {:?}",
        out.min_eigenvalues
    );
    Ok(())
}
