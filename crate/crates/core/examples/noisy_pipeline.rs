//! End-to-end noisy run: standard-scheme calibration, shot plan on the
//! model, simulated measurement of the target, completion and trace
//! normalization.
//!
//! cargo run --release --example noisy_pipeline -- [eps0]

use rdmc::pipeline::{gen_toy, run_noisy, RunConfig, MODEL_SCALE};
use rdmc::rdm::SystemMeta;
use rdmc::toy::ToyFamily;

fn main() -> rdmc::Result<()> {
    let eps0: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.01);
    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u: 4.0,
        periodic: false,
    };
    let (model, target) = gen_toy(family, SystemMeta::new(4, 2, 2)?, MODEL_SCALE)?;
    let cfg = RunConfig {
        eps0,
        ..RunConfig::default()
    };
    let rep = run_noisy(&model, &target, &cfg)?;
    let shots = rep.shots.as_ref().expect("noisy runs report shots");
    println!(
        "standard: m {} on {} strings; plan: m {} on {} strings at quartet fraction {:.2}; f_m {:.3}{}",
        shots.m_standard,
        shots.standard_settings,
        shots.m,
        shots.n_settings,
        shots.quartet_fraction,
        shots.f_m,
        if shots.uses_standard { " (standard plan)" } else { "" }
    );
    for st in &rep.stages {
        let per: Vec<String> = st
            .e2_error_per_trial
            .iter()
            .flatten()
            .map(|e| format!("{:.2}", 1e3 * e))
            .collect();
        println!(
            "{:<16} error {:.3e}  |dE2| mHa [{}]",
            st.stage,
            st.epsilon,
            per.join(" ")
        );
    }
    Ok(())
}
