//! Shot plan for the completion scheme on a model 2-RDM, with and without a
//! cost for switching between measurement settings.
//!
//! cargo run --release --example shot_plan -- [switch_cost]

use rdmc::pipeline::{gen_toy, noisy_plan, RunConfig, MODEL_SCALE};
use rdmc::rdm::SystemMeta;
use rdmc::toy::ToyFamily;

fn main() -> rdmc::Result<()> {
    let c: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1e8);
    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u: 0.5,
        periodic: false,
    };
    let (model, _) = gen_toy(family, SystemMeta::new(6, 2, 2)?, MODEL_SCALE)?;
    for switch_cost in [0.0, c] {
        let cfg = RunConfig {
            switch_cost,
            ..RunConfig::default()
        };
        let (cal, plan) = noisy_plan(&model, &cfg)?;
        println!("switching cost {switch_cost:.1e}: standard m {}", cal.m0);
        for pt in plan.curves.iter().filter(|pt| pt.feasible) {
            println!(
                "  feasible: m {:>7} f {:.2} error {:.4e} settings {:>6.1} cost {:.3e}",
                pt.m, pt.f_sample, pt.mean_error, pt.mean_settings, pt.cost
            );
        }
        println!(
            "  chosen: m {} at quartet fraction {:.2}, cost {:.3e}{}",
            plan.m,
            plan.f_sample,
            plan.cost,
            if plan.uses_standard {
                " (standard plan)"
            } else {
                ""
            }
        );
    }
    Ok(())
}
