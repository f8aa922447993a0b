//! End-to-end noiseless run: rank selection and sampling planned on the
//! model, completion of the target, post-processing.
//!
//! cargo run --release --example noiseless_pipeline -- [sites] [u]

use rdmc::pipeline::{gen_toy, run_noiseless, RunConfig, MODEL_SCALE};
use rdmc::rdm::SystemMeta;
use rdmc::toy::ToyFamily;

fn main() -> rdmc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sites: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(4);
    let u: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4.0);
    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u,
        periodic: false,
    };
    let (model, target) = gen_toy(family, SystemMeta::new(sites, 2, 2)?, MODEL_SCALE)?;
    let rep = run_noiseless(&model, &target, &RunConfig::default())?;

    println!("ranks (aaaa, bbbb, abab) {:?}", rep.ranks);
    for s in &rep.sectors {
        if let (Some(f), Some(ib)) = (s.f_sample, s.info_bound) {
            println!(
                "{}: d {} r {} f_sample {f:.3} (bound {ib:.3})",
                s.sector, s.d, s.r
            );
        }
    }
    for st in &rep.stages {
        println!(
            "{:<18} error {:.3e} +- {:.1e}  |dE2| {:.3e} Ha",
            st.stage,
            st.epsilon,
            st.epsilon_std,
            st.e2_error.unwrap_or(f64::NAN)
        );
    }
    println!("{:.1} s", rep.wall_time_s);
    Ok(())
}
