//! Shots per string needed by the standard scheme (every quartet measured)
//! to reach a target relative error, with the doubling/bisection trace.
//!
//! cargo run --release --example shot_calibration -- [eps0]

use rdmc::measurement::{calibrate_standard, CalibrationConfig, MeasurementScheme};
use rdmc::rdm::SystemMeta;
use rdmc::toy::{exact_rdms, ground_state, ToyFamily, ToyHamiltonian};

fn main() -> rdmc::Result<()> {
    let eps0: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.01);
    let meta = SystemMeta::new(4, 2, 2)?;
    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u: 4.0,
        periodic: false,
    };
    let (_, psi) = ground_state(&ToyHamiltonian::new(family, meta)?)?;
    let (d, p) = exact_rdms(&psi, meta)?;
    let scheme = MeasurementScheme::new(meta)?;
    let cfg = CalibrationConfig {
        refine_steps: 4,
        ..CalibrationConfig::default()
    };
    let cal = calibrate_standard(&scheme, &p, &d, eps0, &cfg)?;
    for (m, e) in &cal.curve {
        println!("m {m:>9} mean error {e:.4e}");
    }
    println!(
        "standard scheme: m {} on {} strings, {} shots in total",
        cal.m0,
        scheme.strings().len(),
        cal.m0 * scheme.strings().len() as u64
    );
    Ok(())
}
