//! Shot reduction from completing noisy element estimates at the rank of
//! the exact target, for several d/r.
//!
//! cargo run --release --example noise_filtering -- [d] [refine_steps]

use rdmc::completion::{synthetic_low_rank, CompletionConfig};
use rdmc::measurement::{synthetic_shot_reduction, CalibrationConfig};

fn main() -> rdmc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(32);
    let refine_steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let eps0 = 0.01;
    let cal = CalibrationConfig {
        refine_steps,
        ..CalibrationConfig::default()
    };

    let mut points = Vec::new();
    println!(
        "{:>5} {:>5} {:>12} {:>12} {:>8}",
        "d/r", "r", "m standard", "m filtered", "1/f_m"
    );
    for ratio in [2, 4, 8, 16] {
        let r = d / ratio;
        let target = synthetic_low_rank(d, r, 7 + ratio as u64);
        let cfg = CompletionConfig {
            r,
            restarts: 2,
            ..CompletionConfig::default()
        };
        let red = synthetic_shot_reduction(&target, r, eps0, &cal, &cfg)?;
        println!(
            "{ratio:>5} {r:>5} {:>12} {:>12} {:>8.3}",
            red.standard.m0, red.completion.m0, red.inverse_f_m
        );
        points.push(((ratio as f64).ln(), red.inverse_f_m.ln()));
    }

    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    println!("log-log slope of 1/f_m against d/r: {:.3}", sxy / sxx);
    Ok(())
}
