//! Completes a synthetic exact-rank PSD matrix from a uniform sample of its
//! unique elements at several multiples of the information bound.
//!
//! cargo run --release --example completion -- [d] [r]

use rdmc::completion::{
    complete_matrix, info_bound, n_for_fraction, sample_uniform, synthetic_low_rank,
    CompletionConfig,
};

fn main() -> rdmc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(50);
    let r: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let m = synthetic_low_rank(d, r, 1);
    let ib = info_bound(r, d);
    let cfg = CompletionConfig {
        r,
        ..CompletionConfig::default()
    };
    println!("d {d} r {r} info bound {ib:.4}");
    for mult in [0.8, 1.0, 1.2, 1.5, 2.0] {
        let f = (mult * ib).min(1.0);
        let s = sample_uniform(d, n_for_fraction(d, f), 2)?;
        let out = complete_matrix(&m, &s, r, None, &cfg)?;
        let err = (&out.completed - &m).norm() / m.norm();
        println!(
            "{mult:>4.1} x bound: f {f:.4} n {:>5} error {err:.2e} iterations {:>5} converged {}",
            s.n_sample(),
            out.iterations,
            out.converged
        );
    }
    Ok(())
}
