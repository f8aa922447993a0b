//! Error of rank-r completion against the sampled fraction of unique
//! elements, on one sector of a correlated Hubbard ground state.
//!
//! cargo run --release --example fsample_curve -- [sites] [u] [sector] [grid]

use rdmc::completion::{default_grid, find_fsample_matrix, info_bound, CompletionConfig};
use rdmc::rdm::{select_rank, spectrum, SpinSector, SystemMeta};
use rdmc::toy::{exact_rdms, ground_state, ToyFamily, ToyHamiltonian};

fn main() -> rdmc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sites: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(6);
    let u: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let sector = args
        .get(2)
        .and_then(|s| SpinSector::from_label(s))
        .unwrap_or(SpinSector::AlphaBeta);

    let meta = SystemMeta::new(sites, 2, 2)?;
    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u,
        periodic: false,
    };
    let (_, psi) = ground_state(&ToyHamiltonian::new(family, meta)?)?;
    let (_, p) = exact_rdms(&psi, meta)?;
    let block = p.sector(sector);

    let r = select_rank(block, 0.01, 0.5)?;
    let d = block.dim();
    let dec = spectrum(block);
    let tail = dec.tail_norm(r) / dec.frobenius();
    println!(
        "{} d {d} r {r} info bound {:.4} rank-r tail {tail:.3e}",
        sector.label(),
        info_bound(r, d)
    );

    let cfg = CompletionConfig {
        r,
        ..CompletionConfig::default()
    };
    // optional comma-separated grid, ascending within (0, 1]
    let grid: Vec<f64> = match args.get(3) {
        Some(g) => g.split(',').filter_map(|x| x.parse().ok()).collect(),
        None => default_grid(r, d),
    };
    let hint = meta.trace_target(sector);
    let search = find_fsample_matrix(block.matrix(), Some(hint), &cfg, &grid, true)?;
    println!(
        "{:>8} {:>12} {:>12} {:>8}",
        "f", "mean error", "std", "success"
    );
    for g in &search.curve {
        println!(
            "{:>8.4} {:>12.4e} {:>12.4e} {:>8.2}",
            g.f_sample, g.mean_error, g.std_error, g.success_fraction
        );
    }
    match search.f_star {
        Some(f) => println!("smallest fraction meeting 1% in 9/10 trials: {f:.4}"),
        None => println!("no grid fraction meets 1% in 9/10 trials"),
    }
    Ok(())
}
