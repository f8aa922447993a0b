//! Singular values of Hartree-Fock and correlated 2-RDMs, and the completion
//! rank chosen from the truncation error.
//!
//! cargo run --release --example spectrum -- [u]

use rdmc::rdm::{hf_2rdm, select_rank, spectrum, SpinRDMSet, SpinSector, SystemMeta};
use rdmc::toy::{exact_rdms, ground_state, ToyFamily, ToyHamiltonian};

fn show(label: &str, p: &SpinRDMSet) -> rdmc::Result<()> {
    println!("{label}");
    for s in SpinSector::ALL {
        let block = p.sector(s);
        let sv = spectrum(block).singular_values();
        let nonzero = sv.iter().filter(|&&v| v > 1e-10).count();
        let head: Vec<String> = sv.iter().take(6).map(|v| format!("{v:.2e}")).collect();
        let rank = if block.frobenius() > 0.0 {
            select_rank(block, 0.01, 0.5)?.to_string()
        } else {
            "-".into()
        };
        println!(
            "  {}: nonzero {nonzero:>2} rank(1%) {rank:>2} leading [{}]",
            s.label(),
            head.join(" ")
        );
    }
    Ok(())
}

fn main() -> rdmc::Result<()> {
    let u: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4.0);
    let meta = SystemMeta::new(5, 3, 2)?;

    // sites 0..N occupied in the site basis
    let occ =
        |k: usize| nalgebra::DMatrix::from_fn(5, 5, |i, j| if i == j && i < k { 1.0 } else { 0.0 });
    show(
        "Hartree-Fock determinant (3 alpha, 2 beta)",
        &hf_2rdm(&occ(3), &occ(2))?,
    )?;

    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u,
        periodic: false,
    };
    let (_, psi) = ground_state(&ToyHamiltonian::new(family, meta)?)?;
    let (_, p) = exact_rdms(&psi, meta)?;
    show(&format!("Hubbard ground state, U = {u}"), &p)?;
    Ok(())
}
