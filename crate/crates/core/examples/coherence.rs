//! Minimizes the coherence of the leading eigenvectors of a correlated
//! 2-RDM over orbital rotations and compares row leverage before and after.
//!
//! cargo run --release --example coherence

use rdmc::coherence::{coherence, minimize_coherence, rotate_rdm, CoherenceConfig, SectorBasis};
use rdmc::rdm::{select_rank, spectrum, SpinSector, SystemMeta};
use rdmc::toy::{exact_rdms, ground_state, ToyFamily, ToyHamiltonian};

fn main() -> rdmc::Result<()> {
    let meta = SystemMeta::new(5, 2, 2)?;
    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u: 2.0,
        periodic: false,
    };
    let (_, psi) = ground_state(&ToyHamiltonian::new(family, meta)?)?;
    let (_, p) = exact_rdms(&psi, meta)?;

    let mut bases = Vec::new();
    for s in SpinSector::ALL {
        let r = select_rank(p.sector(s), 0.01, 0.5)?;
        bases.push(SectorBasis::new(s, &spectrum(p.sector(s)).truncate(r)));
    }
    let res = minimize_coherence(&bases, meta.n, &CoherenceConfig::default())?;
    println!("candidates (provenance, mean mu):");
    for (prov, mu) in &res.candidates {
        println!("  {prov:?} {mu:.4}");
    }

    for (k, b) in bases.iter().enumerate() {
        let rotated = rotate_rdm(p.sector(b.sector), &res.basis)?;
        let r = b.u.ncols();
        let after = coherence(&spectrum(&rotated).truncate(r));
        let before = coherence(&spectrum(p.sector(b.sector)).truncate(r));
        let top = |lev: &[f64]| {
            let mut v = lev.to_vec();
            v.sort_by(|a, b| b.total_cmp(a));
            v.truncate(4);
            v.iter()
                .map(|x| format!("{x:.2}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!(
            "{}: r {r} mu {:.4} -> {:.4}, d/r {:.1}; largest leverage [{}] -> [{}]",
            b.sector.label(),
            res.mu_before[k],
            res.mu_after[k],
            before.d as f64 / r as f64,
            top(&before.per_row_leverage),
            top(&after.per_row_leverage)
        );
    }
    Ok(())
}
