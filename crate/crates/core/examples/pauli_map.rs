//! Jordan-Wigner Pauli strings of the quartets of a small system, checked
//! against statevector expectation values.
//!
//! cargo run --release --example pauli_map

use rdmc::measurement::{
    build_map, enumerate_quartets, exact_pauli_expectations, MeasurementScheme,
};
use rdmc::rdm::SystemMeta;
use rdmc::toy::{exact_rdms, pauli_expectation, random_sector_state};

fn main() -> rdmc::Result<()> {
    let meta = SystemMeta::new(3, 2, 1)?;
    let psi = random_sector_state(meta, 4)?;
    let (d, p) = exact_rdms(&psi, meta)?;

    let quartets = enumerate_quartets(meta);
    let mut worst = 0.0_f64;
    for (k, q) in quartets.iter().enumerate() {
        let map = build_map(q, meta.n)?;
        let v = exact_pauli_expectations(&p, &d, &map)?;
        for (s, string) in map.strings.iter().enumerate() {
            worst = worst.max((v[s] - pauli_expectation(&psi, string)).abs());
        }
        if k < 3 || q.all_distinct() && k % 10 == 0 {
            let strings: Vec<String> = map.strings.iter().map(|s| s.to_string()).collect();
            println!(
                "support {:?}: {} elements, {} unknowns, strings [{}]",
                q.support,
                q.elements.len(),
                map.unknowns.len(),
                strings.join(", ")
            );
        }
    }
    let scheme = MeasurementScheme::new(meta)?;
    println!(
        "{} quartets, {} distinct strings, largest deviation from the statevector {worst:.1e}",
        quartets.len(),
        scheme.strings().len()
    );
    Ok(())
}
