//! Generates a Hubbard model/target pair, writes both as bundles and reads
//! them back.
//!
//! cargo run --release --example toy_bundle -- [out_dir]

use rdmc::pipeline::{gen_toy, RdmBundle, MODEL_SCALE};
use rdmc::rdm::{energy, rel_error_set, SpinSector, SystemMeta};
use rdmc::toy::ToyFamily;

fn main() -> rdmc::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "toy_bundles".into());
    let family = ToyFamily::HubbardChain {
        hopping: 1.0,
        u: 4.0,
        periodic: false,
    };
    let meta = SystemMeta::new(4, 2, 2)?;
    let (model, target) = gen_toy(family, meta, MODEL_SCALE)?;

    for (name, b) in [("model", &model), ("target", &target)] {
        let dir = std::path::Path::new(&out).join(name);
        b.save(&dir)?;
        let back = RdmBundle::load(&dir)?;
        assert_eq!(back.digest()?, b.digest()?);
        let e = energy(
            &back.rdm,
            back.integrals
                .as_ref()
                .expect("toy bundles carry integrals"),
        )?;
        println!(
            "{name}: {} E {:.8} E2 {:.8} digest {}",
            dir.display(),
            e.total,
            e.two_body,
            &b.digest()?[..16]
        );
        for s in SpinSector::ALL {
            let p = back.rdm.sector(s);
            println!("  {}: d {:>2} trace {:.6}", s.label(), p.dim(), p.trace());
        }
    }
    println!(
        "model vs target relative difference {:.4}",
        rel_error_set(&model.rdm, &target.rdm)?
    );
    Ok(())
}
