use nalgebra::DMatrix;

use super::{pack_sector, unpack_sector, OneRDM, SpinRDMSet, SpinSector, SystemMeta, Tensor4};
use crate::error::{Error, Result};

/// One- and two-electron integrals over spatial orbitals.
///
/// `eri` holds chemists' notation `(ij|kl)` as a row-major `n^4` array, so
/// the Hamiltonian reads
/// `H = sum h[i,j] a†_i a_j + 1/2 sum (ij|kl) a†_i a†_k a_l a_j + e_core`
/// with spin summed over.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub h1: DMatrix<f64>,
    pub eri: Tensor4,
    pub e_core: f64,
}

impl IntegralSet {
    pub fn new(h1: DMatrix<f64>, eri: Tensor4, e_core: f64) -> Result<Self> {
        let n = h1.nrows();
        if h1.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: h1.ncols(),
            });
        }
        if eri.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: eri.n,
            });
        }
        let scale = h1.amax().max(1.0);
        if (&h1 - h1.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidSystem(
                "one-electron integrals not symmetric".into(),
            ));
        }
        let scale = eri.data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mut residual = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = eri.get(i, j, k, l);
                        for w in [
                            eri.get(j, i, k, l),
                            eri.get(i, j, l, k),
                            eri.get(k, l, i, j),
                        ] {
                            residual = residual.max((v - w).abs());
                        }
                    }
                }
            }
        }
        if residual > 1e-12 * scale {
            return Err(Error::InvalidSystem(format!(
                "two-electron integrals break 8-fold symmetry (residual {residual:.3e})"
            )));
        }
        Ok(Self { h1, eri, e_core })
    }

    pub fn n(&self) -> usize {
        self.h1.nrows()
    }

    /// Same Hamiltonian with the two-electron part scaled by `factor`.
    pub fn with_interaction_scaled(&self, factor: f64) -> Self {
        let mut eri = self.eri.clone();
        eri.data.iter_mut().for_each(|v| *v *= factor);
        Self {
            h1: self.h1.clone(),
            eri,
            e_core: self.e_core,
        }
    }
}

/// Total energy and its two-electron part, in Hartree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub total: f64,
    pub two_body: f64,
}

/// Contracts the 2-RDM to the 1-RDM, normalized by `N_el - 1`.
pub fn contract_to_1rdm(p: &SpinRDMSet) -> Result<OneRDM> {
    let meta = p.meta();
    let ne = meta.n_electrons();
    if ne < 2 {
        return Err(Error::DegenerateSystem(ne));
    }
    let n = meta.n;
    let aa = unpack_sector(&p.aaaa);
    let bb = unpack_sector(&p.bbbb);
    let ab = unpack_sector(&p.abab);
    let norm = 1.0 / (ne as f64 - 1.0);
    let mut out = OneRDM::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut a = 0.0;
            let mut b = 0.0;
            for k in 0..n {
                a += aa.get(i, k, j, k) + ab.get(i, k, j, k);
                // beta-alpha block is the mixed sector with pairs swapped
                b += bb.get(i, k, j, k) + ab.get(k, i, k, j);
            }
            out.alpha[(i, j)] = a * norm;
            out.beta[(i, j)] = b * norm;
        }
    }
    Ok(out)
}

/// Two-electron energy `1/2 sum (ij|kl) P[ik,jl]` summed over spin.
pub fn two_body_energy(p: &SpinRDMSet, ints: &IntegralSet) -> Result<f64> {
    let n = p.meta().n;
    if ints.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ints.n(),
        });
    }
    let aa = unpack_sector(&p.aaaa);
    let bb = unpack_sector(&p.bbbb);
    let ab = unpack_sector(&p.abab);
    let mut same = 0.0;
    let mut mixed = 0.0;
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let v = ints.eri.get(i, j, k, l);
                    if v == 0.0 {
                        continue;
                    }
                    let x = aa.idx(i, k, j, l);
                    same += v * (aa.data[x] + bb.data[x]);
                    mixed += v * ab.data[x];
                }
            }
        }
    }
    // alpha-beta and beta-alpha blocks contribute equally
    Ok(0.5 * same + mixed)
}

/// Energy functional of a 2-RDM. The one-body part uses the contracted 1-RDM.
pub fn energy(p: &SpinRDMSet, ints: &IntegralSet) -> Result<Energy> {
    let two_body = two_body_energy(p, ints)?;
    let d = contract_to_1rdm(p)?;
    let one_body = ints.h1.dot(&d.total());
    Ok(Energy {
        total: one_body + two_body + ints.e_core,
        two_body,
    })
}

fn check_idempotent(d: &DMatrix<f64>) -> Result<usize> {
    let residual = (d * d - d).amax();
    if residual > 1e-8 {
        return Err(Error::NotIdempotent(residual));
    }
    let tr = d.trace();
    if (tr - tr.round()).abs() > 1e-8 || tr < -1e-8 {
        return Err(Error::NotIdempotent((tr - tr.round()).abs()));
    }
    Ok(tr.round() as usize)
}

/// Hartree-Fock 2-RDM built from idempotent spin 1-RDMs:
/// `P[ik,jl] = D[i,j] D[k,l] - D[i,l] D[k,j]` within a spin, and
/// `Da[i,j] Db[k,l]` across spins.
pub fn hf_2rdm(d_alpha: &DMatrix<f64>, d_beta: &DMatrix<f64>) -> Result<SpinRDMSet> {
    let n = d_alpha.nrows();
    if d_beta.nrows() != n || d_alpha.ncols() != n || d_beta.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: d_beta.nrows(),
        });
    }
    let na = check_idempotent(d_alpha)?;
    let nb = check_idempotent(d_beta)?;
    let meta = SystemMeta::new(n, na, nb)?;
    let same = |d: &DMatrix<f64>| {
        let mut t = Tensor4::zeros(n);
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        t.set(i, k, j, l, d[(i, j)] * d[(k, l)] - d[(i, l)] * d[(k, j)]);
                    }
                }
            }
        }
        t
    };
    let mut ab = Tensor4::zeros(n);
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                for l in 0..n {
                    ab.set(i, k, j, l, d_alpha[(i, j)] * d_beta[(k, l)]);
                }
            }
        }
    }
    SpinRDMSet::new(
        pack_sector(&same(d_alpha), SpinSector::AlphaAlpha, meta)?,
        pack_sector(&same(d_beta), SpinSector::BetaBeta, meta)?,
        pack_sector(&ab, SpinSector::AlphaBeta, meta)?,
    )
}
