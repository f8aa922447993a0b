use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::fock;
use crate::error::{Error, Result};
use crate::rdm::{IntegralSet, SystemMeta, Tensor4};

/// Largest Fock space the dense solver accepts, in spin orbitals.
pub const MAX_SPIN_ORBITALS: usize = 12;

/// Model Hamiltonians available at desk scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ToyFamily {
    /// Open (or periodic) Hubbard chain with nearest-neighbour hopping
    /// `-hopping` and on-site repulsion `u`.
    HubbardChain {
        hopping: f64,
        u: f64,
        #[serde(default)]
        periodic: bool,
    },
    /// Random symmetric one-body term plus a positive semidefinite
    /// two-body term `(ij|kl) = sum_s L[s,ij] L[s,kl]`.
    RandomTwoBody { seed: u64 },
}

/// A toy Hamiltonian in a fixed `(N_alpha, N_beta)` sector.
#[derive(Debug, Clone)]
pub struct ToyHamiltonian {
    pub meta: SystemMeta,
    pub ints: IntegralSet,
    pub family: ToyFamily,
}

impl ToyHamiltonian {
    pub fn new(family: ToyFamily, meta: SystemMeta) -> Result<Self> {
        let ints = match &family {
            ToyFamily::HubbardChain {
                hopping,
                u,
                periodic,
            } => hubbard_integrals(meta.n, *hopping, *u, *periodic),
            ToyFamily::RandomTwoBody { seed } => random_integrals(meta.n, *seed),
        };
        Ok(Self { meta, ints, family })
    }

    /// Replaces the integrals, keeping family bookkeeping.
    pub fn with_integrals(&self, ints: IntegralSet) -> Result<Self> {
        if ints.n() != self.meta.n {
            return Err(Error::DimensionMismatch {
                expected: self.meta.n,
                got: ints.n(),
            });
        }
        Ok(Self {
            meta: self.meta,
            ints,
            family: self.family.clone(),
        })
    }

    /// Dense matrix in the particle-number sector together with its basis.
    pub fn sector_matrix(&self) -> Result<(Vec<u64>, DMatrix<f64>)> {
        let n = self.meta.n;
        if 2 * n > MAX_SPIN_ORBITALS {
            return Err(Error::TooLarge(2 * n));
        }
        let basis = fock::sector_basis(n, self.meta.n_alpha, self.meta.n_beta);
        let index: HashMap<u64, usize> = basis.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let dim = basis.len();
        let mut h = DMatrix::zeros(dim, dim);
        let ints = &self.ints;
        for (col, &x) in basis.iter().enumerate() {
            h[(col, col)] += ints.e_core;
            for spin in 0..2 {
                let off = spin * n;
                for p in 0..n {
                    for q in 0..n {
                        let t = ints.h1[(p, q)];
                        if t == 0.0 {
                            continue;
                        }
                        if let Some((y, s)) = fock::one_body(x, p + off, q + off) {
                            h[(index[&y], col)] += t * s;
                        }
                    }
                }
            }
            for s1 in 0..2 {
                for s2 in 0..2 {
                    let (o1, o2) = (s1 * n, s2 * n);
                    for p in 0..n {
                        for q in 0..n {
                            for r in 0..n {
                                for s in 0..n {
                                    let v = ints.eri.get(p, q, r, s);
                                    if v == 0.0 {
                                        continue;
                                    }
                                    // 1/2 (pq|rs) a†_p a†_r a_s a_q
                                    if let Some((y, sign)) =
                                        fock::two_body(x, p + o1, r + o2, s + o2, q + o1)
                                    {
                                        h[(index[&y], col)] += 0.5 * v * sign;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok((basis, h))
    }
}

fn hubbard_integrals(n: usize, hopping: f64, u: f64, periodic: bool) -> IntegralSet {
    let mut h1 = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        h1[(i, i + 1)] = -hopping;
        h1[(i + 1, i)] = -hopping;
    }
    if periodic && n > 2 {
        h1[(0, n - 1)] = -hopping;
        h1[(n - 1, 0)] = -hopping;
    }
    let mut eri = Tensor4::zeros(n);
    for i in 0..n {
        eri.set(i, i, i, i, u);
    }
    IntegralSet::new(h1, eri, 0.0).expect("hubbard integrals are symmetric")
}

/// Random integrals with chemists' 8-fold symmetry. The two-body part is
/// positive semidefinite as a matrix over orbital pairs.
pub fn random_integrals(n: usize, seed: u64) -> IntegralSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h1 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = rng.sample::<f64, _>(StandardNormal) * 0.5;
            h1[(i, j)] = v;
            h1[(j, i)] = v;
        }
        h1[(i, i)] -= 1.0 + i as f64 * 0.3;
    }
    let nvec = n + 2;
    let mut vecs = Vec::with_capacity(nvec);
    for _ in 0..nvec {
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-0.4..0.4);
                l[(i, j)] = v;
                l[(j, i)] = v;
            }
        }
        vecs.push(l);
    }
    let mut eri = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v: f64 = vecs.iter().map(|m| m[(i, j)] * m[(k, l)]).sum();
                    eri.set(i, j, k, l, v);
                }
            }
        }
    }
    IntegralSet::new(h1, eri, 0.0).expect("random integrals are symmetric by construction")
}
