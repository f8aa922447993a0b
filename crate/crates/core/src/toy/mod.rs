//! Exact diagonalization on small Fock spaces.
//!
//! Provides ground states, exact 1- and 2-RDMs and Pauli-string
//! expectations for systems of up to 12 spin orbitals. Every other module is
//! checked against these.

pub mod fock;
mod hamiltonian;

pub use hamiltonian::{random_integrals, ToyFamily, ToyHamiltonian, MAX_SPIN_ORBITALS};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::rdm::{OneRDM, PackedRDM, SpinRDMSet, SpinSector, SystemMeta};

/// Real amplitudes over the full `2^(2n)` occupation basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<f64>,
}

impl Statevector {
    pub fn new(n_qubits: usize, amps: Vec<f64>) -> Result<Self> {
        if n_qubits > MAX_SPIN_ORBITALS {
            return Err(Error::TooLarge(n_qubits));
        }
        if amps.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                got: amps.len(),
            });
        }
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSystem(format!("state norm {norm} is not 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes sparse amplitudes given on basis labels.
    pub fn from_sparse(n_qubits: usize, entries: &[(u64, f64)]) -> Result<Self> {
        if n_qubits > MAX_SPIN_ORBITALS {
            return Err(Error::TooLarge(n_qubits));
        }
        let mut amps = vec![0.0; 1 << n_qubits];
        for &(x, a) in entries {
            amps[x as usize] += a;
        }
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidSystem("zero state".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    fn nonzero(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(x, &a)| (x as u64, a))
    }
}

/// Lowest eigenpair of the Hamiltonian in its particle-number sector. The
/// eigenvector's largest-magnitude amplitude is made positive.
pub fn ground_state(h: &ToyHamiltonian) -> Result<(f64, Statevector)> {
    let (basis, mat) = h.sector_matrix()?;
    let eig = mat.symmetric_eigen();
    let (imin, e0) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &e)| (i, e))
        .ok_or_else(|| Error::InvalidSystem("empty sector".into()))?;
    let mut v: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
    gauge_fix(&mut v);
    let nq = h.meta.n_spin_orbitals();
    let mut amps = vec![0.0; 1 << nq];
    for (&x, a) in basis.iter().zip(v) {
        amps[x as usize] = a;
    }
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok((e0, Statevector::new(nq, amps)?))
}

fn gauge_fix(v: &mut [f64]) {
    let mut best = 0;
    for (i, a) in v.iter().enumerate() {
        if a.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

/// Slater determinant occupying the listed alpha and beta orbitals.
pub fn determinant(
    meta: SystemMeta,
    occ_alpha: &[usize],
    occ_beta: &[usize],
) -> Result<Statevector> {
    let n = meta.n;
    if occ_alpha.len() != meta.n_alpha || occ_beta.len() != meta.n_beta {
        return Err(Error::InvalidSystem(
            "occupation does not match electron count".into(),
        ));
    }
    let mut x = 0u64;
    for &p in occ_alpha {
        x |= 1 << p;
    }
    for &p in occ_beta {
        x |= 1 << (p + n);
    }
    if x.count_ones() as usize != meta.n_electrons()
        || occ_alpha.iter().chain(occ_beta).any(|&p| p >= n)
    {
        return Err(Error::InvalidSystem("bad occupation list".into()));
    }
    Statevector::from_sparse(meta.n_spin_orbitals(), &[(x, 1.0)])
}

/// Random real state with Gaussian amplitudes inside the `(N_alpha, N_beta)`
/// sector.
pub fn random_sector_state(meta: SystemMeta, seed: u64) -> Result<Statevector> {
    let nq = meta.n_spin_orbitals();
    if nq > MAX_SPIN_ORBITALS {
        return Err(Error::TooLarge(nq));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<(u64, f64)> = fock::sector_basis(meta.n, meta.n_alpha, meta.n_beta)
        .into_iter()
        .map(|x| (x, StandardNormal.sample(&mut rng)))
        .collect();
    Statevector::from_sparse(nq, &entries)
}

/// `<psi| a†_i a†_k a_l a_j |psi>` over spin orbitals.
pub fn two_body_expectation(psi: &Statevector, i: usize, k: usize, l: usize, j: usize) -> f64 {
    psi.nonzero()
        .filter_map(|(x, a)| {
            fock::two_body(x, i, k, l, j).map(|(y, s)| a * s * psi.amps[y as usize])
        })
        .sum()
}

/// `<psi| a†_i a_j |psi>` over spin orbitals.
pub fn one_body_expectation(psi: &Statevector, i: usize, j: usize) -> f64 {
    psi.nonzero()
        .filter_map(|(x, a)| fock::one_body(x, i, j).map(|(y, s)| a * s * psi.amps[y as usize]))
        .sum()
}

/// 1- and 2-RDMs by direct operator application.
pub fn exact_rdms(psi: &Statevector, meta: SystemMeta) -> Result<(OneRDM, SpinRDMSet)> {
    let n = meta.n;
    if psi.n_qubits != meta.n_spin_orbitals() {
        return Err(Error::DimensionMismatch {
            expected: meta.n_spin_orbitals(),
            got: psi.n_qubits,
        });
    }
    let mut d = OneRDM::zeros(n);
    for i in 0..n {
        for j in 0..n {
            d.alpha[(i, j)] = one_body_expectation(psi, i, j);
            d.beta[(i, j)] = one_body_expectation(psi, i + n, j + n);
        }
    }
    let mut sectors = Vec::with_capacity(3);
    for sector in SpinSector::ALL {
        let dim = sector.dim(n);
        let mut m = DMatrix::zeros(dim, dim);
        for row in 0..dim {
            let (i, k) = sector.spin_orbitals(n, sector.pair_of(n, row));
            for col in 0..=row {
                let (j, l) = sector.spin_orbitals(n, sector.pair_of(n, col));
                let v = two_body_expectation(psi, i, k, l, j);
                m[(row, col)] = v;
                m[(col, row)] = v;
            }
        }
        sectors.push(PackedRDM::new(sector, meta, m)?);
    }
    let abab = sectors.pop().unwrap();
    let bbbb = sectors.pop().unwrap();
    let aaaa = sectors.pop().unwrap();
    Ok((d, SpinRDMSet::new(aaaa, bbbb, abab)?))
}

/// `<psi|Q|psi>` for a Pauli string on the Jordan-Wigner register.
pub fn pauli_expectation(psi: &Statevector, q: &PauliString) -> f64 {
    if let Some(m) = q.max_qubit() {
        assert!(m < psi.n_qubits, "Pauli string acts outside the register");
    }
    let ny = q.count_y();
    if ny % 2 == 1 {
        // purely imaginary for a real state; the Hermitian expectation is 0
        return 0.0;
    }
    let (flip, phase) = q.masks();
    let global = if (ny / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let mut acc = 0.0;
    for (x, a) in psi.nonzero() {
        let y = x ^ flip;
        let b = psi.amps[y as usize];
        if b == 0.0 {
            continue;
        }
        let s = if (x & phase).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        acc += a * b * s;
    }
    global * acc
}
