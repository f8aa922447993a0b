//! Two-particle reduced density matrices in spin-resolved, packed form.
//!
//! The 2-RDM element `P[ik,jl] = <a†_i a†_k a_l a_j>` is stored per spin
//! sector as a symmetric `d x d` matrix over orbital pairs:
//!
//! * same-spin sectors (`aaaa`, `bbbb`) keep only strict pairs `i > k`,
//!   giving `d = n(n-1)/2`. Pair `(i, k)` maps to row `i(i-1)/2 + k`.
//! * the mixed sector (`abab`) keeps every pair `(i, k)` with `i` an alpha
//!   orbital and `k` a beta orbital, giving `d = n^2`. Pair `(i, k)` maps to
//!   row `i*n + k`.
//!
//! Packed entries hold the raw element with no multiplicity weights.

mod energy;
mod spectrum;

pub use energy::{contract_to_1rdm, energy, hf_2rdm, two_body_energy, Energy, IntegralSet};
pub use spectrum::{rel_error, rel_error_set, select_rank, spectrum, SpectralDecomposition};

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on packed-matrix asymmetry, relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Tolerance on permutational symmetry of an unpacked four-index tensor.
pub const TENSOR_SYMMETRY_TOL: f64 = 1e-8;

/// Orbital count and electron numbers of the active space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemMeta {
    pub n: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
}

impl SystemMeta {
    pub fn new(n: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSystem("need at least one orbital".into()));
        }
        if n_alpha > n || n_beta > n {
            return Err(Error::InvalidSystem(format!(
                "{n_alpha} alpha / {n_beta} beta electrons do not fit in {n} orbitals"
            )));
        }
        Ok(Self { n, n_alpha, n_beta })
    }

    pub fn n_electrons(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    /// Number of spin orbitals, `2n`.
    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n
    }

    /// Trace of the packed sector for an exact N-electron state.
    pub fn trace_target(&self, sector: SpinSector) -> f64 {
        let (a, b) = (self.n_alpha as f64, self.n_beta as f64);
        match sector {
            SpinSector::AlphaAlpha => a * (a - 1.0) / 2.0,
            SpinSector::BetaBeta => b * (b - 1.0) / 2.0,
            SpinSector::AlphaBeta => a * b,
        }
    }

    /// Rank of the Hartree-Fock 2-RDM in the given sector.
    pub fn hf_rank(&self, sector: SpinSector) -> usize {
        let (a, b) = (self.n_alpha, self.n_beta);
        match sector {
            SpinSector::AlphaAlpha => a * a.saturating_sub(1) / 2,
            SpinSector::BetaBeta => b * b.saturating_sub(1) / 2,
            SpinSector::AlphaBeta => a * b,
        }
    }
}

/// One of the three non-vanishing spin blocks of an S_z-conserving 2-RDM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpinSector {
    #[serde(rename = "aaaa")]
    AlphaAlpha,
    #[serde(rename = "bbbb")]
    BetaBeta,
    #[serde(rename = "abab")]
    AlphaBeta,
}

impl SpinSector {
    pub const ALL: [SpinSector; 3] = [
        SpinSector::AlphaAlpha,
        SpinSector::BetaBeta,
        SpinSector::AlphaBeta,
    ];

    pub fn is_same_spin(self) -> bool {
        !matches!(self, SpinSector::AlphaBeta)
    }

    /// Packed dimension for `n` spatial orbitals.
    pub fn dim(self, n: usize) -> usize {
        if self.is_same_spin() {
            n * n.saturating_sub(1) / 2
        } else {
            n * n
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpinSector::AlphaAlpha => "aaaa",
            SpinSector::BetaBeta => "bbbb",
            SpinSector::AlphaBeta => "abab",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.label() == s)
    }

    /// Row index of the orbital pair `(i, k)`, or `None` for a same-spin
    /// pair that is not strictly ordered.
    pub fn pair_index(self, n: usize, i: usize, k: usize) -> Option<usize> {
        if self.is_same_spin() {
            (i > k).then(|| i * (i - 1) / 2 + k)
        } else {
            Some(i * n + k)
        }
    }

    /// Orbital pair `(i, k)` labelling row `idx`.
    pub fn pair_of(self, n: usize, idx: usize) -> (usize, usize) {
        if self.is_same_spin() {
            // largest i with i(i-1)/2 <= idx
            let mut i = ((1.0 + (1.0 + 8.0 * idx as f64).sqrt()) / 2.0) as usize;
            while i * (i - 1) / 2 > idx {
                i -= 1;
            }
            while (i + 1) * i / 2 <= idx {
                i += 1;
            }
            (i, idx - i * (i - 1) / 2)
        } else {
            (idx / n, idx % n)
        }
    }

    /// Spin-orbital labels (alpha first, then beta) of the pair's two
    /// orbitals.
    pub fn spin_orbitals(self, n: usize, pair: (usize, usize)) -> (usize, usize) {
        match self {
            SpinSector::AlphaAlpha => pair,
            SpinSector::BetaBeta => (pair.0 + n, pair.1 + n),
            SpinSector::AlphaBeta => (pair.0, pair.1 + n),
        }
    }
}

impl fmt::Display for SpinSector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Dense four-index tensor `T[i,k,j,l]` over spatial orbitals, laid out
/// row-major in that index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n * n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n * n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn idx(&self, i: usize, k: usize, j: usize, l: usize) -> usize {
        ((i * self.n + k) * self.n + j) * self.n + l
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, j: usize, l: usize) -> f64 {
        self.data[self.idx(i, k, j, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, j: usize, l: usize, v: f64) {
        let x = self.idx(i, k, j, l);
        self.data[x] = v;
    }
}

/// One spin sector of a 2-RDM as a symmetric packed matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedRDM {
    sector: SpinSector,
    meta: SystemMeta,
    data: DMatrix<f64>,
}

impl PackedRDM {
    /// Wraps a packed matrix, checking shape and symmetry. The stored matrix
    /// is made exactly symmetric; already symmetric input is kept bitwise.
    pub fn new(sector: SpinSector, meta: SystemMeta, data: DMatrix<f64>) -> Result<Self> {
        let d = sector.dim(meta.n);
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: data.nrows().max(data.ncols()),
            });
        }
        let scale = data.amax().max(f64::MIN_POSITIVE);
        let residual = (&data - data.transpose()).amax();
        if residual > SYMMETRY_TOL * scale {
            return Err(Error::SymmetryViolation { sector, residual });
        }
        let data = (&data + data.transpose()) * 0.5;
        Ok(Self { sector, meta, data })
    }

    pub fn zeros(sector: SpinSector, meta: SystemMeta) -> Self {
        let d = sector.dim(meta.n);
        Self {
            sector,
            meta,
            data: DMatrix::zeros(d, d),
        }
    }

    pub fn sector(&self) -> SpinSector {
        self.sector
    }

    pub fn meta(&self) -> SystemMeta {
        self.meta
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    /// Sets the element at `(row, col)` and its mirror.
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[(row, col)] = v;
        self.data[(col, row)] = v;
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.norm()
    }

    /// Returns a copy with a new matrix of the same shape.
    pub fn with_matrix(&self, data: DMatrix<f64>) -> Result<Self> {
        Self::new(self.sector, self.meta, data)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sector: self.sector,
            meta: self.meta,
            data: &self.data * factor,
        }
    }
}

/// The three non-zero spin sectors of a 2-RDM.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinRDMSet {
    pub aaaa: PackedRDM,
    pub bbbb: PackedRDM,
    pub abab: PackedRDM,
}

impl SpinRDMSet {
    pub fn new(aaaa: PackedRDM, bbbb: PackedRDM, abab: PackedRDM) -> Result<Self> {
        let meta = aaaa.meta;
        for (p, s) in [
            (&aaaa, SpinSector::AlphaAlpha),
            (&bbbb, SpinSector::BetaBeta),
            (&abab, SpinSector::AlphaBeta),
        ] {
            if p.sector != s {
                return Err(Error::InvalidSystem(format!(
                    "expected {s} sector, got {}",
                    p.sector
                )));
            }
            if p.meta != meta {
                return Err(Error::InvalidSystem(
                    "sectors disagree on system meta".into(),
                ));
            }
        }
        Ok(Self { aaaa, bbbb, abab })
    }

    pub fn zeros(meta: SystemMeta) -> Self {
        Self {
            aaaa: PackedRDM::zeros(SpinSector::AlphaAlpha, meta),
            bbbb: PackedRDM::zeros(SpinSector::BetaBeta, meta),
            abab: PackedRDM::zeros(SpinSector::AlphaBeta, meta),
        }
    }

    pub fn meta(&self) -> SystemMeta {
        self.aaaa.meta
    }

    pub fn sector(&self, s: SpinSector) -> &PackedRDM {
        match s {
            SpinSector::AlphaAlpha => &self.aaaa,
            SpinSector::BetaBeta => &self.bbbb,
            SpinSector::AlphaBeta => &self.abab,
        }
    }

    pub fn sector_mut(&mut self, s: SpinSector) -> &mut PackedRDM {
        match s {
            SpinSector::AlphaAlpha => &mut self.aaaa,
            SpinSector::BetaBeta => &mut self.bbbb,
            SpinSector::AlphaBeta => &mut self.abab,
        }
    }

    pub fn sectors(&self) -> [&PackedRDM; 3] {
        [&self.aaaa, &self.bbbb, &self.abab]
    }

    /// Replaces one sector, checking that it matches the set.
    pub fn replace(&mut self, p: PackedRDM) -> Result<()> {
        if p.meta != self.meta() {
            return Err(Error::InvalidSystem("sector meta differs from set".into()));
        }
        let s = p.sector;
        *self.sector_mut(s) = p;
        Ok(())
    }

    /// Largest elementwise difference between the two same-spin sectors.
    pub fn same_spin_asymmetry(&self) -> f64 {
        (self.aaaa.matrix() - self.bbbb.matrix()).amax()
    }
}

/// Spin-resolved one-particle density matrix `D[i,j] = <a†_i a_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneRDM {
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
}

impl OneRDM {
    pub fn zeros(n: usize) -> Self {
        Self {
            alpha: DMatrix::zeros(n, n),
            beta: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn total(&self) -> DMatrix<f64> {
        &self.alpha + &self.beta
    }

    pub fn trace(&self) -> f64 {
        self.alpha.trace() + self.beta.trace()
    }

    /// Element `<a†_p a_q>` by spin-orbital label (alpha first).
    pub fn spin_orbital(&self, p: usize, q: usize) -> f64 {
        let n = self.n();
        match (p < n, q < n) {
            (true, true) => self.alpha[(p, q)],
            (false, false) => self.beta[(p - n, q - n)],
            _ => 0.0,
        }
    }
}

/// Packs a four-index sector tensor `P[i,k,j,l]` into its symmetric matrix
/// of unique elements.
pub fn pack_sector(p4: &Tensor4, sector: SpinSector, meta: SystemMeta) -> Result<PackedRDM> {
    let n = meta.n;
    if p4.n != n || p4.data.len() != n * n * n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n * n * n,
            got: p4.data.len(),
        });
    }
    let scale = p4.data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = TENSOR_SYMMETRY_TOL * scale;
    let mut residual = 0.0_f64;
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let v = p4.get(i, k, j, l);
                    residual = residual.max((v - p4.get(j, l, i, k)).abs());
                    if sector.is_same_spin() {
                        residual = residual.max((v + p4.get(k, i, j, l)).abs());
                        residual = residual.max((v + p4.get(i, k, l, j)).abs());
                    }
                }
            }
        }
    }
    if residual > tol {
        return Err(Error::SymmetryViolation { sector, residual });
    }
    let d = sector.dim(n);
    let mut data = DMatrix::zeros(d, d);
    for row in 0..d {
        let (i, k) = sector.pair_of(n, row);
        for col in 0..=row {
            let (j, l) = sector.pair_of(n, col);
            let v = p4.get(i, k, j, l);
            data[(row, col)] = v;
            data[(col, row)] = v;
        }
    }
    Ok(PackedRDM { sector, meta, data })
}

/// Expands a packed sector back to its four-index tensor.
pub fn unpack_sector(p: &PackedRDM) -> Tensor4 {
    let n = p.meta.n;
    let sector = p.sector;
    let mut t = Tensor4::zeros(n);
    // (row index, sign) for an ordered pair
    let lookup = |a: usize, b: usize| -> Option<(usize, f64)> {
        if sector.is_same_spin() {
            match a.cmp(&b) {
                std::cmp::Ordering::Greater => sector.pair_index(n, a, b).map(|r| (r, 1.0)),
                std::cmp::Ordering::Less => sector.pair_index(n, b, a).map(|r| (r, -1.0)),
                std::cmp::Ordering::Equal => None,
            }
        } else {
            sector.pair_index(n, a, b).map(|r| (r, 1.0))
        }
    };
    for i in 0..n {
        for k in 0..n {
            let Some((row, s1)) = lookup(i, k) else {
                continue;
            };
            for j in 0..n {
                for l in 0..n {
                    let Some((col, s2)) = lookup(j, l) else {
                        continue;
                    };
                    let v = p.data[(row, col)];
                    t.set(i, k, j, l, if s1 * s2 > 0.0 { v } else { -v });
                }
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_packed(sector: SpinSector, meta: SystemMeta, seed: u64) -> PackedRDM {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = sector.dim(meta.n);
        let mut m = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..=r {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        PackedRDM::new(sector, meta, m).unwrap()
    }

    #[test]
    fn packed_dimensions() {
        let meta = SystemMeta::new(2, 1, 1).unwrap();
        assert_eq!(SpinSector::AlphaAlpha.dim(meta.n), 1);
        assert_eq!(SpinSector::AlphaBeta.dim(meta.n), 4);
        let p = pack_sector(&Tensor4::zeros(2), SpinSector::AlphaAlpha, meta).unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(SpinSector::AlphaAlpha.pair_of(2, 0), (1, 0));
    }

    #[test]
    fn pair_index_inverts() {
        for n in 1..9 {
            for s in SpinSector::ALL {
                for idx in 0..s.dim(n) {
                    let (i, k) = s.pair_of(n, idx);
                    assert_eq!(s.pair_index(n, i, k), Some(idx));
                }
            }
        }
    }

    #[test]
    fn broken_antisymmetry_is_rejected() {
        let meta = SystemMeta::new(2, 1, 1).unwrap();
        let mut t = Tensor4::zeros(2);
        // P[10,10] = P[01,10]: symmetric instead of antisymmetric
        for (i, k, j, l) in [(1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1), (0, 1, 0, 1)] {
            t.set(i, k, j, l, 0.5);
        }
        assert!(matches!(
            pack_sector(&t, SpinSector::AlphaAlpha, meta),
            Err(Error::SymmetryViolation { .. })
        ));
        // the mixed sector only needs hermiticity
        assert!(pack_sector(&t, SpinSector::AlphaBeta, meta).is_ok());
    }

    #[test]
    fn wrong_tensor_shape() {
        let meta = SystemMeta::new(3, 1, 1).unwrap();
        assert!(matches!(
            pack_sector(&Tensor4::zeros(2), SpinSector::AlphaBeta, meta),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_unpacks_to_zero() {
        let meta = SystemMeta::new(3, 2, 1).unwrap();
        for s in SpinSector::ALL {
            let t = unpack_sector(&PackedRDM::zeros(s, meta));
            assert!(t.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_pair_expands_to_eight_entries() {
        let meta = SystemMeta::new(2, 2, 0).unwrap();
        let mut p = PackedRDM::zeros(SpinSector::AlphaAlpha, meta);
        p.set(0, 0, 0.75);
        let t = unpack_sector(&p);
        assert_eq!(t.get(1, 0, 1, 0), 0.75);
        assert_eq!(t.get(0, 1, 0, 1), 0.75);
        assert_eq!(t.get(0, 1, 1, 0), -0.75);
        assert_eq!(t.get(1, 0, 0, 1), -0.75);
        assert_eq!(t.data.iter().filter(|v| **v != 0.0).count(), 4);
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let meta = SystemMeta::new(4, 2, 2).unwrap();
        for (seed, s) in SpinSector::ALL.into_iter().enumerate() {
            let p = random_packed(s, meta, seed as u64);
            let back = pack_sector(&unpack_sector(&p), s, meta).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let meta = SystemMeta::new(2, 1, 1).unwrap();
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        assert!(PackedRDM::new(SpinSector::AlphaBeta, meta, m).is_err());
    }

    #[test]
    fn meta_validation() {
        assert!(SystemMeta::new(0, 0, 0).is_err());
        assert!(SystemMeta::new(2, 3, 0).is_err());
        let m = SystemMeta::new(4, 2, 1).unwrap();
        assert_eq!(m.n_electrons(), 3);
        assert_eq!(m.trace_target(SpinSector::AlphaAlpha), 1.0);
        assert_eq!(m.trace_target(SpinSector::BetaBeta), 0.0);
        assert_eq!(m.trace_target(SpinSector::AlphaBeta), 2.0);
    }

    proptest::proptest! {
        #[test]
        fn pack_unpack_roundtrip(n in 1usize..6, seed in 0u64..1000, s in 0usize..3) {
            let meta = SystemMeta::new(n, 0, 0).unwrap();
            let sector = SpinSector::ALL[s];
            let p = random_packed(sector, meta, seed);
            let back = pack_sector(&unpack_sector(&p), sector, meta).unwrap();
            proptest::prop_assert_eq!(back, p);
        }
    }
}
