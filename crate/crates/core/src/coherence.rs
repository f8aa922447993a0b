//! Geometric coherence of packed 2-RDM sectors and its minimization over
//! orbital rotations.
//!
//! An orbital rotation `C` acts on a packed sector as `P' = K P K^T`, where
//! `K` is the pair-space image of `C`: the 2x2 minors `C_pi C_qk - C_pk C_qi`
//! for same-spin sectors and the Kronecker product `C (x) C` for the mixed
//! sector. One `C` is shared by all three sectors.
//!
//! The max in the coherence is not differentiable, so the minimizer works on
//! the smooth surrogate `sum_p (sum_s (K U)_ps^2)^e` with `e = 4` by default,
//! and parametrizes `C = C0 exp(A)` with `A` antisymmetric.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_orthogonal, orthogonality_defect, reorthonormalize};
use crate::optim::{minimize, LbfgsConfig};
use crate::rdm::{
    IntegralSet, OneRDM, PackedRDM, SpectralDecomposition, SpinRDMSet, SpinSector, Tensor4,
};

/// Largest accepted `|C^T C - I|` entry.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Where a rotation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Identity,
    Haar {
        seed: u64,
    },
    /// Optimized from the Haar start with this seed, or from the identity.
    Optimized {
        seed: Option<u64>,
    },
}

/// An orthogonal orbital rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationBasis {
    c: DMatrix<f64>,
    pub provenance: Provenance,
}

impl RotationBasis {
    pub fn identity(n: usize) -> Self {
        Self {
            c: DMatrix::identity(n, n),
            provenance: Provenance::Identity,
        }
    }

    pub fn new(c: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::DimensionMismatch {
                expected: c.nrows(),
                got: c.ncols(),
            });
        }
        let defect = orthogonality_defect(&c);
        if defect.is_nan() || defect > ORTHOGONALITY_TOL {
            return Err(Error::InvalidSystem(format!(
                "rotation is not orthogonal (defect {defect:.3e})"
            )));
        }
        Ok(Self { c, provenance })
    }

    pub fn haar(n: usize, seed: u64) -> Self {
        let c = haar_orthogonal(n, &mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            c,
            provenance: Provenance::Haar { seed },
        }
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// The inverse rotation `C^T`.
    pub fn inverse(&self) -> Self {
        Self {
            c: self.c.transpose(),
            provenance: self.provenance,
        }
    }

    /// `other` applied after `self`, i.e. `C_other C_self`.
    pub fn then(&self, other: &RotationBasis) -> Self {
        Self {
            c: reorthonormalize(&(&other.c * &self.c)),
            provenance: other.provenance,
        }
    }
}

/// Coherence of a rank-`r` decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu: f64,
    pub r: usize,
    pub d: usize,
    /// `(d/r) |e_i^T U|^2` for every row.
    pub per_row_leverage: Vec<f64>,
}

/// `mu = (d/r) max_i |e_i^T U|^2`.
pub fn coherence(dec: &SpectralDecomposition) -> CoherenceReport {
    let u = dec.vectors();
    let (d, r) = (u.nrows(), u.ncols());
    let scale = if r == 0 { 0.0 } else { d as f64 / r as f64 };
    let per_row_leverage: Vec<f64> = (0..d).map(|i| scale * u.row(i).norm_squared()).collect();
    let mu = per_row_leverage.iter().cloned().fold(0.0, f64::max);
    CoherenceReport {
        mu,
        r,
        d,
        per_row_leverage,
    }
}

/// Pair-space matrix `K` with `P' = K P K^T` for the given sector.
pub fn pair_rotation(sector: SpinSector, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let d = sector.dim(n);
    let mut k = DMatrix::zeros(d, d);
    for row in 0..d {
        let (p, q) = sector.pair_of(n, row);
        for col in 0..d {
            let (i, kk) = sector.pair_of(n, col);
            k[(row, col)] = if sector.is_same_spin() {
                c[(p, i)] * c[(q, kk)] - c[(p, kk)] * c[(q, i)]
            } else {
                c[(p, i)] * c[(q, kk)]
            };
        }
    }
    k
}

/// Rotates one sector, `P'_{pq,rs} = sum C_pi C_qk P_{ik,jl} C_rj C_sl`.
pub fn rotate_rdm(p: &PackedRDM, c: &RotationBasis) -> Result<PackedRDM> {
    if c.n() != p.meta().n {
        return Err(Error::DimensionMismatch {
            expected: p.meta().n,
            got: c.n(),
        });
    }
    let k = pair_rotation(p.sector(), &c.c);
    let rotated = &k * p.matrix() * k.transpose();
    p.with_matrix(rotated)
}

pub fn rotate_set(p: &SpinRDMSet, c: &RotationBasis) -> Result<SpinRDMSet> {
    SpinRDMSet::new(
        rotate_rdm(&p.aaaa, c)?,
        rotate_rdm(&p.bbbb, c)?,
        rotate_rdm(&p.abab, c)?,
    )
}

/// `D' = C D C^T` for both spins.
pub fn rotate_one_rdm(d: &OneRDM, c: &RotationBasis) -> OneRDM {
    let c = &c.c;
    OneRDM {
        alpha: c * &d.alpha * c.transpose(),
        beta: c * &d.beta * c.transpose(),
    }
}

/// Integrals in the rotated orbitals, `h' = C h C^T` and
/// `(pq|rs)' = sum C_pi C_qj C_rk C_sl (ij|kl)`, so energies are invariant
/// when the RDMs are rotated by the same basis.
pub fn rotate_integrals(ints: &IntegralSet, c: &RotationBasis) -> Result<IntegralSet> {
    let n = ints.n();
    let c = &c.c;
    let h1 = c * &ints.h1 * c.transpose();
    // one index at a time, the transformed index moved to the back each pass
    let mut cur = ints.eri.data.clone();
    for _ in 0..4 {
        let mut next = vec![0.0; cur.len()];
        let n3 = n * n * n;
        for p in 0..n {
            for i in 0..n {
                let w = c[(p, i)];
                if w == 0.0 {
                    continue;
                }
                for rest in 0..n3 {
                    // cur[i, rest] -> next[rest, p]
                    next[rest * n + p] += w * cur[i * n3 + rest];
                }
            }
        }
        cur = next;
    }
    IntegralSet::new(h1, Tensor4::from_vec(n, cur)?, ints.e_core)
}

/// Leading eigenvectors of one sector, as consumed by the surrogate.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub sector: SpinSector,
    pub u: DMatrix<f64>,
}

impl SectorBasis {
    pub fn new(sector: SpinSector, dec: &SpectralDecomposition) -> Self {
        Self {
            sector,
            u: dec.vectors().clone(),
        }
    }
}

/// Surrogate `sum_p (sum_s (K U)_ps^2)^e` summed over sectors, with its
/// gradient with respect to `C`.
pub fn surrogate_objective(
    bases: &[SectorBasis],
    c: &DMatrix<f64>,
    exponent: f64,
) -> (f64, DMatrix<f64>) {
    let n = c.nrows();
    let mut f = 0.0;
    let mut grad = DMatrix::zeros(n, n);
    for b in bases {
        if b.u.ncols() == 0 || b.u.nrows() == 0 {
            continue;
        }
        let k = pair_rotation(b.sector, c);
        let w = &k * &b.u;
        let mut g = w.clone();
        for p in 0..w.nrows() {
            let lev = w.row(p).norm_squared();
            f += lev.powf(exponent);
            // d/dW_ps of lev^e = 2 e lev^(e-1) W_ps
            let factor = if lev > 0.0 {
                2.0 * exponent * lev.powf(exponent - 1.0)
            } else {
                0.0
            };
            g.row_mut(p).scale_mut(factor);
        }
        let dk = g * b.u.transpose();
        accumulate_pair_gradient(b.sector, c, &dk, &mut grad);
    }
    (f, grad)
}

/// Chain rule from `dF/dK` to `dF/dC`.
fn accumulate_pair_gradient(
    sector: SpinSector,
    c: &DMatrix<f64>,
    dk: &DMatrix<f64>,
    grad: &mut DMatrix<f64>,
) {
    let n = c.nrows();
    let d = sector.dim(n);
    for row in 0..d {
        let (p, q) = sector.pair_of(n, row);
        for col in 0..d {
            let h = dk[(row, col)];
            if h == 0.0 {
                continue;
            }
            let (i, k) = sector.pair_of(n, col);
            grad[(p, i)] += h * c[(q, k)];
            grad[(q, k)] += h * c[(p, i)];
            if sector.is_same_spin() {
                grad[(p, k)] -= h * c[(q, i)];
                grad[(q, i)] -= h * c[(p, k)];
            }
        }
    }
}

/// Settings for [`minimize_coherence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    /// Haar-random starts, in addition to the identity.
    pub n_starts: usize,
    /// Power applied to each squared row norm in the surrogate.
    pub exponent: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            n_starts: 10,
            exponent: 4.0,
            max_iter: 2000,
            grad_tol: 1e-8,
            seed: 0,
        }
    }
}

/// Outcome of a coherence minimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub basis: RotationBasis,
    /// Per-sector coherence before rotation, in the order of the input.
    pub mu_before: Vec<f64>,
    pub mu_after: Vec<f64>,
    /// Mean coherence of every candidate, identity first.
    pub candidates: Vec<(Provenance, f64)>,
}

fn antisymmetric(n: usize, a: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut t = 0;
    for i in 1..n {
        for j in 0..i {
            m[(i, j)] = a[t];
            m[(j, i)] = -a[t];
            t += 1;
        }
    }
    m
}

/// Adjoint of the Frechet derivative of `exp` at `A`, applied to `G`:
/// the upper-right block of `exp([[A^T, G], [0, A^T]])`.
fn exp_adjoint(a: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    let at = a.transpose();
    big.view_mut((0, 0), (n, n)).copy_from(&at);
    big.view_mut((n, n), (n, n)).copy_from(&at);
    big.view_mut((0, n), (n, n)).copy_from(g);
    big.exp().view((0, n), (n, n)).into_owned()
}

/// Mean coherence of the rotated bases, skipping empty sectors.
fn mean_mu(bases: &[SectorBasis], c: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let mut mus = Vec::with_capacity(bases.len());
    for b in bases {
        if b.u.ncols() == 0 || b.u.nrows() == 0 {
            mus.push(f64::NAN);
            continue;
        }
        let w = pair_rotation(b.sector, c) * &b.u;
        let r = w.ncols();
        let dec = SpectralDecomposition::from_parts(w, nalgebra::DVector::zeros(r));
        mus.push(coherence(&dec).mu);
    }
    let valid: Vec<f64> = mus.iter().cloned().filter(|v| v.is_finite()).collect();
    let mean = if valid.is_empty() {
        0.0
    } else {
        valid.iter().sum::<f64>() / valid.len() as f64
    };
    (mean, mus)
}

fn optimize_from(
    bases: &[SectorBasis],
    start: &DMatrix<f64>,
    cfg: &CoherenceConfig,
) -> Option<DMatrix<f64>> {
    let n = start.nrows();
    let np = n * n.saturating_sub(1) / 2;
    if np == 0 {
        return Some(start.clone());
    }
    let lbfgs = LbfgsConfig {
        max_iter: cfg.max_iter,
        grad_tol: cfg.grad_tol,
        ..LbfgsConfig::default()
    };
    let res = minimize(
        |x, g| {
            let a = antisymmetric(n, x);
            let c = start * a.exp();
            let (f, gc) = surrogate_objective(bases, &c, cfg.exponent);
            let gx = start.transpose() * gc;
            let ga = exp_adjoint(&a, &gx);
            let mut t = 0;
            for i in 1..n {
                for j in 0..i {
                    g[t] = ga[(i, j)] - ga[(j, i)];
                    t += 1;
                }
            }
            f
        },
        vec![0.0; np],
        &lbfgs,
    );
    if !res.f.is_finite() {
        return None;
    }
    let c = start * antisymmetric(n, &res.x).exp();
    Some(reorthonormalize(&c))
}

/// Finds the rotation with the smallest mean coherence over the given
/// sectors. Candidates are the identity, the identity optimized, and each
/// optimized Haar start, so the result is never worse than the identity.
pub fn minimize_coherence(
    bases: &[SectorBasis],
    n: usize,
    cfg: &CoherenceConfig,
) -> Result<CoherenceResult> {
    for b in bases {
        if b.u.nrows() != b.sector.dim(n) {
            return Err(Error::DimensionMismatch {
                expected: b.sector.dim(n),
                got: b.u.nrows(),
            });
        }
    }
    let ident = DMatrix::identity(n, n);
    let (mu_id, mu_before) = mean_mu(bases, &ident);

    let starts: Vec<Option<u64>> = std::iter::once(None)
        .chain((0..cfg.n_starts as u64).map(|k| Some(cfg.seed.wrapping_add(k))))
        .collect();
    let optimized: Vec<Option<(Provenance, DMatrix<f64>)>> = starts
        .par_iter()
        .map(|&seed| {
            let start = match seed {
                None => ident.clone(),
                Some(s) => haar_orthogonal(n, &mut ChaCha8Rng::seed_from_u64(s)),
            };
            optimize_from(bases, &start, cfg).map(|c| (Provenance::Optimized { seed }, c))
        })
        .collect();
    if optimized.iter().all(|o| o.is_none()) && !starts.is_empty() {
        return Err(Error::OptimizationFailure);
    }

    let mut candidates = vec![(Provenance::Identity, mu_id)];
    let mut best = (mu_id, ident.clone(), Provenance::Identity);
    for (prov, c) in optimized.into_iter().flatten() {
        if orthogonality_defect(&c) > 1e-8 {
            continue;
        }
        let (mu, _) = mean_mu(bases, &c);
        candidates.push((prov, mu));
        if mu < best.0 {
            best = (mu, c, prov);
        }
    }
    let (_, mu_after) = mean_mu(bases, &best.1);
    Ok(CoherenceResult {
        basis: RotationBasis {
            c: best.1,
            provenance: best.2,
        },
        mu_before,
        mu_after,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdm::{hf_2rdm, rel_error, spectrum, SystemMeta};
    use crate::testutil::{random_symmetric, rng};
    use nalgebra::DVector;

    fn meta(n: usize) -> SystemMeta {
        SystemMeta::new(n, 2, 2).unwrap()
    }

    #[test]
    fn rotated_energy_is_invariant() {
        use crate::rdm::two_body_energy;
        use crate::toy::{exact_rdms, ground_state, ToyFamily, ToyHamiltonian};
        let m = SystemMeta::new(4, 2, 1).unwrap();
        let h = ToyHamiltonian::new(ToyFamily::RandomTwoBody { seed: 3 }, m).unwrap();
        let (_, psi) = ground_state(&h).unwrap();
        let (d, p) = exact_rdms(&psi, m).unwrap();
        let c = RotationBasis::haar(4, 11);
        let ints = rotate_integrals(&h.ints, &c).unwrap();
        let e0 = two_body_energy(&p, &h.ints).unwrap();
        let e1 = two_body_energy(&rotate_set(&p, &c).unwrap(), &ints).unwrap();
        assert!((e0 - e1).abs() < 1e-10, "{e0} vs {e1}");
        let d1 = rotate_one_rdm(&d, &c);
        let one0 = (&h.ints.h1 * d.total()).trace();
        let one1 = (&ints.h1 * d1.total()).trace();
        assert!((one0 - one1).abs() < 1e-10);
        // brute-force check of one transformed element
        let (pp, q, r, t) = (1, 3, 0, 2);
        let mut v = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        v += c.c[(pp, i)]
                            * c.c[(q, j)]
                            * c.c[(r, k)]
                            * c.c[(t, l)]
                            * h.ints.eri.get(i, j, k, l);
                    }
                }
            }
        }
        assert!((ints.eri.get(pp, q, r, t) - v).abs() < 1e-12);
    }

    fn random_packed(sector: SpinSector, n: usize, seed: u64) -> PackedRDM {
        let d = sector.dim(n);
        PackedRDM::new(sector, meta(n), random_symmetric(d, seed)).unwrap()
    }

    #[test]
    fn flat_and_axis_aligned_bounds() {
        // normalized Hadamard columns: every entry 1/sqrt(d)
        let d = 8;
        let mut h = DMatrix::from_element(1, 1, 1.0);
        while h.nrows() < d {
            let m = h.nrows();
            let mut next = DMatrix::zeros(2 * m, 2 * m);
            next.view_mut((0, 0), (m, m)).copy_from(&h);
            next.view_mut((0, m), (m, m)).copy_from(&h);
            next.view_mut((m, 0), (m, m)).copy_from(&h);
            next.view_mut((m, m), (m, m)).copy_from(&(-&h));
            h = next;
        }
        let u = h.columns(0, 3).into_owned() / (d as f64).sqrt();
        let flat = coherence(&SpectralDecomposition::from_parts(u, DVector::zeros(3)));
        assert!((flat.mu - 1.0).abs() < 1e-12);

        let e = DMatrix::<f64>::identity(d, 3);
        let peaked = coherence(&SpectralDecomposition::from_parts(e, DVector::zeros(3)));
        assert!((peaked.mu - d as f64 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_matches_row_scan() {
        let dec = spectrum(&random_packed(SpinSector::AlphaBeta, 3, 4)).truncate(4);
        let rep = coherence(&dec);
        let u = dec.vectors();
        let mut best = 0.0_f64;
        for i in 0..u.nrows() {
            let mut s = 0.0;
            for j in 0..u.ncols() {
                s += u[(i, j)] * u[(i, j)];
            }
            best = best.max(s);
        }
        assert!((rep.mu - best * 9.0 / 4.0).abs() < 1e-12);
        assert!(rep.mu >= 1.0 - 1e-9 && rep.mu <= 9.0 / 4.0 + 1e-9);
    }

    #[test]
    fn identity_rotation_is_bitwise() {
        for s in SpinSector::ALL {
            let p = random_packed(s, 4, 1);
            let out = rotate_rdm(&p, &RotationBasis::identity(4)).unwrap();
            assert_eq!(out, p);
        }
    }

    #[test]
    fn rotation_preserves_spectrum_and_composes() {
        let c1 = RotationBasis::haar(4, 11);
        let c2 = RotationBasis::haar(4, 12);
        for s in SpinSector::ALL {
            let p = random_packed(s, 4, 2);
            let q = rotate_rdm(&p, &c1).unwrap();
            assert!((q.frobenius() - p.frobenius()).abs() < 1e-10);
            let (a, b) = (
                spectrum(&p).singular_values(),
                spectrum(&q).singular_values(),
            );
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
            let twice = rotate_rdm(&q, &c2).unwrap();
            let once = rotate_rdm(&p, &c1.then(&c2)).unwrap();
            assert!(rel_error(&twice, &once).unwrap() < 1e-10);
        }
    }

    #[test]
    fn rotation_matches_four_index_transform() {
        let n = 3;
        let c = RotationBasis::haar(n, 5);
        for s in SpinSector::ALL {
            let p = random_packed(s, n, 3);
            let t = crate::rdm::unpack_sector(&p);
            let cm = c.matrix();
            let mut out = crate::rdm::Tensor4::zeros(n);
            for pp in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        for ss in 0..n {
                            let mut v = 0.0;
                            for i in 0..n {
                                for k in 0..n {
                                    for j in 0..n {
                                        for l in 0..n {
                                            v += cm[(pp, i)]
                                                * cm[(q, k)]
                                                * t.get(i, k, j, l)
                                                * cm[(r, j)]
                                                * cm[(ss, l)];
                                        }
                                    }
                                }
                            }
                            out.set(pp, q, r, ss, v);
                        }
                    }
                }
            }
            let direct = crate::rdm::pack_sector(&out, s, meta(n)).unwrap();
            let fast = rotate_rdm(&p, &c).unwrap();
            assert!((direct.matrix() - fast.matrix()).amax() < 1e-12);
        }
    }

    fn bases(n: usize, seed: u64) -> Vec<SectorBasis> {
        SpinSector::ALL
            .iter()
            .map(|&s| {
                SectorBasis::new(
                    s,
                    &spectrum(&random_packed(s, n, seed + s as u64)).truncate(2),
                )
            })
            .collect()
    }

    #[test]
    fn surrogate_at_identity_matches_direct_sum() {
        let b = bases(4, 7);
        let (f, _) = surrogate_objective(&b, &DMatrix::identity(4, 4), 4.0);
        let mut direct = 0.0;
        for sb in &b {
            for p in 0..sb.u.nrows() {
                let mut s = 0.0;
                for c in 0..sb.u.ncols() {
                    s += sb.u[(p, c)] * sb.u[(p, c)];
                }
                direct += s * s * s * s;
            }
        }
        assert!((f - direct).abs() < 1e-14 * direct.max(1.0));
    }

    #[test]
    fn surrogate_of_flat_rows() {
        // flat leverage: every row norm^2 equals r/d
        let d = 4;
        let u = DMatrix::from_element(d, 1, 0.5);
        let sb = SectorBasis {
            sector: SpinSector::AlphaBeta,
            u,
        };
        let (f, _) = surrogate_objective(&[sb], &DMatrix::identity(2, 2), 4.0);
        let expected = d as f64 * (1.0 / d as f64).powi(4);
        assert!((f - expected).abs() < 1e-15);
    }

    /// Central differences along random directions of `C`.
    pub(crate) fn surrogate_fd_error(seed: u64) -> f64 {
        let n = 4;
        let b = bases(n, seed);
        let c = haar_orthogonal(n, &mut rng(seed + 100));
        let (_, g) = surrogate_objective(&b, &c, 4.0);
        let mut worst = 0.0_f64;
        let mut r = rng(seed + 200);
        for _ in 0..3 {
            let dir = haar_orthogonal(n, &mut r);
            let h = 1e-5;
            let fp = surrogate_objective(&b, &(&c + &dir * h), 4.0).0;
            let fm = surrogate_objective(&b, &(&c - &dir * h), 4.0).0;
            let fd = (fp - fm) / (2.0 * h);
            let an = g.dot(&dir);
            worst = worst.max((fd - an).abs() / an.abs().max(1e-12));
        }
        worst
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let e = surrogate_fd_error(seed);
            assert!(e < 1e-6, "seed {seed}: {e}");
        }
    }

    #[test]
    fn exp_adjoint_matches_finite_differences() {
        let n = 4;
        let mut r = rng(9);
        let a = antisymmetric(
            n,
            &(0..6).map(|i| 0.3 * (i as f64 - 2.5)).collect::<Vec<_>>(),
        );
        let g = haar_orthogonal(n, &mut r);
        let e = haar_orthogonal(n, &mut r);
        let h = 1e-6;
        let fd = ((&a + &e * h).exp() - (&a - &e * h).exp()) / (2.0 * h);
        let lhs = g.dot(&fd);
        let rhs = exp_adjoint(&a, &g).dot(&e);
        assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn minimization_never_worse_than_identity() {
        let cfg = CoherenceConfig {
            n_starts: 3,
            max_iter: 200,
            ..Default::default()
        };
        let b = bases(4, 21);
        let res = minimize_coherence(&b, 4, &cfg).unwrap();
        let before: f64 = res.mu_before.iter().sum::<f64>() / 3.0;
        let after: f64 = res.mu_after.iter().sum::<f64>() / 3.0;
        assert!(after <= before + 1e-12);
        assert!(orthogonality_defect(res.basis.matrix()) < 1e-10);
        for (&m, sb) in res.mu_after.iter().zip(&b) {
            let d = sb.u.nrows() as f64;
            assert!(m >= 1.0 - 1e-9 && m <= d / 2.0 + 1e-9);
        }
    }

    #[test]
    fn hartree_fock_in_canonical_basis_gets_less_coherent() {
        // occupied orbitals aligned with the axes give a maximally peaked
        // mixed sector
        let n = 4;
        let mut d0 = DMatrix::zeros(n, n);
        d0[(0, 0)] = 1.0;
        d0[(1, 1)] = 1.0;
        let p = hf_2rdm(&d0, &d0).unwrap();
        let b: Vec<SectorBasis> = SpinSector::ALL
            .iter()
            .map(|&s| {
                let dec = spectrum(p.sector(s)).truncate(p.meta().hf_rank(s));
                SectorBasis::new(s, &dec)
            })
            .collect();
        let cfg = CoherenceConfig {
            n_starts: 4,
            max_iter: 300,
            ..Default::default()
        };
        let res = minimize_coherence(&b, n, &cfg).unwrap();
        let before: f64 = res.mu_before.iter().sum();
        let after: f64 = res.mu_after.iter().sum();
        assert!(after < before - 1e-3, "{before} -> {after}");
    }

    #[test]
    fn rejects_non_orthogonal() {
        let m = DMatrix::from_element(2, 2, 1.0);
        assert!(RotationBasis::new(m, Provenance::Identity).is_err());
    }
}
