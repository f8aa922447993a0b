use nalgebra::{DMatrix, DVector};

use super::{PackedRDM, SpinRDMSet};
use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix ordered by decreasing
/// eigenvalue magnitude, which makes it a singular value decomposition.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    u: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl SpectralDecomposition {
    /// Decomposes a symmetric matrix.
    pub fn of_symmetric(m: &DMatrix<f64>) -> Self {
        let eig = m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .abs()
                .total_cmp(&eig.eigenvalues[a].abs())
                .then(a.cmp(&b))
        });
        let d = m.nrows();
        let mut u = DMatrix::zeros(d, order.len());
        let mut eigenvalues = DVector::zeros(order.len());
        for (c, &o) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(o).into_owned();
            // sign gauge: largest-magnitude component positive
            if let Some((imax, _)) = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            {
                if col[imax] < 0.0 {
                    col.neg_mut();
                }
            }
            u.set_column(c, &col);
            eigenvalues[c] = eig.eigenvalues[o];
        }
        Self { u, eigenvalues }
    }

    /// Builds a decomposition from orthonormal columns and their values.
    pub fn from_parts(u: DMatrix<f64>, eigenvalues: DVector<f64>) -> Self {
        assert_eq!(u.ncols(), eigenvalues.len());
        Self { u, eigenvalues }
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// Columns of `U`, ordered with the values.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Signed eigenvalues in order of decreasing magnitude.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Singular values (eigenvalue magnitudes) in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|v| v.abs()).collect()
    }

    /// Keeps the `r` leading components.
    pub fn truncate(&self, r: usize) -> Self {
        let r = r.min(self.rank());
        Self {
            u: self.u.columns(0, r).into_owned(),
            eigenvalues: self.eigenvalues.rows(0, r).into_owned(),
        }
    }

    /// `U diag(lambda) U^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (c, &v) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(c).scale_mut(v);
        }
        &scaled * self.u.transpose()
    }

    /// Frobenius norm of everything past the first `r` components.
    pub fn tail_norm(&self, r: usize) -> f64 {
        self.eigenvalues
            .iter()
            .skip(r)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn frobenius(&self) -> f64 {
        self.tail_norm(0)
    }
}

/// Full spectrum of one packed sector.
pub fn spectrum(p: &PackedRDM) -> SpectralDecomposition {
    SpectralDecomposition::of_symmetric(p.matrix())
}

/// `||a - b||_F / ||b||_F`.
pub fn rel_error(a: &PackedRDM, b: &PackedRDM) -> Result<f64> {
    if a.sector() != b.sector() || a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            got: a.dim(),
        });
    }
    let denom = b.frobenius();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((a.matrix() - b.matrix()).norm() / denom)
}

/// Relative error over all three sectors stacked together.
pub fn rel_error_set(a: &SpinRDMSet, b: &SpinRDMSet) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.sectors().into_iter().zip(b.sectors()) {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: y.dim(),
                got: x.dim(),
            });
        }
        num += (x.matrix() - y.matrix()).norm_squared();
        den += y.matrix().norm_squared();
    }
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// Smallest rank whose truncation error relative to the model is below
/// `kappa * eps0`.
pub fn select_rank(model: &PackedRDM, eps0: f64, kappa: f64) -> Result<usize> {
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::InvalidSystem(format!(
            "eps0 must lie in (0, 1), got {eps0}"
        )));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidSystem(format!(
            "kappa must lie in (0, 1], got {kappa}"
        )));
    }
    let dec = spectrum(model);
    let norm = dec.frobenius();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let target = kappa * eps0;
    (1..=dec.rank())
        .find(|&r| dec.tail_norm(r) / norm < target)
        .ok_or(Error::RankExhausted(dec.rank()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdm::{SpinSector, SystemMeta};
    use crate::testutil::random_symmetric;

    fn packed(m: DMatrix<f64>) -> PackedRDM {
        let d = m.nrows();
        let n = (d as f64).sqrt() as usize;
        assert_eq!(n * n, d);
        PackedRDM::new(SpinSector::AlphaBeta, SystemMeta::new(n, 1, 1).unwrap(), m).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let dec = SpectralDecomposition::of_symmetric(&DMatrix::identity(9, 9));
        assert!(dec
            .singular_values()
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let m = random_symmetric(16, 3);
        let dec = SpectralDecomposition::of_symmetric(&m);
        assert!((dec.reconstruct() - &m).norm() < 1e-9 * m.norm());
        let g = dec.vectors().transpose() * dec.vectors();
        assert!((g - DMatrix::identity(16, 16)).amax() < 1e-10);
        let s = dec.singular_values();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn truncation_error_is_tail_norm() {
        let m = random_symmetric(16, 4);
        let dec = SpectralDecomposition::of_symmetric(&m);
        for r in [1, 5, 10, 16] {
            let err = (dec.truncate(r).reconstruct() - &m).norm();
            assert!((err - dec.tail_norm(r)).abs() < 1e-10);
        }
    }

    #[test]
    fn rel_error_cases() {
        let m = packed(random_symmetric(9, 5));
        assert_eq!(rel_error(&m, &m).unwrap(), 0.0);
        assert!((rel_error(&m.scaled(2.0), &m).unwrap() - 1.0).abs() < 1e-14);
        let z = packed(DMatrix::zeros(9, 9));
        assert!(matches!(rel_error(&m, &z), Err(Error::ZeroReference)));

        let a = packed(random_symmetric(9, 6));
        let mut num = 0.0;
        let mut den = 0.0;
        for r in 0..9 {
            for c in 0..9 {
                num += (a.get(r, c) - m.get(r, c)).powi(2);
                den += m.get(r, c).powi(2);
            }
        }
        assert!((rel_error(&a, &m).unwrap() - (num / den).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rank_one_selects_one() {
        let v = DVector::from_fn(9, |i, _| (i as f64 + 1.0).sin());
        let m = packed(&v * v.transpose());
        for eps in [0.5, 0.01, 1e-6] {
            assert_eq!(select_rank(&m, eps, 0.5).unwrap(), 1);
        }
    }

    #[test]
    fn rank_from_tail_norms() {
        // values 1, .1, .01, .001 in a random basis
        let q = crate::linalg::haar_orthogonal(4, &mut crate::testutil::rng(9));
        let lam = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1, 0.01, 0.001]));
        let m = packed(&q * lam * q.transpose());
        // tails: r=1 -> 0.1005/1.005 = 0.1000, r=2 -> 0.01005/1.005 = 0.0100,
        // r=3 -> 0.001/1.005 = 0.000995; target 0.005 -> r = 3
        let norm = (1.0f64 + 0.01 + 1e-4 + 1e-6).sqrt();
        let tails = [
            (0.01f64 + 1e-4 + 1e-6).sqrt() / norm,
            (1e-4f64 + 1e-6).sqrt() / norm,
            1e-3 / norm,
        ];
        let expect = 1 + tails.iter().position(|t| *t < 0.5 * 0.01).unwrap();
        assert_eq!(expect, 3);
        assert_eq!(select_rank(&m, 0.01, 0.5).unwrap(), expect);
        assert_eq!(select_rank(&m, 0.3, 0.5).unwrap(), 1);
    }

    #[test]
    fn select_rank_is_monotone() {
        let m = packed(random_symmetric(16, 7));
        let mut last = 0;
        for eps in [0.9, 0.5, 0.2, 0.1, 0.05, 0.01, 1e-3, 1e-5] {
            let r = select_rank(&m, eps, 0.5).unwrap();
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn select_rank_rejects_bad_parameters() {
        let m = packed(random_symmetric(4, 1));
        assert!(select_rank(&m, 0.0, 0.5).is_err());
        assert!(select_rank(&m, 0.01, 1.5).is_err());
    }
}
