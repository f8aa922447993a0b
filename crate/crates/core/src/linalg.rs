//! Small dense linear-algebra helpers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Haar-distributed orthogonal matrix: QR of a standard Gaussian matrix with
/// the signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// Largest absolute deviation of `q^T q` from the identity.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let n = q.ncols();
    (q.transpose() * q - DMatrix::identity(n, n)).amax()
}

/// Closest orthogonal matrix in Frobenius norm (polar factor).
pub fn reorthonormalize(q: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = q.clone().svd(true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return q.clone();
    };
    u * vt
}

/// Minimum eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
