//! Occupation-number basis with Jordan-Wigner signs.
//!
//! Spin orbital `p` is bit `p` of the basis label. Alpha orbitals occupy
//! bits `0..n`, beta orbitals bits `n..2n`.

/// `a_p |x>`: the new label and the sign from the parity of lower bits.
#[inline]
pub fn annihilate(x: u64, p: usize) -> Option<(u64, f64)> {
    let bit = 1u64 << p;
    if x & bit == 0 {
        return None;
    }
    Some((x ^ bit, parity_sign(x, p)))
}

/// `a†_p |x>`.
#[inline]
pub fn create(x: u64, p: usize) -> Option<(u64, f64)> {
    let bit = 1u64 << p;
    if x & bit != 0 {
        return None;
    }
    Some((x | bit, parity_sign(x, p)))
}

#[inline]
fn parity_sign(x: u64, p: usize) -> f64 {
    if (x & ((1u64 << p) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Applies `a†_i a†_k a_l a_j` to `|x>`.
#[inline]
pub fn two_body(x: u64, i: usize, k: usize, l: usize, j: usize) -> Option<(u64, f64)> {
    let (y, s1) = annihilate(x, j)?;
    let (y, s2) = annihilate(y, l)?;
    let (y, s3) = create(y, k)?;
    let (y, s4) = create(y, i)?;
    Some((y, s1 * s2 * s3 * s4))
}

/// Applies `a†_i a_j` to `|x>`.
#[inline]
pub fn one_body(x: u64, i: usize, j: usize) -> Option<(u64, f64)> {
    let (y, s1) = annihilate(x, j)?;
    let (y, s2) = create(y, i)?;
    Some((y, s1 * s2))
}

/// All labels with `n_alpha` alpha and `n_beta` beta electrons in `n`
/// orbitals, in increasing order.
pub fn sector_basis(n: usize, n_alpha: usize, n_beta: usize) -> Vec<u64> {
    let alpha = combinations(n, n_alpha);
    let beta = combinations(n, n_beta);
    let mut out = Vec::with_capacity(alpha.len() * beta.len());
    for &b in &beta {
        for &a in &alpha {
            out.push(a | (b << n));
        }
    }
    out.sort_unstable();
    out
}

fn combinations(n: usize, k: usize) -> Vec<u64> {
    (0u64..(1u64 << n))
        .filter(|x| x.count_ones() as usize == k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anticommutation_signs() {
        // a_0 a_1 |11> = -a_1 a_0 |11>
        let x = 0b11;
        let (y, s1) = annihilate(x, 1).unwrap();
        let (y, s2) = annihilate(y, 0).unwrap();
        let (z, t1) = annihilate(x, 0).unwrap();
        let (z, t2) = annihilate(z, 1).unwrap();
        assert_eq!(y, z);
        assert_eq!(s1 * s2, -(t1 * t2));
        assert!(create(x, 0).is_none());
    }

    #[test]
    fn number_operator() {
        for x in 0u64..16 {
            for p in 0..4 {
                let occ = (x >> p) & 1 == 1;
                match one_body(x, p, p) {
                    Some((y, s)) => {
                        assert!(occ);
                        assert_eq!((y, s), (x, 1.0));
                    }
                    None => assert!(!occ),
                }
            }
        }
    }

    #[test]
    fn sector_sizes() {
        assert_eq!(sector_basis(4, 2, 2).len(), 36);
        assert_eq!(sector_basis(6, 3, 3).len(), 400);
        let b = sector_basis(3, 1, 2);
        assert!(b
            .iter()
            .all(|x| (x & 0b111).count_ones() == 1 && (x >> 3).count_ones() == 2));
    }
}
