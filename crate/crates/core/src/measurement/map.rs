//! Linear map between 2-RDM elements and Jordan-Wigner Pauli expectations.
//!
//! Elements are grouped by their support, the set of distinct spin orbitals
//! among their four indices. All elements with the same support are measured
//! together from one set of Pauli strings. For support size 4 and a single
//! spin this is the familiar 3-element / 8-string quartet.
//!
//! The map for a support of size `k` is derived numerically on a compressed
//! `k`-qubit register: each element operator `(A + A^T)/2` is expanded in
//! Pauli strings, and every string is then written back as a combination of
//! element operators, one-body operators and the identity, restricted to the
//! particle-number and S_z conserving blocks a physical state can see.
//! Full-register strings get a `Z` on every skipped qubit that sits inside an
//! odd run of flipped support qubits.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::rdm::{OneRDM, SpinRDMSet, SpinSector, SystemMeta};
use crate::toy::fock;

/// Entry `(row, col)`, `row >= col`, of one packed sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementRef {
    pub sector: SpinSector,
    pub row: usize,
    pub col: usize,
}

impl ElementRef {
    pub fn new(sector: SpinSector, row: usize, col: usize) -> Self {
        Self {
            sector,
            row: row.max(col),
            col: row.min(col),
        }
    }

    /// Spin orbitals `(i, k, j, l)` of `<a†_i a†_k a_l a_j>`.
    pub fn spin_orbitals(&self, n: usize) -> [usize; 4] {
        let (i, k) = self
            .sector
            .spin_orbitals(n, self.sector.pair_of(n, self.row));
        let (j, l) = self
            .sector
            .spin_orbitals(n, self.sector.pair_of(n, self.col));
        [i, k, j, l]
    }

    /// Sorted distinct spin orbitals.
    pub fn support(&self, n: usize) -> Vec<usize> {
        let mut s = self.spin_orbitals(n).to_vec();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn value(&self, p: &SpinRDMSet) -> f64 {
        p.sector(self.sector).get(self.row, self.col)
    }
}

/// A fermionic unknown read off from the Pauli strings of a quartet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unknown {
    /// A packed 2-RDM element.
    Element(ElementRef),
    /// `<a†_p a_q + a†_q a_p>/2` with `p <= q` (spin orbitals).
    OneBody(usize, usize),
}

impl Unknown {
    pub fn value(&self, p: &SpinRDMSet, d: &OneRDM) -> f64 {
        match *self {
            Unknown::Element(e) => e.value(p),
            Unknown::OneBody(a, b) => 0.5 * (d.spin_orbital(a, b) + d.spin_orbital(b, a)),
        }
    }
}

/// Elements sharing one support set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quartet {
    /// Sorted distinct spin orbitals.
    pub support: Vec<usize>,
    pub elements: Vec<ElementRef>,
}

impl Quartet {
    /// `true` when all four indices are distinct.
    pub fn all_distinct(&self) -> bool {
        self.support.len() == 4
    }
}

/// Groups every unique packed element of all three sectors by support.
/// Supports whose element list is empty do not appear.
pub fn enumerate_quartets(meta: SystemMeta) -> Vec<Quartet> {
    let n = meta.n;
    let mut groups: BTreeMap<Vec<usize>, Vec<ElementRef>> = BTreeMap::new();
    for sector in SpinSector::ALL {
        let d = sector.dim(n);
        for row in 0..d {
            for col in 0..=row {
                let e = ElementRef::new(sector, row, col);
                groups.entry(e.support(n)).or_default().push(e);
            }
        }
    }
    groups
        .into_iter()
        .map(|(support, elements)| Quartet { support, elements })
        .collect()
}

/// Pauli strings of one quartet and the linear map to its unknowns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FermiPauliMap {
    pub quartet: Quartet,
    /// Full-register strings.
    pub strings: Vec<PauliString>,
    pub unknowns: Vec<Unknown>,
    /// `<Q_s> = sum_u t[s,u] x_u + offset[s]`.
    pub t: DMatrix<f64>,
    pub offset: DVector<f64>,
    /// Left inverse of `t`.
    pub t_inv: DMatrix<f64>,
}

/// Dense real operator on a `k`-qubit register.
type Op = DMatrix<f64>;

fn two_body_op(k: usize, i: usize, kk: usize, l: usize, j: usize) -> Op {
    let dim = 1usize << k;
    let mut a = Op::zeros(dim, dim);
    for x in 0..dim as u64 {
        if let Some((y, s)) = fock::two_body(x, i, kk, l, j) {
            a[(y as usize, x as usize)] += s;
        }
    }
    (&a + a.transpose()) * 0.5
}

fn one_body_op(k: usize, p: usize, q: usize) -> Op {
    let dim = 1usize << k;
    let mut a = Op::zeros(dim, dim);
    for x in 0..dim as u64 {
        if let Some((y, s)) = fock::one_body(x, p, q) {
            a[(y as usize, x as usize)] += s;
        }
    }
    (&a + a.transpose()) * 0.5
}

/// Real matrix of a Pauli string with an even number of `Y`, given as
/// per-qubit codes 0..4 (I, X, Y, Z).
fn pauli_op(codes: &[u8]) -> Op {
    let k = codes.len();
    let dim = 1usize << k;
    let (mut flip, mut phase, mut ny) = (0usize, 0usize, 0);
    for (q, &c) in codes.iter().enumerate() {
        match c {
            1 => flip |= 1 << q,
            2 => {
                flip |= 1 << q;
                phase |= 1 << q;
                ny += 1;
            }
            3 => phase |= 1 << q,
            _ => {}
        }
    }
    debug_assert!(ny % 2 == 0);
    let global = if (ny / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let mut m = Op::zeros(dim, dim);
    for x in 0..dim {
        let s = if (x & phase).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        m[(x ^ flip, x)] = global * s;
    }
    m
}

/// Keeps only the blocks that conserve particle number and S_z.
fn conserving_part(op: &Op, alpha_mask: usize) -> Op {
    let mut out = op.clone();
    for r in 0..op.nrows() {
        for c in 0..op.ncols() {
            let same_n = (r.count_ones()) == (c.count_ones());
            let same_a = (r & alpha_mask).count_ones() == (c & alpha_mask).count_ones();
            if !(same_n && same_a) {
                out[(r, c)] = 0.0;
            }
        }
    }
    out
}

/// Tolerance on coefficients and on fit residuals in the map derivation.
const MAP_TOL: f64 = 1e-12;

/// Derives the measurement map of one quartet on an `n`-orbital register.
pub fn build_map(q: &Quartet, n: usize) -> Result<FermiPauliMap> {
    let k = q.support.len();
    let local = |so: usize| {
        q.support
            .iter()
            .position(|&x| x == so)
            .expect("index in support")
    };
    let alpha_mask: usize = q
        .support
        .iter()
        .enumerate()
        .filter(|(_, &so)| so < n)
        .fold(0, |m, (t, _)| m | (1 << t));

    let elem_ops: Vec<Op> = q
        .elements
        .iter()
        .map(|e| {
            let [i, kk, j, l] = e.spin_orbitals(n);
            two_body_op(k, local(i), local(kk), local(l), local(j))
        })
        .collect();

    // strings appearing in the element expansions
    let n_pauli = 4usize.pow(k as u32);
    let mut codes_list: Vec<Vec<u8>> = Vec::new();
    for idx in 1..n_pauli {
        let codes: Vec<u8> = (0..k).map(|t| ((idx >> (2 * t)) & 3) as u8).collect();
        if codes.iter().filter(|&&c| c == 2).count() % 2 == 1 {
            continue;
        }
        let p = pauli_op(&codes);
        if elem_ops
            .iter()
            .any(|f| (p.component_mul(f)).sum().abs() > MAP_TOL)
        {
            codes_list.push(codes);
        }
    }

    // candidate unknowns: elements, same-spin one-body terms, identity
    let mut unknowns: Vec<Unknown> = q.elements.iter().map(|&e| Unknown::Element(e)).collect();
    let mut ops: Vec<Op> = elem_ops;
    for a in 0..k {
        for b in a..k {
            if ((alpha_mask >> a) & 1) == ((alpha_mask >> b) & 1) {
                unknowns.push(Unknown::OneBody(q.support[a], q.support[b]));
                ops.push(one_body_op(k, a, b));
            }
        }
    }
    let dim = 1usize << k;
    let nu = ops.len();
    let mut basis = DMatrix::zeros(dim * dim, nu + 1);
    for (c, op) in ops.iter().enumerate() {
        basis.column_mut(c).copy_from_slice(op.as_slice());
    }
    basis
        .column_mut(nu)
        .copy_from_slice(conserving_part(&Op::identity(dim, dim), alpha_mask).as_slice());
    let pinv = basis
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::InvalidSystem(e.to_string()))?;

    let ns = codes_list.len();
    let mut coef = DMatrix::zeros(ns, nu + 1);
    for (s, codes) in codes_list.iter().enumerate() {
        let target = conserving_part(&pauli_op(codes), alpha_mask);
        let v = DVector::from_column_slice(target.as_slice());
        let x = &pinv * &v;
        let resid = (&basis * &x - &v).amax();
        if resid > 1e-10 {
            return Err(Error::InvalidSystem(format!(
                "string {s} of support {:?} is not spanned by the unknowns (residual {resid:.2e})",
                q.support
            )));
        }
        coef.row_mut(s).copy_from(&x.transpose());
    }
    coef.apply(|c| {
        if c.abs() < MAP_TOL {
            *c = 0.0;
        }
    });

    // drop unknowns that no string sees
    let keep: Vec<usize> = (0..nu)
        .filter(|&u| coef.column(u).amax() > MAP_TOL)
        .collect();
    let t = DMatrix::from_fn(ns, keep.len(), |s, c| coef[(s, keep[c])]);
    let unknowns: Vec<Unknown> = keep.iter().map(|&u| unknowns[u]).collect();
    let offset = coef.column(nu).into_owned();
    let t_inv = t
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::InvalidSystem(e.to_string()))?;
    let defect = (&t_inv * &t - DMatrix::identity(keep.len(), keep.len())).amax();
    if defect > 1e-12 {
        return Err(Error::InvalidSystem(format!(
            "map for support {:?} is not invertible (defect {defect:.2e})",
            q.support
        )));
    }

    let strings = codes_list
        .iter()
        .map(|codes| full_register_string(&q.support, codes))
        .collect();
    Ok(FermiPauliMap {
        quartet: q.clone(),
        strings,
        unknowns,
        t,
        offset,
        t_inv,
    })
}

/// Lifts a compressed string to the full register, inserting `Z` on skipped
/// qubits that sit after an odd number of flipped support qubits.
fn full_register_string(support: &[usize], codes: &[u8]) -> PauliString {
    let mut ops = Vec::new();
    let mut parity = false;
    for (t, &so) in support.iter().enumerate() {
        if t > 0 && parity {
            for m in support[t - 1] + 1..so {
                ops.push((m, Pauli::Z));
            }
        }
        match codes[t] {
            1 => ops.push((so, Pauli::X)),
            2 => ops.push((so, Pauli::Y)),
            3 => ops.push((so, Pauli::Z)),
            _ => {}
        }
        if matches!(codes[t], 1 | 2) {
            parity = !parity;
        }
    }
    PauliString::new(ops)
}

impl FermiPauliMap {
    /// Current values of the unknowns.
    pub fn unknown_values(&self, p: &SpinRDMSet, d: &OneRDM) -> DVector<f64> {
        DVector::from_iterator(
            self.unknowns.len(),
            self.unknowns.iter().map(|u| u.value(p, d)),
        )
    }

    /// Reconstructs the unknowns from string expectations.
    pub fn reconstruct(&self, expectations: &DVector<f64>) -> DVector<f64> {
        &self.t_inv * (expectations - &self.offset)
    }

    /// Positions of the quartet's elements within `unknowns`.
    pub fn element_slots(&self) -> Vec<(usize, ElementRef)> {
        self.unknowns
            .iter()
            .enumerate()
            .filter_map(|(i, u)| match u {
                Unknown::Element(e) => Some((i, *e)),
                Unknown::OneBody(..) => None,
            })
            .collect()
    }
}

/// Bound on how far an exact expectation may leave `[-1, 1]` before the
/// input RDM is declared unphysical.
pub const EXPECTATION_SLACK: f64 = 1e-6;

/// String expectations of one quartet computed from the RDMs.
pub fn exact_pauli_expectations(
    p: &SpinRDMSet,
    d: &OneRDM,
    map: &FermiPauliMap,
) -> Result<DVector<f64>> {
    let v = &map.t * map.unknown_values(p, d) + &map.offset;
    if let Some(&bad) = v.iter().find(|x| x.abs() > 1.0 + EXPECTATION_SLACK) {
        return Err(Error::UnphysicalExpectation { value: bad });
    }
    Ok(v)
}
