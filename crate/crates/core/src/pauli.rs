use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Whether the operator flips the computational basis state.
    pub fn flips(self) -> bool {
        !matches!(self, Pauli::Z)
    }
}

/// Tensor product of single-qubit Paulis, identity on unlisted qubits.
/// Operators are kept sorted by qubit index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct PauliString {
    ops: Vec<(usize, Pauli)>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Builds a string from `(qubit, op)` pairs. Panics on a repeated qubit.
    pub fn new(mut ops: Vec<(usize, Pauli)>) -> Self {
        ops.sort_by_key(|&(q, _)| q);
        assert!(
            ops.windows(2).all(|w| w[0].0 != w[1].0),
            "qubit listed twice in Pauli string"
        );
        Self { ops }
    }

    pub fn ops(&self) -> &[(usize, Pauli)] {
        &self.ops
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.ops.len()
    }

    pub fn get(&self, qubit: usize) -> Option<Pauli> {
        self.ops
            .binary_search_by_key(&qubit, |&(q, _)| q)
            .ok()
            .map(|i| self.ops[i].1)
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.ops.last().map(|&(q, _)| q)
    }

    pub fn count_y(&self) -> usize {
        self.ops.iter().filter(|(_, p)| *p == Pauli::Y).count()
    }

    /// Bit masks `(flip, phase)` over at most 64 qubits: `flip` marks X/Y
    /// positions, `phase` marks Y/Z positions.
    pub fn masks(&self) -> (u64, u64) {
        let mut flip = 0u64;
        let mut phase = 0u64;
        for &(q, p) in &self.ops {
            assert!(q < 64, "mask form supports 64 qubits");
            match p {
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    phase |= 1 << q;
                }
                Pauli::Z => phase |= 1 << q,
            }
        }
        (flip, phase)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ops.is_empty() {
            return f.write_str("I");
        }
        for (i, (q, p)) in self.ops.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}{}", p.symbol(), q)?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = String;

    /// Parses the `Display` form, e.g. `"X0 Z1 Y3"` or `"I"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "I" || s.is_empty() {
            return Ok(Self::identity());
        }
        let mut ops = Vec::new();
        for tok in s.split_whitespace() {
            let mut chars = tok.chars();
            let p = match chars.next() {
                Some('X') => Pauli::X,
                Some('Y') => Pauli::Y,
                Some('Z') => Pauli::Z,
                _ => return Err(format!("bad Pauli token {tok:?}")),
            };
            let q: usize = chars
                .as_str()
                .parse()
                .map_err(|_| format!("bad qubit index in {tok:?}"))?;
            ops.push((q, p));
        }
        let mut sorted = ops.clone();
        sorted.sort_by_key(|&(q, _)| q);
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(format!("repeated qubit in {s:?}"));
        }
        Ok(Self { ops: sorted })
    }
}
