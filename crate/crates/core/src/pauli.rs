//! Pauli strings and qubit Hamiltonians.
//!
//! Qubit 0 is the leftmost character of a label and the most significant bit
//! of a computational-basis index.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use crate::C64;

/// Coefficients below this magnitude are dropped when simplifying.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// The 2x2 matrix, row-major.
    pub fn matrix(self) -> [C64; 4] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }
}

/// A real multiple of a tensor product of Pauli matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: Vec<Pauli>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, string: Vec<Pauli>) -> Self {
        Self { coefficient, string }
    }

    /// Parses a label such as `"IXYZ"`.
    pub fn from_label(coefficient: f64, label: &str) -> Result<Self> {
        let string = label
            .chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| Error::InvalidArgument(format!("bad Pauli label {:?}", label)))
            })
            .collect::<Result<Vec<_>>>()?;
        if !coefficient.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite coefficient for {}", label)));
        }
        Ok(Self { coefficient, string })
    }

    pub fn label(&self) -> String {
        self.string.iter().map(|p| p.as_char()).collect()
    }

    pub fn n_qubits(&self) -> usize {
        self.string.len()
    }

    pub fn is_identity(&self) -> bool {
        self.string.iter().all(|&p| p == Pauli::I)
    }

    /// Indices of the non-identity factors.
    pub fn support(&self) -> Vec<usize> {
        self.string
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(k, _)| k)
            .collect()
    }

    /// Dense `2^n x 2^n` matrix (Kronecker product, qubit 0 most significant).
    pub fn to_dense(&self) -> DenseTensor {
        let mut m = DenseTensor::scalar(C64::new(self.coefficient, 0.0))
            .reshape(&[1, 1])
            .expect("scalar");
        for p in &self.string {
            let f = DenseTensor::new(alloc::vec![2, 2], p.matrix().to_vec()).expect("2x2");
            m = m.kron(&f).expect("matrices");
        }
        m
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.12e} {}", self.coefficient, self.label())
    }
}

/// Weighted sum of Pauli strings on a fixed number of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitHamiltonian {
    pub n_qubits: usize,
    pub terms: Vec<PauliTerm>,
}

impl QubitHamiltonian {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        for t in &terms {
            if t.n_qubits() != n_qubits {
                return Err(Error::Shape(format!(
                    "term {} has {} qubits, expected {}",
                    t.label(),
                    t.n_qubits(),
                    n_qubits
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite coefficient on {}", t.label())));
            }
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn push(&mut self, term: PauliTerm) -> Result<()> {
        if term.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!(
                "term {} has {} qubits, expected {}",
                term.label(),
                term.n_qubits(),
                self.n_qubits
            )));
        }
        self.terms.push(term);
        Ok(())
    }

    /// Merges duplicate strings, prunes tiny coefficients and sorts terms by label
    /// (`I < X < Y < Z`, qubit 0 first). The sorted order is also the order in
    /// which product formulas apply the terms.
    pub fn simplify(&self) -> Self {
        let mut merged: BTreeMap<Vec<Pauli>, f64> = BTreeMap::new();
        for t in &self.terms {
            *merged.entry(t.string.clone()).or_insert(0.0) += t.coefficient;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.abs() >= PRUNE_TOL)
            .map(|(s, c)| PauliTerm::new(c, s))
            .collect();
        Self {
            n_qubits: self.n_qubits,
            terms,
        }
    }

    /// Coefficient of the all-identity string.
    pub fn constant(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.is_identity())
            .map(|t| t.coefficient)
            .sum()
    }

    /// Sum of absolute coefficients over non-identity strings.
    pub fn scale(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| !t.is_identity())
            .map(|t| t.coefficient.abs())
            .sum()
    }

    /// `H |v>` for a dense statevector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = alloc::vec![C64::new(0.0, 0.0); v.len()];
        for t in &self.terms {
            let op = PauliOp::from_term(t);
            op.apply_add(v, &mut out, self.n_qubits);
        }
        out
    }

    /// Dense matrix (guarded to 14 qubits).
    pub fn to_dense(&self) -> Result<DenseTensor> {
        if self.n_qubits > 14 {
            return Err(Error::SizeGuard {
                what: "dense Hamiltonian qubits",
                size: self.n_qubits,
                limit: 14,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DenseTensor::zeros(&[dim, dim]);
        for t in &self.terms {
            let op = PauliOp::from_term(t);
            for col in 0..dim {
                let (row, ph) = op.column_entry(col, self.n_qubits);
                let cur = m.get(&[row, col]);
                m.set(&[row, col], cur + ph);
            }
        }
        Ok(m)
    }
}

/// A complex multiple of a Pauli string in symplectic form.
///
/// Bit `k` of `x`/`z` refers to qubit `k`; the string is `⊗ σ(x_k, z_k)` with
/// `σ(1,1) = Y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliOp {
    pub x: u128,
    pub z: u128,
    pub coeff: C64,
}

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

impl PauliOp {
    pub fn identity(coeff: C64) -> Self {
        Self { x: 0, z: 0, coeff }
    }

    pub fn single(qubit: usize, p: Pauli, coeff: C64) -> Self {
        let (x, z) = p.bits();
        Self {
            x: (x as u128) << qubit,
            z: (z as u128) << qubit,
            coeff,
        }
    }

    pub fn from_term(t: &PauliTerm) -> Self {
        let mut op = Self::identity(C64::new(t.coefficient, 0.0));
        for (k, &p) in t.string.iter().enumerate() {
            let (x, z) = p.bits();
            op.x |= (x as u128) << k;
            op.z |= (z as u128) << k;
        }
        op
    }

    pub fn string(&self, n: usize) -> Vec<Pauli> {
        (0..n)
            .map(|k| Pauli::from_bits((self.x >> k) & 1 == 1, (self.z >> k) & 1 == 1))
            .collect()
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        let y1 = (self.x & self.z).count_ones();
        let y2 = (other.x & other.z).count_ones();
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let y = (x & z).count_ones();
        let swaps = (self.z & other.x).count_ones();
        // σ(x,z) = i^{x·z} X^x Z^z and Z^a X^b = (-1)^{a·b} X^b Z^a
        let k = (y1 + y2 + 2 * swaps + 4 * 128 - y) % 4;
        Self {
            x,
            z,
            coeff: self.coeff * other.coeff * i_pow(k),
        }
    }

    /// Row index and value of the single non-zero entry in column `col`.
    fn column_entry(&self, col: usize, n: usize) -> (usize, C64) {
        let mut row = col;
        let mut ph = self.coeff;
        for q in 0..n {
            let bit = n - 1 - q;
            let xq = (self.x >> q) & 1 == 1;
            let zq = (self.z >> q) & 1 == 1;
            let b = (col >> bit) & 1;
            match (xq, zq) {
                (false, false) => {}
                (true, false) => row ^= 1 << bit,
                (false, true) => {
                    if b == 1 {
                        ph = -ph
                    }
                }
                (true, true) => {
                    row ^= 1 << bit;
                    // Y|0> = i|1>, Y|1> = -i|0>
                    ph *= if b == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                }
            }
        }
        (row, ph)
    }

    fn apply_add(&self, v: &[C64], out: &mut [C64], n: usize) {
        let mut flip = 0usize;
        let mut zmask = 0usize;
        let mut ny = 0u32;
        for q in 0..n {
            let bit = n - 1 - q;
            let xq = (self.x >> q) & 1 == 1;
            let zq = (self.z >> q) & 1 == 1;
            if xq {
                flip |= 1 << bit;
            }
            if zq {
                zmask |= 1 << bit;
            }
            if xq && zq {
                ny += 1;
            }
        }
        // σ = i^{ny} X^x Z^z: Z acts first on the input column
        let base = self.coeff * i_pow(ny);
        for (col, &a) in v.iter().enumerate() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            let sign = if (col & zmask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[col ^ flip] += base * a * sign;
        }
    }
}

/// A sum of [`PauliOp`]s keyed by their symplectic masks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliSum {
    terms: BTreeMap<(u128, u128), C64>,
}

impl PauliSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_op(op: PauliOp) -> Self {
        let mut s = Self::new();
        s.add_op(op);
        s
    }

    pub fn add_op(&mut self, op: PauliOp) {
        *self.terms.entry((op.x, op.z)).or_insert(C64::new(0.0, 0.0)) += op.coeff;
    }

    pub fn add(&mut self, other: &Self) {
        for (&(x, z), &c) in &other.terms {
            self.add_op(PauliOp { x, z, coeff: c });
        }
    }

    pub fn scale(&self, a: C64) -> Self {
        Self {
            terms: self.terms.iter().map(|(&k, &c)| (k, c * a)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::new();
        for (&(x1, z1), &c1) in &self.terms {
            for (&(x2, z2), &c2) in &other.terms {
                let a = PauliOp { x: x1, z: z1, coeff: c1 };
                let b = PauliOp { x: x2, z: z2, coeff: c2 };
                out.add_op(a.mul(&b));
            }
        }
        out
    }

    /// Operators with non-negligible coefficient.
    pub fn ops(&self) -> impl Iterator<Item = PauliOp> + '_ {
        self.terms
            .iter()
            .filter(|(_, c)| c.norm() >= PRUNE_TOL)
            .map(|(&(x, z), &coeff)| PauliOp { x, z, coeff })
    }

    pub fn is_zero(&self) -> bool {
        self.ops().next().is_none()
    }

    /// Converts to a real-coefficient Hamiltonian, failing if any imaginary part
    /// exceeds `tol` relative to the coefficient scale.
    pub fn to_hamiltonian(&self, n_qubits: usize, tol: f64) -> Result<QubitHamiltonian> {
        let scale = self.terms.values().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        let worst = self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max);
        if worst > tol * scale {
            return Err(Error::NotHermitian(worst / scale));
        }
        let terms = self
            .terms
            .iter()
            .filter(|(_, c)| c.re.abs() >= PRUNE_TOL)
            .map(|(&(x, z), &c)| PauliTerm::new(c.re, PauliOp { x, z, coeff: c }.string(n_qubits)))
            .collect();
        Ok(QubitHamiltonian { n_qubits, terms }.simplify())
    }
}
