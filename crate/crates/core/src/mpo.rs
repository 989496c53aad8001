//! Matrix product operators.
//!
//! Site `k` holds a tensor with axes `[s_out, s_in, left, right]`. Dense
//! matrices use row index = output bits, qubit 0 most significant.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mps::{check_chain, left_sweep_qr, left_sweep_svd, right_sweep_lq, LOSSLESS_CUTOFF};
use crate::pauli::{Pauli, PauliTerm, QubitHamiltonian};
use crate::tensor::{contract, contract_conj, DenseTensor};
use crate::C64;

/// Default truncation threshold for operator products.
pub const DEFAULT_CUTOFF: f64 = 1e-12;
/// Largest operator converted to a dense matrix.
pub const DENSE_LIMIT: usize = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductOperator {
    tensors: Vec<DenseTensor>,
}

fn pauli_site(p: Pauli) -> DenseTensor {
    DenseTensor::new(vec![2, 2, 1, 1], p.matrix().to_vec()).expect("2x2")
}

impl MatrixProductOperator {
    pub fn new(tensors: Vec<DenseTensor>) -> Result<Self> {
        check_chain(&tensors, 4)?;
        Ok(Self { tensors })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn site(&self, k: usize) -> &DenseTensor {
        &self.tensors[k]
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.n_sites() - 1]
            .iter()
            .map(|t| t.shape()[3])
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Multiplies the operator by a scalar (applied to site 0).
    pub fn scale(&mut self, alpha: C64) {
        self.tensors[0].scale_mut(alpha);
    }

    /// Hermitian conjugate: conjugates entries and swaps input and output.
    pub fn dagger(&self) -> Self {
        Self {
            tensors: self.tensors.iter().map(|t| t.permute(&[1, 0, 2, 3]).conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        let mut env = DenseTensor::scalar(C64::new(1.0, 0.0)).reshape(&[1]).expect("scalar");
        for t in &self.tensors {
            let tr = t.partial_trace(0, 1).expect("square site"); // [l, r]
            env = contract(&env, &tr, &[(0, 0)]).expect("bond");
        }
        env.data()[0]
    }

    /// Frobenius norm `sqrt(Tr[A† A])`.
    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(mpo_inner(self, self).expect("same chain").re.max(0.0))
    }

    /// Right-canonicalizes, then truncates left to right. Returns the largest discarded weight.
    pub fn compress(&mut self, cutoff: f64, max_bond: Option<usize>) -> Result<f64> {
        let n = self.n_sites();
        right_sweep_lq(&mut self.tensors, 0, n - 1)?;
        left_sweep_svd(&mut self.tensors, 0, n - 1, cutoff, max_bond)
    }

    /// `‖A - A†‖_F / ‖A‖_F`.
    pub fn hermiticity_error(&self) -> Result<f64> {
        let nrm2 = mpo_inner(self, self)?.re;
        if nrm2 <= 0.0 {
            return Ok(0.0);
        }
        let mut neg = self.dagger();
        neg.scale(C64::new(-1.0, 0.0));
        let mut d = mpo_add(self, &neg)?;
        d.compress(crate::mps::LOSSLESS_CUTOFF, None)?;
        Ok(libm::sqrt(mpo_inner(&d, &d)?.re.max(0.0) / nrm2))
    }
}

/// Identity operator with all bonds of dimension 1.
pub fn identity_mpo(n: usize) -> MatrixProductOperator {
    assert!(n >= 1, "at least one site");
    MatrixProductOperator {
        tensors: (0..n).map(|_| pauli_site(Pauli::I)).collect(),
    }
}

/// Bond-1 operator `c · P`.
pub fn pauli_string_mpo(term: &PauliTerm) -> MatrixProductOperator {
    let mut m = MatrixProductOperator {
        tensors: term.string.iter().map(|&p| pauli_site(p)).collect(),
    };
    m.scale(C64::new(term.coefficient, 0.0));
    m
}

/// `exp(i c P dtau)` for `term = c P`.
///
/// Because `P² = I` the exponential is `cos(c dtau) I + i sin(c dtau) P`, a
/// bond-2 operator on the interval spanned by the non-identity factors and
/// bond 1 elsewhere.
pub fn pauli_string_evolution_mpo(term: &PauliTerm, dtau: f64) -> MatrixProductOperator {
    let n = term.n_qubits();
    let theta = term.coefficient * dtau;
    let support = term.support();
    let mut tensors: Vec<DenseTensor> = (0..n).map(|_| pauli_site(Pauli::I)).collect();
    if support.is_empty() {
        tensors[0].scale_mut(C64::from_polar(1.0, theta));
        return MatrixProductOperator { tensors };
    }
    let alpha = C64::new(libm::cos(theta), 0.0);
    let beta = C64::new(0.0, libm::sin(theta));
    let a = support[0];
    let b = support[support.len() - 1];
    let id = Pauli::I.matrix();
    if a == b {
        let p = term.string[a].matrix();
        let data = (0..4).map(|k| alpha * id[k] + beta * p[k]).collect();
        tensors[a] = DenseTensor::new(vec![2, 2, 1, 1], data).expect("2x2");
        return MatrixProductOperator { tensors };
    }
    for k in a..=b {
        let p = term.string[k].matrix();
        let (l, r) = (if k == a { 1 } else { 2 }, if k == b { 1 } else { 2 });
        let mut t = DenseTensor::zeros(&[2, 2, l, r]);
        for o in 0..2 {
            for i in 0..2 {
                let (e_id, e_p) = (id[o * 2 + i], p[o * 2 + i]);
                if k == a {
                    t.set(&[o, i, 0, 0], alpha * e_id);
                    t.set(&[o, i, 0, 1], beta * e_p);
                } else if k == b {
                    t.set(&[o, i, 0, 0], e_id);
                    t.set(&[o, i, 1, 0], e_p);
                } else {
                    t.set(&[o, i, 0, 0], e_id);
                    t.set(&[o, i, 1, 1], e_p);
                }
            }
        }
        tensors[k] = t;
    }
    MatrixProductOperator { tensors }
}

/// Site-wise product `a_k · b_k` with merged bonds (no truncation).
fn site_product(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let (la, ra) = (a.shape()[2], a.shape()[3]);
    let (lb, rb) = (b.shape()[2], b.shape()[3]);
    let c = contract(a, b, &[(1, 0)])?; // [o, la, ra, i, lb, rb]
    c.permute(&[0, 3, 1, 4, 2, 5]).reshape(&[2, 2, la * lb, ra * rb])
}

/// Operator product `a · b`, truncated with `cutoff`.
pub fn mpo_multiply(a: &MatrixProductOperator, b: &MatrixProductOperator, cutoff: f64) -> Result<MatrixProductOperator> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::SiteMismatch {
            left: a.n_sites(),
            right: b.n_sites(),
        });
    }
    let tensors = a
        .tensors
        .iter()
        .zip(&b.tensors)
        .map(|(x, y)| site_product(x, y))
        .collect::<Result<Vec<_>>>()?;
    let mut m = MatrixProductOperator { tensors };
    m.compress(cutoff, None)?;
    Ok(m)
}

/// Direct sum representing `a + b`.
pub fn mpo_add(a: &MatrixProductOperator, b: &MatrixProductOperator) -> Result<MatrixProductOperator> {
    let n = a.n_sites();
    if n != b.n_sites() {
        return Err(Error::SiteMismatch {
            left: n,
            right: b.n_sites(),
        });
    }
    if n == 1 {
        return Ok(MatrixProductOperator {
            tensors: vec![a.tensors[0].add(&b.tensors[0])?],
        });
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (x, y) = (&a.tensors[k], &b.tensors[k]);
        let (lx, rx) = (x.shape()[2], x.shape()[3]);
        let (ly, ry) = (y.shape()[2], y.shape()[3]);
        let first = k == 0;
        let last = k == n - 1;
        let l = if first { 1 } else { lx + ly };
        let r = if last { 1 } else { rx + ry };
        let mut t = DenseTensor::zeros(&[2, 2, l, r]);
        let (l0, r0) = (if first { 0 } else { lx }, if last { 0 } else { rx });
        for o in 0..2 {
            for i in 0..2 {
                for p in 0..lx {
                    for q in 0..rx {
                        t.set(&[o, i, p, q], x.get(&[o, i, p, q]));
                    }
                }
                for p in 0..ly {
                    for q in 0..ry {
                        t.set(&[o, i, l0 + p, r0 + q], y.get(&[o, i, p, q]));
                    }
                }
            }
        }
        out.push(t);
    }
    Ok(MatrixProductOperator { tensors: out })
}

/// `Tr[a† b]`.
pub fn mpo_inner(a: &MatrixProductOperator, b: &MatrixProductOperator) -> Result<C64> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::SiteMismatch {
            left: a.n_sites(),
            right: b.n_sites(),
        });
    }
    let mut env = DenseTensor::scalar(C64::new(1.0, 0.0)).reshape(&[1, 1])?;
    for (x, y) in a.tensors.iter().zip(&b.tensors) {
        let t = contract(&env, y, &[(1, 2)])?; // [la, o, i, rb]
        env = contract_conj(x, true, &t, false, &[(0, 1), (1, 2), (2, 0)])?; // [ra, rb]
    }
    Ok(env.data()[0])
}

/// Exact operator for a Hamiltonian: a balanced sum of bond-1 Pauli strings,
/// compressed losslessly after every addition.
pub fn hamiltonian_to_mpo(h: &QubitHamiltonian) -> Result<MatrixProductOperator> {
    let n = h.n_qubits;
    let mut parts: Vec<MatrixProductOperator> = h
        .terms
        .iter()
        .filter(|t| t.coefficient != 0.0)
        .map(pauli_string_mpo)
        .collect();
    if parts.is_empty() {
        let mut z = identity_mpo(n);
        z.scale(C64::new(0.0, 0.0));
        return Ok(z);
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => {
                    let mut s = mpo_add(&a, &b)?;
                    s.compress(LOSSLESS_CUTOFF, None)?;
                    next.push(s);
                }
                None => next.push(a),
            }
        }
        parts = next;
    }
    Ok(parts.pop().expect("non-empty"))
}

/// Dense matrix (guarded to [`DENSE_LIMIT`] sites).
pub fn mpo_to_dense(m: &MatrixProductOperator) -> Result<DenseTensor> {
    let n = m.n_sites();
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard {
            what: "dense MPO sites",
            size: n,
            limit: DENSE_LIMIT,
        });
    }
    // acc axes: [rows, cols, bond]
    let mut acc = DenseTensor::scalar(C64::new(1.0, 0.0)).reshape(&[1, 1, 1])?;
    for t in &m.tensors {
        let (rows, cols) = (acc.shape()[0], acc.shape()[1]);
        let r = t.shape()[3];
        let x = contract(&acc, t, &[(2, 2)])?; // [rows, cols, o, i, r]
        acc = x.permute(&[0, 2, 1, 3, 4]).reshape(&[rows * 2, cols * 2, r])?;
    }
    let d = acc.shape()[0];
    acc.reshape(&[d, d])
}

/// MPO of a dense `2^n × 2^n` matrix by successive truncated SVDs.
pub fn mpo_from_dense(u: &DenseTensor, cutoff: f64) -> Result<MatrixProductOperator> {
    let shape = u.shape();
    if shape.len() != 2 || shape[0] != shape[1] || !shape[0].is_power_of_two() || shape[0] < 2 {
        return Err(Error::Shape(format!("dense operator of shape {:?}", shape)));
    }
    let n = shape[0].trailing_zeros() as usize;
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard {
            what: "dense MPO sites",
            size: n,
            limit: DENSE_LIMIT,
        });
    }
    let mut perm = Vec::with_capacity(2 * n);
    for k in 0..n {
        perm.push(k);
        perm.push(n + k);
    }
    let mut rest = u.clone().reshape(&vec![2; 2 * n])?.permute(&perm);
    let mut tensors = Vec::with_capacity(n);
    let mut left = 1;
    for _ in 0..n - 1 {
        let cols = rest.len() / (4 * left);
        let m = rest.reshape(&[left, 2, 2, cols])?;
        let svd = crate::linalg::svd_truncated(&m, 3, cutoff, None)?;
        let r = svd.rank();
        tensors.push(svd.u.permute(&[1, 2, 0, 3]));
        rest = svd.svdag();
        left = r;
    }
    tensors.push(rest.reshape(&[left, 2, 2, 1])?.permute(&[1, 2, 0, 3]));
    MatrixProductOperator::new(tensors)
}

/// Product-formula approximation of `exp(-i H dt)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrotterOrder {
    /// Each slice applies the terms once, in order.
    First,
    /// Each slice applies the terms forward then backward with half steps.
    Second,
}

/// Multiplies a local operator (non-trivial on sites `a..=b`) onto `u` from
/// the left, keeping the orthogonality center inside the touched interval.
struct CenteredMpo {
    tensors: Vec<DenseTensor>,
    center: usize,
    max_discarded: f64,
}

impl CenteredMpo {
    fn new(n: usize) -> Self {
        Self {
            tensors: identity_mpo(n).tensors,
            center: 0,
            max_discarded: 0.0,
        }
    }

    fn move_center(&mut self, to: usize) -> Result<()> {
        if to > self.center {
            left_sweep_qr(&mut self.tensors, self.center, to)?;
        } else if to < self.center {
            right_sweep_lq(&mut self.tensors, to, self.center)?;
        }
        self.center = to;
        Ok(())
    }

    fn apply(&mut self, g: &MatrixProductOperator, a: usize, b: usize, cutoff: f64) -> Result<()> {
        if a == b {
            let t = contract(&g.tensors[a], &self.tensors[a], &[(1, 0)])?; // [o, 1, 1, i, l, r]
            let (l, r) = (self.tensors[a].shape()[2], self.tensors[a].shape()[3]);
            self.tensors[a] = t.reshape(&[2, 2, l, r])?;
            return Ok(());
        }
        let target = self.center.clamp(a, b);
        self.move_center(target)?;
        for k in a..=b {
            self.tensors[k] = site_product(&g.tensors[k], &self.tensors[k])?;
        }
        right_sweep_lq(&mut self.tensors, a, b)?;
        let w = left_sweep_svd(&mut self.tensors, a, b, cutoff, None)?;
        self.max_discarded = self.max_discarded.max(w);
        self.center = b;
        Ok(())
    }
}

/// Product formula for `exp(-i H dt)` with `n_slices` slices, truncating each
/// term application with `cutoff`. Terms are applied in the Hamiltonian's
/// simplified (sorted) order; the first term acts first.
pub fn trotter_product(
    h: &QubitHamiltonian,
    dt: f64,
    n_slices: usize,
    order: TrotterOrder,
    cutoff: f64,
) -> Result<MatrixProductOperator> {
    if n_slices == 0 {
        return Err(Error::InvalidArgument("at least one slice is required".into()));
    }
    if !(dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step {}", dt)));
    }
    let h = h.simplify();
    let n = h.n_qubits;
    let mut phase = 0.0;
    let mut factors = Vec::new();
    let steps = match order {
        TrotterOrder::First => dt / n_slices as f64,
        TrotterOrder::Second => dt / (2 * n_slices) as f64,
    };
    for t in &h.terms {
        if t.is_identity() {
            phase -= t.coefficient * dt;
            continue;
        }
        let s = t.support();
        factors.push((pauli_string_evolution_mpo(t, -steps), s[0], s[s.len() - 1]));
    }
    let mut u = CenteredMpo::new(n);
    for _ in 0..n_slices {
        for (g, a, b) in &factors {
            u.apply(g, *a, *b, cutoff)?;
        }
        if order == TrotterOrder::Second {
            for (g, a, b) in factors.iter().rev() {
                u.apply(g, *a, *b, cutoff)?;
            }
        }
    }
    let c = u.center;
    u.tensors[c].scale_mut(C64::from_polar(1.0, phase));
    MatrixProductOperator::new(u.tensors)
}

/// Second-order reference operator `U_ref ≈ exp(-i H dt)` with `dτ = dt/(2 n_slices)`.
pub fn trotterized_reference(h: &QubitHamiltonian, dt: f64, n_slices: usize, cutoff: f64) -> Result<MatrixProductOperator> {
    trotter_product(h, dt, n_slices, TrotterOrder::Second, cutoff)
}
