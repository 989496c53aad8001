//! Exact diagonalization of small qubit Hamiltonians.
//!
//! The Hamiltonian is split into the connected blocks of its sparse
//! computational-basis graph (symmetry sectors appear automatically) and each
//! block is diagonalized densely.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pauli::{PauliOp, QubitHamiltonian};
use crate::tensor::DenseTensor;
use crate::C64;

pub const MAX_QUBITS: usize = 14;
pub const MAX_BLOCK: usize = 4096;

/// Sparse columns: for each basis state, the non-zero `(row, value)` entries.
fn sparse_columns(h: &QubitHamiltonian) -> Vec<Vec<(usize, C64)>> {
    let n = h.n_qubits;
    let dim = 1usize << n;
    let mut groups: BTreeMap<usize, Vec<PauliOp>> = BTreeMap::new();
    for t in &h.terms {
        let op = PauliOp::from_term(t);
        let mut flip = 0usize;
        for q in 0..n {
            if (op.x >> q) & 1 == 1 {
                flip |= 1 << (n - 1 - q);
            }
        }
        groups.entry(flip).or_default().push(op);
    }
    let mut cols = Vec::with_capacity(dim);
    for col in 0..dim {
        let mut entries = Vec::new();
        for (&flip, ops) in &groups {
            let row = col ^ flip;
            let mut acc = C64::new(0.0, 0.0);
            for op in ops {
                acc += op_entry(op, col, n);
            }
            if acc.norm() > 1e-14 {
                entries.push((row, acc));
            }
        }
        cols.push(entries);
    }
    cols
}

fn op_entry(op: &PauliOp, col: usize, n: usize) -> C64 {
    let mut ph = op.coeff;
    for q in 0..n {
        let b = (col >> (n - 1 - q)) & 1;
        let xq = (op.x >> q) & 1 == 1;
        let zq = (op.z >> q) & 1 == 1;
        match (xq, zq) {
            (false, true) if b == 1 => ph = -ph,
            (true, true) => ph *= if b == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) },
            _ => {}
        }
    }
    ph
}

/// Basis-state indices of each connected block.
pub fn blocks(h: &QubitHamiltonian) -> Result<Vec<Vec<usize>>> {
    guard(h)?;
    Ok(components(&sparse_columns(h)))
}

fn components(cols: &[Vec<(usize, C64)>]) -> Vec<Vec<usize>> {
    let dim = cols.len();
    let mut seen = vec![false; dim];
    let mut out = Vec::new();
    for start in 0..dim {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut block = vec![start];
        let mut head = 0;
        while head < block.len() {
            let c = block[head];
            head += 1;
            for &(r, _) in &cols[c] {
                if !seen[r] {
                    seen[r] = true;
                    block.push(r);
                }
            }
        }
        block.sort_unstable();
        out.push(block);
    }
    out
}

fn guard(h: &QubitHamiltonian) -> Result<()> {
    if h.n_qubits > MAX_QUBITS {
        return Err(Error::SizeGuard {
            what: "exact diagonalization qubits",
            size: h.n_qubits,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

fn block_matrix(cols: &[Vec<(usize, C64)>], block: &[usize]) -> Result<DenseTensor> {
    let b = block.len();
    if b > MAX_BLOCK {
        return Err(Error::SizeGuard {
            what: "exact diagonalization block",
            size: b,
            limit: MAX_BLOCK,
        });
    }
    let mut local = BTreeMap::new();
    for (i, &s) in block.iter().enumerate() {
        local.insert(s, i);
    }
    let mut m = DenseTensor::zeros(&[b, b]);
    for (j, &s) in block.iter().enumerate() {
        for &(r, v) in &cols[s] {
            let i = local[&r];
            let cur = m.get(&[i, j]);
            m.set(&[i, j], cur + v);
        }
    }
    Ok(m)
}

/// Eigenpairs of every block in ascending energy; vectors live in the full space.
pub fn eigenpairs(h: &QubitHamiltonian) -> Result<Vec<(f64, Vec<C64>)>> {
    guard(h)?;
    let cols = sparse_columns(h);
    let dim = cols.len();
    let mut pairs = Vec::new();
    for block in components(&cols) {
        let (vals, vecs) = crate::linalg::eigh(&block_matrix(&cols, &block)?)?;
        for (k, &e) in vals.iter().enumerate() {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            for (i, &s) in block.iter().enumerate() {
                v[s] = vecs.get(&[i, k]);
            }
            pairs.push((e, v));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    Ok(pairs)
}

/// Lowest `k` eigenvalues in ascending order.
pub fn exact_spectrum(h: &QubitHamiltonian, k: usize) -> Result<Vec<f64>> {
    guard(h)?;
    let cols = sparse_columns(h);
    let mut all = Vec::with_capacity(cols.len());
    for block in components(&cols) {
        all.extend(crate::linalg::eigh(&block_matrix(&cols, &block)?)?.0);
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    all.truncate(k);
    Ok(all)
}

/// Lowest eigenvalue above `ground + tol`.
pub fn spectral_gap(h: &QubitHamiltonian, tol: f64) -> Result<(f64, f64)> {
    let all = exact_spectrum(h, usize::MAX)?;
    let g = all[0];
    let e = all.iter().copied().find(|&e| e > g + tol).unwrap_or(g);
    Ok((g, e - g))
}
