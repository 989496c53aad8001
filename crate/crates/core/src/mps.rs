//! Matrix product states.
//!
//! Site `k` holds a tensor with axes `[s_k, a_{k-1}, a_k]` (physical, left
//! bond, right bond). Site 0 is the most significant qubit of the dense
//! statevector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{lq, qr, svd_truncated};
use crate::tensor::{contract, contract_conj, DenseTensor};
use crate::C64;

/// Discarded-weight threshold used where a sweep should be numerically lossless.
pub const LOSSLESS_CUTOFF: f64 = 1e-26;

/// Largest chain converted to or from a dense vector.
pub const DENSE_LIMIT: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanonicalForm {
    None,
    Left,
    Right,
    Mixed(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductState {
    tensors: Vec<DenseTensor>,
    form: CanonicalForm,
}

impl MatrixProductState {
    pub fn new(tensors: Vec<DenseTensor>) -> Result<Self> {
        check_chain(&tensors, 3)?;
        Ok(Self {
            tensors,
            form: CanonicalForm::None,
        })
    }

    /// Computational basis state `|b_0 b_1 ...>`.
    pub fn product_state(bits: &[u8]) -> Self {
        let tensors = bits
            .iter()
            .map(|&b| {
                let mut t = DenseTensor::zeros(&[2, 1, 1]);
                t.set(&[b as usize & 1, 0, 0], C64::new(1.0, 0.0));
                t
            })
            .collect();
        Self {
            tensors,
            form: CanonicalForm::Left,
        }
    }

    /// Product of single-qubit states `(α_k, β_k)`.
    pub fn from_product(amps: &[[C64; 2]]) -> Self {
        let tensors = amps
            .iter()
            .map(|a| DenseTensor::new(vec![2, 1, 1], a.to_vec()).expect("2x1x1"))
            .collect();
        Self {
            tensors,
            form: CanonicalForm::None,
        }
    }

    /// Exact MPS of a dense `2^n` vector by successive SVDs.
    pub fn from_dense(v: &[C64], cutoff: f64) -> Result<Self> {
        let n = v.len().trailing_zeros() as usize;
        if v.len() != 1 << n || n == 0 {
            return Err(Error::Shape(format!("{} is not a power of two", v.len())));
        }
        let mut tensors = Vec::with_capacity(n);
        let mut rest = DenseTensor::new(vec![1, v.len()], v.to_vec())?;
        for _ in 0..n - 1 {
            let l = rest.shape()[0];
            let right = rest.len() / (2 * l);
            let t = rest.reshape(&[l, 2, right])?;
            let svd = svd_truncated(&t, 2, cutoff, None)?;
            let kdim = svd.rank();
            tensors.push(svd.u.permute(&[1, 0, 2]));
            rest = svd.svdag().reshape(&[kdim, right])?;
        }
        let l = rest.shape()[0];
        tensors.push(rest.reshape(&[l, 2, 1])?.permute(&[1, 0, 2]));
        Ok(Self {
            tensors,
            form: CanonicalForm::Left,
        })
    }

    pub(crate) fn from_parts(tensors: Vec<DenseTensor>, form: CanonicalForm) -> Self {
        Self { tensors, form }
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut Vec<DenseTensor> {
        &mut self.tensors
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

    pub fn into_sites(self) -> Vec<DenseTensor> {
        self.tensors
    }

    pub fn form(&self) -> CanonicalForm {
        self.form
    }

    /// Interior bond dimensions `a_1 .. a_{n-1}`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.n_sites() - 1]
            .iter()
            .map(|t| t.shape()[2])
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Dense statevector (guarded to [`DENSE_LIMIT`] sites).
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        if self.n_sites() > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                what: "dense MPS sites",
                size: self.n_sites(),
                limit: DENSE_LIMIT,
            });
        }
        let mut acc = DenseTensor::scalar(C64::new(1.0, 0.0)).reshape(&[1, 1])?;
        for t in &self.tensors {
            let r = t.shape()[2];
            let x = contract(&acc, t, &[(1, 1)])?;
            let rows = x.len() / r;
            acc = x.reshape(&[rows, r])?;
        }
        Ok(acc.into_data())
    }

    pub fn scale(&mut self, alpha: C64) {
        let k = match self.form {
            CanonicalForm::Mixed(c) => c,
            CanonicalForm::Right => 0,
            _ => self.n_sites() - 1,
        };
        self.tensors[k].scale_mut(alpha);
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(inner(self, self).expect("same chain").re.max(0.0))
    }

    /// Rescales to unit norm. Fails on a zero state.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize a state of norm {}", n)));
        }
        self.scale(C64::new(1.0 / n, 0.0));
        Ok(n)
    }

    /// Left-orthogonalizes every site but the last by QR.
    pub fn left_canonicalize(&mut self) -> Result<()> {
        let n = self.n_sites();
        left_sweep_qr(&mut self.tensors, 0, n - 1)?;
        self.form = CanonicalForm::Left;
        Ok(())
    }

    /// Right-orthogonalizes every site but the first by LQ.
    pub fn right_canonicalize(&mut self) -> Result<()> {
        let n = self.n_sites();
        right_sweep_lq(&mut self.tensors, 0, n - 1)?;
        self.form = CanonicalForm::Right;
        Ok(())
    }

    /// Mixed-canonical form with orthogonality center at `center`.
    pub fn canonicalize_to(&mut self, center: usize) -> Result<()> {
        if center >= self.n_sites() {
            return Err(Error::OutOfRange(format!("center {} of {}", center, self.n_sites())));
        }
        left_sweep_qr(&mut self.tensors, 0, center)?;
        let n = self.n_sites();
        right_sweep_lq(&mut self.tensors, center, n - 1)?;
        self.form = CanonicalForm::Mixed(center);
        Ok(())
    }

    /// Right-canonicalizes, then truncates left to right. Returns the largest
    /// discarded weight; the result is left-canonical.
    pub fn compress(&mut self, cutoff: f64, max_bond: Option<usize>) -> Result<f64> {
        let n = self.n_sites();
        right_sweep_lq(&mut self.tensors, 0, n - 1)?;
        let w = left_sweep_svd(&mut self.tensors, 0, n - 1, cutoff, max_bond)?;
        self.form = CanonicalForm::Left;
        Ok(w)
    }

    /// Largest deviation from the left isometry condition over sites `0..n-1`.
    pub fn left_isometry_error(&self) -> f64 {
        let n = self.n_sites();
        self.tensors[..n - 1]
            .iter()
            .map(|t| left_isometry_error(t))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn left_isometry_error(t: &DenseTensor) -> f64 {
    let r = t.shape()[2];
    let g = contract_conj(t, true, t, false, &[(0, 0), (1, 1)]).expect("same tensor");
    g.max_abs_diff(&DenseTensor::identity(r))
}

pub(crate) fn check_chain(tensors: &[DenseTensor], rank: usize) -> Result<()> {
    if tensors.is_empty() {
        return Err(Error::Shape("empty chain".into()));
    }
    for (k, t) in tensors.iter().enumerate() {
        if t.rank() != rank {
            return Err(Error::Shape(format!("site {} has rank {}, expected {}", k, t.rank(), rank)));
        }
        if !t.is_finite() {
            return Err(Error::Numerical(format!("site {} has non-finite entries", k)));
        }
    }
    let l = rank - 2;
    let r = rank - 1;
    if tensors[0].shape()[l] != 1 || tensors[tensors.len() - 1].shape()[r] != 1 {
        return Err(Error::Shape("boundary bonds must have dimension 1".into()));
    }
    for k in 0..tensors.len() - 1 {
        if tensors[k].shape()[r] != tensors[k + 1].shape()[l] {
            return Err(Error::Shape(format!(
                "bond {} mismatch: {} vs {}",
                k,
                tensors[k].shape()[r],
                tensors[k + 1].shape()[l]
            )));
        }
    }
    Ok(())
}

// Chain helpers work on sites `[phys..., left, right]` of any rank >= 3.

fn bond_first(rank: usize) -> Vec<usize> {
    let mut p = vec![rank - 2];
    p.extend(0..rank - 2);
    p.push(rank - 1);
    p
}

fn bond_restore(rank: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (1..rank - 1).collect();
    p.push(0);
    p.push(rank - 1);
    p
}

/// Absorbs matrix `r` (shape `[k, l]`) into the left bond of `t`.
pub(crate) fn absorb_left(r: &DenseTensor, t: &DenseTensor) -> Result<DenseTensor> {
    let rank = t.rank();
    Ok(contract(r, t, &[(1, rank - 2)])?.permute(&bond_restore(rank)))
}

/// Absorbs matrix `l` (shape `[r, k]`) into the right bond of `t`.
pub(crate) fn absorb_right(t: &DenseTensor, l: &DenseTensor) -> Result<DenseTensor> {
    contract(t, l, &[(t.rank() - 1, 0)])
}

/// QR sweep making sites `from..to` left-orthogonal; the remainder moves into site `to`.
pub(crate) fn left_sweep_qr(tensors: &mut [DenseTensor], from: usize, to: usize) -> Result<()> {
    for k in from..to {
        let rank = tensors[k].rank();
        let t = tensors[k].permute(&bond_first(rank));
        let (q, r) = qr(&t, rank - 1)?;
        tensors[k] = q.permute(&bond_restore(rank));
        tensors[k + 1] = absorb_left(&r, &tensors[k + 1])?;
    }
    Ok(())
}

/// LQ sweep making sites `from+1..=to` right-orthogonal; the remainder moves into site `from`.
pub(crate) fn right_sweep_lq(tensors: &mut [DenseTensor], from: usize, to: usize) -> Result<()> {
    let mut k = to;
    while k > from {
        let rank = tensors[k].rank();
        let t = tensors[k].permute(&bond_first(rank));
        let (l, q) = lq(&t, 1)?;
        tensors[k] = q.permute(&bond_restore(rank));
        tensors[k - 1] = absorb_right(&tensors[k - 1], &l)?;
        k -= 1;
    }
    Ok(())
}

/// SVD sweep truncating bonds `from..to`; sites right of each cut must be right-orthogonal.
pub(crate) fn left_sweep_svd(
    tensors: &mut [DenseTensor],
    from: usize,
    to: usize,
    cutoff: f64,
    max_bond: Option<usize>,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in from..to {
        let rank = tensors[k].rank();
        let t = tensors[k].permute(&bond_first(rank));
        let svd = svd_truncated(&t, rank - 1, cutoff, max_bond)?;
        worst = worst.max(svd.discarded_weight);
        tensors[k] = svd.u.permute(&bond_restore(rank));
        tensors[k + 1] = absorb_left(&svd.svdag(), &tensors[k + 1])?;
    }
    Ok(worst)
}

/// `<bra|ket>` by left-to-right transfer contraction.
pub fn inner(bra: &MatrixProductState, ket: &MatrixProductState) -> Result<C64> {
    if bra.n_sites() != ket.n_sites() {
        return Err(Error::SiteMismatch {
            left: bra.n_sites(),
            right: ket.n_sites(),
        });
    }
    let mut env = DenseTensor::scalar(C64::new(1.0, 0.0)).reshape(&[1, 1])?;
    for (b, k) in bra.tensors.iter().zip(&ket.tensors) {
        if b.shape()[0] != k.shape()[0] {
            return Err(Error::Shape("physical dimensions differ".into()));
        }
        let x = contract(&env, k, &[(1, 1)])?; // [lb, p, rk]
        env = contract_conj(b, true, &x, false, &[(0, 1), (1, 0)])?; // [rb, rk]
    }
    Ok(env.data()[0])
}

/// Direct sum: represents `|x> + |y>` with block-diagonal interior tensors.
pub fn add(x: &MatrixProductState, y: &MatrixProductState) -> Result<MatrixProductState> {
    let n = x.n_sites();
    if n != y.n_sites() {
        return Err(Error::SiteMismatch {
            left: n,
            right: y.n_sites(),
        });
    }
    if n == 1 {
        return MatrixProductState::new(vec![x.tensors[0].add(&y.tensors[0])?]);
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let a = &x.tensors[k];
        let b = &y.tensors[k];
        let (p, la, ra) = (a.shape()[0], a.shape()[1], a.shape()[2]);
        let (lb, rb) = (b.shape()[1], b.shape()[2]);
        let first = k == 0;
        let last = k == n - 1;
        let l = if first { 1 } else { la + lb };
        let r = if last { 1 } else { ra + rb };
        let mut t = DenseTensor::zeros(&[p, l, r]);
        for s in 0..p {
            for i in 0..la {
                for j in 0..ra {
                    t.set(&[s, i, j], a.get(&[s, i, j]));
                }
            }
            let (l0, r0) = (if first { 0 } else { la }, if last { 0 } else { ra });
            for i in 0..lb {
                for j in 0..rb {
                    t.set(&[s, l0 + i, r0 + j], b.get(&[s, i, j]));
                }
            }
        }
        out.push(t);
    }
    MatrixProductState::new(out)
}

/// `|bit> ⊗ |x>` with the new qubit as site 0.
pub fn attach_ancilla(x: &MatrixProductState, bit: u8) -> MatrixProductState {
    let mut a = DenseTensor::zeros(&[2, 1, 1]);
    a.set(&[(bit & 1) as usize, 0, 0], C64::new(1.0, 0.0));
    let mut tensors = Vec::with_capacity(x.n_sites() + 1);
    tensors.push(a);
    tensors.extend(x.tensors.iter().cloned());
    MatrixProductState {
        tensors,
        form: CanonicalForm::None,
    }
}

/// Normalized, left-canonical `(|0>|ground> + |1>|excited>)/√2` on `n + 1` sites.
pub fn build_superposition(ground: &MatrixProductState, excited: &MatrixProductState) -> Result<MatrixProductState> {
    let mut s = add(&attach_ancilla(ground, 0), &attach_ancilla(excited, 1))?;
    s.compress(LOSSLESS_CUTOFF, None)?;
    let last = s.n_sites() - 1;
    let n = s.tensors[last].norm();
    if !(n > 0.0) {
        return Err(Error::Numerical("superposition has zero norm".into()));
    }
    s.tensors[last].scale_mut(C64::new(1.0 / n, 0.0));
    Ok(s)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::Rng;

    pub fn random_mps(n: usize, bond: usize, seed: u64) -> MatrixProductState {
        let mut rng = Rng::new(seed);
        let mut tensors = Vec::new();
        for k in 0..n {
            let l = if k == 0 { 1 } else { bond.min(1 << k).min(1 << (n - k)) };
            let r = if k == n - 1 { 1 } else { bond.min(1 << (k + 1)).min(1 << (n - k - 1)) };
            tensors.push(DenseTensor::from_fn(&[2, l, r], |_| rng.complex_normal()));
        }
        MatrixProductState::new(tensors).unwrap()
    }

    fn dot(a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    #[test]
    fn normalized_self_overlap() {
        let mut x = random_mps(5, 3, 1);
        x.normalize().unwrap();
        assert!((inner(&x, &x).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_basis_states() {
        let a = MatrixProductState::product_state(&[0, 0]);
        let b = MatrixProductState::product_state(&[0, 1]);
        assert_eq!(inner(&a, &b).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn inner_matches_dense() {
        let x = random_mps(6, 4, 2);
        let y = random_mps(6, 3, 3);
        let want = dot(&x.to_dense().unwrap(), &y.to_dense().unwrap());
        let got = inner(&x, &y).unwrap();
        assert!((want - got).norm() < 1e-12 * want.norm().max(1.0));
    }

    #[test]
    fn inner_site_mismatch() {
        let x = random_mps(3, 2, 2);
        let y = random_mps(4, 2, 3);
        assert!(matches!(inner(&x, &y), Err(Error::SiteMismatch { .. })));
    }

    #[test]
    fn add_single_qubits() {
        let mut s = add(&MatrixProductState::product_state(&[0]), &MatrixProductState::product_state(&[1])).unwrap();
        s.normalize().unwrap();
        let d = s.to_dense().unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((d[0].re - h).abs() < 1e-14 && (d[1].re - h).abs() < 1e-14);
    }

    #[test]
    fn add_negation_cancels() {
        let x = random_mps(4, 2, 4);
        let mut y = x.clone();
        y.scale(C64::new(-1.0, 0.0));
        assert!(add(&x, &y).unwrap().norm() < 1e-12);
    }

    #[test]
    fn add_matches_dense_and_sums_bonds() {
        let x = random_mps(5, 2, 5);
        let y = random_mps(5, 3, 6);
        let s = add(&x, &y).unwrap();
        let want: Vec<C64> = x
            .to_dense()
            .unwrap()
            .iter()
            .zip(y.to_dense().unwrap())
            .map(|(a, b)| a + b)
            .collect();
        let got = s.to_dense().unwrap();
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).norm() < 1e-12);
        }
        let bonds: Vec<usize> = x.bond_dims().iter().zip(y.bond_dims()).map(|(a, b)| a + b).collect();
        assert_eq!(s.bond_dims(), bonds);
    }

    #[test]
    fn ancilla_prepends_qubit() {
        let x = random_mps(4, 3, 7);
        let a0 = attach_ancilla(&x, 0);
        let a1 = attach_ancilla(&x, 1);
        assert_eq!(inner(&a0, &a1).unwrap(), C64::new(0.0, 0.0));
        let d = a0.to_dense().unwrap();
        let xd = x.to_dense().unwrap();
        for i in 0..16 {
            assert!((d[i] - xd[i]).norm() < 1e-14);
            assert_eq!(d[16 + i], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn superposition_of_basis_states() {
        let g = MatrixProductState::product_state(&[0, 0]);
        let e = MatrixProductState::product_state(&[1, 1]);
        let s = build_superposition(&g, &e).unwrap();
        let d = s.to_dense().unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((d[0].norm() - h).abs() < 1e-12 && (d[7].norm() - h).abs() < 1e-12);
        assert!(s.left_isometry_error() < 1e-10);
    }

    #[test]
    fn superposition_of_identical_states() {
        let mut g = random_mps(3, 2, 8);
        g.normalize().unwrap();
        let s = build_superposition(&g, &g).unwrap();
        let ov = inner(&attach_ancilla(&g, 0), &s).unwrap();
        assert!((ov.norm() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn canonical_forms_preserve_state() {
        let x = random_mps(6, 4, 9);
        let reference = random_mps(6, 2, 10);
        let before = inner(&reference, &x).unwrap();
        for center in [0, 2, 5] {
            let mut y = x.clone();
            y.canonicalize_to(center).unwrap();
            let after = inner(&reference, &y).unwrap();
            assert!((before - after).norm() < 1e-10 * before.norm().max(1.0));
        }
        let mut y = x.clone();
        y.left_canonicalize().unwrap();
        assert!(y.left_isometry_error() < 1e-10);
    }

    #[test]
    fn dense_round_trip() {
        let x = random_mps(7, 5, 11);
        let d = x.to_dense().unwrap();
        let y = MatrixProductState::from_dense(&d, 0.0).unwrap();
        let d2 = y.to_dense().unwrap();
        for (a, b) in d.iter().zip(&d2) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
