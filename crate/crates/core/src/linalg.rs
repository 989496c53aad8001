//! Matrix factorizations on [`DenseTensor`]s, backed by nalgebra.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::DenseTensor;
use crate::C64;

/// Truncated singular value decomposition.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Shape `[row dims..., k]`, orthonormal columns.
    pub u: DenseTensor,
    /// Descending, non-negative.
    pub s: Vec<f64>,
    /// Shape `[k, col dims...]`, orthonormal rows.
    pub vdag: DenseTensor,
    /// Dropped squared weight relative to the total squared weight.
    pub discarded_weight: f64,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `u · diag(s)` with the singular index last.
    pub fn us(&self) -> DenseTensor {
        scale_last_axis(&self.u, &self.s)
    }

    /// `diag(s) · vdag` with the singular index first.
    pub fn svdag(&self) -> DenseTensor {
        let k = self.s.len();
        let cols = self.vdag.len() / k;
        let mut out = self.vdag.clone();
        for (i, row) in out.data_mut().chunks_mut(cols).enumerate() {
            for z in row {
                *z *= self.s[i];
            }
        }
        out
    }
}

fn scale_last_axis(t: &DenseTensor, s: &[f64]) -> DenseTensor {
    let k = s.len();
    let mut out = t.clone();
    for row in out.data_mut().chunks_mut(k) {
        for (z, &w) in row.iter_mut().zip(s) {
            *z *= w;
        }
    }
    out
}

pub(crate) fn to_matrix(data: &[C64], rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(rows, cols, data)
}

pub(crate) fn from_matrix(m: &DMatrix<C64>) -> Vec<C64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Full thin SVD of a row-major `rows x cols` matrix, sorted descending.
pub(crate) fn thin_svd(data: &[C64], rows: usize, cols: usize) -> Result<(Vec<C64>, Vec<f64>, Vec<C64>)> {
    let m = to_matrix(data, rows, cols);
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entries".into()));
    }
    let (u, s, v) = if rows >= cols {
        jacobi_svd_tall(m)?
    } else {
        let (u, s, v) = jacobi_svd_tall(m.adjoint())?;
        (v, s, u)
    };
    let k = s.len();
    let mut ud = Vec::with_capacity(rows * k);
    for r in 0..rows {
        for i in 0..k {
            ud.push(u[(r, i)]);
        }
    }
    let mut vd = Vec::with_capacity(k * cols);
    for i in 0..k {
        for c in 0..cols {
            vd.push(v[(c, i)].conj());
        }
    }
    Ok((ud, s, vd))
}

const JACOBI_SWEEPS: usize = 80;
const JACOBI_TOL: f64 = 1e-14;

/// One-sided Jacobi SVD of a tall matrix, preconditioned by a QR step.
/// Returns `(u, s, v)` with `a = u diag(s) v^H`, `s` descending.
fn jacobi_svd_tall(a: DMatrix<C64>) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let n = a.ncols();
    let qr = a.qr();
    let q = qr.q();
    let mut w = qr.r();
    let mut v = DMatrix::<C64>::identity(n, n);
    let mut converged = n < 2;
    let tiny = 1e-32 * w.norm_squared();
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for r in p + 1..n {
                let alpha: f64 = w.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w.column(r).iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = w.column(p).iter().zip(w.column(r).iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= JACOBI_TOL * libm::sqrt(alpha * beta) || alpha.min(beta) <= tiny {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut w, p, r, c, s, phase);
                rotate(&mut v, p, r, c, s, phase);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!("Jacobi SVD of {}x{} did not converge", q.nrows(), n)));
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(core::cmp::Ordering::Equal));
    let ws = DMatrix::from_fn(n, n, |i, j| w[(i, order[j])]);
    let vs = DMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    // orthonormal left vectors, including the null directions
    let qr2 = ws.qr();
    let mut ur = qr2.q();
    let r2 = qr2.r();
    for j in 0..n {
        let d = r2[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for i in 0..n {
                ur[(i, j)] *= ph;
            }
        }
    }
    Ok((q * ur, s, vs))
}

/// Applies the complex Jacobi rotation to columns `p` and `r` in place.
fn rotate(m: &mut DMatrix<C64>, p: usize, r: usize, c: f64, s: f64, phase: C64) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, r)] * phase.conj();
        m[(i, p)] = x * c - y * s;
        m[(i, r)] = (x * s + y * c) * phase;
    }
}

/// SVD of `t` viewed as a matrix whose rows are the first `split` axes.
///
/// Singular values are dropped from the tail while the dropped squared weight
/// stays within `cutoff` times the total; at most `max_bond` are kept and at
/// least one always is.
pub fn svd_truncated(
    t: &DenseTensor,
    split: usize,
    cutoff: f64,
    max_bond: Option<usize>,
) -> Result<SvdResult> {
    let shape = t.shape();
    if split == 0 || split >= shape.len() {
        return Err(Error::Shape(format!(
            "split {} does not partition rank {}",
            split,
            shape.len()
        )));
    }
    if let Some(0) = max_bond {
        return Err(Error::InvalidArgument("max_bond must be positive".into()));
    }
    let rows: usize = shape[..split].iter().product();
    let cols: usize = shape[split..].iter().product();
    let (u, s, vd) = thin_svd(t.data(), rows, cols)?;
    let full = s.len();
    let total: f64 = s.iter().map(|x| x * x).sum();
    let mut keep = full;
    if total > 0.0 {
        let mut dropped = 0.0;
        while keep > 1 {
            let w = s[keep - 1] * s[keep - 1];
            if (dropped + w) / total <= cutoff {
                dropped += w;
                keep -= 1;
            } else {
                break;
            }
        }
    } else {
        keep = 1;
    }
    if let Some(mb) = max_bond {
        keep = keep.min(mb);
    }
    let discarded: f64 = s[keep..].iter().map(|x| x * x).sum();
    let discarded_weight = if total > 0.0 { discarded / total } else { 0.0 };

    let mut u_data = Vec::with_capacity(rows * keep);
    for r in 0..rows {
        u_data.extend_from_slice(&u[r * full..r * full + keep]);
    }
    let vd_data = vd[..keep * cols].to_vec();
    let mut u_shape = shape[..split].to_vec();
    u_shape.push(keep);
    let mut v_shape = alloc::vec![keep];
    v_shape.extend_from_slice(&shape[split..]);
    Ok(SvdResult {
        u: DenseTensor::new(u_shape, u_data)?,
        s: s[..keep].to_vec(),
        vdag: DenseTensor::new(v_shape, vd_data)?,
        discarded_weight,
    })
}

/// Thin QR of `t` viewed as a matrix with the first `split` axes as rows.
///
/// Returns `q` of shape `[row dims..., k]` and `r` of shape `[k, col dims...]`.
pub fn qr(t: &DenseTensor, split: usize) -> Result<(DenseTensor, DenseTensor)> {
    let shape = t.shape();
    if split == 0 || split >= shape.len() {
        return Err(Error::Shape(format!("split {} does not partition rank {}", split, shape.len())));
    }
    let rows: usize = shape[..split].iter().product();
    let cols: usize = shape[split..].iter().product();
    let m = to_matrix(t.data(), rows, cols);
    let dec = m.qr();
    let q = dec.q();
    let r = dec.r();
    let k = q.ncols();
    let mut q_shape = shape[..split].to_vec();
    q_shape.push(k);
    let mut r_shape = alloc::vec![k];
    r_shape.extend_from_slice(&shape[split..]);
    Ok((
        DenseTensor::new(q_shape, from_matrix(&q))?,
        DenseTensor::new(r_shape, from_matrix(&r))?,
    ))
}

/// Thin LQ of `t` viewed as a matrix with the first `split` axes as rows.
///
/// Returns `l` of shape `[row dims..., k]` and `q` of shape `[k, col dims...]`
/// with orthonormal rows.
pub fn lq(t: &DenseTensor, split: usize) -> Result<(DenseTensor, DenseTensor)> {
    let shape = t.shape();
    if split == 0 || split >= shape.len() {
        return Err(Error::Shape(format!("split {} does not partition rank {}", split, shape.len())));
    }
    let rows: usize = shape[..split].iter().product();
    let cols: usize = shape[split..].iter().product();
    let m = to_matrix(t.data(), rows, cols).adjoint();
    let dec = m.qr();
    let q = dec.q().adjoint();
    let l = dec.r().adjoint();
    let k = q.nrows();
    let mut l_shape = shape[..split].to_vec();
    l_shape.push(k);
    let mut q_shape = alloc::vec![k];
    q_shape.extend_from_slice(&shape[split..]);
    Ok((
        DenseTensor::new(l_shape, from_matrix(&l))?,
        DenseTensor::new(q_shape, from_matrix(&q))?,
    ))
}

fn square_dim(g: &DenseTensor) -> Result<usize> {
    let n2 = g.len();
    let n = libm::round(libm::sqrt(n2 as f64)) as usize;
    if n * n != n2 {
        return Err(Error::Shape(format!("{:?} is not a square matrix", g.shape())));
    }
    Ok(n)
}

/// Unitary polar factor `U V†` of `g = U S V†`, returned with `g`'s shape.
///
/// Any tensor with a square number of entries is read as an `n x n` matrix.
pub fn polar_unitary(g: &DenseTensor) -> Result<DenseTensor> {
    let n = square_dim(g)?;
    let (u, s, vd) = thin_svd(g.data(), n, n)?;
    if s.first().map_or(true, |&x| x <= f64::MIN_POSITIVE) {
        return Err(Error::ZeroMatrix);
    }
    let data = crate::tensor::gemm(n, n, n, &u, false, &vd, false);
    DenseTensor::new(g.shape().to_vec(), data)
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn haar_unitary(dim: usize, rng: &mut Rng) -> DenseTensor {
    let z = DenseTensor::from_fn(&[dim, dim], |_| rng.complex_normal());
    phase_fixed_q(&z)
}

fn phase_fixed_q(a: &DenseTensor) -> DenseTensor {
    let n = a.shape()[0];
    let dec = to_matrix(a.data(), n, n).qr();
    let mut q = dec.q();
    let r = dec.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    DenseTensor::new(alloc::vec![n, n], from_matrix(&q)).expect("square")
}

/// Unitary obtained from the QR decomposition of `I + scale * W`, with `W`
/// Haar-random. Phases are fixed so the result tends to the identity as
/// `scale` goes to zero; `scale = 0` returns the identity exactly.
pub fn random_near_identity_unitary(dim: usize, scale: f64, seed: u64) -> DenseTensor {
    assert!(dim >= 1, "dimension must be positive");
    assert!(scale >= 0.0, "scale must be non-negative");
    if scale == 0.0 {
        return DenseTensor::identity(dim);
    }
    let mut rng = Rng::new(seed);
    let w = haar_unitary(dim, &mut rng);
    let a = DenseTensor::identity(dim)
        .add(&w.scale(C64::new(scale, 0.0)))
        .expect("same shape");
    phase_fixed_q(&a)
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors as columns.
pub fn eigh(h: &DenseTensor) -> Result<(Vec<f64>, DenseTensor)> {
    let n = square_dim(h)?;
    let m = to_matrix(h.data(), n, n);
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DenseTensor::from_fn(&[n, n], |ix| eig.eigenvectors[(ix[0], order[ix[1]])]);
    Ok((vals, vecs))
}

/// `exp(i * alpha * H)` for Hermitian `H`.
pub fn expm_i_hermitian(h: &DenseTensor, alpha: f64) -> Result<DenseTensor> {
    let (vals, vecs) = eigh(h)?;
    let n = vals.len();
    let mut scaled = vecs.clone();
    for row in scaled.data_mut().chunks_mut(n) {
        for (z, &e) in row.iter_mut().zip(&vals) {
            *z *= C64::from_polar(1.0, alpha * e);
        }
    }
    let data = crate::tensor::gemm(n, n, n, scaled.data(), false, &vecs.adjoint()?.into_data(), false);
    DenseTensor::new(alloc::vec![n, n], data)
}

/// Largest deviation of `u† u` from the identity.
pub fn unitarity_error(u: &DenseTensor) -> f64 {
    let n = u.shape()[0];
    let prod = crate::tensor::contract_conj(u, true, u, false, &[(0, 0)]).expect("square");
    prod.max_abs_diff(&DenseTensor::identity(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::contract;

    fn random(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = Rng::new(seed);
        DenseTensor::from_fn(shape, |_| rng.complex_normal())
    }

    fn re_tr_gdag_q(g: &DenseTensor, q: &DenseTensor) -> f64 {
        g.data().iter().zip(q.data()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    #[test]
    fn identity_svd() {
        let r = svd_truncated(&DenseTensor::identity(2), 1, 1e-12, None).unwrap();
        assert_eq!(r.s.len(), 2);
        assert!((r.s[0] - 1.0).abs() < 1e-14 && (r.s[1] - 1.0).abs() < 1e-14);
        assert_eq!(r.discarded_weight, 0.0);
    }

    #[test]
    fn rank_one_is_exact_with_bond_one() {
        let a = random(&[4], 1);
        let b = random(&[4], 2);
        let t = contract(&a.reshape(&[4, 1]).unwrap(), &b.reshape(&[1, 4]).unwrap(), &[(1, 0)]).unwrap();
        let r = svd_truncated(&t, 1, 0.0, Some(1)).unwrap();
        let back = contract(&r.us(), &r.vdag, &[(1, 0)]).unwrap();
        assert!(back.max_abs_diff(&t) < 1e-12);
        assert!(r.discarded_weight < 1e-28);
    }

    #[test]
    fn bounded_rank_error_matches_tail() {
        let t = random(&[8, 8], 3);
        let full = svd_truncated(&t, 1, 0.0, None).unwrap();
        assert_eq!(full.s.len(), 8);
        // oracle: independent nalgebra singular values
        let mut oracle: Vec<f64> = to_matrix(t.data(), 8, 8).singular_values().iter().copied().collect();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in full.s.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        let r = svd_truncated(&t, 1, 0.0, Some(3)).unwrap();
        let back = contract(&r.us(), &r.vdag, &[(1, 0)]).unwrap();
        let err = t.sub(&back).unwrap().norm_sqr();
        let tail: f64 = oracle[3..].iter().map(|x| x * x).sum();
        assert!((err - tail).abs() < 1e-9 * tail.max(1.0));
        let total: f64 = oracle.iter().map(|x| x * x).sum();
        assert!((r.discarded_weight - tail / total).abs() < 1e-12);
    }

    #[test]
    fn svd_factors_are_isometries() {
        let t = random(&[3, 2, 5], 4);
        let r = svd_truncated(&t, 2, 0.0, None).unwrap();
        let k = r.rank();
        let u = r.u.clone().reshape(&[6, k]).unwrap();
        let v = r.vdag.clone().reshape(&[k, 5]).unwrap();
        let uu = crate::tensor::contract_conj(&u, true, &u, false, &[(0, 0)]).unwrap();
        let vv = crate::tensor::contract_conj(&v, false, &v, true, &[(1, 1)]).unwrap();
        assert!(uu.max_abs_diff(&DenseTensor::identity(k)) < 1e-10);
        assert!(vv.max_abs_diff(&DenseTensor::identity(k)) < 1e-10);
        assert!(r.s.windows(2).all(|w| w[0] >= w[1]) && r.s.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn cutoff_keeps_at_least_one() {
        let t = DenseTensor::zeros(&[3, 3]);
        let r = svd_truncated(&t, 1, 1e-12, None).unwrap();
        assert_eq!(r.rank(), 1);
    }

    #[test]
    fn rank_deficient_complex_svd() {
        let mut rng = Rng::new(1);
        for _ in 0..100 {
            let rows = 1 + rng.below(30);
            let cols = 1 + rng.below(30);
            let rank = 1 + rng.below(rows.min(cols));
            let a = DenseTensor::from_fn(&[rows, rank], |_| rng.complex_normal());
            let b = DenseTensor::from_fn(&[rank, cols], |_| rng.complex_normal());
            let m = a.matmul(&b).unwrap();
            let r = svd_truncated(&m, 1, 1e-20, None).unwrap();
            assert!(r.rank() <= rank);
            let back = r.us().matmul(&r.vdag).unwrap();
            assert!(back.max_abs_diff(&m) < 1e-12 * m.norm());
            let full = thin_svd(m.data(), rows, cols).unwrap();
            let k = full.1.len();
            let u = DenseTensor::new(alloc::vec![rows, k], full.0).unwrap();
            let uu = crate::tensor::contract_conj(&u, true, &u, false, &[(0, 0)]).unwrap();
            assert!(uu.max_abs_diff(&DenseTensor::identity(k)) < 1e-12);
        }
    }

    #[test]
    fn qr_and_lq_reconstruct() {
        let t = random(&[2, 3, 4], 5);
        let (q, r) = qr(&t, 2).unwrap();
        assert!(contract(&q, &r, &[(2, 0)]).unwrap().max_abs_diff(&t) < 1e-12);
        let (l, q2) = lq(&t, 1).unwrap();
        assert!(contract(&l, &q2, &[(1, 0)]).unwrap().max_abs_diff(&t) < 1e-12);
        let qm = q2.reshape(&[2, 12]).unwrap();
        let qq = crate::tensor::contract_conj(&qm, false, &qm, true, &[(1, 1)]).unwrap();
        assert!(qq.max_abs_diff(&DenseTensor::identity(2)) < 1e-12);
    }

    #[test]
    fn polar_of_identity_and_scaled_unitary() {
        let p = polar_unitary(&DenseTensor::identity(4)).unwrap();
        assert!(p.max_abs_diff(&DenseTensor::identity(4)) < 1e-12);
        let mut rng = Rng::new(9);
        let w = haar_unitary(4, &mut rng);
        let p = polar_unitary(&w.scale(C64::new(2.0, 0.0))).unwrap();
        assert!(p.max_abs_diff(&w) < 1e-10);
    }

    #[test]
    fn polar_rejects_zero() {
        assert_eq!(polar_unitary(&DenseTensor::zeros(&[2, 2])), Err(Error::ZeroMatrix));
    }

    #[test]
    fn polar_maximizes_trace_overlap() {
        let g = random(&[4, 4], 17);
        let p = polar_unitary(&g).unwrap();
        assert!(unitarity_error(&p) < 1e-10);
        let best = re_tr_gdag_q(&g, &p);
        let mut rng = Rng::new(18);
        for _ in 0..1000 {
            let q = haar_unitary(4, &mut rng);
            assert!(re_tr_gdag_q(&g, &q) <= best + 1e-12);
        }
    }

    #[test]
    fn near_identity_properties() {
        assert_eq!(random_near_identity_unitary(4, 0.0, 3), DenseTensor::identity(4));
        let u = random_near_identity_unitary(4, 0.1, 7);
        assert!(unitarity_error(&u) < 1e-10);
        assert!(u.sub(&DenseTensor::identity(4)).unwrap().norm() < 1.0);
        assert_eq!(u, random_near_identity_unitary(4, 0.1, 7));
        let tiny = random_near_identity_unitary(4, 1e-9, 7);
        assert!(tiny.max_abs_diff(&DenseTensor::identity(4)) < 1e-8);
    }

    #[test]
    fn eigh_and_exponential() {
        let z = DenseTensor::from_real(&[2, 2], &[1.0, 0.0, 0.0, -1.0]).unwrap();
        let (vals, _) = eigh(&z).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let e = expm_i_hermitian(&z, 0.3).unwrap();
        assert!((e.get(&[0, 0]) - C64::from_polar(1.0, 0.3)).norm() < 1e-14);
        assert!((e.get(&[1, 1]) - C64::from_polar(1.0, -0.3)).norm() < 1e-14);
    }
}
