//! Dense complex tensors.
//!
//! Data is stored row-major: the last axis varies fastest. Every module in the
//! crate relies on this linearization, including the serialized containers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero-sized axis in {:?}", shape)));
        }
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                count,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let count = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![C64::new(0.0, 0.0); count],
        }
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// `n x n` identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = C64::new(1.0, 0.0);
        }
        t
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let count: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn from_real(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(shape.to_vec(), values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[k]);
            off = off * self.shape[k] + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Axis permutation: axis `k` of the result is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let rank = self.shape.len();
        assert_eq!(perm.len(), rank, "permutation rank mismatch");
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return self.clone();
        }
        let old_strides = strides_of(&self.shape);
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        if rank == 0 {
            return self.clone();
        }
        let last = rank - 1;
        let inner_len = new_shape[last];
        let inner_stride = src_strides[last];
        let outer_count = self.data.len() / inner_len;
        let mut idx = vec![0usize; rank];
        let mut base = 0usize;
        for _ in 0..outer_count {
            let mut off = base;
            for _ in 0..inner_len {
                out.push(self.data[off]);
                off += inner_stride;
            }
            // advance the outer odometer (axes 0..last)
            let mut ax = last;
            while ax > 0 {
                ax -= 1;
                idx[ax] += 1;
                base += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                base -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Self {
            shape: new_shape,
            data: out,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * alpha).collect(),
        }
    }

    pub fn scale_mut(&mut self, alpha: C64) {
        for z in &mut self.data {
            *z *= alpha;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sqr())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "elementwise shapes differ: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            s => Err(Error::Shape(format!("expected a matrix, got shape {:?}", s))),
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        contract(self, other, &[(1, 0)])
    }

    /// Conjugate transpose of a rank-2 tensor.
    pub fn adjoint(&self) -> Result<Self> {
        self.matrix_dims()?;
        Ok(self.permute(&[1, 0]).conj())
    }

    pub fn trace(&self) -> Result<C64> {
        let (r, c) = self.matrix_dims()?;
        if r != c {
            return Err(Error::Shape(format!("trace of non-square {}x{}", r, c)));
        }
        Ok((0..r).map(|i| self.data[i * c + i]).sum())
    }

    /// Kronecker product of two matrices; `self` indexes the most significant block.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let (r1, c1) = self.matrix_dims()?;
        let (r2, c2) = other.matrix_dims()?;
        let mut out = Self::zeros(&[r1 * r2, c1 * c2]);
        let cols = c1 * c2;
        for i1 in 0..r1 {
            for j1 in 0..c1 {
                let a = self.data[i1 * c1 + j1];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..r2 {
                    for j2 in 0..c2 {
                        out.data[(i1 * r2 + i2) * cols + j1 * c2 + j2] =
                            a * other.data[i2 * c2 + j2];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Sum over the diagonal of axes `a` and `b`, removing both.
    pub fn partial_trace(&self, a: usize, b: usize) -> Result<Self> {
        if a == b || a >= self.rank() || b >= self.rank() || self.shape[a] != self.shape[b] {
            return Err(Error::Shape(format!(
                "bad partial trace axes ({}, {}) on {:?}",
                a, b, self.shape
            )));
        }
        let rest: Vec<usize> = (0..self.rank()).filter(|&k| k != a && k != b).collect();
        let mut perm = rest.clone();
        perm.push(a);
        perm.push(b);
        let p = self.permute(&perm);
        let d = self.shape[a];
        let out_shape: Vec<usize> = rest.iter().map(|&k| self.shape[k]).collect();
        let outer: usize = out_shape.iter().product();
        let mut data = Vec::with_capacity(outer);
        for o in 0..outer {
            let base = o * d * d;
            data.push((0..d).map(|i| p.data[base + i * d + i]).sum());
        }
        Ok(Self {
            shape: out_shape,
            data,
        })
    }
}

/// Row-major complex matrix product `out = op(a) * op(b)` with `a: m x k`, `b: k x n`.
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[C64],
    conj_a: bool,
    b: &[C64],
    conj_b: bool,
) -> Vec<C64> {
    use matrixmultiply::CGemmOption;
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    let a_conj: Vec<C64>;
    let a = if conj_a {
        a_conj = a.iter().map(|z| z.conj()).collect();
        &a_conj[..]
    } else {
        a
    };
    let b_conj: Vec<C64>;
    let b = if conj_b {
        b_conj = b.iter().map(|z| z.conj()).collect();
        &b_conj[..]
    } else {
        b
    };
    // SAFETY: Complex<f64> is repr(C) with (re, im) layout, identical to [f64; 2];
    // the slices cover exactly m*k, k*n and m*n elements with row-major strides.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
    out
}

/// Contract `a` and `b` over the listed `(a_axis, b_axis)` pairs.
///
/// Remaining axes are ordered: free axes of `a` (in order), then free axes of `b`.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    contract_conj(a, false, b, false, pairs)
}

/// Same as [`contract`], optionally conjugating either operand on the fly.
pub fn contract_conj(
    a: &DenseTensor,
    conj_a: bool,
    b: &DenseTensor,
    conj_b: bool,
    pairs: &[(usize, usize)],
) -> Result<DenseTensor> {
    let ra = a.rank();
    let rb = b.rank();
    let mut used_a = vec![false; ra];
    let mut used_b = vec![false; rb];
    for &(ia, ib) in pairs {
        if ia >= ra || ib >= rb || used_a[ia] || used_b[ib] {
            return Err(Error::Shape(format!("invalid contraction pair ({}, {})", ia, ib)));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Shape(format!(
                "contracted dimensions differ: a[{}]={} vs b[{}]={}",
                ia, a.shape[ia], ib, b.shape[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..ra).filter(|&k| !used_a[k]).collect();
    let free_b: Vec<usize> = (0..rb).filter(|&k| !used_b[k]).collect();
    let mut perm_a = free_a.clone();
    perm_a.extend(pairs.iter().map(|p| p.0));
    let mut perm_b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    perm_b.extend(free_b.iter().copied());

    let m: usize = free_a.iter().map(|&k| a.shape[k]).product();
    let kdim: usize = pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&k| b.shape[k]).product();

    let ap = a.permute(&perm_a);
    let bp = b.permute(&perm_b);
    let data = gemm(m, kdim, n, &ap.data, conj_a, &bp.data, conj_b);
    let mut shape: Vec<usize> = free_a.iter().map(|&k| a.shape[k]).collect();
    shape.extend(free_b.iter().map(|&k| b.shape[k]));
    Ok(DenseTensor { shape, data })
}

/// A tensor whose axes carry network labels; shared labels are contracted.
#[derive(Clone, Debug)]
pub struct LabeledTensor {
    labels: Vec<u32>,
    tensor: DenseTensor,
}

impl LabeledTensor {
    /// Wraps `tensor`; repeated labels are traced out immediately.
    pub fn new(labels: Vec<u32>, tensor: DenseTensor) -> Result<Self> {
        if labels.len() != tensor.rank() {
            return Err(Error::Shape(format!(
                "{} labels for a rank-{} tensor",
                labels.len(),
                tensor.rank()
            )));
        }
        let mut labels = labels;
        let mut tensor = tensor;
        loop {
            let mut dup = None;
            'outer: for i in 0..labels.len() {
                for j in i + 1..labels.len() {
                    if labels[i] == labels[j] {
                        dup = Some((i, j));
                        break 'outer;
                    }
                }
            }
            match dup {
                Some((i, j)) => {
                    tensor = tensor.partial_trace(i, j)?;
                    labels = labels
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != i && k != j)
                        .map(|(_, &l)| l)
                        .collect();
                }
                None => break,
            }
        }
        Ok(Self { labels, tensor })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    /// Contract every shared label. Returns the result and the multiply-add count.
    pub fn contract(&self, other: &Self) -> Result<(Self, u64)> {
        let mut pairs = Vec::new();
        for (ia, la) in self.labels.iter().enumerate() {
            if let Some(ib) = other.labels.iter().position(|lb| lb == la) {
                pairs.push((ia, ib));
            }
        }
        let m: u64 = self.tensor.len() as u64;
        let n: u64 = other.tensor.len() as u64;
        let k: u64 = pairs.iter().map(|p| self.tensor.shape[p.0] as u64).product();
        let flops = m * n / k.max(1);
        let t = contract(&self.tensor, &other.tensor, &pairs)?;
        let mut labels: Vec<u32> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(i, _)| !pairs.iter().any(|p| p.0 == *i))
            .map(|(_, &l)| l)
            .collect();
        labels.extend(
            other
                .labels
                .iter()
                .enumerate()
                .filter(|(i, _)| !pairs.iter().any(|p| p.1 == *i))
                .map(|(_, &l)| l),
        );
        Ok((Self { labels, tensor: t }, flops))
    }

    /// The underlying tensor with axes ordered as `order`.
    pub fn ordered(&self, order: &[u32]) -> Result<DenseTensor> {
        if order.len() != self.labels.len() {
            return Err(Error::Shape(format!(
                "requested {} labels from a tensor with {}",
                order.len(),
                self.labels.len()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for l in order {
            match self.labels.iter().position(|x| x == l) {
                Some(p) => perm.push(p),
                None => return Err(Error::Shape(format!("label {} not present", l))),
            }
        }
        Ok(self.tensor.permute(&perm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = Rng::new(seed);
        DenseTensor::from_fn(shape, |_| rng.complex_normal())
    }

    #[test]
    fn identity_acts_on_vector() {
        let v = DenseTensor::from_real(&[2], &[1.0, 0.0]).unwrap();
        let r = contract(&DenseTensor::identity(2), &v, &[(1, 0)]).unwrap();
        assert_eq!(r.data(), &[c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn pauli_x_squares_to_identity() {
        let x = DenseTensor::from_real(&[2, 2], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(x.matmul(&x).unwrap(), DenseTensor::identity(2));
    }

    #[test]
    fn two_axis_contraction_matches_loops() {
        let a = random_tensor(&[3, 4, 2], 1);
        let b = random_tensor(&[4, 2, 5], 2);
        let r = contract(&a, &b, &[(1, 0), (2, 1)]).unwrap();
        assert_eq!(r.shape(), &[3, 5]);
        for i in 0..3 {
            for l in 0..5 {
                let mut acc = c(0.0, 0.0);
                for j in 0..4 {
                    for k in 0..2 {
                        acc += a.get(&[i, j, k]) * b.get(&[j, k, l]);
                    }
                }
                assert!((acc - r.get(&[i, l])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contraction_is_bilinear() {
        let a = random_tensor(&[3, 4], 5);
        let b = random_tensor(&[4, 2], 6);
        let base = contract(&a, &b, &[(1, 0)]).unwrap();
        for alpha in [c(2.0, 0.0), c(-0.5, 1.5), c(0.0, -3.0)] {
            let scaled = contract(&a.scale(alpha), &b, &[(1, 0)]).unwrap();
            assert!(scaled.max_abs_diff(&base.scale(alpha)) < 1e-12);
        }
    }

    #[test]
    fn mismatched_contraction_is_a_shape_error() {
        let a = DenseTensor::zeros(&[2, 3]);
        let b = DenseTensor::zeros(&[2, 3]);
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::Shape(_))));
    }

    #[test]
    fn permute_matches_index_mapping() {
        let a = random_tensor(&[2, 3, 4], 9);
        let p = a.permute(&[2, 0, 1]);
        assert_eq!(p.shape(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(p.get(&[k, i, j]), a.get(&[i, j, k]));
                }
            }
        }
    }

    #[test]
    fn conjugated_contraction() {
        let a = random_tensor(&[3, 3], 11);
        let b = random_tensor(&[3, 2], 12);
        let r1 = contract_conj(&a, true, &b, false, &[(1, 0)]).unwrap();
        let r2 = contract(&a.conj(), &b, &[(1, 0)]).unwrap();
        assert!(r1.max_abs_diff(&r2) < 1e-14);
    }

    #[test]
    fn labeled_contraction_and_trace() {
        let a = random_tensor(&[2, 3, 3], 3);
        let t = LabeledTensor::new(alloc::vec![7, 1, 1], a.clone()).unwrap();
        assert_eq!(t.labels(), &[7]);
        for i in 0..2 {
            let want: C64 = (0..3).map(|j| a.get(&[i, j, j])).sum();
            assert!((t.tensor().data()[i] - want).norm() < 1e-14);
        }
        let x = LabeledTensor::new(alloc::vec![1, 2], random_tensor(&[2, 3], 4)).unwrap();
        let y = LabeledTensor::new(alloc::vec![3, 2], random_tensor(&[5, 3], 5)).unwrap();
        let (z, flops) = x.contract(&y).unwrap();
        assert_eq!(z.labels(), &[1, 3]);
        assert_eq!(flops, 2 * 3 * 5);
        let direct = contract(x.tensor(), y.tensor(), &[(1, 1)]).unwrap();
        assert!(z.tensor().max_abs_diff(&direct) < 1e-14);
    }
}
