//! Two-site DMRG for ground states and penalty-based excited states.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{eigh, svd_truncated};
use crate::mpo::MatrixProductOperator;
use crate::mps::{CanonicalForm, MatrixProductState};
use crate::rng::Rng;
use crate::tensor::{contract, contract_conj, DenseTensor};
use crate::C64;

/// Sweep schedule: one entry of `max_bond_per_sweep` per sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct DmrgSchedule {
    pub max_bond_per_sweep: Vec<usize>,
    pub svd_cutoff: f64,
    /// Weight `w` of `w Σ |<below|ψ>|²`; `None` picks ten times the RMS eigenvalue of `H`.
    pub overlap_penalty_weight: Option<f64>,
}

impl DmrgSchedule {
    /// 3 sweeps at bond 10, 12 at 50, 5 at 1000.
    pub fn standard(svd_cutoff: f64) -> Self {
        let mut bonds = vec![10; 3];
        bonds.extend(vec![50; 12]);
        bonds.extend(vec![1000; 5]);
        Self {
            max_bond_per_sweep: bonds,
            svd_cutoff,
            overlap_penalty_weight: None,
        }
    }

    pub fn hubbard() -> Self {
        Self::standard(1e-12)
    }

    pub fn molecular() -> Self {
        Self::standard(1e-8)
    }

    pub fn uniform(n_sweeps: usize, max_bond: usize, svd_cutoff: f64) -> Self {
        Self {
            max_bond_per_sweep: vec![max_bond; n_sweeps],
            svd_cutoff,
            overlap_penalty_weight: None,
        }
    }

    pub fn n_sweeps(&self) -> usize {
        self.max_bond_per_sweep.len()
    }

    fn validate(&self) -> Result<()> {
        if self.max_bond_per_sweep.is_empty() {
            return Err(Error::InvalidArgument("schedule has no sweeps".into()));
        }
        if self.max_bond_per_sweep.iter().any(|&b| b == 0) {
            return Err(Error::InvalidArgument("bond dimensions must be positive".into()));
        }
        if !(self.svd_cutoff > 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff {} must be positive", self.svd_cutoff)));
        }
        if let Some(w) = self.overlap_penalty_weight {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("penalty weight {}", w)));
            }
        }
        Ok(())
    }
}

/// Settings of the local Lanczos eigensolver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanczosConfig {
    pub max_krylov: usize,
    pub restarts: usize,
    pub tol: f64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            max_krylov: 20,
            restarts: 3,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DmrgOutcome {
    pub state: MatrixProductState,
    /// `<ψ|H|ψ>` of the returned normalized state.
    pub energy: f64,
    /// Penalized energy after each sweep.
    pub sweep_energies: Vec<f64>,
    /// `|<below_i|ψ>|` of the returned state.
    pub overlaps: Vec<f64>,
}

/// Ground state of `h`.
pub fn dmrg_ground(h: &MatrixProductOperator, schedule: &DmrgSchedule, seed: u64) -> Result<DmrgOutcome> {
    dmrg_excited(h, &[], schedule, seed)
}

/// Lowest state of `H + w Σ |below_i><below_i|`.
pub fn dmrg_excited(
    h: &MatrixProductOperator,
    below: &[MatrixProductState],
    schedule: &DmrgSchedule,
    seed: u64,
) -> Result<DmrgOutcome> {
    schedule.validate()?;
    let n = h.n_sites();
    if n < 2 {
        return Err(Error::InvalidArgument("DMRG needs at least two sites".into()));
    }
    for (i, b) in below.iter().enumerate() {
        if b.n_sites() != n {
            return Err(Error::SiteMismatch {
                left: n,
                right: b.n_sites(),
            });
        }
        let nb = b.norm();
        if (nb - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("state {} below has norm {}", i, nb)));
        }
    }
    let herm = h.hermiticity_error()?;
    if herm > 1e-8 {
        return Err(Error::NotHermitian(herm));
    }
    let weight = match schedule.overlap_penalty_weight {
        Some(w) => w,
        None => {
            let rms = libm::sqrt(crate::mpo::mpo_inner(h, h)?.re / libm::pow(2.0, n as f64));
            10.0 * rms.max(1.0)
        }
    };

    let mut psi = random_product(n, seed);
    psi.right_canonicalize()?;
    let w = h.sites();
    let one = DenseTensor::from_fn(&[1, 1, 1], |_| C64::new(1.0, 0.0));
    let one2 = DenseTensor::from_fn(&[1, 1], |_| C64::new(1.0, 0.0));

    let mut lh: Vec<DenseTensor> = vec![one.clone(); n + 1];
    let mut rh: Vec<DenseTensor> = vec![one.clone(); n + 1];
    let mut lo: Vec<Vec<DenseTensor>> = vec![vec![one2.clone(); n + 1]; below.len()];
    let mut ro: Vec<Vec<DenseTensor>> = vec![vec![one2.clone(); n + 1]; below.len()];
    for k in (1..n).rev() {
        rh[k] = extend_right_h(&rh[k + 1], &psi.sites()[k], &w[k])?;
        for (j, b) in below.iter().enumerate() {
            ro[j][k] = extend_right_o(&ro[j][k + 1], &b.sites()[k], &psi.sites()[k])?;
        }
    }

    let lanczos = LanczosConfig::default();
    let mut sweep_energies = Vec::with_capacity(schedule.n_sweeps());
    for &chi in &schedule.max_bond_per_sweep {
        for k in 0..n - 1 {
            let theta = optimize_pair(&psi, k, w, &lh[k], &rh[k + 2], below, &lo, &ro, weight, &lanczos)?;
            split_pair(&mut psi, k, &theta, chi, schedule.svd_cutoff, true)?;
            lh[k + 1] = extend_left_h(&lh[k], &psi.sites()[k], &w[k])?;
            for (j, b) in below.iter().enumerate() {
                lo[j][k + 1] = extend_left_o(&lo[j][k], &b.sites()[k], &psi.sites()[k])?;
            }
        }
        for k in (0..n - 1).rev() {
            let theta = optimize_pair(&psi, k, w, &lh[k], &rh[k + 2], below, &lo, &ro, weight, &lanczos)?;
            split_pair(&mut psi, k, &theta, chi, schedule.svd_cutoff, false)?;
            rh[k + 1] = extend_right_h(&rh[k + 2], &psi.sites()[k + 1], &w[k + 1])?;
            for (j, b) in below.iter().enumerate() {
                ro[j][k + 1] = extend_right_o(&ro[j][k + 2], &b.sites()[k + 1], &psi.sites()[k + 1])?;
            }
        }
        let mut e = expectation(&psi, h)?.re;
        for b in below {
            e += weight * crate::mps::inner(b, &psi)?.norm_sqr();
        }
        sweep_energies.push(e);
    }
    let mut state = MatrixProductState::from_parts(psi.into_sites(), CanonicalForm::Mixed(0));
    state.normalize()?;
    let energy = expectation(&state, h)?.re;
    let overlaps = below
        .iter()
        .map(|b| crate::mps::inner(b, &state).map(|z| z.norm()))
        .collect::<Result<Vec<_>>>()?;
    Ok(DmrgOutcome {
        state,
        energy,
        sweep_energies,
        overlaps,
    })
}

/// `<ψ|H|ψ>` (not divided by the norm).
pub fn expectation(psi: &MatrixProductState, h: &MatrixProductOperator) -> Result<C64> {
    if psi.n_sites() != h.n_sites() {
        return Err(Error::SiteMismatch {
            left: psi.n_sites(),
            right: h.n_sites(),
        });
    }
    let mut env = DenseTensor::from_fn(&[1, 1, 1], |_| C64::new(1.0, 0.0));
    for (a, w) in psi.sites().iter().zip(h.sites()) {
        env = extend_left_h(&env, a, w)?;
    }
    Ok(env.data()[0])
}

fn random_product(n: usize, seed: u64) -> MatrixProductState {
    let mut rng = Rng::new(seed);
    let tensors = (0..n)
        .map(|_| {
            let mut t = DenseTensor::from_fn(&[2, 1, 1], |_| rng.complex_normal());
            let nrm = t.norm();
            t.scale_mut(C64::new(1.0 / nrm, 0.0));
            t
        })
        .collect();
    MatrixProductState::from_parts(tensors, CanonicalForm::None)
}

/// `L'[b', w', a'] = Σ L[b, w, a] conj(A[s', b, b']) W[s', s, w, w'] A[s, a, a']`.
fn extend_left_h(l: &DenseTensor, a: &DenseTensor, w: &DenseTensor) -> Result<DenseTensor> {
    let t = contract(l, a, &[(2, 1)])?; // [b, w, s, a']
    let t = contract(&t, w, &[(1, 2), (2, 1)])?; // [b, a', s', w']
    let t = contract_conj(&t, false, a, true, &[(0, 1), (2, 0)])?; // [a', w', b']
    Ok(t.permute(&[2, 1, 0]))
}

/// `R[b, w, a] = Σ conj(A[s', b, b']) W[s', s, w, w'] A[s, a, a'] R'[b', w', a']`.
fn extend_right_h(r: &DenseTensor, a: &DenseTensor, w: &DenseTensor) -> Result<DenseTensor> {
    let t = contract(a, r, &[(2, 2)])?; // [s, a, b', w']
    let t = contract(&t, w, &[(0, 1), (3, 3)])?; // [a, b', s', w]
    let t = contract_conj(&t, false, a, true, &[(1, 2), (2, 0)])?; // [a, w, b]
    Ok(t.permute(&[2, 1, 0]))
}

/// Overlap environment `[bra bond, ket bond]` grown by one site.
fn extend_left_o(l: &DenseTensor, bra: &DenseTensor, ket: &DenseTensor) -> Result<DenseTensor> {
    let t = contract(l, ket, &[(1, 1)])?; // [c, s, a']
    let t = contract_conj(&t, false, bra, true, &[(0, 1), (1, 0)])?; // [a', c']
    Ok(t.permute(&[1, 0]))
}

fn extend_right_o(r: &DenseTensor, bra: &DenseTensor, ket: &DenseTensor) -> Result<DenseTensor> {
    let t = contract(ket, r, &[(2, 1)])?; // [s, a, c']
    let t = contract_conj(&t, false, bra, true, &[(0, 0), (2, 2)])?; // [a, c]
    Ok(t.permute(&[1, 0]))
}

/// Two-site effective Hamiltonian on `θ[s1, s2, a_l, a_r]`.
fn apply_heff(
    theta: &DenseTensor,
    l: &DenseTensor,
    w1: &DenseTensor,
    w2: &DenseTensor,
    r: &DenseTensor,
) -> Result<DenseTensor> {
    let t = contract(l, theta, &[(2, 2)])?; // [b_l, w_l, s1, s2, a_r]
    let t = contract(&t, w1, &[(1, 2), (2, 1)])?; // [b_l, s2, a_r, s1', w_m]
    let t = contract(&t, w2, &[(4, 2), (1, 1)])?; // [b_l, a_r, s1', s2', w_r]
    let t = contract(&t, r, &[(4, 1), (1, 2)])?; // [b_l, s1', s2', b_r]
    Ok(t.permute(&[1, 2, 0, 3]))
}

/// `v` with `<below|ψ> = Σ conj(v) θ` for the pair at sites `k, k+1`.
fn projection_vector(
    lo: &DenseTensor,
    ro: &DenseTensor,
    b1: &DenseTensor,
    b2: &DenseTensor,
) -> Result<DenseTensor> {
    let t = contract(b1, b2, &[(2, 1)])?; // [s1, c_l, s2, c_r]
    let t = contract_conj(&t, false, lo, true, &[(1, 0)])?; // [s1, s2, c_r, a_l]
    contract_conj(&t, false, ro, true, &[(2, 0)]) // [s1, s2, a_l, a_r]
}

#[allow(clippy::too_many_arguments)]
fn optimize_pair(
    psi: &MatrixProductState,
    k: usize,
    w: &[DenseTensor],
    l: &DenseTensor,
    r: &DenseTensor,
    below: &[MatrixProductState],
    lo: &[Vec<DenseTensor>],
    ro: &[Vec<DenseTensor>],
    weight: f64,
    cfg: &LanczosConfig,
) -> Result<DenseTensor> {
    let a1 = &psi.sites()[k];
    let a2 = &psi.sites()[k + 1];
    let theta = contract(a1, a2, &[(2, 1)])?.permute(&[0, 2, 1, 3]);
    let shape = theta.shape().to_vec();
    let projections = below
        .iter()
        .enumerate()
        .map(|(j, b)| projection_vector(&lo[j][k], &ro[j][k + 2], &b.sites()[k], &b.sites()[k + 1]))
        .collect::<Result<Vec<_>>>()?;
    let mut apply = |x: &[C64]| -> Result<Vec<C64>> {
        let t = DenseTensor::new(shape.clone(), x.to_vec())?;
        let mut y = apply_heff(&t, l, &w[k], &w[k + 1], r)?.into_data();
        for v in &projections {
            let ov: C64 = v.data().iter().zip(x).map(|(a, b)| a.conj() * b).sum();
            for (yi, vi) in y.iter_mut().zip(v.data()) {
                *yi += *vi * ov * weight;
            }
        }
        Ok(y)
    };
    let (_, x) = lanczos_lowest(&mut apply, theta.into_data(), cfg)?;
    DenseTensor::new(shape, x)
}

/// Splits `θ[s1, s2, a_l, a_r]` back into sites `k, k+1`; the norm goes
/// right when `moving_right`, left otherwise.
fn split_pair(
    psi: &mut MatrixProductState,
    k: usize,
    theta: &DenseTensor,
    chi: usize,
    cutoff: f64,
    moving_right: bool,
) -> Result<()> {
    let m = theta.permute(&[0, 2, 1, 3]); // [s1, a_l, s2, a_r]
    let mut svd = svd_truncated(&m, 2, cutoff, Some(chi))?;
    let nrm = libm::sqrt(svd.s.iter().map(|x| x * x).sum::<f64>());
    for x in svd.s.iter_mut() {
        *x /= nrm;
    }
    let (left, right) = if moving_right {
        (svd.u.clone(), svd.svdag())
    } else {
        (svd.us(), svd.vdag.clone())
    };
    let sites = psi.tensors_mut();
    sites[k] = left;
    sites[k + 1] = right.permute(&[1, 0, 2]);
    Ok(())
}

/// Lowest eigenpair of a Hermitian operator given by its action, by restarted
/// Lanczos with full reorthogonalization.
pub fn lanczos_lowest(
    apply: &mut dyn FnMut(&[C64]) -> Result<Vec<C64>>,
    x0: Vec<C64>,
    cfg: &LanczosConfig,
) -> Result<(f64, Vec<C64>)> {
    let dim = x0.len();
    let mut x = x0;
    if norm(&x) == 0.0 {
        x[0] = C64::new(1.0, 0.0);
    }
    let kmax = cfg.max_krylov.min(dim).max(1);
    let mut theta = 0.0;
    for _ in 0..cfg.restarts.max(1) {
        let n0 = norm(&x);
        let mut basis: Vec<Vec<C64>> = vec![x.iter().map(|z| z / n0).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut ritz = vec![C64::new(1.0, 0.0)];
        let mut converged = false;
        for j in 0..kmax {
            let mut wv = apply(&basis[j])?;
            let a = dot(&basis[j], &wv).re;
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &wv);
                    for (wi, vi) in wv.iter_mut().zip(v) {
                        *wi -= vi * c;
                    }
                }
            }
            let b = norm(&wv);
            let (val, vec) = tridiagonal_lowest(&alpha, &beta)?;
            theta = val;
            ritz = vec;
            let residual = b * ritz[ritz.len() - 1].norm();
            if residual < cfg.tol || b < 1e-14 || j + 1 == kmax {
                converged = residual < cfg.tol || b < 1e-14;
                break;
            }
            beta.push(b);
            basis.push(wv.iter().map(|z| z / b).collect());
        }
        let mut y = vec![C64::new(0.0, 0.0); dim];
        for (c, v) in ritz.iter().zip(&basis) {
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += vi * c;
            }
        }
        let ny = norm(&y);
        x = y.iter().map(|z| z / ny).collect();
        if converged {
            break;
        }
    }
    Ok((theta, x))
}

fn tridiagonal_lowest(alpha: &[f64], beta: &[f64]) -> Result<(f64, Vec<C64>)> {
    let k = alpha.len();
    let mut t = DenseTensor::zeros(&[k, k]);
    for i in 0..k {
        t.set(&[i, i], C64::new(alpha[i], 0.0));
        if i + 1 < k {
            t.set(&[i, i + 1], C64::new(beta[i], 0.0));
            t.set(&[i + 1, i], C64::new(beta[i], 0.0));
        }
    }
    let (vals, vecs) = eigh(&t)?;
    Ok((vals[0], (0..k).map(|i| vecs.get(&[i, 0])).collect()))
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    libm::sqrt(a.iter().map(|z| z.norm_sqr()).sum())
}
