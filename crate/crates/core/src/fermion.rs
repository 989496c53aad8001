//! Second-quantized Hamiltonians and the Jordan-Wigner mapping.
//!
//! Spin orbitals are interleaved up/down: spatial orbital `p` with spin `σ`
//! (0 = up, 1 = down) is mode `2p + σ`, and mode `k` is qubit `k`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pauli::{PauliOp, PauliSum, QubitHamiltonian};
use crate::C64;

/// Relative size of imaginary Pauli coefficients tolerated as round-off.
const HERMITIAN_TOL: f64 = 1e-10;

/// A ladder operator: `(mode, true)` creates, `(mode, false)` annihilates.
pub type Ladder = (usize, bool);

/// A real multiple of a product of ladder operators, applied right to left.
#[derive(Clone, Debug, PartialEq)]
pub struct FermionTerm {
    pub coefficient: f64,
    pub ops: Vec<Ladder>,
}

impl FermionTerm {
    pub fn new(coefficient: f64, ops: Vec<Ladder>) -> Self {
        Self { coefficient, ops }
    }

    /// `c · a†_p a_q`.
    pub fn one_body(coefficient: f64, p: usize, q: usize) -> Self {
        Self::new(coefficient, vec![(p, true), (q, false)])
    }

    /// `c · n_p`.
    pub fn number(coefficient: f64, p: usize) -> Self {
        Self::one_body(coefficient, p, p)
    }
}

/// Qubit image of a single ladder operator.
pub fn ladder_to_pauli(mode: usize, create: bool) -> PauliSum {
    let chain: u128 = if mode == 0 { 0 } else { (1u128 << mode) - 1 };
    let half = C64::new(0.5, 0.0);
    let x = PauliOp {
        x: 1u128 << mode,
        z: chain,
        coeff: half,
    };
    // Y_j Z-chain; a† carries -i/2, a carries +i/2
    let y = PauliOp {
        x: 1u128 << mode,
        z: chain | (1u128 << mode),
        coeff: if create { C64::new(0.0, -0.5) } else { C64::new(0.0, 0.5) },
    };
    let mut s = PauliSum::from_op(x);
    s.add_op(y);
    s
}

/// Maps a sum of fermionic terms onto qubits. The result must be Hermitian.
pub fn jordan_wigner(terms: &[FermionTerm], n_modes: usize) -> Result<QubitHamiltonian> {
    if n_modes > 128 {
        return Err(Error::SizeGuard {
            what: "fermionic modes",
            size: n_modes,
            limit: 128,
        });
    }
    let mut total = PauliSum::new();
    for t in terms {
        let mut prod = PauliSum::from_op(PauliOp::identity(C64::new(t.coefficient, 0.0)));
        for &(mode, create) in &t.ops {
            if mode >= n_modes {
                return Err(Error::OutOfRange(format!("mode {} with {} modes", mode, n_modes)));
            }
            prod = prod.mul(&ladder_to_pauli(mode, create));
        }
        total.add(&prod);
    }
    total.to_hamiltonian(n_modes, HERMITIAN_TOL)
}

/// Open-chain Hubbard model with hopping `t`, on-site repulsion `u` and
/// chemical potential `u/2`.
pub fn hubbard_terms(n_sites: usize, t: f64, u: f64) -> Vec<FermionTerm> {
    let mut terms = Vec::new();
    for q in 0..n_sites.saturating_sub(1) {
        for s in 0..2 {
            let a = 2 * q + s;
            let b = 2 * (q + 1) + s;
            terms.push(FermionTerm::one_body(-t, b, a));
            terms.push(FermionTerm::one_body(-t, a, b));
        }
    }
    for q in 0..n_sites {
        let up = 2 * q;
        let dn = 2 * q + 1;
        terms.push(FermionTerm::new(u, vec![(up, true), (up, false), (dn, true), (dn, false)]));
        terms.push(FermionTerm::number(-u / 2.0, up));
        terms.push(FermionTerm::number(-u / 2.0, dn));
    }
    terms
}

/// Qubit Hamiltonian of the open-chain Hubbard model on `2 * n_sites` qubits.
pub fn hubbard_1d(n_sites: usize, t: f64, u: f64) -> QubitHamiltonian {
    jordan_wigner(&hubbard_terms(n_sites, t, u), 2 * n_sites).expect("Hubbard model is Hermitian")
}

/// Real spatial-orbital integrals of an active space (chemists' notation).
#[derive(Clone, Debug, PartialEq)]
pub struct FermionicIntegrals {
    pub n_orb: usize,
    pub n_elec: usize,
    pub ms2: i64,
    pub core_energy: f64,
    one_body: Vec<f64>,
    two_body: Vec<f64>,
}

impl FermionicIntegrals {
    pub fn zeros(n_orb: usize, n_elec: usize) -> Self {
        Self {
            n_orb,
            n_elec,
            ms2: 0,
            core_energy: 0.0,
            one_body: vec![0.0; n_orb * n_orb],
            two_body: vec![0.0; n_orb * n_orb * n_orb * n_orb],
        }
    }

    fn idx2(&self, p: usize, q: usize) -> usize {
        p * self.n_orb + q
    }

    fn idx4(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n_orb + q) * self.n_orb + r) * self.n_orb + s
    }

    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.one_body[self.idx2(p, q)]
    }

    /// `(pq|rs)`.
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_body[self.idx4(p, q, r, s)]
    }

    /// Sets `h_pq` and `h_qp`.
    pub fn set_h(&mut self, p: usize, q: usize, v: f64) {
        let a = self.idx2(p, q);
        let b = self.idx2(q, p);
        self.one_body[a] = v;
        self.one_body[b] = v;
    }

    /// Sets `(pq|rs)` and its seven symmetry partners.
    pub fn set_eri(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        for (a, b, c, d) in [
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ] {
            let i = self.idx4(a, b, c, d);
            self.two_body[i] = v;
        }
    }

    /// Largest violation of the one- and two-body index symmetries.
    pub fn symmetry_error(&self) -> f64 {
        let n = self.n_orb;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                worst = worst.max((self.h(p, q) - self.h(q, p)).abs());
                for r in 0..n {
                    for s in 0..n {
                        let v = self.eri(p, q, r, s);
                        worst = worst
                            .max((v - self.eri(q, p, r, s)).abs())
                            .max((v - self.eri(p, q, s, r)).abs())
                            .max((v - self.eri(r, s, p, q)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Relabels orbitals so that position `k` holds orbital `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        validate_permutation(perm, self.n_orb)?;
        let mut out = Self::zeros(self.n_orb, self.n_elec);
        out.ms2 = self.ms2;
        out.core_energy = self.core_energy;
        let n = self.n_orb;
        for a in 0..n {
            for b in 0..n {
                let i = out.idx2(a, b);
                out.one_body[i] = self.h(perm[a], perm[b]);
                for c in 0..n {
                    for d in 0..n {
                        let j = out.idx4(a, b, c, d);
                        out.two_body[j] = self.eri(perm[a], perm[b], perm[c], perm[d]);
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has {} entries, expected {}",
            perm.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidArgument(format!("{:?} is not a permutation", perm)));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Exchange integrals `K_ij = (ij|ji)` as a row-major `n_orb x n_orb` matrix.
pub fn exchange_matrix(ints: &FermionicIntegrals) -> Vec<f64> {
    let n = ints.n_orb;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = ints.eri(i, j, j, i);
        }
    }
    k
}

/// Second-quantized terms of the integrals after relabeling by `perm`.
pub fn integral_terms(ints: &FermionicIntegrals, perm: &[usize]) -> Result<Vec<FermionTerm>> {
    let ints = ints.permuted(perm)?;
    let n = ints.n_orb;
    let mut terms = Vec::new();
    if ints.core_energy != 0.0 {
        terms.push(FermionTerm::new(ints.core_energy, Vec::new()));
    }
    for p in 0..n {
        for q in 0..n {
            let h = ints.h(p, q);
            if h == 0.0 {
                continue;
            }
            for s in 0..2 {
                terms.push(FermionTerm::one_body(h, 2 * p + s, 2 * q + s));
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let v = ints.eri(p, q, r, s);
                    if v == 0.0 {
                        continue;
                    }
                    for sig in 0..2 {
                        for tau in 0..2 {
                            let (ps, qs) = (2 * p + sig, 2 * q + sig);
                            let (rt, st) = (2 * r + tau, 2 * s + tau);
                            if ps == rt || qs == st {
                                continue;
                            }
                            terms.push(FermionTerm::new(
                                0.5 * v,
                                vec![(ps, true), (rt, true), (st, false), (qs, false)],
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(terms)
}

/// Jordan-Wigner qubit Hamiltonian of the relabeled integrals on `2 * n_orb` qubits.
pub fn integrals_to_qubit_hamiltonian(ints: &FermionicIntegrals, perm: &[usize]) -> Result<QubitHamiltonian> {
    jordan_wigner(&integral_terms(ints, perm)?, 2 * ints.n_orb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseTensor;

    /// Matrix of a fermionic term in the occupation basis, built from bit
    /// manipulation with the canonical ordering sign.
    fn fock_matrix(terms: &[FermionTerm], n: usize) -> DenseTensor {
        let dim = 1usize << n;
        let mut m = DenseTensor::zeros(&[dim, dim]);
        for t in terms {
            for col in 0..dim {
                let mut state = col;
                let mut sign = 1.0;
                let mut alive = true;
                for &(mode, create) in t.ops.iter().rev() {
                    let bit = 1usize << (n - 1 - mode);
                    let occupied = state & bit != 0;
                    if occupied == create {
                        alive = false;
                        break;
                    }
                    let before = (0..mode).filter(|&k| state & (1 << (n - 1 - k)) != 0).count();
                    if before % 2 == 1 {
                        sign = -sign;
                    }
                    state ^= bit;
                }
                if alive {
                    let cur = m.get(&[state, col]);
                    m.set(&[state, col], cur + C64::new(sign * t.coefficient, 0.0));
                }
            }
        }
        m
    }

    fn sorted_eigs(m: &DenseTensor) -> Vec<f64> {
        crate::linalg::eigh(m).unwrap().0
    }

    #[test]
    fn number_operator() {
        let h = jordan_wigner(&[FermionTerm::number(1.0, 0)], 2).unwrap();
        let labels: Vec<_> = h.terms.iter().map(|t| (t.label(), t.coefficient)).collect();
        assert_eq!(labels, vec![("II".into(), 0.5), ("ZI".into(), -0.5)]);
    }

    #[test]
    fn adjacent_hopping() {
        let h = jordan_wigner(&[FermionTerm::one_body(1.0, 0, 1), FermionTerm::one_body(1.0, 1, 0)], 2).unwrap();
        let labels: Vec<_> = h.terms.iter().map(|t| (t.label(), t.coefficient)).collect();
        assert_eq!(labels, vec![("XX".into(), 0.5), ("YY".into(), 0.5)]);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let r = jordan_wigner(&[FermionTerm::one_body(1.0, 0, 1)], 2);
        assert!(matches!(r, Err(Error::NotHermitian(_))));
    }

    #[test]
    fn single_site_hubbard_spectrum() {
        let h = hubbard_1d(1, 1.0, 10.0);
        let e = sorted_eigs(&h.to_dense().unwrap());
        let want = [-5.0, -5.0, 0.0, 0.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_site_hubbard_matches_fock_oracle() {
        let terms = hubbard_terms(2, 1.0, 10.0);
        let jw = hubbard_1d(2, 1.0, 10.0).to_dense().unwrap();
        let fock = fock_matrix(&terms, 4);
        assert!(jw.max_abs_diff(&fock) < 1e-12);
    }

    #[test]
    fn hubbard_has_no_single_z_terms() {
        let h = hubbard_1d(4, 1.0, 10.0);
        assert!((h.constant() + 10.0).abs() < 1e-12);
        for t in &h.terms {
            assert_ne!(t.support().len(), 1, "{}", t.label());
        }
    }

    #[test]
    fn anticommutation_relations() {
        let n = 5;
        for p in 0..n {
            for q in 0..n {
                let ap = ladder_to_pauli(p, false);
                let aq_dag = ladder_to_pauli(q, true);
                let mut anti = ap.mul(&aq_dag);
                anti.add(&aq_dag.mul(&ap));
                let ops: Vec<_> = anti.ops().collect();
                if p == q {
                    assert_eq!(ops.len(), 1);
                    assert_eq!((ops[0].x, ops[0].z), (0, 0));
                    assert!((ops[0].coeff - C64::new(1.0, 0.0)).norm() < 1e-14);
                } else {
                    assert!(ops.is_empty());
                }
                let aq = ladder_to_pauli(q, false);
                let mut anti2 = ap.mul(&aq);
                anti2.add(&aq.mul(&ap));
                assert!(anti2.is_zero());
            }
        }
    }

    fn two_orbital_integrals() -> FermionicIntegrals {
        let mut ints = FermionicIntegrals::zeros(2, 2);
        ints.core_energy = 0.71;
        ints.set_h(0, 0, -1.25);
        ints.set_h(1, 1, -0.47);
        ints.set_h(0, 1, 0.08);
        ints.set_eri(0, 0, 0, 0, 0.67);
        ints.set_eri(1, 1, 1, 1, 0.70);
        ints.set_eri(0, 0, 1, 1, 0.66);
        ints.set_eri(0, 1, 0, 1, 0.18);
        ints.set_eri(0, 0, 0, 1, 0.03);
        ints
    }

    #[test]
    fn integrals_match_fock_oracle_and_are_permutation_invariant() {
        let ints = two_orbital_integrals();
        assert!(ints.symmetry_error() < 1e-15);
        let h = integrals_to_qubit_hamiltonian(&ints, &[0, 1]).unwrap();
        let dense = h.to_dense().unwrap();
        let fock = fock_matrix(&integral_terms(&ints, &[0, 1]).unwrap(), 4);
        assert!(dense.max_abs_diff(&fock) < 1e-12);
        let e1 = sorted_eigs(&dense);
        let e2 = sorted_eigs(&integrals_to_qubit_hamiltonian(&ints, &[1, 0]).unwrap().to_dense().unwrap());
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn exchange_matrix_entries() {
        let ints = two_orbital_integrals();
        let k = exchange_matrix(&ints);
        assert_eq!(k[0], 0.67);
        assert_eq!(k[3], 0.70);
        assert_eq!(k[1], 0.18);
        assert_eq!(k[1], k[2]);
    }

    #[test]
    fn bad_permutation() {
        let ints = two_orbital_integrals();
        assert!(integrals_to_qubit_hamiltonian(&ints, &[0, 0]).is_err());
    }
}
