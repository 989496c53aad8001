//! Dense statevector simulation of the phase-difference estimation circuit.
//!
//! Qubit 0 is the most significant bit and is the ancilla; system qubit `k`
//! is circuit qubit `k + 1`, matching the site order of the superposition MPS.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::brickwall::{layer_pairs, BrickWallCircuit};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::DenseTensor;
use crate::C64;

/// Largest simulated register.
pub const MAX_QUBITS: usize = 24;

/// Applies a row-major 4×4 `gate` to qubits `(q, q+1)` of an `n`-qubit register.
pub fn apply_two_qubit_gate(amps: &mut [C64], n: usize, q: usize, gate: &[C64]) {
    let hi = 1usize << (n - 1 - q);
    let lo = 1usize << (n - 2 - q);
    for base in 0..amps.len() {
        if base & (hi | lo) != 0 {
            continue;
        }
        let idx = [base, base | lo, base | hi, base | hi | lo];
        let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (r, &i) in idx.iter().enumerate() {
            let row = &gate[4 * r..4 * r + 4];
            amps[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl Statevector {
    /// `|0…0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::SizeGuard {
                what: "statevector qubits",
                size: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n || n == 0 || n > MAX_QUBITS {
            return Err(Error::Shape(format!("{} amplitudes is not a register", amps.len())));
        }
        Ok(Self { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amps.iter().map(|z| z.norm_sqr()).sum())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Applies `circuit` (or its adjoint) to qubits `offset..offset + circuit.n_qubits()`.
pub fn apply_brickwall_at(state: &mut Statevector, circuit: &BrickWallCircuit, offset: usize, adjoint: bool) -> Result<()> {
    let n = state.n_qubits;
    if offset + circuit.n_qubits() > n {
        return Err(Error::Shape(format!(
            "{}-qubit circuit at offset {} on {} qubits",
            circuit.n_qubits(),
            offset,
            n
        )));
    }
    let layers = circuit.layers();
    if adjoint {
        for (j, layer) in layers.iter().enumerate().rev() {
            for (q, g) in layer_pairs(circuit.n_qubits(), j).zip(layer) {
                let gd = g.adjoint()?;
                apply_two_qubit_gate(&mut state.amps, n, q + offset, gd.data());
            }
        }
    } else {
        for (j, layer) in layers.iter().enumerate() {
            for (q, g) in layer_pairs(circuit.n_qubits(), j).zip(layer) {
                apply_two_qubit_gate(&mut state.amps, n, q + offset, g.data());
            }
        }
    }
    Ok(())
}

pub fn apply_brickwall(state: &Statevector, circuit: &BrickWallCircuit, adjoint: bool) -> Result<Statevector> {
    if state.n_qubits != circuit.n_qubits() {
        return Err(Error::SiteMismatch {
            left: state.n_qubits,
            right: circuit.n_qubits(),
        });
    }
    let mut out = state.clone();
    apply_brickwall_at(&mut out, circuit, 0, adjoint)?;
    Ok(out)
}

/// Phase gate `diag(1, e^{iθ})` on `qubit`.
pub fn apply_phase(state: &Statevector, qubit: usize, theta: f64) -> Result<Statevector> {
    let n = state.n_qubits;
    if qubit >= n {
        return Err(Error::OutOfRange(format!("qubit {} of {}", qubit, n)));
    }
    let bit = 1usize << (n - 1 - qubit);
    let ph = C64::from_polar(1.0, theta);
    let mut out = state.clone();
    for (i, z) in out.amps.iter_mut().enumerate() {
        if i & bit != 0 {
            *z *= ph;
        }
    }
    Ok(out)
}

/// Applies a dense unitary to qubits `offset..offset + log2(dim)`.
pub fn apply_dense_at(state: &mut Statevector, u: &DenseTensor, offset: usize) -> Result<()> {
    let dim = u.shape()[0];
    let k = dim.trailing_zeros() as usize;
    let n = state.n_qubits;
    if u.shape() != [dim, dim] || dim != 1 << k || offset + k > n {
        return Err(Error::Shape(format!("dense {:?} at offset {} on {} qubits", u.shape(), offset, n)));
    }
    let low = n - offset - k;
    let high = 1usize << offset;
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    for h in 0..high {
        for l in 0..1usize << low {
            let at = |s: usize| (h << (k + low)) | (s << low) | l;
            for (r, b) in buf.iter_mut().enumerate() {
                let row = &u.data()[r * dim..(r + 1) * dim];
                *b = row.iter().enumerate().map(|(c, x)| x * state.amps[at(c)]).sum();
            }
            for (s, b) in buf.iter().enumerate() {
                state.amps[at(s)] = *b;
            }
        }
    }
    Ok(())
}

/// Global depolarizing channel applied once before measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    p_dep: f64,
}

impl NoiseSpec {
    pub fn new(p_dep: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_dep) {
            return Err(Error::InvalidArgument(format!("depolarizing probability {} outside [0, 1]", p_dep)));
        }
        Ok(Self { p_dep })
    }

    pub fn noiseless() -> Self {
        Self { p_dep: 0.0 }
    }

    pub fn p_dep(&self) -> f64 {
        self.p_dep
    }

    /// `(1 − p) p0 + p / 2^n`.
    pub fn apply(&self, p0: f64, n_qubits: usize) -> f64 {
        (1.0 - self.p_dep) * p0 + self.p_dep * libm::pow(2.0, -(n_qubits as f64))
    }

    pub fn floor(&self, n_qubits: usize) -> f64 {
        self.apply(0.0, n_qubits)
    }
}

/// Ideal and noisy all-zero probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probabilities {
    pub ideal: f64,
    pub noisy: f64,
}

/// Step evolution operator on the system register.
#[derive(Clone, Debug)]
pub enum Evolution {
    Circuit(BrickWallCircuit),
    Dense(DenseTensor),
}

impl Evolution {
    fn n_qubits(&self) -> usize {
        match self {
            Evolution::Circuit(c) => c.n_qubits(),
            Evolution::Dense(u) => u.shape()[0].trailing_zeros() as usize,
        }
    }

    fn apply(&self, state: &mut Statevector) -> Result<()> {
        match self {
            Evolution::Circuit(c) => apply_brickwall_at(state, c, 1, false),
            Evolution::Dense(u) => apply_dense_at(state, u, 1),
        }
    }
}

/// The estimation circuit `U_prep† P(εt) U_evol^{t/Δt} U_prep |0…0>` with cached
/// evolved states. Since the phase gate acts on the ancilla only,
/// `<0|U_prep† P(θ) ψ_t> = a + e^{iθ} b` with `a, b` the ancilla-0 and
/// ancilla-1 parts of `<φ|ψ_t>`, `φ = U_prep|0>`.
#[derive(Clone, Debug)]
pub struct QpdeModel {
    phi: Statevector,
    evolution: Evolution,
    dt: f64,
    frontier: (usize, Statevector),
    branches: BTreeMap<usize, (C64, C64)>,
}

impl QpdeModel {
    pub fn from_circuits(prep: &BrickWallCircuit, evol: &BrickWallCircuit, dt: f64) -> Result<Self> {
        let phi = apply_brickwall(&Statevector::zero(prep.n_qubits())?, prep, false)?;
        Self::new(phi, Evolution::Circuit(evol.clone()), dt)
    }

    /// `phi` is the prepared superposition on ancilla + system.
    pub fn new(phi: Statevector, evolution: Evolution, dt: f64) -> Result<Self> {
        if evolution.n_qubits() + 1 != phi.n_qubits() {
            return Err(Error::Shape(format!(
                "evolution on {} qubits for a {}-qubit register",
                evolution.n_qubits(),
                phi.n_qubits()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step {}", dt)));
        }
        Ok(Self {
            frontier: (0, phi.clone()),
            phi,
            evolution,
            dt,
            branches: BTreeMap::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.phi.n_qubits()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of `U_evol` applications for total time `t`.
    pub fn steps_for(&self, t: f64) -> Result<usize> {
        let r = t / self.dt;
        let steps = libm::round(r);
        if (r - steps).abs() > 1e-9 * r.abs().max(1.0) || steps < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time {} is not a multiple of the step {}",
                t, self.dt
            )));
        }
        Ok(steps as usize)
    }

    fn branches(&mut self, steps: usize) -> Result<(C64, C64)> {
        if let Some(&b) = self.branches.get(&steps) {
            return Ok(b);
        }
        if steps < self.frontier.0 {
            self.frontier = (0, self.phi.clone());
        }
        while self.frontier.0 < steps {
            self.evolution.apply(&mut self.frontier.1)?;
            self.frontier.0 += 1;
        }
        let half = self.phi.amps.len() / 2;
        let overlap = |r: core::ops::Range<usize>| -> C64 {
            self.phi.amps[r.clone()]
                .iter()
                .zip(&self.frontier.1.amps[r])
                .map(|(a, b)| a.conj() * b)
                .sum()
        };
        let b = (overlap(0..half), overlap(half..2 * half));
        self.branches.insert(steps, b);
        Ok(b)
    }

    /// All-zero probability at phase `epsilon` and time `t`.
    pub fn probability(&mut self, epsilon: f64, t: f64, noise: NoiseSpec) -> Result<Probabilities> {
        let steps = self.steps_for(t)?;
        let (a, b) = self.branches(steps)?;
        let amp = a + b * C64::from_polar(1.0, epsilon * t);
        let ideal = amp.norm_sqr().min(1.0);
        Ok(Probabilities {
            ideal,
            noisy: noise.apply(ideal, self.n_qubits()),
        })
    }
}

/// One-shot evaluation of the estimation circuit from compressed gates.
pub fn run_qpde_circuit(
    prep: &BrickWallCircuit,
    evol: &BrickWallCircuit,
    epsilon: f64,
    t: f64,
    dt: f64,
    noise: NoiseSpec,
) -> Result<Probabilities> {
    QpdeModel::from_circuits(prep, evol, dt)?.probability(epsilon, t, noise)
}

/// Fraction of successes in `shots` Bernoulli trials.
pub fn sample_probability(p: f64, shots: u64, seed: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || shots == 0 {
        return Err(Error::InvalidArgument(format!("probability {} with {} shots", p, shots)));
    }
    let mut rng = Rng::new(seed);
    let hits = (0..shots).filter(|_| rng.bernoulli(p)).count();
    Ok(hits as f64 / shots as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brickwall::init_circuit;
    use crate::linalg::{expm_i_hermitian, haar_unitary};
    use crate::pauli::{PauliTerm, QubitHamiltonian};

    fn random_state(n: usize, seed: u64) -> Statevector {
        let mut rng = Rng::new(seed);
        let v: Vec<C64> = (0..1 << n).map(|_| rng.complex_normal()).collect();
        let nrm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        Statevector::from_amplitudes(v.into_iter().map(|z| z / nrm).collect()).unwrap()
    }

    #[test]
    fn brickwall_matches_dense_and_round_trips() {
        let c = init_circuit(4, 3, 0.7, 5).unwrap();
        let s = random_state(4, 1);
        let out = apply_brickwall(&s, &c, false).unwrap();
        let d = c.to_dense().unwrap();
        let want = d.matmul(&DenseTensor::new(vec![16, 1], s.amps.clone()).unwrap()).unwrap();
        for (a, b) in out.amps.iter().zip(want.data()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((out.norm() - 1.0).abs() < 1e-12);
        let back = apply_brickwall(&out, &c, true).unwrap();
        for (a, b) in back.amps.iter().zip(&s.amps) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_gate() {
        let s = Statevector::from_amplitudes(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let out = apply_phase(&s, 0, core::f64::consts::PI).unwrap();
        assert!((out.amps[1] + C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(apply_phase(&s, 0, 0.0).unwrap(), s);
        assert!(apply_phase(&s, 1, 0.1).is_err());
    }

    #[test]
    fn dense_block_application() {
        let mut rng = Rng::new(3);
        let u = haar_unitary(4, &mut rng);
        let s = random_state(4, 2);
        let mut a = s.clone();
        apply_dense_at(&mut a, &u, 1).unwrap();
        let full = DenseTensor::identity(2).kron(&u).unwrap().kron(&DenseTensor::identity(2)).unwrap();
        let want = full.matmul(&DenseTensor::new(vec![16, 1], s.amps.clone()).unwrap()).unwrap();
        for (x, y) in a.amps.iter().zip(want.data()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    /// Exact preparation of `(|0>|g> + |1>|e>)/√2` for a diagonalizable toy.
    fn exact_toy() -> (QubitHamiltonian, Statevector, f64) {
        let h = QubitHamiltonian::from_terms(
            2,
            vec![
                PauliTerm::from_label(0.8, "XX").unwrap(),
                PauliTerm::from_label(0.3, "ZI").unwrap(),
                PauliTerm::from_label(-0.5, "IZ").unwrap(),
            ],
        )
        .unwrap();
        let pairs = crate::spectrum::eigenpairs(&h).unwrap();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mut v: Vec<C64> = pairs[0].1.iter().map(|z| z * s).collect();
        v.extend(pairs[1].1.iter().map(|z| z * s));
        (h, Statevector::from_amplitudes(v).unwrap(), pairs[1].0 - pairs[0].0)
    }

    #[test]
    fn exact_likelihood_is_raised_cosine() {
        let (h, phi, gap) = exact_toy();
        let dt = 0.1;
        let u = expm_i_hermitian(&h.to_dense().unwrap(), -dt).unwrap();
        let mut m = QpdeModel::new(phi, Evolution::Dense(u), dt).unwrap();
        for t in [0.1, 0.5, 1.3] {
            for k in 0..21 {
                let eps = -2.0 + 0.2 * k as f64;
                let p = m.probability(eps, t, NoiseSpec::noiseless()).unwrap().ideal;
                let want = 0.5 * (1.0 + libm::cos((gap - eps) * t));
                assert!((p - want).abs() < 1e-6, "{} {} {} {}", t, eps, p, want);
            }
        }
        let p = m.probability(gap, 0.7, NoiseSpec::noiseless()).unwrap().ideal;
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_floor_and_full_depolarization() {
        let (h, phi, _) = exact_toy();
        let u = expm_i_hermitian(&h.to_dense().unwrap(), -0.1).unwrap();
        let mut m = QpdeModel::new(phi, Evolution::Dense(u), 0.1).unwrap();
        for eps in [-1.0, 0.0, 0.4] {
            let p = m.probability(eps, 0.5, NoiseSpec::new(1.0).unwrap()).unwrap();
            assert!((p.noisy - 0.125).abs() < 1e-15);
        }
        assert!((NoiseSpec::new(0.3).unwrap().floor(9) - 0.3 / 512.0).abs() < 1e-18);
        assert!(NoiseSpec::new(1.5).is_err());
    }

    #[test]
    fn step_count_must_be_integral() {
        let (h, phi, _) = exact_toy();
        let u = expm_i_hermitian(&h.to_dense().unwrap(), -0.1).unwrap();
        let mut m = QpdeModel::new(phi, Evolution::Dense(u), 0.1).unwrap();
        assert!(m.probability(0.0, 0.25, NoiseSpec::noiseless()).is_err());
        assert_eq!(m.steps_for(0.3).unwrap(), 3);
    }

    #[test]
    fn sampling() {
        assert_eq!(sample_probability(0.0, 100, 1).unwrap(), 0.0);
        assert_eq!(sample_probability(1.0, 100, 1).unwrap(), 1.0);
        let p = sample_probability(0.5, 1_000_000, 42).unwrap();
        assert!((p - 0.5).abs() < 0.002);
        assert_eq!(p, sample_probability(0.5, 1_000_000, 42).unwrap());
    }
}
