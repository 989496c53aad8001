//! Brick-wall circuit compression by environment-cached polar updates.
//!
//! The objective is `Re Tr[M·C]` for a circuit `C` and a target operator `M`
//! given as an MPO. For operator compression `M = U_ref†`; for state
//! preparation `M = |0…0><ψ|`, so the objective is `Re <ψ|C|0…0>`.
//!
//! The network is cut between qubits. The left environment of bond column
//! `q` holds target sites `0..=q` and all gates on pairs left of `(q, q+1)`;
//! the right environment holds sites `q+1..` and all gates right of it.
//! Gates on `(q, q+1)` are updated in a zigzag: bottom-up on even columns,
//! top-down on odd ones. A sweep runs over all columns left to right.

use alloc::vec;
use alloc::vec::Vec;

use crate::brickwall::{column_layers, BrickWallCircuit};
use crate::error::{Error, Result};
use crate::linalg::polar_unitary;
use crate::mpo::MatrixProductOperator;
use crate::mps::MatrixProductState;
use crate::tensor::{DenseTensor, LabeledTensor};
use crate::C64;

/// Operator whose trace against the circuit is maximized.
#[derive(Clone, Debug)]
pub struct CompressionTarget {
    sites: Vec<DenseTensor>,
}

impl CompressionTarget {
    /// `M = U_ref†`.
    pub fn operator(u_ref: &MatrixProductOperator) -> Self {
        Self {
            sites: u_ref.dagger().sites().to_vec(),
        }
    }

    /// `M = |0…0><ψ|`, i.e. `M[o, i, l, r] = δ_{o0} conj(A[i, l, r])`.
    pub fn state(psi: &MatrixProductState) -> Self {
        let sites = psi
            .sites()
            .iter()
            .map(|a| {
                let (p, l, r) = (a.shape()[0], a.shape()[1], a.shape()[2]);
                DenseTensor::from_fn(&[2, p, l, r], |ix| {
                    if ix[0] == 0 {
                        a.get(&[ix[1], ix[2], ix[3]]).conj()
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Self { sites }
    }

    pub fn n_qubits(&self) -> usize {
        self.sites.len()
    }
}

/// Stopping and checking rules of a compression run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepConfig {
    pub max_sweeps: usize,
    /// Relative per-sweep improvement regarded as stalled.
    pub stall_tol: f64,
    /// Consecutive stalled sweeps before stopping; 0 disables early stopping.
    pub stall_window: usize,
    /// Allowed decrease of the objective per update, relative to `max(1, |obj|)`.
    pub monotonicity_tol: f64,
}

impl SweepConfig {
    pub fn new(max_sweeps: usize) -> Self {
        Self {
            max_sweeps,
            stall_tol: 1e-12,
            stall_window: 20,
            monotonicity_tol: 1e-9,
        }
    }

    pub fn fixed(max_sweeps: usize) -> Self {
        Self {
            stall_window: 0,
            ..Self::new(max_sweeps)
        }
    }
}

/// Work and monotonicity counters of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompressionStats {
    pub sweeps: usize,
    pub gate_updates: u64,
    pub contractions: u64,
    pub flops: u64,
    /// Updates whose objective fell below the previous one by more than the tolerance.
    pub violations: u64,
    pub worst_decrease: f64,
    /// Largest gap between the objective carried from the previous update and
    /// the one recomputed from the next gate's environment.
    pub worst_cache_drift: f64,
}

impl CompressionStats {
    pub fn contractions_per_update(&self) -> f64 {
        self.contractions as f64 / (self.gate_updates.max(1)) as f64
    }
}

#[derive(Clone, Debug)]
pub struct CompressionReport {
    pub circuit: BrickWallCircuit,
    pub initial_objective: f64,
    /// Objective after each sweep.
    pub history: Vec<f64>,
    pub stats: CompressionStats,
}

impl CompressionReport {
    pub fn final_objective(&self) -> f64 {
        self.history.last().copied().unwrap_or(self.initial_objective)
    }
}

struct Network<'a> {
    target: &'a CompressionTarget,
    n: usize,
    depth: usize,
    contractions: u64,
    flops: u64,
}

impl<'a> Network<'a> {
    fn new(target: &'a CompressionTarget, circuit: &BrickWallCircuit) -> Result<Self> {
        if target.n_qubits() != circuit.n_qubits() {
            return Err(Error::SiteMismatch {
                left: target.n_qubits(),
                right: circuit.n_qubits(),
            });
        }
        Ok(Self {
            target,
            n: circuit.n_qubits(),
            depth: circuit.depth(),
            contractions: 0,
            flops: 0,
        })
    }

    /// Label of the wire on qubit `q` entering layer `j` (`j = depth` is the top).
    fn wire(&self, q: usize, j: usize) -> u32 {
        let mut start = 0;
        for l in 0..j {
            if self.touches(q, l) {
                start = l + 1;
            }
        }
        (q * (self.depth + 1) + start) as u32
    }

    fn touches(&self, q: usize, layer: usize) -> bool {
        let col = |c: usize| c + 1 < self.n && c % 2 == layer % 2;
        col(q) || (q > 0 && col(q - 1))
    }

    fn bond(&self, b: usize) -> u32 {
        (self.n * (self.depth + 1) + b) as u32
    }

    fn site(&self, q: usize) -> Result<LabeledTensor> {
        let t = &self.target.sites[q];
        let s = t.shape();
        let (o, i) = (self.wire(q, 0), self.wire(q, self.depth));
        let mut labels = vec![o, i];
        let mut shape = vec![s[0], s[1]];
        if q > 0 {
            labels.push(self.bond(q - 1));
            shape.push(s[2]);
        }
        if q + 1 < self.n {
            labels.push(self.bond(q));
            shape.push(s[3]);
        }
        LabeledTensor::new(labels, t.clone().reshape(&shape)?)
    }

    fn gate_labels(&self, layer: usize, q: usize) -> [u32; 4] {
        [
            self.wire(q, layer + 1),
            self.wire(q + 1, layer + 1),
            self.wire(q, layer),
            self.wire(q + 1, layer),
        ]
    }

    fn gate(&self, circuit: &BrickWallCircuit, layer: usize, q: usize) -> Result<LabeledTensor> {
        let g = circuit.gate(layer, q)?.clone().reshape(&[2, 2, 2, 2])?;
        LabeledTensor::new(self.gate_labels(layer, q).to_vec(), g)
    }

    fn join(&mut self, a: &LabeledTensor, b: &LabeledTensor) -> Result<LabeledTensor> {
        let (t, f) = a.contract(b)?;
        self.contractions += 1;
        self.flops += f;
        Ok(t)
    }

    /// Left environment of column `q + 1` from that of column `q`.
    fn grow_left(&mut self, env: &LabeledTensor, circuit: &BrickWallCircuit, q: usize) -> Result<LabeledTensor> {
        let mut x = env.clone();
        for layer in column_layers(self.depth, q) {
            let g = self.gate(circuit, layer, q)?;
            x = self.join(&x, &g)?;
        }
        let s = self.site(q + 1)?;
        self.join(&x, &s)
    }

    /// Right environment of column `q − 1` from that of column `q`.
    fn grow_right(&mut self, env: &LabeledTensor, circuit: &BrickWallCircuit, q: usize) -> Result<LabeledTensor> {
        let mut x = env.clone();
        for layer in column_layers(self.depth, q) {
            let g = self.gate(circuit, layer, q)?;
            x = self.join(&x, &g)?;
        }
        let s = self.site(q)?;
        self.join(&x, &s)
    }

    /// Right environments indexed by column; entry `q` holds sites `q+1..`.
    fn right_envs(&mut self, circuit: &BrickWallCircuit) -> Result<Vec<LabeledTensor>> {
        let cols = self.n - 1;
        let mut envs = vec![self.site(self.n - 1)?; cols];
        for q in (0..cols - 1).rev() {
            envs[q] = self.grow_right(&envs[q + 1], circuit, q + 1)?;
        }
        Ok(envs)
    }

    /// `F[o_q, o_{q+1}, i_q, i_{q+1}]` with `Tr[M·C] = Σ F·G` for the gate at `(layer, q)`.
    fn gate_tensor(
        &mut self,
        left: &LabeledTensor,
        right: &LabeledTensor,
        circuit: &BrickWallCircuit,
        layer: usize,
        q: usize,
    ) -> Result<DenseTensor> {
        let mut x = left.clone();
        for l in column_layers(self.depth, q) {
            if l != layer {
                let g = self.gate(circuit, l, q)?;
                x = self.join(&x, &g)?;
            }
        }
        let x = self.join(&x, right)?;
        x.ordered(&self.gate_labels(layer, q))?.reshape(&[4, 4])
    }

    fn full_trace(&mut self, circuit: &BrickWallCircuit) -> Result<C64> {
        let mut x = self.site(0)?;
        for q in 0..self.n - 1 {
            x = self.grow_left(&x, circuit, q)?;
        }
        if !x.labels().is_empty() {
            return Err(Error::Shape("network did not close".into()));
        }
        Ok(x.tensor().data()[0])
    }
}

fn pair_sum(f: &DenseTensor, g: &DenseTensor) -> C64 {
    f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
}

/// `Tr[M·C]`, contracted from scratch.
pub fn trace_objective(circuit: &BrickWallCircuit, target: &CompressionTarget) -> Result<C64> {
    Network::new(target, circuit)?.full_trace(circuit)
}

/// Environment `E` of the gate at `(layer, q)`: `Tr[M·C] = Tr[E†·G]`, so the
/// optimal gate is the polar factor of `E`.
pub fn gate_environment(circuit: &BrickWallCircuit, target: &CompressionTarget, layer: usize, q: usize) -> Result<DenseTensor> {
    circuit.gate(layer, q)?;
    let mut net = Network::new(target, circuit)?;
    let mut left = net.site(0)?;
    for c in 0..q {
        left = net.grow_left(&left, circuit, c)?;
    }
    let rights = net.right_envs(circuit)?;
    Ok(net.gate_tensor(&left, &rights[q], circuit, layer, q)?.conj())
}

/// Sweeps polar updates over every gate until the budget or the stall rule ends the run.
pub fn compress(circuit: &BrickWallCircuit, target: &CompressionTarget, cfg: &SweepConfig) -> Result<CompressionReport> {
    let mut circuit = circuit.clone();
    let mut net = Network::new(target, &circuit)?;
    let n = net.n;
    let initial = net.full_trace(&circuit)?.re;
    let mut stats = CompressionStats::default();
    let mut history = Vec::with_capacity(cfg.max_sweeps);
    let mut current = initial;
    let mut stalled = 0;
    for _ in 0..cfg.max_sweeps {
        let rights = net.right_envs(&circuit)?;
        let mut left = net.site(0)?;
        for q in 0..n - 1 {
            let mut layers: Vec<usize> = column_layers(net.depth, q).collect();
            if q % 2 == 1 {
                layers.reverse();
            }
            for layer in layers {
                let f = net.gate_tensor(&left, &rights[q], &circuit, layer, q)?;
                let old = circuit.gate(layer, q)?;
                let before = pair_sum(&f, old).re;
                stats.worst_cache_drift = stats.worst_cache_drift.max((before - current).abs());
                if f.norm() > 1e-300 {
                    let g = polar_unitary(&f.conj())?;
                    let after = pair_sum(&f, &g).re;
                    let drop = before - after;
                    if drop > cfg.monotonicity_tol * before.abs().max(1.0) {
                        stats.violations += 1;
                    }
                    stats.worst_decrease = stats.worst_decrease.max(drop);
                    if after >= before {
                        circuit.set_gate(layer, q, g)?;
                        current = after;
                    } else {
                        current = before;
                    }
                } else {
                    current = before;
                }
                stats.gate_updates += 1;
            }
            if q + 1 < n - 1 {
                left = net.grow_left(&left, &circuit, q)?;
            }
        }
        let prev = history.last().copied().unwrap_or(initial);
        history.push(current);
        stats.sweeps += 1;
        if cfg.stall_window > 0 {
            if (current - prev) / current.abs().max(1.0) < cfg.stall_tol {
                stalled += 1;
                if stalled >= cfg.stall_window {
                    break;
                }
            } else {
                stalled = 0;
            }
        }
    }
    stats.contractions = net.contractions;
    stats.flops = net.flops;
    Ok(CompressionReport {
        circuit,
        initial_objective: initial,
        history,
        stats,
    })
}

/// Compresses towards `U_ref`; returns the circuit and the per-sweep `Re Tr[U_ref†·C]`.
pub fn compress_to_mpo(
    circuit: &BrickWallCircuit,
    u_ref: &MatrixProductOperator,
    n_sweeps: usize,
) -> Result<(BrickWallCircuit, Vec<f64>)> {
    let r = compress(circuit, &CompressionTarget::operator(u_ref), &SweepConfig::new(n_sweeps))?;
    Ok((r.circuit, r.history))
}

/// Compresses a preparation circuit towards `|ψ>`; returns the circuit and per-sweep `f`.
pub fn compress_to_state(
    circuit: &BrickWallCircuit,
    target: &MatrixProductState,
    n_sweeps: usize,
) -> Result<(BrickWallCircuit, Vec<f64>)> {
    let r = compress(circuit, &CompressionTarget::state(target), &SweepConfig::new(n_sweeps))?;
    Ok((r.circuit, r.history))
}

/// `f = Re <ψ|C|0…0>`.
pub fn fidelity_metric_f(circuit: &BrickWallCircuit, target: &MatrixProductState) -> Result<f64> {
    Ok(trace_objective(circuit, &CompressionTarget::state(target))?.re)
}

/// `δ = sqrt(2 − (Re Tr[U_ref†·C])^{1/N})`; `√2` when the trace is not positive.
pub fn delta_from_trace(re_trace: f64, n_qubits: usize) -> f64 {
    if !(re_trace > 0.0) {
        return core::f64::consts::SQRT_2;
    }
    libm::sqrt((2.0 - libm::pow(re_trace, 1.0 / n_qubits as f64)).max(0.0))
}

pub fn distance_metric_delta(circuit: &BrickWallCircuit, u_ref: &MatrixProductOperator) -> Result<f64> {
    let tr = trace_objective(circuit, &CompressionTarget::operator(u_ref))?.re;
    Ok(delta_from_trace(tr, circuit.n_qubits()))
}

/// `δ` between two MPOs, `sqrt(2 − (Re Tr[A†·B])^{1/N})`.
pub fn mpo_delta(a: &MatrixProductOperator, b: &MatrixProductOperator) -> Result<f64> {
    let tr = crate::mpo::mpo_inner(a, b)?.re;
    if a.n_sites() == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    Ok(delta_from_trace(tr, a.n_sites()))
}

/// `(‖V^k − U^k‖_F, k·‖V − U‖_F)` for `k = 1..=max_steps`, with `V` the exact
/// step and `U` its approximation.
pub fn concatenation_errors(exact_step: &DenseTensor, approx_step: &DenseTensor, max_steps: usize) -> Result<Vec<(f64, f64)>> {
    let one = exact_step.sub(approx_step)?.norm();
    let mut v = exact_step.clone();
    let mut u = approx_step.clone();
    let mut out = Vec::with_capacity(max_steps);
    for k in 1..=max_steps {
        if k > 1 {
            v = v.matmul(exact_step)?;
            u = u.matmul(approx_step)?;
        }
        out.push((v.sub(&u)?.norm(), k as f64 * one));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brickwall::init_circuit;
    use crate::linalg::haar_unitary;
    use crate::mpo::{identity_mpo, mpo_from_dense, mpo_to_dense, trotter_product, TrotterOrder};
    use crate::mps::tests::random_mps;
    use crate::rng::Rng;
    use crate::tensor::contract;

    fn dense_trace(m: &DenseTensor, c: &DenseTensor) -> C64 {
        m.matmul(c).unwrap().trace().unwrap()
    }

    fn random_mpo_unitary(n: usize, seed: u64) -> MatrixProductOperator {
        let c = init_circuit(n, 3, 2.0, seed).unwrap();
        dense_to_mpo(&c.to_dense().unwrap())
    }

    fn dense_to_mpo(u: &DenseTensor) -> MatrixProductOperator {
        mpo_from_dense(u, 1e-28).unwrap()
    }

    #[test]
    fn identity_target_and_circuit() {
        let c = BrickWallCircuit::identity(4, 3).unwrap();
        let t = CompressionTarget::operator(&identity_mpo(4));
        assert!((trace_objective(&c, &t).unwrap() - C64::new(16.0, 0.0)).norm() < 1e-12);
        let e = gate_environment(&c, &t, 1, 1).unwrap();
        let v = contract(&e.conj(), &DenseTensor::identity(4), &[(0, 0), (1, 1)]).unwrap();
        assert!((v.data()[0].re - 16.0).abs() < 1e-12);
    }

    #[test]
    fn trace_matches_dense_oracle() {
        for (n, d) in [(2usize, 1usize), (3, 2), (4, 3), (5, 4), (6, 5), (3, 1)] {
            let c = init_circuit(n, d, 1.5, n as u64).unwrap();
            let u = random_mpo_unitary(n, 40 + d as u64);
            let t = CompressionTarget::operator(&u);
            let want = dense_trace(&mpo_to_dense(&u).unwrap().adjoint().unwrap(), &c.to_dense().unwrap());
            let got = trace_objective(&c, &t).unwrap();
            assert!((got - want).norm() < 1e-9, "n {} d {}: {} vs {}", n, d, got, want);
        }
    }

    #[test]
    fn environment_reproduces_trace() {
        let n = 5;
        let c = init_circuit(n, 4, 1.0, 3).unwrap();
        let u = random_mpo_unitary(n, 8);
        let t = CompressionTarget::operator(&u);
        let want = dense_trace(&mpo_to_dense(&u).unwrap().adjoint().unwrap(), &c.to_dense().unwrap());
        for layer in 0..4 {
            for q in crate::brickwall::layer_pairs(n, layer) {
                let e = gate_environment(&c, &t, layer, q).unwrap();
                let g = c.gate(layer, q).unwrap();
                let v: C64 = e.data().iter().zip(g.data()).map(|(a, b)| a.conj() * b).sum();
                assert!((v - want).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn two_qubit_environment_is_the_transposed_target() {
        let mut rng = Rng::new(4);
        let w = haar_unitary(4, &mut rng);
        let c = BrickWallCircuit::identity(2, 1).unwrap();
        let u = dense_to_mpo(&w);
        let e = gate_environment(&c, &CompressionTarget::operator(&u), 0, 0).unwrap();
        // Tr[W† G] = Σ conj(W)[r,c] G[r,c], so E = W
        assert!(e.max_abs_diff(&w) < 1e-12);
        let r = compress(&c, &CompressionTarget::operator(&u), &SweepConfig::fixed(1)).unwrap();
        assert!(r.circuit.gate(0, 0).unwrap().max_abs_diff(&w) < 1e-10);
    }

    #[test]
    fn identity_reference_converges() {
        let c = init_circuit(4, 1, 0.2, 1).unwrap();
        let (out, hist) = compress_to_mpo(&c, &identity_mpo(4), 10).unwrap();
        assert!(distance_metric_delta(&out, &identity_mpo(4)).unwrap() < 1e-8);
        assert!(hist.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn state_objective_matches_dense() {
        let n = 5;
        let mut psi = random_mps(n, 3, 2);
        psi.normalize().unwrap();
        let c = init_circuit(n, 3, 1.0, 9).unwrap();
        let v = psi.to_dense().unwrap();
        let col0: Vec<C64> = (0..1 << n).map(|r| c.to_dense().unwrap().get(&[r, 0])).collect();
        let want: C64 = v.iter().zip(&col0).map(|(a, b)| a.conj() * b).sum();
        assert!((fidelity_metric_f(&c, &psi).unwrap() - want.re).abs() < 1e-10);
    }

    #[test]
    fn zero_state_target() {
        let psi = MatrixProductState::product_state(&[0, 0, 0, 0]);
        let c = init_circuit(4, 2, 0.3, 5).unwrap();
        let (out, _) = compress_to_state(&c, &psi, 5).unwrap();
        assert!((fidelity_metric_f(&out, &psi).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn polar_updates_never_decrease() {
        let n = 6;
        let u = random_mpo_unitary(n, 77);
        let c = init_circuit(n, 4, 0.01, 2).unwrap();
        let r = compress(&c, &CompressionTarget::operator(&u), &SweepConfig::fixed(15)).unwrap();
        assert_eq!(r.stats.violations, 0);
        assert!(r.stats.worst_cache_drift < 1e-8 * r.final_objective().abs().max(1.0));
        assert!(r.history.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(r.final_objective() > r.initial_objective);
    }

    #[test]
    fn approaches_a_representable_target() {
        let n = 6;
        let target = init_circuit(n, 4, 0.3, 21).unwrap();
        let u = dense_to_mpo(&target.to_dense().unwrap());
        let start = init_circuit(n, 4, 0.01, 1).unwrap();
        let r = compress(&start, &CompressionTarget::operator(&u), &SweepConfig::new(300)).unwrap();
        let d = delta_from_trace(r.final_objective(), n);
        assert!(d < 0.1 * delta_from_trace(r.initial_objective, n), "{}", d);
        assert_eq!(r.stats.violations, 0);
    }

    #[test]
    fn contractions_per_update_do_not_grow_with_depth() {
        let u = random_mpo_unitary(6, 5);
        let per = |d: usize| {
            let c = init_circuit(6, d, 0.01, 0).unwrap();
            let r = compress(&c, &CompressionTarget::operator(&u), &SweepConfig::fixed(3)).unwrap();
            r.stats.contractions_per_update()
        };
        let (a, b) = (per(2), per(8));
        assert!(b <= 2.2 * a, "{} vs {}", a, b);
    }

    #[test]
    fn second_order_trotter_is_closer_than_first() {
        let h = crate::fermion::hubbard_1d(2, 1.0, 4.0);
        let u_ref = crate::mpo::trotterized_reference(&h, 0.1, 100, 1e-14).unwrap();
        let d1 = mpo_delta(&u_ref, &trotter_product(&h, 0.1, 1, TrotterOrder::First, 1e-14).unwrap()).unwrap();
        let d2 = mpo_delta(&u_ref, &trotter_product(&h, 0.1, 1, TrotterOrder::Second, 1e-14).unwrap()).unwrap();
        assert!(d2 < d1 && d1 < 0.1);
    }

    #[test]
    fn concatenation_bound_for_a_compressed_step() {
        let h = crate::fermion::hubbard_1d(2, 1.0, 4.0);
        let hd = mpo_to_dense(&crate::mpo::hamiltonian_to_mpo(&h).unwrap()).unwrap();
        let exact = crate::linalg::expm_i_hermitian(&hd, -0.1).unwrap();
        let c = init_circuit(4, 3, 0.01, 0).unwrap();
        let (c, _) = compress_to_mpo(&c, &dense_to_mpo(&exact), 50).unwrap();
        for (lhs, rhs) in concatenation_errors(&exact, &c.to_dense().unwrap(), 10).unwrap() {
            assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn delta_of_exact_circuit_is_zero() {
        let c = init_circuit(4, 3, 1.0, 12).unwrap();
        let u = dense_to_mpo(&c.to_dense().unwrap());
        assert!(distance_metric_delta(&c, &u).unwrap() < 1e-6);
        assert_eq!(delta_from_trace(-1.0, 4), core::f64::consts::SQRT_2);
    }
}
