//! Brick-wall circuits of nearest-neighbour two-qubit gates.
//!
//! Layers are 0-based. Layer `j` holds gates on pairs `(q, q+1)` with
//! `q ≡ j (mod 2)`: layer 0 acts on `(0,1), (2,3), …`, layer 1 on `(1,2), (3,4), …`.
//! Layer 0 acts first. A gate is a 4×4 matrix whose row index is
//! `2·o_q + o_{q+1}` and column index `2·i_q + i_{q+1}`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{random_near_identity_unitary, unitarity_error};
use crate::rng::derive_seed;
use crate::statevector::apply_two_qubit_gate;
use crate::tensor::DenseTensor;
use crate::C64;

/// Default scale of the random perturbation in `init_circuit`.
pub const DEFAULT_INIT_SCALE: f64 = 0.01;

/// Largest circuit converted to a dense matrix.
pub const DENSE_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct BrickWallCircuit {
    n_qubits: usize,
    depth: usize,
    layers: Vec<Vec<DenseTensor>>,
}

/// First qubit of every pair in layer `j`.
pub fn layer_pairs(n_qubits: usize, layer: usize) -> impl Iterator<Item = usize> {
    (layer % 2..n_qubits.saturating_sub(1)).step_by(2)
}

/// Layers that hold a gate on pair `(q, q+1)`.
pub fn column_layers(depth: usize, q: usize) -> impl Iterator<Item = usize> {
    (q % 2..depth).step_by(2)
}

impl BrickWallCircuit {
    /// Validates gate shapes and unitarity (to 1e-10).
    pub fn new(n_qubits: usize, layers: Vec<Vec<DenseTensor>>) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::InvalidArgument("brick-wall circuits need two qubits".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidArgument("depth must be at least one".into()));
        }
        for (j, layer) in layers.iter().enumerate() {
            let expected = layer_pairs(n_qubits, j).count();
            if layer.len() != expected {
                return Err(Error::Shape(format!("layer {} has {} gates, expected {}", j, layer.len(), expected)));
            }
            for g in layer {
                if g.shape() != [4, 4] {
                    return Err(Error::Shape(format!("gate shape {:?}", g.shape())));
                }
                let e = unitarity_error(g);
                if e > 1e-10 {
                    return Err(Error::Numerical(format!("gate in layer {} is not unitary ({:e})", j, e)));
                }
            }
        }
        Ok(Self {
            n_qubits,
            depth: layers.len(),
            layers,
        })
    }

    pub fn identity(n_qubits: usize, depth: usize) -> Result<Self> {
        init_circuit(n_qubits, depth, 0.0, 0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn layers(&self) -> &[Vec<DenseTensor>] {
        &self.layers
    }

    pub fn n_gates(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Gate of `layer` on pair `(q, q+1)`.
    pub fn gate(&self, layer: usize, q: usize) -> Result<&DenseTensor> {
        let slot = self.slot(layer, q)?;
        Ok(&self.layers[layer][slot])
    }

    pub fn set_gate(&mut self, layer: usize, q: usize, gate: DenseTensor) -> Result<()> {
        if gate.shape() != [4, 4] {
            return Err(Error::Shape(format!("gate shape {:?}", gate.shape())));
        }
        let slot = self.slot(layer, q)?;
        self.layers[layer][slot] = gate;
        Ok(())
    }

    fn slot(&self, layer: usize, q: usize) -> Result<usize> {
        if layer >= self.depth || q + 1 >= self.n_qubits || q % 2 != layer % 2 {
            return Err(Error::OutOfRange(format!(
                "no gate at layer {} on qubits ({}, {}) of a {}-qubit depth-{} circuit",
                layer,
                q,
                q + 1,
                self.n_qubits,
                self.depth
            )));
        }
        Ok(q / 2)
    }

    /// Largest deviation from unitarity over all gates.
    pub fn unitarity_error(&self) -> f64 {
        self.layers
            .iter()
            .flatten()
            .map(unitarity_error)
            .fold(0.0, f64::max)
    }

    /// Dense `2^n × 2^n` matrix, qubit 0 most significant.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let n = self.n_qubits;
        if n > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                what: "dense circuit qubits",
                size: n,
                limit: DENSE_LIMIT,
            });
        }
        let dim = 1usize << n;
        let mut out = DenseTensor::zeros(&[dim, dim]);
        let mut col = alloc::vec![C64::new(0.0, 0.0); dim];
        for c in 0..dim {
            col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            col[c] = C64::new(1.0, 0.0);
            for (j, layer) in self.layers.iter().enumerate() {
                for (q, g) in layer_pairs(n, j).zip(layer) {
                    apply_two_qubit_gate(&mut col, n, q, g.data());
                }
            }
            for (r, z) in col.iter().enumerate() {
                out.set(&[r, c], *z);
            }
        }
        Ok(out)
    }
}

/// Near-identity circuit: every gate is the Q factor of `I + scale·W` for a
/// seeded random `W`. `scale = 0` gives exact identities.
pub fn init_circuit(n_qubits: usize, depth: usize, scale: f64, seed: u64) -> Result<BrickWallCircuit> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("initialization scale {}", scale)));
    }
    if n_qubits < 2 || depth < 1 {
        return Err(Error::InvalidArgument(format!(
            "circuit of {} qubits and depth {}",
            n_qubits, depth
        )));
    }
    let layers = (0..depth)
        .map(|j| {
            layer_pairs(n_qubits, j)
                .map(|q| random_near_identity_unitary(4, scale, derive_seed(seed, &[j as u64, q as u64])))
                .collect()
        })
        .collect();
    BrickWallCircuit::new(n_qubits, layers)
}

/// Two-qubit gate count of the estimation circuit:
/// `3·(N·⌈d_prep/2⌉·2 + (N−1)·⌈d_evol/2⌉·steps)`.
pub fn two_qubit_gate_count(n: usize, d_prep: usize, d_evol: usize, steps: usize) -> usize {
    3 * (n * d_prep.div_ceil(2) * 2 + n.saturating_sub(1) * d_evol.div_ceil(2) * steps)
}
