//! Tensor-network core for compressed-circuit quantum phase difference estimation.
//!
//! Everything here is `no_std` with `alloc`: dense tensors, MPS/MPO algebra,
//! DMRG, brick-wall circuit compression, statevector simulation of the
//! estimation circuit and the Bayesian estimation loop. File formats and the
//! command line live in the `qpde` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod brickwall;
pub mod compress;
pub mod dmrg;
pub mod error;
pub mod estimator;
pub mod fermion;
pub mod linalg;
pub mod mpo;
pub mod mps;
pub mod ordering;
pub mod pauli;
pub mod rng;
pub mod spectrum;
pub mod statevector;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::DenseTensor;

pub type C64 = num_complex::Complex64;
