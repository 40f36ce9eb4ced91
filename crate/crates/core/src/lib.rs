//! Vehicle routing on simulated variational circuits: instance compilation to
//! Ising models, a dense statevector simulator, encoding ansatz families,
//! VQE with three classical optimizers, fidelity kernels and a batch
//! experiment harness.

pub mod ansatz;
pub mod error;
pub mod harness;
pub mod ising;
pub mod kernel;
pub mod optim;
pub mod statevector;
pub mod vqe;
pub mod vrp;

pub use error::{Error, Result};
