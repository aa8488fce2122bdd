//! Desk-scale numerics for learning quantum observables: Pauli feature maps, statevector
//! circuits, circuit-to-Hamiltonian builders, concept-class data generators and learners.

pub mod bits;
pub mod circuit;
pub mod cli;
pub mod clockham;
pub mod concepts;
pub mod error;
pub mod harness;
pub mod kitaev;
pub mod learners;
pub mod limits;
pub mod pauli;
pub mod rng;
pub mod spectral;

pub use num_complex::Complex64 as C64;

pub use bits::BitString;
pub use circuit::{Circuit, Gate, GateKind, StateVector};
pub use error::{Error, Result};
pub use pauli::{Geometry, Pauli, PauliObservable, PauliString};
pub use spectral::SparseHermitian;
