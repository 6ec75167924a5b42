//! Parallel in-situ Hamiltonian learning with quantum signal processing
//! estimation (QSPE).
//!
//! The target Hamiltonian is a ZZ-coupled qubit register
//! `H = sum_{p<q} c_pq Z_p Z_q`. Adding a single X drive `a_i X_i` splits the
//! Hilbert space into `2^(n-1)` invariant two-dimensional subspaces, each of
//! which behaves as an independent single-qubit gate. QSPE reads the swap
//! angle and phase of every such gate off Fourier coefficients, and the
//! couplings follow from a small `+-1` linear system.
//!
//! Units are fixed throughout: rad/us for rates, us for time, rad for angles,
//! um for distances. Qubit indices are 0-based; qubit 0 is the leftmost
//! (most significant) bit of a basis-state bitstring.

pub mod error;
pub mod learner;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod qspe;
pub mod rydberg;
pub mod sim;

pub use error::{Error, Result};
pub use num_complex::Complex64;
