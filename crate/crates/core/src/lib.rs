//! Simulation and tomography of a two-qubit open quantum process probed by
//! intervening projective measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`qlinalg`]: dense complex matrices, Hermitian eigensolver, matrix functions;
//! - [`quantum`]: states, gates, projectors, χ-matrix maps, fidelities, noise;
//! - [`process`]: exact and sampled execution of the system–environment process,
//!   plus the Markovian (reduced-map) predictor;
//! - [`tomography`]: state and process tomography, and the restricted process
//!   tensor fitted from projector-sequence records;
//! - [`nonmarkov`]: conditional Choi states and the minimum relative entropy to
//!   an uncorrelated reference;
//! - [`textio`]: plain-text serialization of records and matrices.

pub mod error;
pub mod nonmarkov;
pub mod process;
pub mod qlinalg;
pub mod quantum;
pub mod textio;
pub mod tomography;

pub use error::{Error, Result};
pub use qlinalg::{CMatrix, C64};
pub use quantum::{ChiMatrix, DensityMatrix, NoiseSpec, Projector};

/// Maps independent work items, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}
