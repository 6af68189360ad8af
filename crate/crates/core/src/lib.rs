//! Empirical balanced truncation of nonlinear control-affine systems
//! in a reproducing kernel Hilbert space.
//!
//! The pipeline: simulate impulse and initial-condition responses
//! ([`empirical::collect_samples`]), form kernel matrices over them
//! ([`empirical::build_kernel_matrices`]), take the SVD of the centered
//! cross-Gram matrix ([`balance::hankel_spectrum`]), truncate to an order
//! `q` ([`balance::ReductionMap`]), learn reduced dynamics and output maps
//! by kernel ridge regression ([`regress`]) and simulate the closed reduced
//! system ([`reduced::ReducedModel`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod empirical;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod reduced;
pub mod regress;
mod serde_rows;
pub mod signals;
pub mod sim;
pub mod systems;

pub use balance::{hankel_spectrum, select_order, HankelSpectrum, OrderPolicy, ReductionMap};
pub use empirical::{build_kernel_matrices, collect_samples, KernelMatrices, SampleEnsemble};
pub use error::{Error, Result};
pub use kernels::Kernel;
pub use reduced::{JacobianStrategy, ReducedModel};
pub use regress::RkhsRegressor;
pub use signals::Signal;
pub use sim::{integrate, SampleGrid, Trajectory};
pub use systems::ControlSystem;
