//! Hand-rolled differentiable training kernel: dense matrices, a reverse-mode
//! tape over a fixed op set, named parameter storage, Adam, checkpointing and
//! a finite-difference gradient checker. All arithmetic is `f64`.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod matrix;
pub mod ops;
pub mod params;
pub mod tape;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{enforce_tolerance, finite_difference_check, BlockReport};
pub use matrix::DenseMatrix;
pub use ops::Mode;
pub use params::{ParamId, ParameterStore};
pub use tape::{NodeId, Tape};
