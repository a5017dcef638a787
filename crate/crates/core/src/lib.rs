//! Low-rank multilevel Hankel recovery of spectrally sparse signals.

pub mod error;
pub mod fft;
pub mod hankel;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod solver;

pub use error::{Error, Result};
pub use hankel::{HankelPlan, HankelShape, Level};
pub use model::{ObservedData, SampleMask};
pub use solver::{solve, SolverConfig, Variant};
