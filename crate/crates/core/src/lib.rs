//! Workbench for space-optimized multidimensional factoring.
//!
//! Reversible pebbling schedules for the squaring chain, closed-form cost
//! models, small circuit builders with a state-vector simulator, and lattice
//! post-processing that turns measured samples into factors.

pub mod circuit;
pub mod costmodel;
pub mod lattice;
pub mod numtheory;
pub mod params;
pub mod pebble;
pub mod scalar;
pub mod simulator;

pub use lattice::{LatticeBasis, LatticeError, Sample};
pub use numtheory::{ExponentVector, NumTheoryError, Residue};
pub use params::{derive_params, FactoringParams, ParamOverrides, ParamsError};
pub use scalar::{LllField, Real};

/// Gaussian profile at double precision.
pub type GaussianProfile = params::GaussianProfile<f64>;

/// Double-precision state vector.
pub type StateVector = simulator::StateVector<f64>;
