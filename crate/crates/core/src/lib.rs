pub mod cli;
pub mod condition_g;
pub mod error;
pub mod models;
pub mod reciprocal;
pub mod semigroup;
pub mod spectral;
pub mod transforms;

pub use error::{Error, Result};
pub use semigroup::{
    weighted_norm, Measure, OperatorLayout, StateSpace, StepLabel, SubsetMask, TransferOperator,
    WeightedFunction,
};
