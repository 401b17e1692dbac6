//! Concrete models: the Gaussian-perturbed dynamical system and the killed
//! diffusion on the positive orthant, their discretizations, Monte Carlo
//! estimators and configuration.

pub mod catalog;
pub mod config;
pub mod diffusion;
pub mod grid;
pub mod hypotheses;
pub mod mc;
pub mod pds;
pub mod quadrature;

pub use catalog::FnSpec;
pub use config::{KvConfig, McSettings, Model, ModelConfig};
pub use diffusion::{
    analyze_family, build_diffusion_family, build_diffusion_generator, girsanov_check,
    DiffusionFamily, DiffusionModel, Generator, GirsanovCheck,
};
pub use grid::{Axis, Grid};
pub use hypotheses::{check_diffusion_hypotheses, check_pds_hypotheses, HypothesisReport};
pub use mc::{
    mc_diffusion, mc_log_mass_slope, mc_pds, BoundaryRule, EulerSettings, McEstimate,
    SlopeEstimate, Start,
};
pub use pds::{build_pds_kernel, verify_condition_g, PdsKernel, PdsModel, PdsVerification};
