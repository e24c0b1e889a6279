//! Fractional Brownian rough paths, their smooth stationary Wong-Zakai
//! approximation, and rough differential equations driven by either.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fbm;
pub mod lift;
pub mod norms;
pub mod rde;
pub mod rds;
pub mod wongzakai;

pub use error::{Error, Result};
pub use fbm::{FbmParams, FbmSampler, SamplePath, TimeGrid};
pub use lift::{GridRoughPath, Level2Value};
pub use norms::{NodeWindow, StoppingTimes, VariationParams};
pub use rde::{ControlledPath, VectorField};
pub use rds::CocycleProbe;
pub use wongzakai::DeltaParam;
pub use experiment::{ConvergenceReport, ExperimentConfig, RunOptions};
