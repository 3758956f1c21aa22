//! Predicted-occupancy grids for vehicle safety.
//!
//! The crate covers the whole prediction pipeline at desk scale:
//!
//! - [`grid`]: grid geometry and the augmented occupancy grid (AOG) encoding of a scene.
//! - [`scenario`]: ground-truth scenes, kinematics, multi-hypothesis trajectories, the
//!   model-based predicted-occupancy grid (POG) and randomized dataset generation.
//! - [`situation`]: road-geometry classification by image distortion model + k-NN, and
//!   constellation / safety-relevance rules.
//! - [`sda`]: stacked denoising autoencoder with tied weights, trained greedily layer by layer.
//! - [`forest`]: regression random forests and the per-cell forest bank.
//! - [`metrics`]: reconstruction error, POG quality measure and confusion matrices.
//! - [`planner`]: EGO candidate trajectories and min-max safe-trajectory selection.
//! - [`pipeline`]: configuration, persistence and the end-to-end commands behind the `pog` CLI.

mod binio;
pub mod error;
pub mod forest;
pub mod grid;
pub mod metrics;
pub mod pgm;
pub mod pipeline;
pub mod planner;
pub mod scenario;
pub mod sda;
pub mod seed;
pub mod situation;

pub use error::{Error, Result};
