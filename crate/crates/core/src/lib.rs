//! Low-discrepancy and learned purposive sampling of latent vectors for
//! stochastic multimodal trajectory prediction.
//!
//! The crate is organised bottom-up:
//!
//! * [`lds`]: unit-cube point sets (MC, Sobol, scrambled Sobol, Halton) and
//!   their star discrepancy.
//! * [`transform`]: Box-Muller and the bivariate Cholesky pushforward, with
//!   analytic Jacobians.
//! * [`scene`]: pedestrian scenes, ETH/UCY ingestion and a synthetic
//!   branching-scene generator.
//! * [`predictor`]: a constant-velocity Gaussian head that turns one 2-D
//!   latent point into a 12-frame future.
//! * [`npsn`]: the purposive sampling network with hand-written reverse mode.
//! * [`train`]: winner-takes-all and discrepancy losses, AdamW training.
//! * [`metrics`]: best-of-N ADE/FDE/TCC evaluation.
//! * [`biaslab`]: numerical experiments on MC bias and QMC convergence.
//! * [`experiments`]: sampler comparison and N-sweep drivers.

pub mod biaslab;
pub mod error;
pub mod experiments;
pub mod lds;
pub mod metrics;
pub mod npsn;
pub mod predictor;
pub mod scene;
pub mod train;
pub mod transform;

pub use error::{Error, Result};
