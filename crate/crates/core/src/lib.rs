//! Channel predictors for time-variant flat-fading channels.
//!
//! The crate builds the classical `l`-step LMMSE predictor (with exact or Jakes
//! covariance knowledge), a Gridded Predictor that softmax-combines LMMSE filters over
//! sampled Doppler scenarios, its DFT-compressed Structured variant, and a shallow
//! softmax network initialized from the Structured Predictor and trained on simulated
//! channels. [`harness`] runs Monte Carlo MSE-versus-velocity sweeps over all of them.

pub mod channel;
pub mod covariance;
pub mod error;
pub mod exec;
pub mod gridded;
pub mod harness;
pub mod lmmse;
pub mod model_file;
pub mod nn;
pub mod numerics;
pub mod rng;
pub mod structured;

pub use error::{Error, Result};
pub use exec::Execution;
