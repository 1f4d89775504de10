//! Neural Network Predictor: a one-hidden-layer softmax network
//! `A(2) softmax(A(1) ĉ + b(1)) + b(2)` whose output stacks the real and imaginary
//! parts of a predictor row. It is initialized from a [`StructuredModel`] and then
//! trained on fresh minibatches.
//!
//! [`StructuredModel`]: crate::structured::StructuredModel

mod network;
mod optim;
mod train;

pub use network::{forward, init_from_structured, loss_and_grad, predict_nn, row_from_output, BatchFeatures, NNWeights};
pub use optim::{Optimizer, OptimizerState};
pub use train::{break_symmetry, train, TrainConfig, TrainError, TrainFailure, TrainOutcome};
