use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::network::{loss_and_grad_features, BatchFeatures, NNWeights};
use super::optim::{Optimizer, OptimizerState};
use crate::channel::{make_batch, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::CMatrix;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub minibatches: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Relative size of the perturbation applied to duplicated hidden units before the
    /// first step; 0 disables it.
    pub symmetry_jitter: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            minibatches: 3000,
            batch_size: 50,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            symmetry_jitter: 1e-2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minibatches == 0 || self.batch_size == 0 {
            return Err(Error::Domain("minibatches and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Domain(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.symmetry_jitter >= 0.0) || !self.symmetry_jitter.is_finite() {
            return Err(Error::Domain(format!("symmetry jitter {}", self.symmetry_jitter)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: NNWeights,
    /// Minibatch MSE before each update.
    pub loss_trace: Vec<f64>,
}

/// Training aborted on a non-finite loss or parameter.
#[derive(Clone, Debug)]
pub struct TrainFailure {
    pub step: usize,
    pub last_good: Box<NNWeights>,
    pub loss_trace: Vec<f64>,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "training diverged at minibatch {}", self.step)
    }
}

impl std::error::Error for TrainFailure {}

impl From<TrainFailure> for Error {
    fn from(e: TrainFailure) -> Self {
        Error::NumericFailure {
            stage: "training",
            index: e.step,
        }
    }
}

/// Runs `cfg.minibatches` optimizer steps, each on a freshly generated batch.
pub fn train(
    init: NNWeights,
    params: &ModelParams,
    step: usize,
    noise_var: f64,
    q: &CMatrix,
    cfg: &TrainConfig,
    rng: &mut Stream,
) -> std::result::Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    params.check_step(step)?;
    if q.cols() != params.obs_len || q.rows() != init.input_len() || init.obs_len() != params.obs_len {
        return Err(Error::InvalidDimension(format!(
            "Q is {}x{}, network expects input {} and M={}",
            q.rows(),
            q.cols(),
            init.input_len(),
            init.obs_len()
        ))
        .into());
    }
    let mut w = init;
    break_symmetry(&mut w, cfg.symmetry_jitter, rng);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &w);
    let mut trace = Vec::with_capacity(cfg.minibatches);
    for k in 0..cfg.minibatches {
        let batch = make_batch(params, step, cfg.batch_size, noise_var, rng)?;
        let feats = BatchFeatures::compute(&batch, q)?;
        let (mse, grad) = match loss_and_grad_features(&w, &batch, &feats) {
            Ok(r) => r,
            Err(Error::NumericFailure { .. }) => return Err(failure(k, w, trace)),
            Err(e) => return Err(e.into()),
        };
        if !grad.is_finite() {
            return Err(failure(k, w, trace));
        }
        let last_good = w.clone();
        opt.step(&mut w, &grad);
        trace.push(mse);
        if !w.is_finite() {
            return Err(failure(k, last_good, trace));
        }
    }
    Ok(TrainOutcome {
        weights: w,
        loss_trace: trace,
    })
}

/// Perturbs the `A(1)` rows of hidden units that exactly duplicate an earlier unit.
///
/// Identical units (same `A(1)` row and `b(1)`, as produced by a bank whose samples
/// coincide, e.g. at zero velocity) receive identical gradients forever. Each
/// duplicate row gets i.i.d. `N(0, (jitter·s)²)` noise, `s` the row's largest entry.
/// Returns the number of perturbed units.
pub fn break_symmetry(w: &mut NNWeights, jitter: f64, rng: &mut Stream) -> usize {
    if jitter == 0.0 {
        return 0;
    }
    let h = w.hidden_len();
    let dup: Vec<usize> = (1..h)
        .filter(|&i| (0..i).any(|j| w.b1[i] == w.b1[j] && w.a1.row(i) == w.a1.row(j)))
        .collect();
    for &i in &dup {
        let row = w.a1.row_mut(i);
        let s = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let s = if s > 0.0 { s } else { 1.0 };
        for x in row.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += jitter * s * z;
        }
    }
    dup.len()
}

fn failure(step: usize, last_good: NNWeights, loss_trace: Vec<f64>) -> TrainError {
    TrainError::Diverged(TrainFailure {
        step,
        last_good: Box::new(last_good),
        loss_trace,
    })
}

#[derive(Debug)]
pub enum TrainError {
    Invalid(Error),
    Diverged(TrainFailure),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Invalid(e) => e.fmt(f),
            TrainError::Diverged(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<Error> for TrainError {
    fn from(e: Error) -> Self {
        TrainError::Invalid(e)
    }
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Invalid(e) => e,
            TrainError::Diverged(f) => f.into(),
        }
    }
}
