use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{sample_phases, sample_scenario, ChannelSample, ModelParams};
use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gridded::FilterBank;
use crate::lmmse::{lmmse_direct, PredictorRow};
use crate::nn::{forward, row_from_output, NNWeights};
use crate::numerics::{CMatrix, Complex64};
use crate::rng::SeedTree;
use crate::structured::{feature_compressed, QKind, StructuredModel};

/// Samples per evaluation chunk. Each chunk owns one substream, so the estimate does
/// not depend on the execution mode.
pub const EVAL_CHUNK: usize = 1000;

/// The seven predictors, in table order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PredictorKind {
    LmmsePerfect,
    LmmseJakes,
    Gridded,
    StructuredToep,
    StructuredCirc,
    NnToep,
    NnCirc,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 7] = [
        PredictorKind::LmmsePerfect,
        PredictorKind::LmmseJakes,
        PredictorKind::Gridded,
        PredictorKind::StructuredToep,
        PredictorKind::StructuredCirc,
        PredictorKind::NnToep,
        PredictorKind::NnCirc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::LmmsePerfect => "LMMSE Perfect",
            PredictorKind::LmmseJakes => "LMMSE Jakes",
            PredictorKind::Gridded => "Gridded",
            PredictorKind::StructuredToep => "Structured Toep",
            PredictorKind::StructuredCirc => "Structured Circ",
            PredictorKind::NnToep => "NN Toep",
            PredictorKind::NnCirc => "NN Circ",
        }
    }

    /// `lmmse-perfect`, `nn-toep`, ...
    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase().replace(' ', "-")
    }

    /// Accepts the display name or the slug, case-insensitively; `_` and ` ` match `-`.
    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        Self::ALL.into_iter().find(|k| k.slug() == norm)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn q_kind(self) -> Option<QKind> {
        match self {
            PredictorKind::StructuredToep | PredictorKind::NnToep => Some(QKind::Toeplitz),
            PredictorKind::StructuredCirc | PredictorKind::NnCirc => Some(QKind::Circulant),
            _ => None,
        }
    }

    pub fn is_network(self) -> bool {
        matches!(self, PredictorKind::NnToep | PredictorKind::NnCirc)
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Anything that maps one realization to a linear predictor row.
pub trait Predictor: Sync {
    fn row(&self, sample: &ChannelSample) -> Result<PredictorRow>;

    fn predict(&self, sample: &ChannelSample) -> Result<Complex64> {
        self.row(sample)?.predict(&sample.observation)
    }
}

/// Filter from the true scenario of each realization.
#[derive(Clone, Debug)]
pub struct PerfectPredictor {
    pub params: ModelParams,
    pub step: usize,
    pub noise_var: f64,
}

impl Predictor for PerfectPredictor {
    fn row(&self, sample: &ChannelSample) -> Result<PredictorRow> {
        let spec = CovarianceSpec::from_scenario(&sample.scenario, &self.params)?;
        lmmse_direct(&spec, self.params.obs_len, self.step, self.noise_var)
    }
}

/// One fixed row, e.g. LMMSE Jakes.
#[derive(Clone, Debug)]
pub struct FixedPredictor(pub PredictorRow);

impl Predictor for FixedPredictor {
    fn row(&self, _: &ChannelSample) -> Result<PredictorRow> {
        Ok(self.0.clone())
    }
}

impl Predictor for FilterBank {
    fn row(&self, sample: &ChannelSample) -> Result<PredictorRow> {
        self.row_for(&sample.observation)
    }
}

impl Predictor for StructuredModel {
    fn row(&self, sample: &ChannelSample) -> Result<PredictorRow> {
        self.row_for(&sample.observation)
    }
}

#[derive(Clone, Debug)]
pub struct NetworkPredictor {
    pub weights: NNWeights,
    pub q: CMatrix,
    pub noise_var: f64,
    pub step: usize,
}

impl Predictor for NetworkPredictor {
    fn row(&self, sample: &ChannelSample) -> Result<PredictorRow> {
        let c = feature_compressed(&sample.observation, &self.q, self.noise_var)?;
        Ok(row_from_output(&forward(&self.weights, &c)?, self.step))
    }
}

/// Where evaluation realizations come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSource {
    /// Fresh DoAs and phases per realization.
    Prior,
    /// DoAs held fixed, phases redrawn.
    FixedDoas(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseEstimate {
    pub mse: f64,
    /// Standard error of the mean of `|h - ĥ|²`.
    pub std_err: f64,
    pub samples: usize,
}

/// Monte Carlo MSE over `n_eval` independent realizations.
///
/// Chunk `c` draws its realizations from `tree.child(c)`, and chunk sums are reduced in
/// chunk order, so the result is bit-identical for every [`Execution`].
#[allow(clippy::too_many_arguments)]
pub fn evaluate_mse(
    predictor: &dyn Predictor,
    params: &ModelParams,
    step: usize,
    noise_var: f64,
    n_eval: usize,
    source: &ScenarioSource,
    tree: &SeedTree,
    exec: Execution,
) -> Result<MseEstimate> {
    if n_eval == 0 {
        return Err(Error::Domain("n_eval must be at least 1".into()));
    }
    params.check_step(step)?;
    let chunks = n_eval.div_ceil(EVAL_CHUNK);
    let sums = exec.try_map(chunks, |c| {
        let mut rng = tree.child(c as u64).stream();
        let n = EVAL_CHUNK.min(n_eval - c * EVAL_CHUNK);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let scenario = match source {
                ScenarioSource::Prior => sample_scenario(params, &mut rng),
                ScenarioSource::FixedDoas(d) => sample_phases(params, d, &mut rng)?,
            };
            let sample = ChannelSample::from_scenario(scenario, params, step, noise_var, &mut rng)?;
            let e = (sample.target - predictor.predict(&sample)?).norm_sqr();
            s1 += e;
            s2 += e * e;
        }
        Ok::<_, Error>((s1, s2))
    })?;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_eval as f64;
    let mse = s1 / n;
    if !mse.is_finite() {
        return Err(Error::NumericFailure {
            stage: "evaluation",
            index: 0,
        });
    }
    let var = if n_eval > 1 { ((s2 - n * mse * mse) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(MseEstimate {
        mse,
        std_err: (var / n).sqrt(),
        samples: n_eval,
    })
}
