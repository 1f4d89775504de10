//! Velocity/SNR sweeps over the configured predictors.
//!
//! Substreams, all derived from `SeedTree::new(cfg.seed)`:
//! - `[EVAL, v, s]`: evaluation realizations, shared by every predictor at a point
//! - `[BANK, v, s, N_g]`: grid sampling (only random for `P > 1`)
//! - `[TRAIN, v, s, k]`: training batches of predictor `k`
//! - `[PERFECT, v, s]`: DoAs for [`PerfectMode::FixedDoas`]

use crate::channel::{noise_var_from_snr_db, sample_scenario, ModelParams};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gridded::{build_bank, FilterBank, GridStrategy};
use crate::lmmse::{jakes_spec, lmmse_direct};
use crate::nn::{init_from_structured, train, TrainOutcome};
use crate::rng::SeedTree;
use crate::structured::{QKind, StructuredModel};

use super::config::{ExperimentConfig, PerfectMode};
use super::eval::{evaluate_mse, FixedPredictor, NetworkPredictor, PerfectPredictor, Predictor, PredictorKind, ScenarioSource};

pub const EVAL_TAG: u64 = 1;
pub const BANK_TAG: u64 = 2;
pub const TRAIN_TAG: u64 = 3;
pub const PERFECT_TAG: u64 = 4;

/// One result row. Failed points carry `mse = NaN` and the error text.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub predictor: PredictorKind,
    pub velocity_kmh: f64,
    pub snr_db: f64,
    pub paths: usize,
    pub mse: f64,
    pub eval_samples: usize,
    pub seed: u64,
    pub failure: Option<String>,
    /// True when the failure was numeric rather than a setup error.
    pub numeric_failure: bool,
}

/// One (velocity, SNR) grid point of a config.
#[derive(Clone, Copy, Debug)]
pub struct Point {
    pub velocity_idx: usize,
    pub snr_idx: usize,
    pub params: ModelParams,
    pub noise_var: f64,
}

impl Point {
    pub fn new(cfg: &ExperimentConfig, velocity_idx: usize, snr_idx: usize) -> Result<Self> {
        let v = *cfg
            .velocities_kmh
            .get(velocity_idx)
            .ok_or_else(|| Error::Domain(format!("velocity index {velocity_idx}")))?;
        let s = *cfg.snr_db.get(snr_idx).ok_or_else(|| Error::Domain(format!("SNR index {snr_idx}")))?;
        Ok(Point {
            velocity_idx,
            snr_idx,
            params: cfg.model_params(v)?,
            noise_var: noise_var_from_snr_db(s),
        })
    }

    fn tree(&self, cfg: &ExperimentConfig, tag: u64) -> SeedTree {
        SeedTree::new(cfg.seed).descend(&[tag, self.velocity_idx as u64, self.snr_idx as u64])
    }

    pub fn eval_tree(&self, cfg: &ExperimentConfig) -> SeedTree {
        self.tree(cfg, EVAL_TAG)
    }
}

pub fn build_point_bank(cfg: &ExperimentConfig, point: &Point, size: usize, exec: Execution) -> Result<FilterBank> {
    let mut rng = point.tree(cfg, BANK_TAG).child(size as u64).stream();
    build_bank(&GridStrategy::for_paths(size, cfg.paths), &point.params, cfg.step, point.noise_var, &mut rng, exec)
}

pub fn build_structured(cfg: &ExperimentConfig, point: &Point, kind: QKind, exec: Execution) -> Result<StructuredModel> {
    let size = match kind {
        QKind::Circulant => cfg.n_grid,
        QKind::Toeplitz => 2 * cfg.n_grid,
    };
    StructuredModel::from_bank(&build_point_bank(cfg, point, size, exec)?, kind, exec)
}

/// Structured initialization followed by training; returns the predictor and loss trace.
pub fn build_network(cfg: &ExperimentConfig, point: &Point, kind: PredictorKind, exec: Execution) -> Result<(NetworkPredictor, Vec<f64>)> {
    let q_kind = kind
        .q_kind()
        .filter(|_| kind.is_network())
        .ok_or_else(|| Error::Domain(format!("{kind} is not a network predictor")))?;
    let s = build_structured(cfg, point, q_kind, exec)?;
    let mut rng = point.tree(cfg, TRAIN_TAG).child(kind.index() as u64).stream();
    let TrainOutcome { weights, loss_trace } = train(init_from_structured(&s), &point.params, cfg.step, point.noise_var, &s.q, &cfg.train, &mut rng)?;
    Ok((
        NetworkPredictor {
            weights,
            q: s.q,
            noise_var: point.noise_var,
            step: cfg.step,
        },
        loss_trace,
    ))
}

/// Builds (and, for NN predictors, trains) one predictor together with the scenario
/// source it is evaluated on.
pub fn build_predictor(
    cfg: &ExperimentConfig,
    point: &Point,
    kind: PredictorKind,
    exec: Execution,
) -> Result<(Box<dyn Predictor>, ScenarioSource)> {
    let p = &point.params;
    Ok(match kind {
        PredictorKind::LmmsePerfect => {
            let pred = Box::new(PerfectPredictor {
                params: *p,
                step: cfg.step,
                noise_var: point.noise_var,
            });
            let source = match cfg.perfect_mode {
                PerfectMode::PerRealization => ScenarioSource::Prior,
                PerfectMode::FixedDoas => {
                    let mut rng = point.tree(cfg, PERFECT_TAG).stream();
                    ScenarioSource::FixedDoas(sample_scenario(p, &mut rng).doas)
                }
            };
            (pred, source)
        }
        PredictorKind::LmmseJakes => (
            Box::new(FixedPredictor(lmmse_direct(&jakes_spec(p)?, cfg.obs_len, cfg.step, point.noise_var)?)),
            ScenarioSource::Prior,
        ),
        PredictorKind::Gridded => (Box::new(build_point_bank(cfg, point, cfg.grid_size(kind), exec)?), ScenarioSource::Prior),
        PredictorKind::StructuredToep | PredictorKind::StructuredCirc => {
            let q = kind.q_kind().expect("structured kinds carry a Q kind");
            (Box::new(build_structured(cfg, point, q, exec)?), ScenarioSource::Prior)
        }
        PredictorKind::NnToep | PredictorKind::NnCirc => (Box::new(build_network(cfg, point, kind, exec)?.0), ScenarioSource::Prior),
    })
}

/// Builds and evaluates one predictor at one point.
pub fn run_point(cfg: &ExperimentConfig, point: &Point, kind: PredictorKind, exec: Execution) -> Result<f64> {
    let (pred, source) = build_predictor(cfg, point, kind, exec)?;
    let est = evaluate_mse(
        pred.as_ref(),
        &point.params,
        cfg.step,
        point.noise_var,
        cfg.eval_samples,
        &source,
        &point.eval_tree(cfg),
        exec,
    )?;
    Ok(est.mse)
}

/// Every (velocity, SNR, predictor) combination, sorted by velocity, then predictor,
/// then SNR. Failures become NaN rows and the sweep continues.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let kinds = cfg.active_predictors();
    let mut tasks = Vec::new();
    for vi in 0..cfg.velocities_kmh.len() {
        for &k in &kinds {
            for si in 0..cfg.snr_db.len() {
                tasks.push((vi, si, k));
            }
        }
    }
    let mut records = exec.map(tasks.len(), |t| {
        let (vi, si, kind) = tasks[t];
        let result = Point::new(cfg, vi, si).and_then(|pt| run_point(cfg, &pt, kind, exec));
        let (mse, failure, numeric) = match result {
            Ok(m) => (m, None, false),
            Err(e) => (f64::NAN, Some(e.to_string()), e.is_numeric()),
        };
        MetricRecord {
            predictor: kind,
            velocity_kmh: cfg.velocities_kmh[vi],
            snr_db: cfg.snr_db[si],
            paths: cfg.paths,
            mse,
            eval_samples: cfg.eval_samples,
            seed: cfg.seed,
            failure,
            numeric_failure: numeric,
        }
    });
    records.sort_by(|a, b| {
        a.velocity_kmh
            .total_cmp(&b.velocity_kmh)
            .then(a.predictor.cmp(&b.predictor))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            obs_len: 4,
            step: 1,
            velocities_kmh: vec![60.0, 20.0],
            snr_db: vec![5.0],
            n_grid: 4,
            eval_samples: 300,
            ..Default::default()
        };
        cfg.train.minibatches = 5;
        cfg.train.batch_size = 4;
        cfg
    }

    #[test]
    fn single_point_single_predictor() {
        let cfg = ExperimentConfig {
            velocities_kmh: vec![30.0],
            predictors: vec![PredictorKind::LmmseJakes],
            ..small()
        };
        let r = run_experiment(&cfg, Execution::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].mse > 0.0 && r[0].failure.is_none());
    }

    #[test]
    fn full_small_sweep_is_ordered_and_deterministic() {
        let cfg = small();
        let a = run_experiment(&cfg, Execution::Parallel).unwrap();
        let b = run_experiment(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 14);
        assert_eq!(a[0].velocity_kmh, 20.0);
        assert_eq!(a[0].predictor, PredictorKind::LmmsePerfect);
        assert_eq!(a[6].predictor, PredictorKind::NnCirc);
        assert!(a.iter().all(|r| r.mse.is_finite() && r.mse >= 0.0));
    }

    #[test]
    fn failures_recorded_as_nan_rows() {
        let mut cfg = ExperimentConfig {
            predictors: vec![PredictorKind::NnCirc, PredictorKind::LmmseJakes],
            velocities_kmh: vec![50.0],
            ..small()
        };
        cfg.train.learning_rate = 1e200;
        cfg.train.optimizer = crate::nn::Optimizer::Sgd;
        let r = run_experiment(&cfg, Execution::Sequential).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r[0].mse.is_finite());
        assert!(r[1].mse.is_nan() && r[1].failure.is_some() && r[1].numeric_failure);
    }

    #[test]
    fn fixed_doa_mode_runs() {
        let cfg = ExperimentConfig {
            predictors: vec![PredictorKind::LmmsePerfect],
            perfect_mode: PerfectMode::FixedDoas,
            paths: 2,
            ..small()
        };
        let r = run_experiment(&cfg, Execution::default()).unwrap();
        assert!(r.iter().all(|r| r.mse.is_finite()));
    }
}
