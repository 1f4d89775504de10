//! Experiment orchestration: config parsing, Monte Carlo MSE evaluation, velocity
//! sweeps and CSV output.

pub mod config;
pub mod csv;
pub mod eval;
pub mod selftest;
pub mod sweep;

pub use config::{load_config, parse_config, ExperimentConfig, PerfectMode, DESK_EVAL_SAMPLES, PAPER_EVAL_SAMPLES};
pub use csv::{format_csv, format_sci, write_csv, CSV_HEADER};
pub use eval::{
    evaluate_mse, FixedPredictor, MseEstimate, NetworkPredictor, PerfectPredictor, Predictor, PredictorKind, ScenarioSource,
    EVAL_CHUNK,
};
pub use sweep::{build_network, build_point_bank, build_predictor, build_structured, run_experiment, run_point, MetricRecord, Point};
pub use selftest::{run_selftest, Check};
