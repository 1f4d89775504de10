//! Flat `key = value` experiment description. Lists are comma-separated, `#` starts a
//! comment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channel::{kmh_to_mps, ModelParams, DEFAULT_CARRIER_HZ, DEFAULT_SYMBOL_DURATION_S};
use crate::error::{Error, Result};
use crate::nn::{Optimizer, TrainConfig};
use crate::structured::QKind;

use super::eval::PredictorKind;

pub const DESK_EVAL_SAMPLES: usize = 20_000;
pub const PAPER_EVAL_SAMPLES: usize = 200_000;

/// How LMMSE Perfect obtains its covariance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerfectMode {
    /// Finite-P covariance of each evaluated realization.
    PerRealization,
    /// One DoA tuple per sweep point, known to the filter; only phases vary.
    FixedDoas,
}

impl PerfectMode {
    fn name(self) -> &'static str {
        match self {
            PerfectMode::PerRealization => "per_realization",
            PerfectMode::FixedDoas => "fixed_doas",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub obs_len: usize,
    pub step: usize,
    pub paths: usize,
    pub snr_db: Vec<f64>,
    pub velocities_kmh: Vec<f64>,
    /// Circulant bank size; Toeplitz and Gridded use twice as many samples.
    pub n_grid: usize,
    pub q_kinds: Vec<QKind>,
    pub eval_samples: usize,
    pub train: TrainConfig,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub predictors: Vec<PredictorKind>,
    pub carrier_freq_hz: f64,
    pub symbol_duration_s: f64,
    pub perfect_mode: PerfectMode,
}

impl Default for ExperimentConfig {
    /// `M=16, l=4, P=1`, SNR 10 dB, 0..100 km/h in steps of 10, all predictors.
    fn default() -> Self {
        ExperimentConfig {
            obs_len: 16,
            step: 4,
            paths: 1,
            snr_db: vec![10.0],
            velocities_kmh: (0..=10).map(|i| 10.0 * i as f64).collect(),
            n_grid: 16,
            q_kinds: vec![QKind::Toeplitz, QKind::Circulant],
            eval_samples: DESK_EVAL_SAMPLES,
            train: TrainConfig::default(),
            seed: 0,
            output: None,
            predictors: PredictorKind::ALL.to_vec(),
            carrier_freq_hz: DEFAULT_CARRIER_HZ,
            symbol_duration_s: DEFAULT_SYMBOL_DURATION_S,
            perfect_mode: PerfectMode::PerRealization,
        }
    }
}

pub const KEYS: [&str; 19] = [
    "obs_len",
    "step",
    "paths",
    "snr_db",
    "velocities_kmh",
    "n_grid",
    "q_kinds",
    "eval_samples",
    "minibatches",
    "batch_size",
    "learning_rate",
    "optimizer",
    "symmetry_jitter",
    "seed",
    "output",
    "predictors",
    "carrier_freq_hz",
    "symbol_duration_s",
    "perfect_mode",
];

impl ExperimentConfig {
    /// Bank size for a predictor: `n_grid` for circulant, `2 n_grid` otherwise.
    pub fn grid_size(&self, kind: PredictorKind) -> usize {
        match kind.q_kind() {
            Some(QKind::Circulant) => self.n_grid,
            _ => 2 * self.n_grid,
        }
    }

    /// Predictors to run: the `predictors` list minus Q-kinds not listed in `q_kinds`.
    pub fn active_predictors(&self) -> Vec<PredictorKind> {
        let mut out: Vec<_> = self
            .predictors
            .iter()
            .copied()
            .filter(|k| k.q_kind().is_none_or(|q| self.q_kinds.contains(&q)))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn model_params(&self, velocity_kmh: f64) -> Result<ModelParams> {
        ModelParams::new(
            self.carrier_freq_hz,
            self.symbol_duration_s,
            kmh_to_mps(velocity_kmh),
            self.paths,
            self.obs_len,
            self.step,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                key: key.into(),
                line: 0,
                message,
            })
        };
        if self.obs_len == 0 {
            return bad("obs_len", "must be at least 1".into());
        }
        if self.step == 0 {
            return bad("step", "must be at least 1".into());
        }
        if self.paths == 0 {
            return bad("paths", "must be at least 1".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db", "needs finite values".into());
        }
        if self.velocities_kmh.is_empty() || self.velocities_kmh.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return bad("velocities_kmh", "needs finite non-negative values".into());
        }
        if self.n_grid == 0 {
            return bad("n_grid", "must be at least 1".into());
        }
        if self.eval_samples == 0 {
            return bad("eval_samples", "must be at least 1".into());
        }
        if self.predictors.is_empty() {
            return bad("predictors", "list is empty".into());
        }
        if let Err(e) = self.train.validate() {
            return bad("learning_rate", e.to_string());
        }
        if let Err(e) = self.model_params(self.velocities_kmh[0]) {
            return bad("carrier_freq_hz", e.to_string());
        }
        Ok(())
    }

    /// Sets one key from its text value; `line` is used for error reporting only.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let err = |message: String| Error::Config {
            key: key.into(),
            line,
            message,
        };
        let v = value.trim();
        let int = || v.parse::<usize>().map_err(|e| err(format!("`{v}`: {e}")));
        let real = || v.parse::<f64>().map_err(|e| err(format!("`{v}`: {e}")));
        let list = || v.split(',').map(str::trim).filter(|s| !s.is_empty());
        let reals = || {
            list()
                .map(|s| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()
        };
        match key {
            "obs_len" => self.obs_len = int()?,
            "step" => self.step = int()?,
            "paths" => self.paths = int()?,
            "snr_db" => self.snr_db = reals()?,
            "velocities_kmh" => self.velocities_kmh = reals()?,
            "n_grid" => self.n_grid = int()?,
            "q_kinds" => {
                self.q_kinds = list()
                    .map(|s| QKind::parse(s).ok_or_else(|| err(format!("unknown Q kind `{s}`"))))
                    .collect::<Result<_>>()?
            }
            "eval_samples" => self.eval_samples = int()?,
            "minibatches" => self.train.minibatches = int()?,
            "batch_size" => self.train.batch_size = int()?,
            "learning_rate" => self.train.learning_rate = real()?,
            "optimizer" => {
                self.train.optimizer = match v.to_ascii_lowercase().as_str() {
                    "adam" => Optimizer::default(),
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(err(format!("unknown optimizer `{v}`"))),
                }
            }
            "symmetry_jitter" => self.train.symmetry_jitter = real()?,
            "seed" => self.seed = v.parse().map_err(|e| err(format!("`{v}`: {e}")))?,
            "output" => self.output = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "predictors" => {
                self.predictors = list()
                    .map(|s| PredictorKind::parse(s).ok_or_else(|| err(format!("unknown predictor `{s}`"))))
                    .collect::<Result<_>>()?
            }
            "carrier_freq_hz" => self.carrier_freq_hz = real()?,
            "symbol_duration_s" => self.symbol_duration_s = real()?,
            "perfect_mode" => {
                self.perfect_mode = match v {
                    "per_realization" => PerfectMode::PerRealization,
                    "fixed_doas" => PerfectMode::FixedDoas,
                    _ => return Err(err(format!("unknown mode `{v}`"))),
                }
            }
            _ => return Err(err("unknown key".into())),
        }
        Ok(())
    }

    /// Text form accepted by [`parse_config`]. Custom Adam moments are not representable.
    pub fn to_config_string(&self) -> String {
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("obs_len", self.obs_len.to_string());
        kv("step", self.step.to_string());
        kv("paths", self.paths.to_string());
        kv("snr_db", join(&self.snr_db));
        kv("velocities_kmh", join(&self.velocities_kmh));
        kv("n_grid", self.n_grid.to_string());
        kv("q_kinds", self.q_kinds.iter().map(|q| q.name()).collect::<Vec<_>>().join(", "));
        kv("eval_samples", self.eval_samples.to_string());
        kv("minibatches", self.train.minibatches.to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv("learning_rate", self.train.learning_rate.to_string());
        kv(
            "optimizer",
            match self.train.optimizer {
                Optimizer::Adam { .. } => "adam",
                Optimizer::Sgd => "sgd",
            }
            .into(),
        );
        kv("symmetry_jitter", self.train.symmetry_jitter.to_string());
        kv("seed", self.seed.to_string());
        if let Some(p) = &self.output {
            kv("output", p.display().to_string());
        }
        kv("predictors", self.predictors.iter().map(|p| p.slug()).collect::<Vec<_>>().join(", "));
        kv("carrier_freq_hz", self.carrier_freq_hz.to_string());
        kv("symbol_duration_s", self.symbol_duration_s.to_string());
        kv("perfect_mode", self.perfect_mode.name().into());
        s
    }
}

/// Parses config text on top of [`ExperimentConfig::default`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut seen = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                key: content.into(),
                line,
                message: "expected `key = value`".into(),
            });
        };
        let key = key.trim();
        if seen.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config {
                key: key.into(),
                line,
                message: "duplicate key".into(),
            });
        }
        seen.push((key, line));
        cfg.set(key, value, line)?;
    }
    // point validation failures at the line that set the key
    cfg.validate().map_err(|e| match e {
        Error::Config { key, message, .. } => Error::Config {
            line: seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l),
            key,
            message,
        },
        other => other,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_default() {
        let cfg = ExperimentConfig::default();
        assert_eq!(parse_config(&cfg.to_config_string()).unwrap(), cfg);
    }

    #[test]
    fn round_trip_custom() {
        let mut cfg = ExperimentConfig {
            snr_db: vec![-10.0, 0.0, 10.0],
            velocities_kmh: vec![0.0, 33.3],
            q_kinds: vec![QKind::Circulant],
            output: Some("out/fig5.csv".into()),
            predictors: vec![PredictorKind::NnCirc, PredictorKind::Gridded],
            perfect_mode: PerfectMode::FixedDoas,
            seed: u64::MAX,
            ..Default::default()
        };
        cfg.train.learning_rate = 3.5e-4;
        cfg.train.optimizer = Optimizer::Sgd;
        assert_eq!(parse_config(&cfg.to_config_string()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = parse_config("# fig 5\n\nsnr_db = -10   # low SNR\nvelocities_kmh = 10,20\n").unwrap();
        assert_eq!(cfg.snr_db, vec![-10.0]);
        assert_eq!(cfg.velocities_kmh, vec![10.0, 20.0]);
    }

    #[test]
    fn errors_name_key_and_line() {
        match parse_config("step = 4\nobs_len = sixteen\n") {
            Err(Error::Config { key, line, .. }) => {
                assert_eq!(key, "obs_len");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        match parse_config("\n\nvelocity = 3\n") {
            Err(Error::Config { key, line, .. }) => assert_eq!((key.as_str(), line), ("velocity", 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("seed = 1\nseed = 2\n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("predictors = nn-toep, kalman\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("just text\n"), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn validation() {
        assert!(matches!(parse_config("seed = 3\neval_samples = 0\n"), Err(Error::Config { line: 2, .. })));
        assert!(parse_config("velocities_kmh = -5\n").is_err());
        assert!(parse_config("snr_db = inf\n").is_err());
    }

    #[test]
    fn keys_documented() {
        let text = ExperimentConfig {
            output: Some("x.csv".into()),
            ..Default::default()
        }
        .to_config_string();
        let written: Vec<_> = text.lines().map(|l| l.split('=').next().unwrap().trim()).collect();
        assert_eq!(written, KEYS.to_vec());
    }

    #[test]
    fn grid_sizes_and_filtering() {
        let cfg = ExperimentConfig {
            q_kinds: vec![QKind::Toeplitz],
            ..Default::default()
        };
        assert_eq!(cfg.grid_size(PredictorKind::StructuredCirc), 16);
        assert_eq!(cfg.grid_size(PredictorKind::NnToep), 32);
        assert_eq!(cfg.grid_size(PredictorKind::Gridded), 32);
        assert!(!cfg.active_predictors().contains(&PredictorKind::NnCirc));
        assert_eq!(cfg.active_predictors().len(), 5);
    }
}
