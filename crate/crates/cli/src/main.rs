use std::path::PathBuf;
use std::process::ExitCode;

use chanpred::harness::selftest::run_selftest;
use chanpred::harness::{
    build_network, build_predictor, evaluate_mse, format_csv, load_config, ExperimentConfig, NetworkPredictor, Point, Predictor,
    PredictorKind, ScenarioSource, PAPER_EVAL_SAMPLES,
};
use chanpred::model_file::{ModelFile, ModelPayload};
use chanpred::structured::QKind;
use chanpred::{Error, Execution};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chanpred", version, about = "Channel predictor benchmarks for time-variant flat-fading channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full velocity/SNR sweep and write the CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Train one network predictor and save its weights.
    Train {
        #[command(flatten)]
        common: Common,
        /// Velocity in km/h (defaults to the first configured velocity).
        #[arg(long)]
        velocity: Option<f64>,
        /// SNR in dB (defaults to the first configured SNR).
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value = "toeplitz")]
        q_kind: String,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one predictor at one point and print its MSE.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Predictor name, e.g. "LMMSE Jakes" or nn-toep.
        #[arg(long)]
        predictor: String,
        #[arg(long)]
        velocity: Option<f64>,
        #[arg(long)]
        snr: Option<f64>,
        /// Use trained weights instead of training (NN predictors only).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the oracle suite.
    Selftest {
        #[arg(long)]
        sequential: bool,
    },
}

/// Config file plus per-key overrides; flags win over the file.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use 200000 evaluation samples.
    #[arg(long)]
    paper_scale: bool,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    obs_len: Option<String>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    paths: Option<String>,
    /// Comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    velocities_kmh: Option<String>,
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    q_kinds: Option<String>,
    #[arg(long)]
    eval_samples: Option<String>,
    #[arg(long)]
    minibatches: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    symmetry_jitter: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    predictors: Option<String>,
    #[arg(long)]
    carrier_freq_hz: Option<String>,
    #[arg(long)]
    symbol_duration_s: Option<String>,
    #[arg(long)]
    perfect_mode: Option<String>,
}

impl Common {
    fn config(&self) -> chanpred::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("obs_len", &self.obs_len),
            ("step", &self.step),
            ("paths", &self.paths),
            ("snr_db", &self.snr_db),
            ("velocities_kmh", &self.velocities_kmh),
            ("n_grid", &self.n_grid),
            ("q_kinds", &self.q_kinds),
            ("eval_samples", &self.eval_samples),
            ("minibatches", &self.minibatches),
            ("batch_size", &self.batch_size),
            ("learning_rate", &self.learning_rate),
            ("optimizer", &self.optimizer),
            ("symmetry_jitter", &self.symmetry_jitter),
            ("seed", &self.seed),
            ("output", &self.output),
            ("predictors", &self.predictors),
            ("carrier_freq_hz", &self.carrier_freq_hz),
            ("symbol_duration_s", &self.symbol_duration_s),
            ("perfect_mode", &self.perfect_mode),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                // line 0: command line
                cfg.set(key, v, 0)?;
            }
        }
        if self.paper_scale {
            cfg.eval_samples = PAPER_EVAL_SAMPLES;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

/// Narrows a config to one (velocity, SNR) point.
fn single_point(mut cfg: ExperimentConfig, velocity: Option<f64>, snr: Option<f64>) -> chanpred::Result<(ExperimentConfig, Point)> {
    cfg.velocities_kmh = vec![velocity.unwrap_or(cfg.velocities_kmh[0])];
    cfg.snr_db = vec![snr.unwrap_or(cfg.snr_db[0])];
    cfg.validate()?;
    let pt = Point::new(&cfg, 0, 0)?;
    Ok((cfg, pt))
}

fn parse_kind(name: &str) -> chanpred::Result<PredictorKind> {
    PredictorKind::parse(name).ok_or_else(|| Error::Config {
        key: "predictor".into(),
        line: 0,
        message: format!("unknown predictor `{name}`"),
    })
}

fn run(cli: Cli) -> chanpred::Result<ExitCode> {
    match cli.command {
        Command::Sweep { common } => {
            let cfg = common.config()?;
            let records = chanpred::harness::run_experiment(&cfg, common.exec())?;
            let csv = format_csv(&records);
            match &cfg.output {
                Some(p) => {
                    std::fs::write(p, &csv)?;
                    eprintln!("wrote {} rows to {}", records.len(), p.display());
                }
                None => print!("{csv}"),
            }
            let mut code = ExitCode::SUCCESS;
            for r in records.iter().filter(|r| r.failure.is_some()) {
                eprintln!("failed: {} at {} km/h, {} dB: {}", r.predictor, r.velocity_kmh, r.snr_db, r.failure.as_deref().unwrap_or(""));
                if r.numeric_failure {
                    code = ExitCode::from(3);
                }
            }
            Ok(code)
        }
        Command::Train {
            common,
            velocity,
            snr,
            q_kind,
            out,
        } => {
            let q = QKind::parse(&q_kind).ok_or_else(|| Error::Config {
                key: "q_kind".into(),
                line: 0,
                message: format!("unknown Q kind `{q_kind}`"),
            })?;
            let kind = if q == QKind::Toeplitz { PredictorKind::NnToep } else { PredictorKind::NnCirc };
            let (cfg, pt) = single_point(common.config()?, velocity, snr)?;
            let (net, trace) = build_network(&cfg, &pt, kind, common.exec())?;
            ModelFile::from_network(net.weights, q, cfg.step, pt.noise_var, Some(cfg.velocities_kmh[0])).save(&out)?;
            let tail = &trace[trace.len().saturating_sub(100)..];
            eprintln!(
                "trained {kind} for {} minibatches; mean loss of last {}: {:.4e}; saved to {}",
                trace.len(),
                tail.len(),
                tail.iter().sum::<f64>() / tail.len() as f64,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            common,
            predictor,
            velocity,
            snr,
            model,
        } => {
            let kind = parse_kind(&predictor)?;
            let (cfg, pt) = single_point(common.config()?, velocity, snr)?;
            let exec = common.exec();
            let (pred, source): (Box<dyn Predictor>, ScenarioSource) = match model {
                Some(path) => {
                    let file = ModelFile::load(&path)?;
                    let h = &file.header;
                    if h.obs_len != cfg.obs_len || h.step != cfg.step || h.noise_var != pt.noise_var {
                        return Err(Error::ModelFile(format!(
                            "model is for M={}, l={}, noise variance {}; evaluation uses M={}, l={}, {}",
                            h.obs_len, h.step, h.noise_var, cfg.obs_len, cfg.step, pt.noise_var
                        )));
                    }
                    let q = file.network_q()?;
                    if kind.q_kind() != h.q_kind || !kind.is_network() {
                        return Err(Error::ModelFile(format!("model file does not hold a {kind} network")));
                    }
                    let ModelPayload::Network(weights) = file.payload else {
                        unreachable!("network_q checked the payload")
                    };
                    (
                        Box::new(NetworkPredictor {
                            weights,
                            q,
                            noise_var: pt.noise_var,
                            step: cfg.step,
                        }),
                        ScenarioSource::Prior,
                    )
                }
                None => build_predictor(&cfg, &pt, kind, exec)?,
            };
            let est = evaluate_mse(pred.as_ref(), &pt.params, cfg.step, pt.noise_var, cfg.eval_samples, &source, &pt.eval_tree(&cfg), exec)?;
            println!(
                "{kind} at {} km/h, {} dB: MSE {} (standard error {}, {} samples)",
                cfg.velocities_kmh[0],
                cfg.snr_db[0],
                chanpred::harness::format_sci(est.mse),
                chanpred::harness::format_sci(est.std_err),
                est.samples
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { sequential } => {
            let exec = if sequential { Execution::Sequential } else { Execution::default() };
            let checks = run_selftest(exec);
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(2),
                e if e.is_numeric() => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
