//! Oracle checks shared by the `selftest` subcommand and the acceptance tests.
//!
//! Each check measures something against an independent reference and reports the
//! worst deviation it saw; none of them panic.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::channel::{make_batch, noise_var_from_snr_db, ChannelSample, ModelParams};
use crate::covariance::CovarianceSpec;
use crate::error::Result;
use crate::exec::Execution;
use crate::gridded::{build_bank, GridStrategy};
use crate::lmmse::{lmmse_direct, lmmse_extended};
use crate::nn::{forward, init_from_structured, loss_and_grad, row_from_output, NNWeights};
use crate::numerics::{logdet, softmax, CMatrix, Cholesky};
use crate::rng::SeedTree;
use crate::structured::{fit_spectral_weights, q_matrix, spectral_reconstruction, structured_row, QKind, StructuredModel};

use super::config::ExperimentConfig;
use super::csv::format_csv;
use super::eval::{evaluate_mse, PerfectPredictor, PredictorKind, ScenarioSource};
use super::sweep::{build_point_bank, run_experiment, MetricRecord, Point};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let t = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        name: name.into(),
        passed,
        detail,
        elapsed: t.elapsed(),
    }
}

/// Random finite-P or Jakes spec with Doppler up to ~0.05 cycles per symbol.
fn random_spec(rng: &mut impl Rng) -> Result<CovarianceSpec> {
    let ts = 1.0;
    if rng.random_bool(0.3) {
        return CovarianceSpec::jakes(rng.random_range(0.0..0.05), ts);
    }
    let p = rng.random_range(1..=4);
    let dopplers: Vec<f64> = (0..p).map(|_| rng.random_range(-0.05..0.05)).collect();
    let raw: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    CovarianceSpec::finite_p(dopplers, raw.iter().map(|x| x / total).collect(), ts)
}

/// Output row of the extended filter against the direct solve, entrywise, relative to
/// the largest entry of the direct row.
pub fn check_reformulation(instances: usize, seed: u64) -> Check {
    timed("reformulation exactness", || {
        let mut rng = SeedTree::new(seed).stream();
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            let spec = random_spec(&mut rng)?;
            let m = rng.random_range(1..=16);
            let l = rng.random_range(1..=4);
            let nv = 10f64.powf(rng.random_range(-3.0..1.0));
            let direct = lmmse_direct(&spec, m, l, nv)?;
            let ext = lmmse_extended(&spec, m, l, nv)?.output_row();
            let scale = direct.weights.iter().map(|w| w.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            for (a, b) in ext.weights.iter().zip(&direct.weights) {
                worst = worst.max((a - b).norm() / scale);
            }
        }
        Ok((worst <= 1e-12, format!("{instances} instances, max relative deviation {worst:.3e} (tol 1e-12)")))
    })
}

/// LMMSE Perfect against `σ²/(M+σ²)` at `P=1`, for each SNR and velocity.
pub fn check_perfect_baseline(snrs_db: &[f64], velocities_kmh: &[f64], n_eval: usize, seed: u64, exec: Execution) -> Check {
    timed("analytic P=1 baseline", || {
        let (m, l) = (16, 4);
        let mut ok = true;
        let mut parts = Vec::new();
        for (si, &snr) in snrs_db.iter().enumerate() {
            let nv = noise_var_from_snr_db(snr);
            let exact = nv / (m as f64 + nv);
            for (vi, &v) in velocities_kmh.iter().enumerate() {
                let params = ModelParams::standard(v, 1, m, l)?;
                let pred = PerfectPredictor {
                    params,
                    step: l,
                    noise_var: nv,
                };
                let tree = SeedTree::new(seed).descend(&[si as u64, vi as u64]);
                let est = evaluate_mse(&pred, &params, l, nv, n_eval, &ScenarioSource::Prior, &tree, exec)?;
                let z = (est.mse - exact) / est.std_err;
                ok &= z.abs() <= 3.0;
                parts.push(format!("{snr} dB/{v} km/h: {:.4e} vs {exact:.4e} ({z:+.2} se)", est.mse));
            }
        }
        Ok((ok, parts.join("; ")))
    })
}

fn paper_structured(kind: QKind, velocity_kmh: f64, snr_db: f64) -> Result<(StructuredModel, ModelParams, f64)> {
    let params = ModelParams::standard(velocity_kmh, 1, 16, 4)?;
    let nv = noise_var_from_snr_db(snr_db);
    let n = if kind == QKind::Toeplitz { 32 } else { 16 };
    let bank = build_bank(&GridStrategy::for_paths(n, 1), &params, 4, nv, &mut SeedTree::new(0).stream(), Execution::Sequential)?;
    Ok((StructuredModel::from_bank(&bank, kind, Execution::Sequential)?, params, nv))
}

/// Fresh network output against the Structured Predictor on random channel inputs.
pub fn check_init_equality(inputs: usize, seed: u64) -> Check {
    timed("initialization equality", || {
        let mut worst: f64 = 0.0;
        for (ki, kind) in [QKind::Circulant, QKind::Toeplitz].into_iter().enumerate() {
            let (s, params, nv) = paper_structured(kind, 60.0, 0.0)?;
            let w = init_from_structured(&s);
            let mut rng = SeedTree::new(seed).child(ki as u64).stream();
            for _ in 0..inputs {
                let y = ChannelSample::draw(&params, 4, nv, &mut rng)?.observation;
                let c = s.feature(&y)?;
                let a = structured_row(&s, &c)?;
                let b = row_from_output(&forward(&w, &c)?, 4);
                for (x, z) in a.weights.iter().zip(&b.weights) {
                    worst = worst.max((x - z).norm());
                }
            }
        }
        Ok((worst <= 1e-12, format!("{inputs} inputs per Q kind, max deviation {worst:.3e} (tol 1e-12)")))
    })
}

/// Analytic gradient against central differences with step `1e-5` on random networks.
pub fn check_gradients(instances: usize, seed: u64) -> Check {
    timed("gradient check", || {
        let (m, n_g, b) = (4, 4, 3);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let names = ["A1", "b1", "A2", "b2"];
        let mut worst_block = names[0];
        for inst in 0..instances {
            let mut rng = SeedTree::new(seed).child(inst as u64).stream();
            let kind = if inst % 2 == 0 { QKind::Circulant } else { QKind::Toeplitz };
            let q = q_matrix(kind, m)?;
            let params = ModelParams::standard(rng.random_range(0.0..300.0), 2, m, 1)?;
            let nv = 10f64.powf(rng.random_range(-1.0..0.5));
            let batch = make_batch(&params, 1, b, nv, &mut rng)?;
            let k = q.rows();
            let mut w = NNWeights::zeros(n_g, k, m);
            for blk in w.blocks_mut() {
                blk.iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
            }
            let (_, grad) = loss_and_grad(&w, &batch, &q, nv)?;
            for (bi, name) in names.iter().enumerate() {
                let len = w.blocks()[bi].len();
                let mut fd = vec![0.0; len];
                for (i, f) in fd.iter_mut().enumerate() {
                    let mut wp = w.clone();
                    wp.blocks_mut()[bi][i] += h;
                    let mut wm = w.clone();
                    wm.blocks_mut()[bi][i] -= h;
                    *f = (loss_and_grad(&wp, &batch, &q, nv)?.0 - loss_and_grad(&wm, &batch, &q, nv)?.0) / (2.0 * h);
                }
                let scale = fd.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-8);
                for (g, f) in grad.blocks()[bi].iter().zip(&fd) {
                    let r = (g - f).abs() / scale;
                    if r > worst {
                        worst = r;
                        worst_block = name;
                    }
                }
            }
        }
        Ok((
            worst <= 1e-5,
            format!("{instances} instances (M=4, N_g=4, B=3), max relative deviation {worst:.3e} in {worst_block} (tol 1e-5)"),
        ))
    })
}

/// `I - SᵀW` Hermitian positive definite with real, negative log-determinant over banks
/// at several velocities, SNRs and path counts.
pub fn check_bias_matrices() -> Check {
    timed("I - SᵀW Hermitian PD", || {
        let mut count = 0;
        let mut worst_imag: f64 = 0.0;
        let mut worst_herm: f64 = 0.0;
        let mut max_logdet = f64::NEG_INFINITY;
        for (pi, paths) in [1usize, 2].into_iter().enumerate() {
            for v in [0.0, 30.0, 100.0, 300.0] {
                for snr in [-10.0, 10.0, 30.0] {
                    let params = ModelParams::standard(v, paths, 16, 4)?;
                    let mut rng = SeedTree::new(pi as u64).stream();
                    let bank = build_bank(&GridStrategy::for_paths(16, paths), &params, 4, noise_var_from_snr_db(snr), &mut rng, Execution::Sequential)?;
                    for blk in bank.observation_blocks() {
                        let a = CMatrix::identity(16).sub(blk)?;
                        let herm = a.sub(&a.adjoint())?.max_abs() / a.max_abs();
                        let ld = logdet(&a)?;
                        Cholesky::factor(&a.hermitian_part())?;
                        worst_herm = worst_herm.max(herm);
                        worst_imag = worst_imag.max(ld.im.abs());
                        max_logdet = max_logdet.max(ld.re);
                        count += 1;
                    }
                }
            }
        }
        let ok = worst_herm <= 1e-10 && worst_imag <= 1e-9 && max_logdet < 0.0;
        Ok((
            ok,
            format!("{count} filters: Hermitian defect {worst_herm:.2e}, imag logdet {worst_imag:.2e}, max logdet {max_logdet:.4}"),
        ))
    })
}

/// Softmax weights are a probability vector and the Gridded row lies in the convex hull
/// of the bank rows, including for extreme score scales.
pub fn check_softmax_convexity(seed: u64) -> Check {
    timed("softmax convexity", || {
        let mut rng = SeedTree::new(seed).stream();
        let params = ModelParams::standard(80.0, 1, 8, 2)?;
        let bank = build_bank(&GridStrategy::for_paths(12, 1), &params, 2, 0.05, &mut rng, Execution::Sequential)?;
        let mut worst_norm: f64 = 0.0;
        let mut ok = true;
        for trial in 0..200 {
            let scale = 10f64.powi(trial % 7 - 2);
            let s: Vec<f64> = (0..bank.len()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            let p = softmax(&s);
            worst_norm = worst_norm.max((p.iter().sum::<f64>() - 1.0).abs());
            ok &= p.iter().all(|x| (0.0..=1.0).contains(x));
            let row = bank.combine(&p);
            // every coordinate inside the per-coordinate hull
            for (i, w) in row.weights.iter().enumerate() {
                let (lo_re, hi_re, lo_im, hi_im) = bank.entries.iter().fold((f64::MAX, f64::MIN, f64::MAX, f64::MIN), |a, e| {
                    let z = e.out_row[i];
                    (a.0.min(z.re), a.1.max(z.re), a.2.min(z.im), a.3.max(z.im))
                });
                let tol = 1e-12 * (1.0 + hi_re.abs().max(lo_re.abs()).max(hi_im.abs()).max(lo_im.abs()));
                ok &= w.re >= lo_re - tol && w.re <= hi_re + tol && w.im >= lo_im - tol && w.im <= hi_im + tol;
            }
        }
        ok &= worst_norm <= 1e-14;
        Ok((ok, format!("200 score vectors, scales 1e-2..1e4, normalization error {worst_norm:.2e}")))
    })
}

fn fit_residual(block: &CMatrix, q: &CMatrix) -> Result<f64> {
    let w = fit_spectral_weights(block, q)?;
    Ok(block.hermitian_part().sub(&spectral_reconstruction(q, &w))?.frobenius_norm())
}

/// Toeplitz (`F2`) fit residual never exceeds the circulant (`F1`) one.
pub fn check_residual_ordering() -> Check {
    timed("Toeplitz vs circulant residual", || {
        let m = 16;
        let (f1, f2) = (q_matrix(QKind::Circulant, m)?, q_matrix(QKind::Toeplitz, m)?);
        let mut count = 0;
        let mut worst_gap = f64::NEG_INFINITY;
        for paths in [1usize, 3] {
            for v in [10.0, 50.0, 100.0, 250.0] {
                let params = ModelParams::standard(v, paths, m, 4)?;
                let bank = build_bank(&GridStrategy::for_paths(8, paths), &params, 4, 0.1, &mut SeedTree::new(v as u64).stream(), Execution::Sequential)?;
                for blk in bank.observation_blocks() {
                    let (rt, rc) = (fit_residual(blk, &f2)?, fit_residual(blk, &f1)?);
                    worst_gap = worst_gap.max(rt - rc - 1e-12 * rc.max(1.0));
                    count += 1;
                }
            }
        }
        Ok((worst_gap <= 0.0, format!("{count} filters, max (toeplitz - circulant) residual {worst_gap:.3e}")))
    })
}

/// Byte-identical CSV for two runs with one seed, parallel and sequential.
pub fn check_csv_determinism(seed: u64) -> Check {
    timed("CSV determinism", || {
        let mut cfg = ExperimentConfig {
            obs_len: 8,
            step: 2,
            velocities_kmh: vec![0.0, 40.0, 120.0],
            snr_db: vec![0.0],
            n_grid: 6,
            eval_samples: 1500,
            seed,
            ..Default::default()
        };
        cfg.train.minibatches = 30;
        cfg.train.batch_size = 8;
        let a = format_csv(&run_experiment(&cfg, Execution::Parallel)?);
        let b = format_csv(&run_experiment(&cfg, Execution::Parallel)?);
        let c = format_csv(&run_experiment(&cfg, Execution::Sequential)?);
        let rows = a.lines().count() - 1;
        Ok((a == b && a == c && !a.contains("nan"), format!("{rows} rows, {} bytes, identical across 3 runs: {}", a.len(), a == b && a == c)))
    })
}

/// Gridded MSE with large and small banks at each velocity, `P=1`, SNR 10 dB.
pub fn check_grid_refinement(velocities_kmh: &[f64], small: usize, large: usize, n_eval: usize, seed: u64, exec: Execution) -> Check {
    timed("grid refinement", || {
        let base = ExperimentConfig {
            velocities_kmh: velocities_kmh.to_vec(),
            snr_db: vec![10.0],
            eval_samples: n_eval,
            seed,
            predictors: vec![PredictorKind::Gridded],
            ..Default::default()
        };
        let nv = noise_var_from_snr_db(10.0);
        let exact = nv / (16.0 + nv);
        let mut ok = true;
        let mut parts = Vec::new();
        for vi in 0..velocities_kmh.len() {
            let pt = Point::new(&base, vi, 0)?;
            let mut mse = [0.0; 2];
            for (j, size) in [small, large].into_iter().enumerate() {
                let bank = build_point_bank(&base, &pt, size, exec)?;
                mse[j] = evaluate_mse(&bank, &pt.params, base.step, pt.noise_var, n_eval, &ScenarioSource::Prior, &pt.eval_tree(&base), exec)?.mse;
            }
            let rel = mse[1] / exact - 1.0;
            // at 0 km/h every filter coincides; the two banks differ only in summation order
            let pass = rel.abs() <= 0.10 && mse[1] <= mse[0] * (1.0 + 1e-12);
            ok &= pass;
            parts.push(format!(
                "{} km/h: N={small} {:.4e}, N={large} {:.4e} ({:+.1}% vs analytic){}",
                velocities_kmh[vi],
                mse[0],
                mse[1],
                100.0 * rel,
                if pass { "" } else { " FAIL" }
            ));
        }
        Ok((ok, parts.join("; ")))
    })
}

/// MSE per (velocity, predictor) from sweep records at one SNR.
pub fn mse_table(records: &[MetricRecord]) -> Vec<(f64, Vec<(PredictorKind, f64)>)> {
    let mut out: Vec<(f64, Vec<(PredictorKind, f64)>)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(v, _)| *v == r.velocity_kmh) {
            Some((_, row)) => row.push((r.predictor, r.mse)),
            None => out.push((r.velocity_kmh, vec![(r.predictor, r.mse)])),
        }
    }
    out
}

fn lookup(row: &[(PredictorKind, f64)], k: PredictorKind) -> f64 {
    row.iter().find(|(p, _)| *p == k).map_or(f64::NAN, |(_, m)| *m)
}

/// NN Toep below LMMSE Jakes everywhere and below LMMSE Perfect at 10 and 20 km/h,
/// SNR 10 dB, for each seed.
pub fn check_fig3_ordering(seeds: &[u64], base: &ExperimentConfig, exec: Execution) -> Check {
    timed("Fig. 3 ordering", || {
        let mut violations = Vec::new();
        let mut margin = f64::INFINITY;
        for &seed in seeds {
            let cfg = ExperimentConfig {
                snr_db: vec![10.0],
                seed,
                predictors: vec![PredictorKind::LmmsePerfect, PredictorKind::LmmseJakes, PredictorKind::NnToep],
                ..base.clone()
            };
            for (v, row) in mse_table(&run_experiment(&cfg, exec)?) {
                let nn = lookup(&row, PredictorKind::NnToep);
                let mut rivals = vec![("LMMSE Jakes", lookup(&row, PredictorKind::LmmseJakes))];
                if v == 10.0 || v == 20.0 {
                    rivals.push(("LMMSE Perfect", lookup(&row, PredictorKind::LmmsePerfect)));
                }
                for (name, other) in rivals {
                    margin = margin.min(other / nn - 1.0);
                    if !(nn < other) {
                        violations.push(format!("seed {seed}, {v} km/h: NN Toep {nn:.4e} >= {name} {other:.4e}"));
                    }
                }
            }
        }
        let detail = if violations.is_empty() {
            format!("seeds {seeds:?}, smallest relative margin {:.1}%", 100.0 * margin)
        } else {
            violations.join("; ")
        };
        Ok((violations.is_empty(), detail))
    })
}

/// Both NN predictors below every other predictor at every velocity, SNR -10 dB.
pub fn check_fig5_ordering(seeds: &[u64], base: &ExperimentConfig, exec: Execution) -> Check {
    timed("Fig. 5 ordering", || {
        let mut violations = Vec::new();
        let mut margin = f64::INFINITY;
        for &seed in seeds {
            let cfg = ExperimentConfig {
                snr_db: vec![-10.0],
                seed,
                predictors: PredictorKind::ALL.to_vec(),
                ..base.clone()
            };
            for (v, row) in mse_table(&run_experiment(&cfg, exec)?) {
                for nn_kind in [PredictorKind::NnToep, PredictorKind::NnCirc] {
                    let nn = lookup(&row, nn_kind);
                    for &(k, other) in row.iter().filter(|(k, _)| !k.is_network()) {
                        margin = margin.min(other / nn - 1.0);
                        if !(nn < other) {
                            violations.push(format!("seed {seed}, {v} km/h: {nn_kind} {nn:.4e} >= {k} {other:.4e}"));
                        }
                    }
                }
            }
        }
        let detail = if violations.is_empty() {
            format!("seeds {seeds:?}, smallest relative margin {:.1}%", 100.0 * margin)
        } else {
            violations.join("; ")
        };
        Ok((violations.is_empty(), detail))
    })
}

/// Quick oracle suite for the CLI.
pub fn run_selftest(exec: Execution) -> Vec<Check> {
    vec![
        check_reformulation(100, 0),
        check_perfect_baseline(&[10.0, -10.0], &[0.0, 100.0], 5000, 0, exec),
        check_init_equality(20, 0),
        check_gradients(2, 0),
        check_bias_matrices(),
        check_softmax_convexity(0),
        check_residual_ordering(),
        check_csv_determinism(0),
        timed("bessel J0 against quadrature", || {
            let mut worst: f64 = 0.0;
            for i in 0..60 {
                let x = i as f64 * 0.5;
                let n = 2000;
                let h = PI / n as f64;
                let quad = ((0..=n).map(|j| {
                    let wgt = if j == 0 || j == n { 0.5 } else { 1.0 };
                    wgt * (x * (j as f64 * h).sin()).cos()
                }))
                .sum::<f64>()
                    * h
                    / PI;
                worst = worst.max((crate::numerics::bessel_j0(x)? - quad).abs());
            }
            Ok((worst <= 1e-12, format!("x in [0, 29.5], max deviation {worst:.2e}")))
        }),
    ]
}
