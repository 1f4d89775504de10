//! Gridded Predictor: a bank of LMMSE filters on sampled DoA scenarios, combined with
//! softmax weights from per-sample likelihood scores `tr(SᵀW_i Ĉ) + b_i`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{check_noise_var, ModelParams};
use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lmmse::{lmmse_extended, PredictorRow};
use crate::numerics::{logdet, softmax_in_place, CMatrix, CVector, Complex64};
use crate::rng::Stream;

/// Imaginary residue tolerated in `log|I - SᵀW|`.
pub const BIAS_IMAG_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoaSampling {
    /// Single path, `δ_i = arccos(2(i+½)/N - 1)`: Doppler shifts equi-spaced over `(-B_D, B_D)`.
    UniformDoppler,
    /// Single path, `δ_i = π(i+½)/N` over `[0, π)`.
    UniformAngle,
    /// `N` i.i.d. draws of `P`-tuples from the uniform DoA prior.
    RandomTuples,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridStrategy {
    pub num_samples: usize,
    pub doa_sampling: DoaSampling,
    pub assumed_paths: usize,
}

impl GridStrategy {
    /// Deterministic Doppler grid for `P = 1`, random tuples otherwise.
    pub fn for_paths(num_samples: usize, paths: usize) -> Self {
        GridStrategy {
            num_samples,
            doa_sampling: if paths == 1 {
                DoaSampling::UniformDoppler
            } else {
                DoaSampling::RandomTuples
            },
            assumed_paths: paths,
        }
    }

    pub fn sample_doas(&self, rng: &mut Stream) -> Result<Vec<Vec<f64>>> {
        let n = self.num_samples;
        if n == 0 || self.assumed_paths == 0 {
            return Err(Error::InvalidDimension("grid needs at least one sample and one path".into()));
        }
        let single = |sampling| {
            if self.assumed_paths != 1 {
                return Err(Error::Domain(format!("{sampling:?} grids are single-path only")));
            }
            Ok(())
        };
        Ok(match self.doa_sampling {
            DoaSampling::UniformDoppler => {
                single(self.doa_sampling)?;
                (0..n)
                    .map(|i| vec![(2.0 * (i as f64 + 0.5) / n as f64 - 1.0).acos()])
                    .collect()
            }
            DoaSampling::UniformAngle => {
                single(self.doa_sampling)?;
                (0..n).map(|i| vec![PI * (i as f64 + 0.5) / n as f64]).collect()
            }
            DoaSampling::RandomTuples => (0..n)
                .map(|_| (0..self.assumed_paths).map(|_| rng.random_range(-PI..PI)).collect())
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub doas: Vec<f64>,
    /// `W_δ`, `(M+l)×M`.
    pub filter: CMatrix,
    /// `e1ᵀ W_δ`.
    pub out_row: CVector,
    /// `log|I_M - SᵀW_δ|`.
    pub bias: f64,
}

impl BankEntry {
    pub fn observation_block(&self, step: usize) -> CMatrix {
        let m = self.filter.cols();
        self.filter.block(step, 0, m, m).expect("filter has M+l rows")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub obs_len: usize,
    pub step: usize,
    pub noise_var: f64,
    pub entries: Vec<BankEntry>,
    // cached SᵀW_i, not serialized
    #[serde(skip)]
    blocks: Vec<CMatrix>,
}

impl FilterBank {
    pub fn new(obs_len: usize, step: usize, noise_var: f64, entries: Vec<BankEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDimension("filter bank is empty".into()));
        }
        for e in &entries {
            if e.filter.rows() != obs_len + step || e.filter.cols() != obs_len || e.out_row.len() != obs_len {
                return Err(Error::InvalidDimension(format!(
                    "bank entry is {}x{}, expected {}x{obs_len}",
                    e.filter.rows(),
                    e.filter.cols(),
                    obs_len + step
                )));
            }
        }
        let blocks = entries.iter().map(|e| e.observation_block(step)).collect();
        Ok(FilterBank {
            obs_len,
            step,
            noise_var,
            entries,
            blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `SᵀW_i` for every entry.
    pub fn observation_blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn biases(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.bias).collect()
    }

    /// Rebuilds the cached blocks after deserialization.
    pub fn restore_cache(&mut self) {
        self.blocks = self.entries.iter().map(|e| e.observation_block(self.step)).collect();
    }

    /// Scores `real(yᴴ SᵀW_i y)/σ² + b_i` via quadratic forms.
    pub fn scores(&self, y: &[Complex64]) -> Result<Vec<f64>> {
        if y.len() != self.obs_len {
            return Err(Error::LengthMismatch {
                expected: self.obs_len,
                got: y.len(),
            });
        }
        let inv = 1.0 / self.noise_var;
        self.blocks
            .iter()
            .zip(&self.entries)
            .map(|(blk, e)| Ok(blk.quadratic_form(y)?.re * inv + e.bias))
            .collect()
    }

    /// Scores `real(tr(SᵀW_i Ĉ)) + b_i` from a dense feature matrix.
    pub fn scores_dense(&self, c_hat: &CMatrix) -> Result<Vec<f64>> {
        let m = self.obs_len;
        if c_hat.rows() != m || c_hat.cols() != m {
            return Err(Error::InvalidDimension(format!("feature is {}x{}, expected {m}x{m}", c_hat.rows(), c_hat.cols())));
        }
        Ok(self
            .blocks
            .iter()
            .zip(&self.entries)
            .map(|(blk, e)| {
                let mut tr = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    for j in 0..m {
                        tr += blk[(i, j)] * c_hat[(j, i)];
                    }
                }
                tr.re + e.bias
            })
            .collect())
    }

    /// Convex combination `Σ p_i e1ᵀW_i`.
    pub fn combine(&self, probs: &[f64]) -> PredictorRow {
        let mut weights = vec![Complex64::new(0.0, 0.0); self.obs_len];
        for (p, e) in probs.iter().zip(&self.entries) {
            for (w, r) in weights.iter_mut().zip(&e.out_row) {
                *w += *p * r;
            }
        }
        PredictorRow { weights, step: self.step }
    }

    /// Gridded predictor row for observation `y`.
    pub fn row_for(&self, y: &[Complex64]) -> Result<PredictorRow> {
        let mut s = self.scores(y)?;
        softmax_in_place(&mut s);
        Ok(self.combine(&s))
    }
}

/// `log|I - SᵀW|`, real part; errors if the imaginary residue exceeds [`BIAS_IMAG_TOL`].
pub fn bias_term(observation_block: &CMatrix) -> Result<f64> {
    let m = observation_block.rows();
    let mut a = CMatrix::identity(m).sub(observation_block)?;
    a = a.hermitian_part();
    let ld = logdet(&a)?;
    if ld.im.abs() > BIAS_IMAG_TOL {
        return Err(Error::NumericFailure {
            stage: "bias log-determinant",
            index: 0,
        });
    }
    Ok(ld.re)
}

/// Equal-power finite-P covariance for a DoA tuple.
pub fn spec_for_doas(params: &ModelParams, doas: &[f64]) -> Result<CovarianceSpec> {
    let bd = params.doppler_bandwidth();
    let p = doas.len() as f64;
    CovarianceSpec::finite_p(
        doas.iter().map(|d| bd * d.cos()).collect(),
        vec![1.0 / p; doas.len()],
        params.symbol_duration_s,
    )
}

pub fn bank_entry(params: &ModelParams, doas: Vec<f64>, step: usize, noise_var: f64) -> Result<BankEntry> {
    let spec = spec_for_doas(params, &doas)?;
    let ext = lmmse_extended(&spec, params.obs_len, step, noise_var)?;
    let bias = bias_term(&ext.observation_block())?;
    Ok(BankEntry {
        doas,
        out_row: ext.output_row().weights,
        filter: ext.w,
        bias,
    })
}

pub fn build_bank(
    strategy: &GridStrategy,
    params: &ModelParams,
    step: usize,
    noise_var: f64,
    rng: &mut Stream,
    exec: Execution,
) -> Result<FilterBank> {
    check_noise_var(noise_var)?;
    params.check_step(step)?;
    let doas = strategy.sample_doas(rng)?;
    let entries = exec.try_map(doas.len(), |i| {
        bank_entry(params, doas[i].clone(), step, noise_var).map_err(|e| match e {
            Error::NumericFailure { stage, .. } => Error::NumericFailure { stage, index: i },
            other => other,
        })
    })?;
    FilterBank::new(params.obs_len, step, noise_var, entries)
}

/// `Ĉ = y yᴴ / σ²`.
pub fn feature_full(y: &[Complex64], noise_var: f64) -> Result<CMatrix> {
    check_noise_var(noise_var)?;
    let inv = 1.0 / noise_var;
    Ok(CMatrix::from_fn(y.len(), y.len(), |i, j| y[i] * y[j].conj() * inv))
}

/// Gridded predictor row from the dense feature `Ĉ`.
pub fn gridded_row(bank: &FilterBank, c_hat: &CMatrix) -> Result<PredictorRow> {
    let mut s = bank.scores_dense(c_hat)?;
    softmax_in_place(&mut s);
    Ok(bank.combine(&s))
}
