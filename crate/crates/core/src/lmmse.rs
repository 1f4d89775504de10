//! The `l`-step LMMSE predictor, in its direct form and in the extended-covariance form
//! `W = Σ_ext S (Sᵀ Σ_ext S + σ² I)⁻¹` whose first row is the same predictor.

use serde::{Deserialize, Serialize};

use crate::channel::{check_noise_var, ModelParams};
use crate::covariance::{extended_cov, extract_parts, toeplitz_cov, CovarianceSpec, SelectionOps};
use crate::error::{Error, Result};
use crate::numerics::{dot, CMatrix, CVector, Cholesky, Complex64};

/// A linear predictor row applied as `ĥ = weightsᵀ y` (no conjugation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorRow {
    pub weights: CVector,
    pub step: usize,
}

impl PredictorRow {
    pub fn zeros(obs_len: usize, step: usize) -> Self {
        PredictorRow {
            weights: vec![Complex64::new(0.0, 0.0); obs_len],
            step,
        }
    }

    pub fn obs_len(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, y: &[Complex64]) -> Result<Complex64> {
        predict(self, y)
    }
}

pub fn predict(row: &PredictorRow, y: &[Complex64]) -> Result<Complex64> {
    if y.len() != row.weights.len() {
        return Err(Error::LengthMismatch {
            expected: row.weights.len(),
            got: y.len(),
        });
    }
    Ok(dot(&row.weights, y))
}

/// Full `(M+l)×M` filter of the extended formulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedFilter {
    pub w: CMatrix,
    pub noise_var: f64,
    pub step: usize,
}

impl ExtendedFilter {
    pub fn obs_len(&self) -> usize {
        self.w.cols()
    }

    /// `e1ᵀ W`.
    pub fn output_row(&self) -> PredictorRow {
        PredictorRow {
            weights: self.w.row(0).to_vec(),
            step: self.step,
        }
    }

    /// `Sᵀ W`, the bottom `M×M` block; equals `Σ_h (Σ_h + σ² I)⁻¹`.
    pub fn observation_block(&self) -> CMatrix {
        let m = self.obs_len();
        self.w.block(self.step, 0, m, m).expect("W has M+l rows")
    }
}

fn noisy_cholesky(sigma_h: &CMatrix, noise_var: f64) -> Result<Cholesky> {
    let mut sigma_y = sigma_h.clone();
    sigma_y.shift_diagonal(Complex64::new(noise_var, 0.0));
    Cholesky::factor(&sigma_y)
}

/// `c_hmyᴴ Σ_y⁻¹` with `c_hmyᴴ = [R[l], …, R[M-1+l]]`.
pub fn lmmse_direct(spec: &CovarianceSpec, obs_len: usize, step: usize, noise_var: f64) -> Result<PredictorRow> {
    check_noise_var(noise_var)?;
    if step == 0 {
        return Err(Error::InvalidStep { step, max: usize::MAX });
    }
    let sigma_h = toeplitz_cov(spec, obs_len);
    let chol = noisy_cholesky(&sigma_h, noise_var)?;
    // row r Σ⁻¹ = conj(Σ⁻¹ conj(r)) since Σ is Hermitian
    let mut x: CVector = (0..obs_len).map(|j| spec.covariance_at(step + j).conj()).collect();
    chol.solve_in_place(&mut x);
    Ok(PredictorRow {
        weights: x.into_iter().map(|z| z.conj()).collect(),
        step,
    })
}

pub fn lmmse_extended(spec: &CovarianceSpec, obs_len: usize, step: usize, noise_var: f64) -> Result<ExtendedFilter> {
    check_noise_var(noise_var)?;
    let ext = extended_cov(spec, obs_len, step)?;
    let ops = SelectionOps::new(obs_len, step);
    let (_, sigma_h) = extract_parts(&ext, &ops)?;
    let chol = noisy_cholesky(&sigma_h, noise_var)?;
    // Σ_ext S: the last M columns
    let b = ext.block(0, step, obs_len + step, obs_len)?;
    // W = B Σ_y⁻¹  ⇔  Wᴴ = Σ_y⁻¹ Bᴴ
    let w = chol.solve(&b.adjoint())?.adjoint();
    Ok(ExtendedFilter { w, noise_var, step })
}

/// Jakes covariance for the model's Doppler bandwidth.
pub fn jakes_spec(params: &ModelParams) -> Result<CovarianceSpec> {
    CovarianceSpec::jakes(params.doppler_bandwidth(), params.symbol_duration_s)
}
