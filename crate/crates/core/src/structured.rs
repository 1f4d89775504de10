//! Structured Predictor: each bank filter `SᵀW_i` is approximated as `Qᴴ diag(w_i) Q`
//! for a fixed DFT-type `Q`, which reduces the likelihood score to `w_iᵀ ĉ` with
//! `ĉ = |Q y|² / σ²`. The predictor is then `A2 softmax(A1 ĉ + b)`.

use serde::{Deserialize, Serialize};

use crate::channel::check_noise_var;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gridded::FilterBank;
use crate::lmmse::PredictorRow;
use crate::numerics::{dft_matrix, psd_pinv_solve, softmax_in_place, CMatrix, Complex64, RMatrix};

/// Relative eigenvalue cutoff for the spectral-weight normal equations.
const GRAM_RANK_TOL: f64 = 1e-10;
/// Hermitian tolerance for `SᵀW` before symmetrization.
const FIT_HERMITIAN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QKind {
    /// `Q = F1`, the `M`-point DFT.
    Circulant,
    /// `Q = F2`, the first `M` columns of the `2M`-point DFT.
    Toeplitz,
}

impl QKind {
    pub fn feature_len(self, obs_len: usize) -> usize {
        match self {
            QKind::Circulant => obs_len,
            QKind::Toeplitz => 2 * obs_len,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QKind::Circulant => "circulant",
            QKind::Toeplitz => "toeplitz",
        }
    }

    pub fn parse(s: &str) -> Option<QKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "circulant" | "circ" | "f1" => Some(QKind::Circulant),
            "toeplitz" | "toep" | "f2" => Some(QKind::Toeplitz),
            _ => None,
        }
    }
}

pub fn q_matrix(kind: QKind, obs_len: usize) -> Result<CMatrix> {
    dft_matrix(kind.feature_len(obs_len), obs_len, true)
}

/// Result of projecting one filter onto the `Qᴴ diag(w) Q` family.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFit {
    pub weights: Vec<f64>,
    /// Numerical rank of the Gram matrix (`K` for F1, `2M-1` for F2).
    pub gram_rank: usize,
    /// Largest `|imag(q_k A q_kᴴ)|`; anything beyond 1e-8 indicates a non-Hermitian input.
    pub imag_residue: f64,
}

/// Minimum-norm least-squares `w` for `‖A - Qᴴ diag(w) Q‖_F`.
pub fn fit_spectral_weights(observation_block: &CMatrix, q: &CMatrix) -> Result<Vec<f64>> {
    Ok(fit_spectral_weights_detailed(observation_block, q)?.weights)
}

pub fn fit_spectral_weights_detailed(observation_block: &CMatrix, q: &CMatrix) -> Result<SpectralFit> {
    let m = q.cols();
    if observation_block.rows() != m || observation_block.cols() != m {
        return Err(Error::InvalidDimension(format!(
            "filter block is {}x{}, Q has {m} columns",
            observation_block.rows(),
            observation_block.cols()
        )));
    }
    if !observation_block.is_hermitian(FIT_HERMITIAN_TOL) {
        return Err(Error::IllPosed("SᵀW is not Hermitian".into()));
    }
    let a = observation_block.hermitian_part();
    let k = q.rows();
    let mut gram = vec![0.0; k * k];
    for r in 0..k {
        for s in r..k {
            let inner: Complex64 = q.row(r).iter().zip(q.row(s)).map(|(x, y)| x * y.conj()).sum();
            gram[r * k + s] = inner.norm_sqr();
            gram[s * k + r] = inner.norm_sqr();
        }
    }
    let mut imag_residue: f64 = 0.0;
    let d: Vec<f64> = (0..k)
        .map(|r| {
            // q_r A q_rᴴ
            let qr = q.row(r);
            let aq = a.matvec(&qr.iter().map(|z| z.conj()).collect::<Vec<_>>()).expect("square");
            let v: Complex64 = qr.iter().zip(&aq).map(|(x, y)| x * y).sum();
            imag_residue = imag_residue.max(v.im.abs());
            v.re
        })
        .collect();
    let (weights, gram_rank) = psd_pinv_solve(&gram, &d, GRAM_RANK_TOL)?;
    Ok(SpectralFit {
        weights,
        gram_rank,
        imag_residue,
    })
}

/// `Qᴴ diag(w) Q`.
pub fn spectral_reconstruction(q: &CMatrix, weights: &[f64]) -> CMatrix {
    let m = q.cols();
    CMatrix::from_fn(m, m, |i, j| {
        (0..q.rows())
            .map(|k| q[(k, i)].conj() * weights[k] * q[(k, j)])
            .sum()
    })
}

/// Closed form `λ_k / (λ_k + σ²)` for an exactly circulant `Σ_h` with `Q = F1`.
pub fn spectral_ratio_weights(sigma_h: &CMatrix, noise_var: f64) -> Result<Vec<f64>> {
    check_noise_var(noise_var)?;
    let m = sigma_h.rows();
    let scale = sigma_h.max_abs().max(1.0);
    for i in 0..m {
        for j in 0..m {
            if (sigma_h[(i, j)] - sigma_h[((i + 1) % m, (j + 1) % m)]).norm() > 1e-10 * scale {
                return Err(Error::Domain("covariance is not circulant".into()));
            }
        }
    }
    let q = dft_matrix(m, m, true)?;
    Ok((0..m)
        .map(|k| {
            let qk: Vec<Complex64> = q.row(k).iter().map(|z| z.conj()).collect();
            let lambda = sigma_h.quadratic_form(&qk).expect("square").re;
            lambda / (lambda + noise_var)
        })
        .collect())
}

/// `ĉ = |Q y|² / σ²`.
pub fn feature_compressed(y: &[Complex64], q: &CMatrix, noise_var: f64) -> Result<Vec<f64>> {
    check_noise_var(noise_var)?;
    let qy = q.matvec(y)?;
    let inv = 1.0 / noise_var;
    Ok(qy.iter().map(|z| z.norm_sqr() * inv).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredModel {
    pub q_kind: QKind,
    pub obs_len: usize,
    pub step: usize,
    pub noise_var: f64,
    pub q: CMatrix,
    /// Rows are the spectral weights `w_i`, `N_g×K`.
    pub a1: RMatrix,
    /// Columns are the bank rows `e1ᵀW_i`, `M×N_g`.
    pub a2: CMatrix,
    pub b: Vec<f64>,
}

impl StructuredModel {
    /// Compresses a filter bank; biases are copied from the exact filters.
    pub fn from_bank(bank: &FilterBank, kind: QKind, exec: Execution) -> Result<Self> {
        let q = q_matrix(kind, bank.obs_len)?;
        let blocks = bank.observation_blocks();
        let rows = exec.try_map(blocks.len(), |i| fit_spectral_weights(&blocks[i], &q))?;
        let a1 = RMatrix::from_rows(&rows)?;
        let n = bank.len();
        let a2 = CMatrix::from_fn(bank.obs_len, n, |m, i| bank.entries[i].out_row[m]);
        Ok(StructuredModel {
            q_kind: kind,
            obs_len: bank.obs_len,
            step: bank.step,
            noise_var: bank.noise_var,
            q,
            a1,
            a2,
            b: bank.biases(),
        })
    }

    pub fn num_samples(&self) -> usize {
        self.b.len()
    }

    pub fn feature_len(&self) -> usize {
        self.q.rows()
    }

    pub fn feature(&self, y: &[Complex64]) -> Result<Vec<f64>> {
        feature_compressed(y, &self.q, self.noise_var)
    }

    pub fn row_for(&self, y: &[Complex64]) -> Result<PredictorRow> {
        structured_row(self, &self.feature(y)?)
    }

    pub(crate) fn row_counted(&self, c_hat: &[f64], ops: &mut usize) -> Result<PredictorRow> {
        let k = self.feature_len();
        if c_hat.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                got: c_hat.len(),
            });
        }
        let mut z = vec![0.0; self.num_samples()];
        self.a1.matvec_into(c_hat, &mut z);
        *ops += self.num_samples() * k;
        for (zi, bi) in z.iter_mut().zip(&self.b) {
            *zi += bi;
        }
        softmax_in_place(&mut z);
        let mut weights = vec![Complex64::new(0.0, 0.0); self.obs_len];
        for (m, w) in weights.iter_mut().enumerate() {
            *w = self.a2.row(m).iter().zip(&z).map(|(a, p)| a * p).sum();
        }
        *ops += self.obs_len * self.num_samples();
        Ok(PredictorRow {
            weights,
            step: self.step,
        })
    }
}

/// `A2 softmax(A1 ĉ + b)`.
pub fn structured_row(model: &StructuredModel, c_hat: &[f64]) -> Result<PredictorRow> {
    let mut ops = 0;
    model.row_counted(c_hat, &mut ops)
}
