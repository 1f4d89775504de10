//! Covariance functions `R_h[k]`, Toeplitz covariance matrices and the `l`-extended
//! covariance with its selection operators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelScenario, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{bessel_j0, CMatrix, CVector, Complex64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CovarianceKind {
    /// Line spectrum: `R[k] = Σ_p |a_p|² exp(j2π f_p T_s k)`.
    FiniteP { dopplers: Vec<f64>, powers: Vec<f64> },
    /// Jakes limit: `R[k] = J0(2π B_D T_s k)`.
    Jakes { doppler_bandwidth: f64 },
    /// Explicit lags `R[0..n]`; larger lags are zero.
    Tabulated { lags: Vec<Complex64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    pub symbol_duration_s: f64,
}

impl CovarianceSpec {
    pub fn finite_p(dopplers: Vec<f64>, powers: Vec<f64>, symbol_duration_s: f64) -> Result<Self> {
        if dopplers.len() != powers.len() || dopplers.is_empty() {
            return Err(Error::LengthMismatch {
                expected: dopplers.len(),
                got: powers.len(),
            });
        }
        let total: f64 = powers.iter().sum();
        if powers.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("path powers must be nonnegative and sum to 1 (sum {total})")));
        }
        Ok(CovarianceSpec {
            kind: CovarianceKind::FiniteP { dopplers, powers },
            symbol_duration_s,
        })
    }

    /// Covariance of the scenario's own line spectrum.
    pub fn from_scenario(scenario: &ChannelScenario, params: &ModelParams) -> Result<Self> {
        Self::finite_p(scenario.dopplers.clone(), scenario.powers(), params.symbol_duration_s)
    }

    pub fn jakes(doppler_bandwidth: f64, symbol_duration_s: f64) -> Result<Self> {
        if !(doppler_bandwidth >= 0.0) || !doppler_bandwidth.is_finite() {
            return Err(Error::Domain(format!("Doppler bandwidth {doppler_bandwidth}")));
        }
        Ok(CovarianceSpec {
            kind: CovarianceKind::Jakes { doppler_bandwidth },
            symbol_duration_s,
        })
    }

    pub fn tabulated(lags: Vec<Complex64>) -> Result<Self> {
        match lags.first() {
            Some(r0) if (r0 - Complex64::new(1.0, 0.0)).norm() < 1e-12 => Ok(CovarianceSpec {
                kind: CovarianceKind::Tabulated { lags },
                symbol_duration_s: 1.0,
            }),
            _ => Err(Error::Domain("tabulated covariance needs R[0] = 1".into())),
        }
    }

    /// `R_h[k]` for lag `k >= 0`.
    pub fn covariance_at(&self, k: usize) -> Complex64 {
        let ts = self.symbol_duration_s;
        match &self.kind {
            CovarianceKind::FiniteP { dopplers, powers } => dopplers
                .iter()
                .zip(powers)
                .map(|(f, p)| Complex64::from_polar(*p, 2.0 * PI * f * ts * k as f64))
                .sum(),
            CovarianceKind::Jakes { doppler_bandwidth } => {
                let x = 2.0 * PI * doppler_bandwidth * ts * k as f64;
                Complex64::new(bessel_j0(x).expect("finite argument"), 0.0)
            }
            CovarianceKind::Tabulated { lags } => lags.get(k).copied().unwrap_or_default(),
        }
    }

    pub fn lags(&self, n: usize) -> CVector {
        (0..n).map(|k| self.covariance_at(k)).collect()
    }
}

/// `M×M` Hermitian Toeplitz matrix with `(i, j) = R[j-i]` on and above the diagonal.
pub fn toeplitz_cov(spec: &CovarianceSpec, size: usize) -> CMatrix {
    toeplitz_from_lags(&spec.lags(size))
}

pub fn toeplitz_from_lags(r: &[Complex64]) -> CMatrix {
    let n = r.len();
    CMatrix::from_fn(n, n, |i, j| if j >= i { r[j - i] } else { r[i - j].conj() })
}

/// Covariance of `[h[M-1+l], …, h[M], h[M-1], …, h[0]]`, size `(M+l)×(M+l)`.
pub fn extended_cov(spec: &CovarianceSpec, obs_len: usize, step: usize) -> Result<CMatrix> {
    if step == 0 {
        return Err(Error::InvalidStep { step, max: usize::MAX });
    }
    if obs_len == 0 {
        return Err(Error::InvalidDimension("observation length must be at least 1".into()));
    }
    Ok(toeplitz_cov(spec, obs_len + step))
}

/// `e1` and `S = [0; I_M]` for an `l`-step, `M`-observation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionOps {
    pub obs_len: usize,
    pub step: usize,
    pub e1: CVector,
    pub s: CMatrix,
}

impl SelectionOps {
    pub fn new(obs_len: usize, step: usize) -> Self {
        let n = obs_len + step;
        let mut e1 = vec![Complex64::new(0.0, 0.0); n];
        e1[0] = Complex64::new(1.0, 0.0);
        let s = CMatrix::from_fn(n, obs_len, |i, j| {
            if i == j + step {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        SelectionOps { obs_len, step, e1, s }
    }
}

/// Slices `(e1ᵀ Σ_ext S, Sᵀ Σ_ext S)` out of the extended covariance.
///
/// The first is the correlation row `[R[l], …, R[M-1+l]]`, the second the bottom-right
/// `M×M` block.
pub fn extract_parts(ext: &CMatrix, ops: &SelectionOps) -> Result<(CVector, CMatrix)> {
    let n = ops.obs_len + ops.step;
    if ext.rows() != n || ext.cols() != n {
        return Err(Error::InvalidDimension(format!(
            "extended covariance is {}x{}, selection expects {n}x{n}",
            ext.rows(),
            ext.cols()
        )));
    }
    let corr_row = ext.row(0)[ops.step..].to_vec();
    let sigma_h = ext.block(ops.step, ops.step, ops.obs_len, ops.obs_len)?;
    Ok((corr_row, sigma_h))
}
