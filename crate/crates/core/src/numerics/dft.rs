use std::f64::consts::PI;

use num_complex::Complex64;

use super::matrix::CMatrix;
use crate::error::{Error, Result};

/// First `num_cols` columns of the `num_rows`-point DFT matrix.
///
/// Entry `(k, m)` is `exp(-j2πkm/K)`, divided by `√K` when `normalized`. Only
/// `K = M` (square DFT) and `K = 2M` (zero-padded DFT) are accepted.
pub fn dft_matrix(num_rows: usize, num_cols: usize, normalized: bool) -> Result<CMatrix> {
    if num_cols == 0 || (num_rows != num_cols && num_rows != 2 * num_cols) {
        return Err(Error::InvalidDimension(format!(
            "DFT with K={num_rows} rows and M={num_cols} columns; K must be M or 2M"
        )));
    }
    let k_len = num_rows as f64;
    let scale = if normalized { 1.0 / k_len.sqrt() } else { 1.0 };
    Ok(CMatrix::from_fn(num_rows, num_cols, |k, m| {
        // reduce km mod K before forming the angle to keep the argument small
        let idx = (k * m) % num_rows;
        Complex64::from_polar(scale, -2.0 * PI * idx as f64 / k_len)
    }))
}
