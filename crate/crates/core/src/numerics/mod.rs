//! Dense complex linear algebra and special functions.
//!
//! Matrices are small (tens of rows), so everything is direct: Cholesky for
//! Hermitian positive-definite solves, partial-pivot LU for determinants, cyclic
//! Jacobi for real symmetric eigenproblems.

mod bessel;
mod dft;
mod linalg;
mod matrix;
mod real;
mod softmax;

pub use bessel::bessel_j0;
pub use dft::dft_matrix;
pub use linalg::{hermitian_solve, logdet, psd_pinv_solve, symmetric_eigen, Cholesky, HERMITIAN_TOL};
pub use matrix::{dot, norm_sqr, CMatrix, CVector};
pub use real::RMatrix;
pub use softmax::{softmax, softmax_in_place};

pub use num_complex::Complex64;
