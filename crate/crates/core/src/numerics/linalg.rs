use num_complex::Complex64;

use super::matrix::CMatrix;
use crate::error::{Error, Result};

/// Relative Hermitian tolerance accepted by the solvers.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L Lᴴ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    /// Factorizes a Hermitian positive-definite matrix. Only the lower triangle is read.
    pub fn factor(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidDimension(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular { pivot: j });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor_matrix(&self) -> &CMatrix {
        &self.l
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.l.rows();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)].conj() * b[k];
            }
            b[i] = s / self.l[(i, i)].re;
        }
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        let n = self.l.rows();
        if b.rows() != n {
            return Err(Error::InvalidDimension(format!(
                "right-hand side has {} rows, system has {n}",
                b.rows()
            )));
        }
        let mut x = CMatrix::zeros(n, b.cols());
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            self.solve_in_place(&mut col);
            for i in 0..n {
                x[(i, j)] = col[i];
            }
        }
        Ok(x)
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn logdet(&self) -> f64 {
        (0..self.l.rows()).map(|i| 2.0 * self.l[(i, i)].re.ln()).sum()
    }
}

/// Solves `A X = B` for Hermitian positive-definite `A` via Cholesky.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::Domain("hermitian_solve: matrix is not Hermitian".into()));
    }
    Cholesky::factor(a)?.solve(b)
}

/// Complex log-determinant from an LU factorization with partial pivoting.
///
/// The imaginary part is the phase of the determinant, wrapped to `(-π, π]`.
pub fn logdet(a: &CMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::InvalidDimension(format!(
            "logdet needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut lu = a.clone();
    let scale = a.max_abs();
    let tiny = scale * n as f64 * f64::EPSILON;
    let mut log_abs = 0.0;
    let mut phase = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pmax > tiny) || !pmax.is_finite() {
            return Err(Error::Singular { pivot: k });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            phase = -phase;
        }
        let pivot = lu[(k, k)];
        log_abs += pivot.norm().ln();
        phase *= pivot / pivot.norm();
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in k + 1..n {
                let u = lu[(k, j)];
                lu[(i, j)] -= factor * u;
            }
        }
    }
    Ok(Complex64::new(log_abs, phase.arg()))
}

/// Eigen-decomposition of a real symmetric matrix (row-major, `n×n`) by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvector `k` stored in column `k`.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let total: f64 = m.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i * n + i]).collect(), v)
}

/// Minimum-norm solution of the symmetric positive-semidefinite system `G x = d`.
///
/// Eigen-directions with eigenvalue below `rel_tol * λ_max` are treated as null space.
/// Returns the solution and the numerical rank of `G`.
pub fn psd_pinv_solve(g: &[f64], d: &[f64], rel_tol: f64) -> Result<(Vec<f64>, usize)> {
    let n = d.len();
    if g.len() != n * n {
        return Err(Error::LengthMismatch {
            expected: n * n,
            got: g.len(),
        });
    }
    let (vals, vecs) = symmetric_eigen(g, n);
    let lmax = vals.iter().cloned().fold(0.0, f64::max);
    if !(lmax > 0.0) || !lmax.is_finite() {
        return Err(Error::IllPosed("Gram matrix has no positive eigenvalue".into()));
    }
    let mut x = vec![0.0; n];
    let mut rank = 0;
    for k in 0..n {
        if vals[k] <= rel_tol * lmax {
            continue;
        }
        rank += 1;
        let proj: f64 = (0..n).map(|i| vecs[i * n + k] * d[i]).sum();
        let coef = proj / vals[k];
        for i in 0..n {
            x[i] += coef * vecs[i * n + k];
        }
    }
    Ok((x, rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hpd(n: usize, rng: &mut impl Rng) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let mut a = g.matmul(&g.adjoint()).unwrap();
        a.shift_diagonal(c(0.1, 0.0));
        a.hermitian_part()
    }

    fn random_matrix(r: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(r, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    /// Cofactor expansion along the first row.
    fn det_cofactor(a: &CMatrix) -> Complex64 {
        let n = a.rows();
        if n == 1 {
            return a[(0, 0)];
        }
        let mut det = c(0.0, 0.0);
        for j in 0..n {
            let minor = CMatrix::from_fn(n - 1, n - 1, |r, s| a[(r + 1, if s < j { s } else { s + 1 })]);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * a[(0, j)] * det_cofactor(&minor);
        }
        det
    }

    #[test]
    fn identity_system_returns_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_matrix(3, 2, &mut rng);
        let x = hermitian_solve(&CMatrix::identity(3), &b).unwrap();
        assert!(x.sub(&b).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_system() {
        let a = CMatrix::from_diag(&[c(2.0, 0.0), c(4.0, 0.0)]);
        let b = CMatrix::from_row_major(2, 1, vec![c(2.0, 0.0), c(8.0, 0.0)]).unwrap();
        let x = hermitian_solve(&a, &b).unwrap();
        assert!((x[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((x[(1, 0)] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_hpd_residual_m8() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_hpd(8, &mut rng);
        let b = random_matrix(8, 3, &mut rng);
        let x = hermitian_solve(&a, &b).unwrap();
        let r = a.matmul(&x).unwrap().sub(&b).unwrap();
        assert!(r.frobenius_norm() <= 1e-10 * b.frobenius_norm());
    }

    #[test]
    fn non_pd_reports_pivot() {
        let a = CMatrix::from_diag(&[c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        match hermitian_solve(&a, &CMatrix::identity(3)) {
            Err(Error::Singular { pivot }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let a = CMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(hermitian_solve(&a, &CMatrix::identity(2)), Err(Error::Domain(_))));
    }

    #[test]
    fn logdet_identity_and_diag() {
        assert!(logdet(&CMatrix::identity(4)).unwrap().norm() < 1e-15);
        let e = std::f64::consts::E;
        let d = logdet(&CMatrix::from_diag(&[c(e, 0.0), c(e, 0.0)])).unwrap();
        assert!((d - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn logdet_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(5, 5, &mut rng);
            let expect = det_cofactor(&a);
            let got = logdet(&a).unwrap().exp();
            assert!((got - expect).norm() <= 1e-9 * expect.norm().max(1.0), "{got} vs {expect}");
        }
    }

    #[test]
    fn logdet_singular() {
        let a = CMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert!(matches!(logdet(&a), Err(Error::Singular { .. })));
    }

    #[test]
    fn cholesky_logdet_agrees_with_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hpd(6, &mut rng);
        let lu = logdet(&a).unwrap();
        let ch = Cholesky::factor(&a).unwrap().logdet();
        assert!((lu.re - ch).abs() < 1e-10);
        assert!(lu.im.abs() < 1e-10);
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs[i * 3 + k] * vals[k] * vecs[j * 3 + k]).sum();
                assert!((r - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pinv_gives_min_norm_solution() {
        // G = [[1,1],[1,1]] has null direction (1,-1); min-norm solution of Gx=(2,2) is (1,1).
        let (x, rank) = psd_pinv_solve(&[1.0, 1.0, 1.0, 1.0], &[2.0, 2.0], 1e-10).unwrap();
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn solve_residual_property(seed in any::<u64>(), n in 1usize..12, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hpd(n, &mut rng);
            let b = random_matrix(n, k, &mut rng);
            let x = hermitian_solve(&a, &b).unwrap();
            let r = a.matmul(&x).unwrap().sub(&b).unwrap();
            prop_assert!(r.frobenius_norm() <= 1e-10 * b.frobenius_norm());
        }
    }
}
