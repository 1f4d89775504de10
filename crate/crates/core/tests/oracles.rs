//! Cross-checks against independent references: nalgebra eigen-decompositions, direct
//! Gaussian likelihoods and Monte Carlo moments.

use chanpred::channel::{generate_block, noise_var_from_snr_db, sample_scenario, ChannelSample, ModelParams};
use chanpred::covariance::{toeplitz_cov, CovarianceSpec};
use chanpred::gridded::{build_bank, feature_full, gridded_row, GridStrategy};
use chanpred::harness::{evaluate_mse, FixedPredictor, ScenarioSource};
use chanpred::lmmse::{jakes_spec, lmmse_direct};
use chanpred::numerics::{bessel_j0, CMatrix, Complex64};
use chanpred::rng::SeedTree;
use chanpred::Execution;
use nalgebra::DMatrix;

fn to_na(a: &CMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let h = to_na(&a.hermitian_part());
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn observation_blocks_have_spectrum_in_unit_interval() {
    for paths in [1, 3] {
        for v in [0.0, 50.0, 200.0] {
            let p = ModelParams::standard(v, paths, 16, 4).unwrap();
            let bank = build_bank(&GridStrategy::for_paths(8, paths), &p, 4, 0.1, &mut SeedTree::new(3).stream(), Execution::Sequential).unwrap();
            for blk in bank.observation_blocks() {
                let ev = hermitian_eigenvalues(blk);
                assert!(ev[0] > -1e-12, "{ev:?}");
                assert!(*ev.last().unwrap() < 1.0);
            }
        }
    }
}

#[test]
fn covariances_are_psd() {
    let p = ModelParams::standard(120.0, 1, 16, 4).unwrap();
    let jakes = toeplitz_cov(&jakes_spec(&p).unwrap(), 20);
    assert!(hermitian_eigenvalues(&jakes)[0] > -1e-10);
    let spec = CovarianceSpec::finite_p(vec![150.0, -40.0, 3.0], vec![0.5, 0.3, 0.2], p.symbol_duration_s).unwrap();
    let ev = hermitian_eigenvalues(&toeplitz_cov(&spec, 20));
    assert!(ev[0] > -1e-10);
    // rank 3 up to round-off
    assert!(ev[..17].iter().all(|x| x.abs() < 1e-8), "{ev:?}");
}

#[test]
fn bias_matches_nalgebra_determinant() {
    let p = ModelParams::standard(90.0, 1, 12, 3).unwrap();
    let bank = build_bank(&GridStrategy::for_paths(5, 1), &p, 3, 0.3, &mut SeedTree::new(0).stream(), Execution::Sequential).unwrap();
    for (e, blk) in bank.entries.iter().zip(bank.observation_blocks()) {
        let a = to_na(&CMatrix::identity(12).sub(blk).unwrap());
        let det = a.determinant();
        assert!((det.re.ln() - e.bias).abs() < 1e-10);
        assert!(det.im.abs() < 1e-10 * det.re.abs());
    }
}

/// Score differences equal Gaussian log-likelihood differences `-yᴴΣ_y⁻¹y - log|Σ_y|`.
#[test]
fn scores_are_gaussian_log_likelihoods() {
    let m = 10;
    let nv = 0.2;
    let p = ModelParams::standard(150.0, 1, m, 2).unwrap();
    let bank = build_bank(&GridStrategy::for_paths(6, 1), &p, 2, nv, &mut SeedTree::new(0).stream(), Execution::Sequential).unwrap();
    let y = ChannelSample::draw(&p, 2, nv, &mut SeedTree::new(5).stream()).unwrap().observation;
    let scores = bank.scores(&y).unwrap();
    let loglik: Vec<f64> = bank
        .entries
        .iter()
        .map(|e| {
            let spec = CovarianceSpec::finite_p(
                vec![p.doppler_bandwidth() * e.doas[0].cos()],
                vec![1.0],
                p.symbol_duration_s,
            )
            .unwrap();
            let mut sy = to_na(&toeplitz_cov(&spec, m));
            for i in 0..m {
                sy[(i, i)] += nv;
            }
            let yv = nalgebra::DVector::from_vec(y.clone());
            let quad = (yv.adjoint() * sy.clone().try_inverse().unwrap() * &yv)[(0, 0)].re;
            -quad - sy.determinant().re.ln()
        })
        .collect();
    for i in 1..scores.len() {
        let d1 = scores[i] - scores[0];
        let d2 = loglik[i] - loglik[0];
        assert!((d1 - d2).abs() < 1e-8 * (1.0 + d2.abs()), "{d1} vs {d2}");
    }
}

#[test]
fn dense_and_quadratic_scores_agree() {
    let p = ModelParams::standard(70.0, 1, 8, 1).unwrap();
    let bank = build_bank(&GridStrategy::for_paths(7, 1), &p, 1, 0.1, &mut SeedTree::new(0).stream(), Execution::Sequential).unwrap();
    let y = ChannelSample::draw(&p, 1, 0.1, &mut SeedTree::new(1).stream()).unwrap().observation;
    let a = bank.row_for(&y).unwrap();
    let b = gridded_row(&bank, &feature_full(&y, 0.1).unwrap()).unwrap();
    for (x, z) in a.weights.iter().zip(&b.weights) {
        assert!((x - z).norm() < 1e-12);
    }
}

/// Over the uniform DoA prior, `E[h[k] h[0]*] = J0(2π B_D T_s k)` for any `P`.
#[test]
fn empirical_autocorrelation_is_bessel() {
    let p = ModelParams::standard(100.0, 1, 12, 1).unwrap();
    let mut rng = SeedTree::new(11).stream();
    let n = 100_000;
    let lags = [1usize, 4, 8, 12];
    let mut acc = vec![Complex64::new(0.0, 0.0); lags.len()];
    for _ in 0..n {
        let h = generate_block(&sample_scenario(&p, &mut rng), &p);
        for (a, &k) in acc.iter_mut().zip(&lags) {
            *a += h[k] * h[0].conj();
        }
    }
    let arg = 2.0 * std::f64::consts::PI * p.doppler_bandwidth() * p.symbol_duration_s;
    for (a, &k) in acc.iter().zip(&lags) {
        let r = *a / n as f64;
        let want = bessel_j0(arg * k as f64).unwrap();
        assert!((r.re - want).abs() < 0.01 && r.im.abs() < 0.01, "lag {k}: {r} vs {want}");
    }
}

/// The Jakes covariance is exact under the DoA prior, so its LMMSE filter has the
/// textbook error `1 - r Σ_y⁻¹ rᴴ` and orthogonal residuals.
#[test]
fn jakes_filter_is_exact_lmmse_under_the_prior() {
    let (m, l) = (8, 2);
    let nv = noise_var_from_snr_db(5.0);
    let p = ModelParams::standard(250.0, 2, m, l).unwrap();
    let spec = jakes_spec(&p).unwrap();
    let row = lmmse_direct(&spec, m, l, nv).unwrap();

    // analytic MSE: 1 - Re Σ w_i conj(R[l+i])
    let analytic = 1.0 - row.weights.iter().enumerate().map(|(i, w)| (w * spec.covariance_at(l + i).conj()).re).sum::<f64>();
    let est = evaluate_mse(&FixedPredictor(row.clone()), &p, l, nv, 40_000, &ScenarioSource::Prior, &SeedTree::new(2), Execution::default()).unwrap();
    assert!((est.mse - analytic).abs() < 4.0 * est.std_err, "{} vs {analytic}", est.mse);

    let mut rng = SeedTree::new(8).stream();
    let n = 40_000;
    let mut corr = vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..n {
        let s = ChannelSample::draw(&p, l, nv, &mut rng).unwrap();
        let e = s.target - row.predict(&s.observation).unwrap();
        for (c, y) in corr.iter_mut().zip(&s.observation) {
            *c += e * y.conj();
        }
    }
    let bound = 6.0 * (analytic * (1.0 + nv) / n as f64).sqrt();
    for c in corr {
        assert!((c / n as f64).norm() < bound, "{c} vs {bound}");
    }
}
