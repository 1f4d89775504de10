use serde::{Deserialize, Serialize};

use crate::channel::ObservationBatch;
use crate::error::{Error, Result};
use crate::lmmse::PredictorRow;
use crate::numerics::{softmax_in_place, CMatrix, Complex64, RMatrix};
use crate::structured::{feature_compressed, StructuredModel};

/// Network parameters. `a2`/`b2` have `2M` rows: real parts first, then imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NNWeights {
    pub a1: RMatrix,
    pub b1: Vec<f64>,
    pub a2: RMatrix,
    pub b2: Vec<f64>,
}

impl NNWeights {
    pub fn zeros(hidden: usize, input: usize, obs_len: usize) -> Self {
        NNWeights {
            a1: RMatrix::zeros(hidden, input),
            b1: vec![0.0; hidden],
            a2: RMatrix::zeros(2 * obs_len, hidden),
            b2: vec![0.0; 2 * obs_len],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden_len(), self.input_len(), self.obs_len())
    }

    pub fn hidden_len(&self) -> usize {
        self.b1.len()
    }

    pub fn input_len(&self) -> usize {
        self.a1.cols()
    }

    pub fn obs_len(&self) -> usize {
        self.b2.len() / 2
    }

    /// Parameter blocks in the order `A(1), b(1), A(2), b(2)`.
    pub fn blocks(&self) -> [&[f64]; 4] {
        [self.a1.as_slice(), &self.b1, self.a2.as_slice(), &self.b2]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [self.a1.as_mut_slice(), &mut self.b1, self.a2.as_mut_slice(), &mut self.b2]
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

/// `A(1) = A1`, `b(1) = b`, `A(2) = [Re A2; Im A2]`, `b(2) = 0`.
pub fn init_from_structured(model: &StructuredModel) -> NNWeights {
    let m = model.obs_len;
    let n = model.num_samples();
    let mut a2 = RMatrix::zeros(2 * m, n);
    for r in 0..m {
        for i in 0..n {
            let z = model.a2[(r, i)];
            a2.row_mut(r)[i] = z.re;
            a2.row_mut(m + r)[i] = z.im;
        }
    }
    NNWeights {
        a1: model.a1.clone(),
        b1: model.b.clone(),
        a2,
        b2: vec![0.0; 2 * m],
    }
}

fn check_input(w: &NNWeights, c_hat: &[f64]) -> Result<()> {
    if c_hat.len() != w.input_len() {
        return Err(Error::LengthMismatch {
            expected: w.input_len(),
            got: c_hat.len(),
        });
    }
    Ok(())
}

/// Hidden activations `p = softmax(A(1) ĉ + b(1))`.
fn hidden(w: &NNWeights, c_hat: &[f64], p: &mut [f64]) {
    w.a1.matvec_into(c_hat, p);
    for (z, b) in p.iter_mut().zip(&w.b1) {
        *z += b;
    }
    softmax_in_place(p);
}

fn output(w: &NNWeights, p: &[f64], out: &mut [f64]) {
    w.a2.matvec_into(p, out);
    for (o, b) in out.iter_mut().zip(&w.b2) {
        *o += b;
    }
}

/// Network output, length `2M`.
pub fn forward(w: &NNWeights, c_hat: &[f64]) -> Result<Vec<f64>> {
    check_input(w, c_hat)?;
    let mut p = vec![0.0; w.hidden_len()];
    hidden(w, c_hat, &mut p);
    let mut out = vec![0.0; w.b2.len()];
    output(w, &p, &mut out);
    Ok(out)
}

/// Recombines `[Re; Im]` into a complex predictor row.
pub fn row_from_output(out: &[f64], step: usize) -> PredictorRow {
    let m = out.len() / 2;
    PredictorRow {
        weights: (0..m).map(|i| Complex64::new(out[i], out[m + i])).collect(),
        step,
    }
}

/// `ĥ = (ŵ_Re + j ŵ_Im)ᵀ y`.
pub fn predict_nn(w: &NNWeights, c_hat: &[f64], y: &[Complex64]) -> Result<Complex64> {
    if y.len() != w.obs_len() {
        return Err(Error::LengthMismatch {
            expected: w.obs_len(),
            got: y.len(),
        });
    }
    let out = forward(w, c_hat)?;
    let m = w.obs_len();
    Ok((0..m).map(|i| Complex64::new(out[i], out[m + i]) * y[i]).sum())
}

/// Network inputs `ĉ_b` precomputed for a batch.
#[derive(Clone, Debug)]
pub struct BatchFeatures {
    pub features: Vec<Vec<f64>>,
}

impl BatchFeatures {
    pub fn compute(batch: &ObservationBatch, q: &CMatrix) -> Result<Self> {
        let features = batch
            .observations
            .iter()
            .map(|y| feature_compressed(y, q, batch.noise_var))
            .collect::<Result<Vec<_>>>()?;
        Ok(BatchFeatures { features })
    }
}

/// Batch MSE `(1/B) Σ |h_b - ĥ_b|²` and its gradient with respect to all four blocks.
pub fn loss_and_grad(w: &NNWeights, batch: &ObservationBatch, q: &CMatrix, noise_var: f64) -> Result<(f64, NNWeights)> {
    let feats = BatchFeatures::compute(
        &ObservationBatch {
            noise_var,
            ..batch.clone()
        },
        q,
    )?;
    loss_and_grad_features(w, batch, &feats)
}

pub(crate) fn loss_and_grad_features(w: &NNWeights, batch: &ObservationBatch, feats: &BatchFeatures) -> Result<(f64, NNWeights)> {
    if batch.is_empty() {
        return Err(Error::InvalidDimension("empty batch".into()));
    }
    let m = w.obs_len();
    let n = w.hidden_len();
    let mut grad = w.zeros_like();
    let mut p = vec![0.0; n];
    let mut out = vec![0.0; 2 * m];
    let mut g_out = vec![0.0; 2 * m];
    let mut g_p = vec![0.0; n];
    let mut total = 0.0;
    for (b, ((y, h), c_hat)) in batch.observations.iter().zip(&batch.targets).zip(&feats.features).enumerate() {
        check_input(w, c_hat)?;
        if y.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: y.len() });
        }
        hidden(w, c_hat, &mut p);
        output(w, &p, &mut out);
        let h_hat: Complex64 = (0..m).map(|i| Complex64::new(out[i], out[m + i]) * y[i]).sum();
        let e = h_hat - h;
        let loss = e.norm_sqr();
        if !loss.is_finite() {
            return Err(Error::NumericFailure {
                stage: "forward pass",
                index: b,
            });
        }
        total += loss;
        // ∂|e|²/∂Re w_i = 2 Re(ē y_i), ∂|e|²/∂Im w_i = -2 Im(ē y_i)
        for i in 0..m {
            let t = e.conj() * y[i];
            g_out[i] = 2.0 * t.re;
            g_out[m + i] = -2.0 * t.im;
        }
        for (gb, g) in grad.b2.iter_mut().zip(&g_out) {
            *gb += g;
        }
        grad.a2.add_outer(1.0, &g_out, &p);
        w.a2.tr_matvec_into(&g_out, &mut g_p);
        // softmax Jacobian: g_z = p ⊙ (g_p - pᵀ g_p)
        let mean: f64 = p.iter().zip(&g_p).map(|(a, b)| a * b).sum();
        for (gz, &pi) in g_p.iter_mut().zip(&p) {
            *gz = pi * (*gz - mean);
        }
        for (gb, g) in grad.b1.iter_mut().zip(&g_p) {
            *gb += g;
        }
        grad.a1.add_outer(1.0, &g_p, c_hat);
    }
    let inv = 1.0 / batch.len() as f64;
    for blk in grad.blocks_mut() {
        blk.iter_mut().for_each(|g| *g *= inv);
    }
    Ok((total * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_batch, ModelParams};
    use crate::exec::Execution;
    use crate::gridded::{build_bank, GridStrategy};
    use crate::rng::SeedTree;
    use crate::structured::{q_matrix, structured_row, QKind};
    use rand::Rng;

    fn model(kind: QKind) -> StructuredModel {
        let p = ModelParams::standard(60.0, 1, 16, 4).unwrap();
        let bank = build_bank(
            &GridStrategy::for_paths(kind.feature_len(16), 1),
            &p,
            4,
            0.1,
            &mut SeedTree::new(0).stream(),
            Execution::Sequential,
        )
        .unwrap();
        StructuredModel::from_bank(&bank, kind, Execution::Sequential).unwrap()
    }

    #[test]
    fn init_mapping() {
        let s = model(QKind::Toeplitz);
        let w = init_from_structured(&s);
        assert!(w.b2.iter().all(|&x| x == 0.0));
        assert_eq!(w.a2.rows(), 32);
        assert_eq!(w.a1, s.a1);
        assert_eq!(w.b1, s.b);
    }

    #[test]
    fn forward_at_init_equals_structured() {
        let mut rng = SeedTree::new(3).stream();
        for kind in [QKind::Circulant, QKind::Toeplitz] {
            let s = model(kind);
            let w = init_from_structured(&s);
            for _ in 0..20 {
                let c_hat: Vec<f64> = (0..s.feature_len()).map(|_| rng.random_range(0.0..50.0)).collect();
                let out = forward(&w, &c_hat).unwrap();
                let row = structured_row(&s, &c_hat).unwrap();
                for (i, z) in row.weights.iter().enumerate() {
                    assert!((out[i] - z.re).abs() < 1e-12);
                    assert!((out[16 + i] - z.im).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_output_layer() {
        let mut w = init_from_structured(&model(QKind::Circulant));
        w.a2 = RMatrix::zeros(32, 16);
        let out = forward(&w, &[3.0; 16]).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
        let y = vec![Complex64::new(1.0, 1.0); 16];
        assert_eq!(predict_nn(&w, &[3.0; 16], &y).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn hidden_activations_are_probabilities() {
        let w = init_from_structured(&model(QKind::Toeplitz));
        let mut p = vec![0.0; w.hidden_len()];
        hidden(&w, &[0.7; 32], &mut p);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn predict_matches_hand_inner_product() {
        let mut rng = SeedTree::new(9).stream();
        let mut w = NNWeights::zeros(5, 6, 3);
        for blk in w.blocks_mut() {
            blk.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        }
        let c_hat: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..2.0)).collect();
        let y: Vec<Complex64> = (0..3).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let out = forward(&w, &c_hat).unwrap();
        let mut expect = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            let re = out[i] * y[i].re - out[3 + i] * y[i].im;
            let im = out[i] * y[i].im + out[3 + i] * y[i].re;
            expect += Complex64::new(re, im);
        }
        assert!((predict_nn(&w, &c_hat, &y).unwrap() - expect).norm() < 1e-14);
        assert!(predict_nn(&w, &c_hat, &y[..2]).is_err());
        assert!(forward(&w, &c_hat[..5]).is_err());
    }

    #[test]
    fn hidden_shift_invariance() {
        let s = model(QKind::Circulant);
        let mut w = init_from_structured(&s);
        let c_hat = vec![2.0; 16];
        let before = forward(&w, &c_hat).unwrap();
        w.b1.iter_mut().for_each(|b| *b += 1234.5);
        let after = forward(&w, &c_hat).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_batch_loss_is_target_power() {
        let p = ModelParams::standard(30.0, 1, 4, 2).unwrap();
        let batch = make_batch(&p, 2, 6, 0.1, &mut SeedTree::new(1).stream()).unwrap();
        let q = q_matrix(QKind::Circulant, 4).unwrap();
        let w = NNWeights::zeros(4, 4, 4);
        let (mse, g) = loss_and_grad(&w, &batch, &q, 0.1).unwrap();
        let expect = batch.targets.iter().map(|t| t.norm_sqr()).sum::<f64>() / 6.0;
        assert!((mse - expect).abs() < 1e-14);
        // A2 = 0 kills the backward path into the softmax
        assert!(g.a1.as_slice().iter().all(|&x| x == 0.0));
        assert!(g.b1.iter().all(|&x| x == 0.0));
        assert!(g.b2.iter().any(|&x| x != 0.0));
        assert!(g.a2.as_slice().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn empty_batch_rejected() {
        let w = NNWeights::zeros(2, 4, 4);
        let batch = ObservationBatch {
            observations: vec![],
            targets: vec![],
            noise_var: 0.1,
        };
        assert!(loss_and_grad(&w, &batch, &q_matrix(QKind::Circulant, 4).unwrap(), 0.1).is_err());
    }
}
