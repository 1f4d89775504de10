//! Plane-wave superposition channel: scenario sampling, block generation and noisy
//! observations.
//!
//! Observation vectors are stored newest first, `y = [h[M-1], …, h[0]] + n`, and the
//! `l`-step target is `h[M-1+l]`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CVector, Complex64};
use crate::rng::Stream;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const DEFAULT_CARRIER_HZ: f64 = 2.0e9;
pub const DEFAULT_SYMBOL_DURATION_S: f64 = 20.57e-6;

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

/// SNR in dB to noise variance for a unit-power channel.
pub fn noise_var_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub carrier_freq_hz: f64,
    pub symbol_duration_s: f64,
    pub velocity_mps: f64,
    pub num_paths: usize,
    pub obs_len: usize,
    pub pred_len: usize,
}

impl ModelParams {
    pub fn new(
        carrier_freq_hz: f64,
        symbol_duration_s: f64,
        velocity_mps: f64,
        num_paths: usize,
        obs_len: usize,
        pred_len: usize,
    ) -> Result<Self> {
        let p = ModelParams {
            carrier_freq_hz,
            symbol_duration_s,
            velocity_mps,
            num_paths,
            obs_len,
            pred_len,
        };
        p.validate()?;
        Ok(p)
    }

    /// 2 GHz carrier, 20.57 µs symbols, velocity in km/h.
    pub fn standard(velocity_kmh: f64, num_paths: usize, obs_len: usize, pred_len: usize) -> Result<Self> {
        Self::new(
            DEFAULT_CARRIER_HZ,
            DEFAULT_SYMBOL_DURATION_S,
            kmh_to_mps(velocity_kmh),
            num_paths,
            obs_len,
            pred_len,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.carrier_freq_hz > 0.0
            && self.carrier_freq_hz.is_finite()
            && self.symbol_duration_s > 0.0
            && self.symbol_duration_s.is_finite()
            && self.velocity_mps >= 0.0
            && self.velocity_mps.is_finite();
        if !ok {
            return Err(Error::Domain(format!("invalid model parameters {self:?}")));
        }
        if self.num_paths == 0 || self.obs_len == 0 || self.pred_len == 0 {
            return Err(Error::InvalidDimension(format!(
                "P, M and N must be at least 1 (got P={}, M={}, N={})",
                self.num_paths, self.obs_len, self.pred_len
            )));
        }
        Ok(())
    }

    /// Maximum Doppler shift `v f_c / c`.
    pub fn doppler_bandwidth(&self) -> f64 {
        self.velocity_mps * self.carrier_freq_hz / SPEED_OF_LIGHT
    }

    pub fn block_len(&self) -> usize {
        self.obs_len + self.pred_len
    }

    pub fn check_step(&self, step: usize) -> Result<()> {
        if step == 0 || step > self.pred_len {
            return Err(Error::InvalidStep {
                step,
                max: self.pred_len,
            });
        }
        Ok(())
    }
}

/// Propagation state of one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelScenario {
    pub doas: Vec<f64>,
    pub phases: Vec<f64>,
    pub dopplers: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
}

impl ChannelScenario {
    pub fn from_angles(params: &ModelParams, doas: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if doas.len() != phases.len() || doas.is_empty() {
            return Err(Error::LengthMismatch {
                expected: doas.len(),
                got: phases.len(),
            });
        }
        let bd = params.doppler_bandwidth();
        let gain = 1.0 / (doas.len() as f64).sqrt();
        let dopplers = doas.iter().map(|d| bd * d.cos()).collect();
        let amplitudes = phases.iter().map(|&psi| Complex64::from_polar(gain, psi)).collect();
        Ok(ChannelScenario {
            doas,
            phases,
            dopplers,
            amplitudes,
        })
    }

    pub fn num_paths(&self) -> usize {
        self.doas.len()
    }

    /// Path powers `|a_p|²`.
    pub fn powers(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn uniform_angle(rng: &mut Stream) -> f64 {
    rng.random_range(-PI..PI)
}

/// Independent uniform DoAs and phases on `[-π, π)`.
pub fn sample_scenario(params: &ModelParams, rng: &mut Stream) -> ChannelScenario {
    let p = params.num_paths;
    let doas = (0..p).map(|_| uniform_angle(rng)).collect();
    let phases = (0..p).map(|_| uniform_angle(rng)).collect();
    ChannelScenario::from_angles(params, doas, phases).expect("P >= 1 by validation")
}

/// Keeps the given DoAs and draws fresh phases.
pub fn sample_phases(params: &ModelParams, doas: &[f64], rng: &mut Stream) -> Result<ChannelScenario> {
    let phases = doas.iter().map(|_| uniform_angle(rng)).collect();
    ChannelScenario::from_angles(params, doas.to_vec(), phases)
}

/// `h[m] = Σ_p a_p exp(j2π f_p T_s m)` for `m = 0..M+N`.
pub fn generate_block(scenario: &ChannelScenario, params: &ModelParams) -> CVector {
    generate_prefix(scenario, params, params.block_len())
}

/// First `len` coefficients of the block.
pub fn generate_prefix(scenario: &ChannelScenario, params: &ModelParams, len: usize) -> CVector {
    let ts = params.symbol_duration_s;
    (0..len)
        .map(|m| {
            scenario
                .amplitudes
                .iter()
                .zip(&scenario.dopplers)
                .map(|(a, f)| a * Complex64::from_polar(1.0, 2.0 * PI * f * ts * m as f64))
                .sum()
        })
        .collect()
}

/// Observation window `[h[M-1], …, h[0]]`.
pub fn observation_window(block: &[Complex64], obs_len: usize) -> CVector {
    block[..obs_len].iter().rev().copied().collect()
}

fn complex_gaussian(std_per_dim: f64, rng: &mut Stream) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * std_per_dim, im * std_per_dim)
}

/// `y = h + n` with circularly-symmetric complex Gaussian `n`, variance `noise_var` per entry.
pub fn add_noise(h: &[Complex64], noise_var: f64, rng: &mut Stream) -> Result<CVector> {
    check_noise_var(noise_var)?;
    let s = (noise_var / 2.0).sqrt();
    Ok(h.iter().map(|&x| x + complex_gaussian(s, rng)).collect())
}

pub(crate) fn check_noise_var(noise_var: f64) -> Result<()> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::Domain(format!("noise variance must be positive, got {noise_var}")));
    }
    Ok(())
}

/// One realization: scenario, noisy observation and `l`-step target.
#[derive(Clone, Debug)]
pub struct ChannelSample {
    pub scenario: ChannelScenario,
    pub observation: CVector,
    pub target: Complex64,
}

impl ChannelSample {
    pub fn from_scenario(
        scenario: ChannelScenario,
        params: &ModelParams,
        step: usize,
        noise_var: f64,
        rng: &mut Stream,
    ) -> Result<Self> {
        params.check_step(step)?;
        let m = params.obs_len;
        let block = generate_prefix(&scenario, params, m + step);
        let observation = add_noise(&observation_window(&block, m), noise_var, rng)?;
        Ok(ChannelSample {
            scenario,
            observation,
            target: block[m - 1 + step],
        })
    }

    pub fn draw(params: &ModelParams, step: usize, noise_var: f64, rng: &mut Stream) -> Result<Self> {
        let scenario = sample_scenario(params, rng);
        Self::from_scenario(scenario, params, step, noise_var, rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationBatch {
    pub observations: Vec<CVector>,
    pub targets: Vec<Complex64>,
    pub noise_var: f64,
}

impl ObservationBatch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn obs_len(&self) -> usize {
        self.observations.first().map_or(0, Vec::len)
    }

    /// Little-endian layout: `u64 B, u64 M, f64 σ²`, then `B×M` observation entries
    /// row-major as `(re, im)` f64 pairs, then `B` target pairs.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let b = self.len();
        let m = self.obs_len();
        let mut out = Vec::with_capacity(24 + 16 * b * (m + 1));
        out.extend_from_slice(&(b as u64).to_le_bytes());
        out.extend_from_slice(&(m as u64).to_le_bytes());
        out.extend_from_slice(&self.noise_var.to_le_bytes());
        for z in self.observations.iter().flatten().chain(&self.targets) {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|s| s.try_into().unwrap())
                .ok_or(Error::LengthMismatch {
                    expected: 8 * i + 8,
                    got: bytes.len(),
                })
        };
        let b = u64::from_le_bytes(word(0)?) as usize;
        let m = u64::from_le_bytes(word(1)?) as usize;
        let noise_var = f64::from_le_bytes(word(2)?);
        let expected = 24 + 16 * b * (m + 1);
        if bytes.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: bytes.len(),
            });
        }
        let pair = |k: usize| -> Result<Complex64> {
            Ok(Complex64::new(
                f64::from_le_bytes(word(3 + 2 * k)?),
                f64::from_le_bytes(word(4 + 2 * k)?),
            ))
        };
        let observations = (0..b)
            .map(|i| (0..m).map(|j| pair(i * m + j)).collect::<Result<CVector>>())
            .collect::<Result<Vec<_>>>()?;
        let targets = (0..b).map(|i| pair(b * m + i)).collect::<Result<Vec<_>>>()?;
        Ok(ObservationBatch {
            observations,
            targets,
            noise_var,
        })
    }
}

/// `B` independent realizations for an `l`-step training batch.
pub fn make_batch(
    params: &ModelParams,
    step: usize,
    batch_size: usize,
    noise_var: f64,
    rng: &mut Stream,
) -> Result<ObservationBatch> {
    params.check_step(step)?;
    check_noise_var(noise_var)?;
    if batch_size == 0 {
        return Err(Error::InvalidDimension("batch size must be at least 1".into()));
    }
    let mut observations = Vec::with_capacity(batch_size);
    let mut targets = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let s = ChannelSample::draw(params, step, noise_var, rng)?;
        observations.push(s.observation);
        targets.push(s.target);
    }
    Ok(ObservationBatch {
        observations,
        targets,
        noise_var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn params(kmh: f64, p: usize) -> ModelParams {
        ModelParams::standard(kmh, p, 16, 4).unwrap()
    }

    #[test]
    fn doppler_of_zero_doa() {
        let p = ModelParams::new(2e9, 20.57e-6, 27.78, 1, 16, 4).unwrap();
        let s = ChannelScenario::from_angles(&p, vec![0.0], vec![0.0]).unwrap();
        let expect = 27.78 * 2e9 / 299_792_458.0;
        assert!((s.dopplers[0] - expect).abs() < 1e-9);
        assert!((s.dopplers[0] - 185.33).abs() < 0.01);
    }

    #[test]
    fn zero_velocity_zero_doppler() {
        let p = params(0.0, 5);
        let s = sample_scenario(&p, &mut SeedTree::new(3).stream());
        assert!(s.dopplers.iter().all(|&f| f == 0.0));
        let h = generate_block(&s, &p);
        assert!(h.iter().all(|z| (z - h[0]).norm() < 1e-15));
    }

    #[test]
    fn amplitudes_have_equal_power() {
        let p = params(50.0, 3);
        let s = sample_scenario(&p, &mut SeedTree::new(1).stream());
        for a in &s.amplitudes {
            assert!((a.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_path_blocks() {
        let p = params(0.0, 1);
        let s = ChannelScenario::from_angles(&p, vec![0.3], vec![0.0]).unwrap();
        assert!(generate_block(&s, &p).iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let p = params(80.0, 1);
        let s = sample_scenario(&p, &mut SeedTree::new(9).stream());
        assert!(generate_block(&s, &p).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_path_cosine() {
        let p = params(100.0, 2);
        let s = ChannelScenario::from_angles(&p, vec![0.0, PI], vec![0.0, 0.0]).unwrap();
        let f = s.dopplers[0];
        assert!((s.dopplers[1] + f).abs() < 1e-9);
        let h = generate_block(&s, &p);
        for (m, z) in h.iter().enumerate() {
            let arg = 2.0 * PI * f * p.symbol_duration_s * m as f64;
            // term-by-term sum of the two exponentials
            let oracle = Complex64::from_polar(1.0 / 2f64.sqrt(), arg) + Complex64::from_polar(1.0 / 2f64.sqrt(), -arg);
            assert!((z - oracle).norm() < 1e-13);
            assert!((z.re - 2f64.sqrt() * arg.cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn observation_ordering_single_path() {
        let p = params(70.0, 1);
        let s = ChannelScenario::from_angles(&p, vec![1.1], vec![0.4]).unwrap();
        let h = observation_window(&generate_block(&s, &p), p.obs_len);
        let f = s.dopplers[0];
        for (k, z) in h.iter().enumerate() {
            let expect = Complex64::from_polar(1.0, 0.4 + 2.0 * PI * f * p.symbol_duration_s * (p.obs_len - 1 - k) as f64);
            assert!((z - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn vanishing_noise() {
        let h = vec![Complex64::new(0.3, -0.2); 8];
        let y = add_noise(&h, 1e-30, &mut SeedTree::new(0).stream()).unwrap();
        assert!(y.iter().zip(&h).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!(add_noise(&h, 0.0, &mut SeedTree::new(0).stream()).is_err());
        assert!(add_noise(&h, -1.0, &mut SeedTree::new(0).stream()).is_err());
    }

    #[test]
    fn noise_variance_monte_carlo() {
        let n = 1_000_000;
        let y = add_noise(&vec![Complex64::new(0.0, 0.0); n], 0.25, &mut SeedTree::new(5).stream()).unwrap();
        let var = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        let re_var = y.iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.01, "{var}");
        assert!((re_var / 0.125 - 1.0).abs() < 0.01, "{re_var}");
    }

    #[test]
    fn snr_conversion() {
        assert!((noise_var_from_snr_db(10.0) - 0.1).abs() < 1e-15);
        assert!((noise_var_from_snr_db(-10.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn batch_rejects_bad_step() {
        let p = params(10.0, 1);
        let mut rng = SeedTree::new(0).stream();
        assert!(matches!(make_batch(&p, 0, 4, 0.1, &mut rng), Err(Error::InvalidStep { .. })));
        assert!(matches!(make_batch(&p, 5, 4, 0.1, &mut rng), Err(Error::InvalidStep { .. })));
        assert_eq!(make_batch(&p, 4, 50, 0.1, &mut rng).unwrap().len(), 50);
    }

    #[test]
    fn noiseless_single_path_target_is_rotation() {
        let p = params(60.0, 1);
        let mut rng = SeedTree::new(2).stream();
        let s = ChannelSample::draw(&p, 1, 1e-30, &mut rng).unwrap();
        let f = s.scenario.dopplers[0];
        let rot = Complex64::from_polar(1.0, 2.0 * PI * f * p.symbol_duration_s);
        assert!((s.target - s.observation[0] * rot).norm() < 1e-12);
    }

    #[test]
    fn zero_predictor_mse_is_unit_power() {
        let p = params(30.0, 2);
        let batch = make_batch(&p, 4, 20_000, 0.1, &mut SeedTree::new(8).stream()).unwrap();
        let mse = batch.targets.iter().map(|t| t.norm_sqr()).sum::<f64>() / batch.len() as f64;
        // |h|² for P=2 has variance 1/2; standard error ≈ 0.005
        assert!((mse - 1.0).abs() < 0.02, "{mse}");
    }

    #[test]
    fn batch_bytes_round_trip() {
        let p = params(30.0, 2);
        let batch = make_batch(&p, 2, 3, 0.5, &mut SeedTree::new(1).stream()).unwrap();
        let bytes = batch.to_le_bytes();
        assert_eq!(bytes.len(), 24 + 16 * 3 * 17);
        assert_eq!(&bytes[0..8], &3u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &batch.observations[0][0].re.to_le_bytes());
        assert_eq!(ObservationBatch::from_le_bytes(&bytes).unwrap(), batch);
        assert!(ObservationBatch::from_le_bytes(&bytes[..40]).is_err());
    }
}
