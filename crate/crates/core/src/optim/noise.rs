//! Isotropic Gaussian gradient noise with a variance frozen at initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{per_sample_stats, MlpSpec};
use crate::params::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseMode {
    None,
    /// Variance = `factor` times the largest per-coordinate gradient variance at init.
    Isotropic { factor: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    pub mode: NoiseMode,
    pub noise_seed: u64,
    pub sigma2: Option<f64>,
}

impl NoiseConfig {
    pub fn none() -> Self {
        NoiseConfig {
            mode: NoiseMode::None,
            noise_seed: 0,
            sigma2: None,
        }
    }

    pub fn isotropic(factor: f64, noise_seed: u64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise factor must be positive, got {factor}"
            )));
        }
        Ok(NoiseConfig {
            mode: NoiseMode::Isotropic { factor },
            noise_seed,
            sigma2: None,
        })
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self.mode, NoiseMode::Isotropic { .. })
    }
}

/// Largest per-coordinate variance of the per-sample gradients, `(1/N) sum (g_ij - mean_j)^2`.
/// Single pass (Welford) over samples in storage order.
pub fn max_gradient_variance(spec: &MlpSpec, theta: &[f64], dataset: &Dataset) -> Result<f64> {
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument(
            "gradient variance needs at least 2 samples".into(),
        ));
    }
    let stats = per_sample_stats(spec, theta, dataset.as_batch())?;
    let p = spec.param_count();
    let mut mean = vec![0.0; p];
    let mut m2 = vec![0.0; p];
    for (k, s) in stats.iter().enumerate() {
        let n = (k + 1) as f64;
        for j in 0..p {
            let x = s.grad[j];
            let d = x - mean[j];
            mean[j] += d / n;
            m2[j] += d * (x - mean[j]);
        }
    }
    let n = stats.len() as f64;
    Ok(m2.iter().map(|v| v / n).fold(0.0, f64::max))
}

pub fn freeze_noise_scale(
    spec: &MlpSpec,
    theta0: &[f64],
    dataset: &Dataset,
    noise: &NoiseConfig,
) -> Result<NoiseConfig> {
    let NoiseMode::Isotropic { factor } = noise.mode else {
        return Err(Error::InvalidArgument(
            "noise scale can only be frozen for isotropic noise".into(),
        ));
    };
    let vmax = max_gradient_variance(spec, theta0, dataset)?;
    Ok(NoiseConfig {
        sigma2: Some(factor * vmax),
        ..*noise
    })
}

/// `g = mean_grad + eps`, `eps ~ N(0, sigma2 I)` drawn from a stream keyed by `(noise_seed, t)`.
pub fn isotropic_grad(mean_grad: &[f64], noise: &NoiseConfig, t: u64) -> Result<ParamVector> {
    let sigma2 = noise.sigma2.ok_or(Error::NoiseNotFrozen)?;
    let sigma = sigma2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.noise_seed);
    rng.set_stream(t);
    Ok(mean_grad
        .iter()
        .map(|g| {
            let z: f64 = rng.sample(StandardNormal);
            g + sigma * z
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, Batch};

    #[test]
    fn zero_variance_leaves_gradient_untouched() {
        let noise = NoiseConfig { sigma2: Some(0.0), ..NoiseConfig::isotropic(1.0, 3).unwrap() };
        let g = vec![1.0, -2.0, 3.5];
        assert_eq!(isotropic_grad(&g, &noise, 7).unwrap().as_slice(), &g[..]);
    }

    #[test]
    fn unfrozen_noise_is_an_error() {
        let noise = NoiseConfig::isotropic(0.1, 3).unwrap();
        assert!(matches!(isotropic_grad(&[0.0], &noise, 0), Err(Error::NoiseNotFrozen)));
        assert!(NoiseConfig::isotropic(0.0, 1).is_err());
    }

    #[test]
    fn noise_is_keyed_by_seed_and_iteration() {
        let noise = NoiseConfig { sigma2: Some(1.0), ..NoiseConfig::isotropic(1.0, 3).unwrap() };
        let g = vec![0.0; 8];
        let a = isotropic_grad(&g, &noise, 4).unwrap();
        assert_eq!(a, isotropic_grad(&g, &noise, 4).unwrap());
        assert_ne!(a, isotropic_grad(&g, &noise, 5).unwrap());
        let other = NoiseConfig { noise_seed: 4, ..noise };
        assert_ne!(a, isotropic_grad(&g, &other, 4).unwrap());
    }

    #[test]
    fn empirical_variance_matches_sigma2() {
        // 10^5 draws: standard error of the variance estimate is sqrt(2/1e5) ~ 0.45%.
        let sigma2 = 0.37;
        let noise = NoiseConfig { sigma2: Some(sigma2), ..NoiseConfig::isotropic(1.0, 11).unwrap() };
        let g = vec![0.0; 1000];
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0.0;
        for t in 0..100 {
            for e in isotropic_grad(&g, &noise, t).unwrap().iter() {
                sum += e;
                sum_sq += e * e;
                count += 1.0;
            }
        }
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!(((var - sigma2) / sigma2).abs() < 0.03, "var {var}");
    }

    #[test]
    fn identical_samples_have_zero_variance() {
        let spec = MlpSpec::new(vec![4, 3, 2], 7, 1.0).unwrap();
        let theta = init_params(&spec);
        let batch = Batch::new([0.3, -0.1, 0.8, 0.5].repeat(6), 4, vec![1; 6]).unwrap();
        let ds = Dataset::new(batch, 2).unwrap();
        let frozen = freeze_noise_scale(&spec, &theta, &ds, &NoiseConfig::isotropic(0.1, 0).unwrap()).unwrap();
        assert!(frozen.sigma2.unwrap().abs() < 1e-30);
        let single = ds.head(1);
        assert!(freeze_noise_scale(&spec, &theta, &single, &NoiseConfig::isotropic(0.1, 0).unwrap()).is_err());
        assert!(freeze_noise_scale(&spec, &theta, &ds, &NoiseConfig::none()).is_err());
    }
}
