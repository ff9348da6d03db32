use std::path::PathBuf;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::noise::{freeze_noise_scale, isotropic_grad, NoiseConfig, NoiseMode};
use super::schedule::LrSchedule;
use super::trajectory::{LogBuilder, RunMeta, StepSummary, TrajectoryLog};
use crate::data::{epoch_batches, Dataset, SamplerConfig};
use crate::error::{check_len, Error, Result};
use crate::metrics::cosine;
use crate::net::{accuracy, forward_loss, init_params, loss_and_grad, Batch, MlpSpec};
use crate::params::ParamVector;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub spec: MlpSpec,
    pub sampler: SamplerConfig,
    pub schedule: Arc<dyn LrSchedule>,
    pub noise: NoiseConfig,
    pub epochs: u64,
    /// Stop after this many updates even if epochs remain.
    pub max_iterations: Option<u64>,
    pub record_full_gradient_cosine: bool,
    pub eval_period_epochs: u64,
    /// Spill the log to this file once more than `cap` records are held.
    pub spill: Option<(PathBuf, usize)>,
}

impl TrainConfig {
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.eval_period_epochs == 0 {
            return Err(Error::InvalidArgument("eval period must be at least 1 epoch".into()));
        }
        check_len("dataset dimension vs model input", self.spec.input_dim(), dataset.dim())?;
        if dataset.num_classes() > self.spec.num_classes() {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} classes but the model outputs {}",
                dataset.num_classes(),
                self.spec.num_classes()
            )));
        }
        if self.sampler.batch_size == 0 || self.sampler.batch_size > dataset.len() {
            return Err(Error::InvalidArgument(format!(
                "batch size {} must be in 1..={}",
                self.sampler.batch_size,
                dataset.len()
            )));
        }
        Ok(())
    }

    /// Canonical text form; the digest is its SHA-256.
    pub fn canonical(&self) -> String {
        let noise = match self.noise.mode {
            NoiseMode::None => "none".to_string(),
            NoiseMode::Isotropic { factor } => format!("iso:{factor}"),
        };
        format!(
            "layers={:?};init_seed={};init_scale={};batch={};shuffle_seed={};drop_last={};\
             schedule={};noise={};noise_seed={};epochs={};max_iterations={:?};full_cos={};eval_period={}",
            self.spec.layer_sizes(),
            self.spec.init_seed,
            self.spec.init_scale,
            self.sampler.batch_size,
            self.sampler.shuffle_seed,
            self.sampler.drop_last,
            self.schedule.describe(),
            noise,
            self.noise.noise_seed,
            self.epochs,
            self.max_iterations,
            self.record_full_gradient_cosine,
            self.eval_period_epochs,
        )
    }

    pub fn digest(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out.copy_from_slice(&Sha256::digest(self.canonical().as_bytes()));
        out
    }
}

/// `theta - lr * g`, elementwise.
pub fn gd_step(theta: &[f64], grad: &[f64], lr: f64) -> Result<ParamVector> {
    check_len("gd_step", theta.len(), grad.len())?;
    Ok(theta.iter().zip(grad).map(|(t, g)| t - lr * g).collect())
}

/// Where an iteration's update direction comes from.
trait GradientSource {
    /// Returns (loss at `theta` on the batch, direction `g_t`).
    fn gradient(&self, t: u64, theta: &[f64], batch: &Batch) -> Result<(f64, ParamVector)>;
}

struct MiniBatch<'a> {
    spec: &'a MlpSpec,
}

impl GradientSource for MiniBatch<'_> {
    fn gradient(&self, _t: u64, theta: &[f64], batch: &Batch) -> Result<(f64, ParamVector)> {
        loss_and_grad(self.spec, theta, batch)
    }
}

struct IsotropicFullBatch<'a> {
    spec: &'a MlpSpec,
    noise: NoiseConfig,
}

impl GradientSource for IsotropicFullBatch<'_> {
    fn gradient(&self, t: u64, theta: &[f64], batch: &Batch) -> Result<(f64, ParamVector)> {
        let (loss, g) = loss_and_grad(self.spec, theta, batch)?;
        Ok((loss, isotropic_grad(&g, &self.noise, t)?))
    }
}

fn diverged(t: u64, reason: impl Into<String>) -> Error {
    Error::Diverged {
        iteration: t,
        last_good: t.checked_sub(1),
        reason: reason.into(),
    }
}

/// Run GD/SGD from `init_params(spec)` and record every step.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrajectoryLog> {
    config.validate(dataset)?;
    let spec = &config.spec;
    let theta0 = init_params(spec);
    let n = dataset.len();

    let isotropic = config.noise.is_isotropic();
    let noise = if isotropic && config.noise.sigma2.is_none() {
        freeze_noise_scale(spec, &theta0, dataset, &config.noise)?
    } else {
        config.noise
    };
    let sampler = if isotropic {
        SamplerConfig::full_batch(n)
    } else {
        config.sampler
    };
    let full_batch = sampler.batch_size == n;
    let per_epoch = sampler.batches_per_epoch(n) as u64;

    let source: Box<dyn GradientSource + '_> = if isotropic {
        Box::new(IsotropicFullBatch { spec, noise })
    } else {
        Box::new(MiniBatch { spec })
    };

    let meta = RunMeta {
        config_digest: config.digest(),
        init_seed: spec.init_seed,
        shuffle_seed: config.sampler.shuffle_seed,
        noise_seed: noise.noise_seed,
        noise_sigma2: noise.sigma2,
        iterations_per_epoch: per_epoch,
    };
    let mut log = LogBuilder::new(meta, theta0.clone(), config.spill.clone());
    let cap = config.max_iterations.unwrap_or(u64::MAX);
    let full = dataset.as_batch();

    let mut theta = theta0;
    let mut t: u64 = 0;
    let mut prev_full_grad: Option<ParamVector> = None;
    'epochs: for epoch in 0..config.epochs {
        if t >= cap {
            break;
        }
        let owned;
        let batches: Vec<&Batch> = if full_batch {
            vec![full]
        } else {
            owned = epoch_batches(dataset, &sampler, epoch)?;
            owned.iter().collect()
        };
        let eval_epoch = epoch % config.eval_period_epochs == 0;
        for (b, batch) in batches.into_iter().enumerate() {
            if t >= cap {
                break 'epochs;
            }
            let (loss, g) = source.gradient(t, &theta, batch).map_err(|e| match e {
                Error::NonFinite { context } => diverged(t, context),
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(diverged(t, format!("minibatch loss {loss}")));
            }
            if !g.is_finite() {
                return Err(diverged(t, "non-finite gradient"));
            }
            let (full_loss, acc) = if eval_epoch && b == 0 {
                let fl = if full_batch && !isotropic {
                    loss
                } else {
                    forward_loss(spec, &theta, full).map_err(|_| diverged(t, "full-dataset loss"))?
                };
                (Some(fl), Some(accuracy(spec, &theta, full)?))
            } else {
                (None, None)
            };
            let full_grad_cosine = if config.record_full_gradient_cosine {
                let fg = if full_batch && !isotropic {
                    g.clone()
                } else {
                    loss_and_grad(spec, &theta, full)?.1
                };
                let c = prev_full_grad.as_ref().and_then(|p| cosine(p, &fg).ok().flatten());
                prev_full_grad = Some(fg);
                c
            } else {
                None
            };
            let lr = config.schedule.lr_at(t);
            let next = gd_step(&theta, &g, lr)?;
            if !next.is_finite() {
                return Err(diverged(t, "parameters became non-finite"));
            }
            log.push(
                StepSummary {
                    t,
                    epoch,
                    lr,
                    minibatch_loss: loss,
                    full_loss,
                    accuracy: acc,
                    full_grad_cosine,
                },
                theta,
                g,
            )?;
            theta = next;
            t += 1;
        }
    }
    let final_loss = forward_loss(spec, &theta, full).map_err(|_| diverged(t, "final loss"))?;
    if !final_loss.is_finite() {
        return Err(diverged(t, format!("final loss {final_loss}")));
    }
    let final_acc = accuracy(spec, &theta, full)?;
    log.finish(theta, Some((final_loss, final_acc)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::optim::schedule::Constant;

    #[test]
    fn gd_step_arithmetic() {
        let next = gd_step(&[1.0, 2.0], &[0.5, -1.0], 0.1).unwrap();
        assert_eq!(next.as_slice(), &[0.95, 2.1]);
        assert_eq!(gd_step(&[1.0, 2.0], &[0.0, 0.0], 0.3).unwrap().as_slice(), &[1.0, 2.0]);
        assert_eq!(gd_step(&[1.0, 2.0], &[5.0, 7.0], 0.0).unwrap().as_slice(), &[1.0, 2.0]);
        assert!(gd_step(&[1.0], &[1.0, 2.0], 0.1).is_err());
    }

    fn config(ds: &Dataset, batch: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            spec: MlpSpec::new(vec![ds.dim(), 8, ds.num_classes()], 3, 1.0).unwrap(),
            sampler: SamplerConfig { batch_size: batch, shuffle_seed: 1, drop_last: false },
            schedule: Arc::new(Constant { lr }),
            noise: NoiseConfig::none(),
            epochs: 2,
            max_iterations: None,
            record_full_gradient_cosine: false,
            eval_period_epochs: 1,
            spill: None,
        }
    }

    #[test]
    fn digest_tracks_config() {
        let ds = synth_blobs(0, 10, 2, 3, 2.0).unwrap();
        let a = config(&ds, 5, 0.1);
        let b = config(&ds, 5, 0.2);
        assert_eq!(a.digest(), config(&ds, 5, 0.1).digest());
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn divergence_is_reported_with_last_good_iteration() {
        let ds = synth_blobs(0, 20, 2, 3, 3.0).unwrap();
        let mut cfg = config(&ds, ds.len(), 1e200);
        cfg.epochs = 10;
        match train(&cfg, &ds) {
            Err(Error::Diverged { iteration, last_good, .. }) => {
                assert!(iteration >= 1);
                assert_eq!(last_good, Some(iteration - 1));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ds = synth_blobs(0, 10, 2, 3, 2.0).unwrap();
        let mut cfg = config(&ds, 5, 0.1);
        cfg.epochs = 0;
        assert!(train(&cfg, &ds).is_err());
        let cfg = config(&ds, 21, 0.1);
        assert!(train(&cfg, &ds).is_err());
    }
}
