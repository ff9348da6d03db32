//! Fully connected ReLU classifier with a softmax / negative-log-likelihood head.
//!
//! All entry points are pure functions of `(spec, theta, batch)`. Parameters
//! are laid out layer by layer: the `n_out x n_in` weight matrix in row-major
//! order followed by the `n_out` biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::params::ParamVector;
use crate::reduce::{map_chunks, pairwise_sum, pairwise_sum_vecs};

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    pub init_seed: u64,
    pub init_scale: f64,
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, init_seed: u64, init_scale: f64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least input and output sizes, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidSpec(format!(
                "layer sizes must be positive: {layer_sizes:?}"
            )));
        }
        if *layer_sizes.last().unwrap() < 2 {
            return Err(Error::InvalidSpec("need at least 2 output classes".into()));
        }
        if !(init_scale >= 0.0 && init_scale.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "init_scale must be finite and non-negative, got {init_scale}"
            )));
        }
        Ok(MlpSpec {
            layer_sizes,
            init_seed,
            init_scale,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `sum_i (layer_sizes[i] + 1) * layer_sizes[i + 1]`
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let l = Layer {
                    n_in: w[0],
                    n_out: w[1],
                    w_off: off,
                    b_off: off + w[0] * w[1],
                };
                off += (w[0] + 1) * w[1];
                l
            })
            .collect()
    }
}

/// A set of labelled samples stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("batch must hold at least one sample".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        check_len("batch features", labels.len() * dim, features.len())?;
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("feature of sample {}", i / dim),
            });
        }
        Ok(Batch {
            features,
            dim,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Copy out the given samples, in the given order.
    pub fn gather(&self, indices: &[usize]) -> Batch {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Batch {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Concatenate batches with equal dimension.
    pub fn concat(parts: &[&Batch]) -> Result<Batch> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            check_len("batch concat dimension", first.dim, p.dim)?;
            features.extend_from_slice(&p.features);
            labels.extend_from_slice(&p.labels);
        }
        Ok(Batch {
            features,
            dim: first.dim,
            labels,
        })
    }
}

/// Per-sample outputs of [`per_sample_stats`].
#[derive(Clone, Debug)]
pub struct SampleStats {
    pub loss: f64,
    pub prob: f64,
    pub grad: ParamVector,
}

pub fn init_params(spec: &MlpSpec) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
    let mut theta = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let bound = spec.init_scale / (layer.n_in as f64).sqrt();
        for w in &mut theta[layer.w_off..layer.b_off] {
            let u: f64 = rng.random();
            *w = (2.0 * u - 1.0) * bound;
        }
    }
    theta.into()
}

struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(spec: &MlpSpec) -> Self {
        Scratch {
            acts: spec.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: spec.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Log-sum-exp pieces of a logit vector: (max, sum of exp(z - max)).
fn softmax_parts(logits: &[f64]) -> (f64, f64) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s = logits.iter().map(|z| (z - m).exp()).sum();
    (m, s)
}

struct Model<'a> {
    layers: Vec<Layer>,
    theta: &'a [f64],
}

impl<'a> Model<'a> {
    fn new(spec: &'a MlpSpec, theta: &'a [f64], batch: &Batch) -> Result<Self> {
        check_len("parameter vector", spec.param_count(), theta.len())?;
        check_len("batch feature dimension", spec.input_dim(), batch.dim)?;
        let k = spec.num_classes();
        if let Some(&bad) = batch.labels.iter().find(|&&y| y >= k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        Ok(Model {
            layers: spec.layers(),
            theta,
        })
    }

    /// Leaves the logits in `scratch.acts.last()`.
    fn forward(&self, x: &[f64], scratch: &mut Scratch, sample: usize) -> Result<()> {
        scratch.acts[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (lo, hi) = scratch.acts.split_at_mut(l + 1);
            let input = &lo[l];
            let out = &mut hi[0];
            let w = &self.theta[layer.w_off..layer.b_off];
            let b = &self.theta[layer.b_off..layer.b_off + layer.n_out];
            for o in 0..layer.n_out {
                let row = &w[o * layer.n_in..(o + 1) * layer.n_in];
                let z = b[o] + row.iter().zip(input.iter()).map(|(a, c)| a * c).sum::<f64>();
                out[o] = if l == last { z } else { z.max(0.0) };
            }
        }
        let logits = scratch.acts.last().unwrap();
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("logits of sample {sample}"),
            });
        }
        Ok(())
    }

    fn sample_loss(&self, x: &[f64], y: usize, scratch: &mut Scratch, sample: usize) -> Result<f64> {
        self.forward(x, scratch, sample)?;
        let logits = scratch.acts.last().unwrap();
        let (m, s) = softmax_parts(logits);
        Ok(m + s.ln() - logits[y])
    }

    /// Forward + backward for one sample, adding its gradient into `grad`.
    /// Returns (loss, probability of the true class).
    fn sample_backward(
        &self,
        x: &[f64],
        y: usize,
        scratch: &mut Scratch,
        grad: &mut [f64],
        sample: usize,
    ) -> Result<(f64, f64)> {
        self.forward(x, scratch, sample)?;
        let n_layers = self.layers.len();
        let (m, s) = softmax_parts(&scratch.acts[n_layers]);
        let logits = &scratch.acts[n_layers];
        let loss = m + s.ln() - logits[y];
        let prob = (logits[y] - m).exp() / s;
        {
            let delta = &mut scratch.deltas[n_layers];
            for (k, d) in delta.iter_mut().enumerate() {
                *d = (logits[k] - m).exp() / s - if k == y { 1.0 } else { 0.0 };
            }
        }
        for l in (0..n_layers).rev() {
            let layer = self.layers[l];
            let (dlo, dhi) = scratch.deltas.split_at_mut(l + 1);
            let delta = &dhi[0];
            let input = &scratch.acts[l];
            for o in 0..layer.n_out {
                let d = delta[o];
                let gw = &mut grad[layer.w_off + o * layer.n_in..layer.w_off + (o + 1) * layer.n_in];
                for (g, a) in gw.iter_mut().zip(input.iter()) {
                    *g += d * a;
                }
                grad[layer.b_off + o] += d;
            }
            if l > 0 {
                let prev = &mut dlo[l];
                let w = &self.theta[layer.w_off..layer.b_off];
                prev.iter_mut().for_each(|p| *p = 0.0);
                for o in 0..layer.n_out {
                    let d = delta[o];
                    let row = &w[o * layer.n_in..(o + 1) * layer.n_in];
                    for (p, wv) in prev.iter_mut().zip(row.iter()) {
                        *p += d * wv;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input.iter()) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
        Ok((loss, prob))
    }
}

/// Mean negative log-likelihood of the true class over the batch.
pub fn forward_loss(spec: &MlpSpec, theta: &[f64], batch: &Batch) -> Result<f64> {
    let model = Model::new(spec, theta, batch)?;
    let partials = map_chunks(batch.len(), |range| -> Result<f64> {
        let mut scratch = Scratch::new(spec);
        let mut acc = 0.0;
        for i in range {
            acc += model.sample_loss(batch.row(i), batch.labels[i], &mut scratch, i)?;
        }
        Ok(acc)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&partials) / batch.len() as f64)
}

/// Loss and its exact gradient (reverse mode).
pub fn loss_and_grad(spec: &MlpSpec, theta: &[f64], batch: &Batch) -> Result<(f64, ParamVector)> {
    let model = Model::new(spec, theta, batch)?;
    let p = spec.param_count();
    let partials = map_chunks(batch.len(), |range| -> Result<(f64, Vec<f64>)> {
        let mut scratch = Scratch::new(spec);
        let mut grad = vec![0.0; p];
        let mut acc = 0.0;
        for i in range {
            let (l, _) = model.sample_backward(batch.row(i), batch.labels[i], &mut scratch, &mut grad, i)?;
            acc += l;
        }
        Ok((acc, grad))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (losses, grads): (Vec<f64>, Vec<Vec<f64>>) = partials.into_iter().unzip();
    let n = batch.len() as f64;
    let loss = pairwise_sum(&losses) / n;
    let mut grad = pairwise_sum_vecs(grads).unwrap_or_else(|| vec![0.0; p]);
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss, grad.into()))
}

/// Per-sample loss, true-class probability and gradient.
pub fn per_sample_stats(spec: &MlpSpec, theta: &[f64], batch: &Batch) -> Result<Vec<SampleStats>> {
    let model = Model::new(spec, theta, batch)?;
    let p = spec.param_count();
    let chunks = map_chunks(batch.len(), |range| -> Result<Vec<SampleStats>> {
        let mut scratch = Scratch::new(spec);
        range
            .map(|i| {
                let mut grad = vec![0.0; p];
                let (loss, prob) =
                    model.sample_backward(batch.row(i), batch.labels[i], &mut scratch, &mut grad, i)?;
                Ok(SampleStats {
                    loss,
                    prob,
                    grad: grad.into(),
                })
            })
            .collect()
    });
    let mut out = Vec::with_capacity(batch.len());
    for c in chunks {
        out.extend(c?);
    }
    #[cfg(debug_assertions)]
    {
        let mean = mean_gradient(&out, p);
        let (_, g) = loss_and_grad(spec, theta, batch)?;
        let tol = 1e-12 * batch.len() as f64;
        debug_assert!(
            mean.iter().zip(g.iter()).all(|(a, b)| (a - b).abs() <= tol),
            "per-sample mean gradient disagrees with loss_and_grad"
        );
    }
    Ok(out)
}

/// Mean of per-sample gradients under the fixed reduction order.
pub fn mean_gradient(stats: &[SampleStats], p: usize) -> ParamVector {
    let partials: Vec<Vec<f64>> = stats
        .chunks(crate::reduce::CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; p];
            for s in chunk {
                for (a, g) in acc.iter_mut().zip(s.grad.iter()) {
                    *a += g;
                }
            }
            acc
        })
        .collect();
    let n = stats.len().max(1) as f64;
    let mut sum = pairwise_sum_vecs(partials).unwrap_or_else(|| vec![0.0; p]);
    sum.iter_mut().for_each(|v| *v /= n);
    sum.into()
}

/// Fraction of samples whose argmax logit (lowest index on ties) equals the label.
pub fn accuracy(spec: &MlpSpec, theta: &[f64], batch: &Batch) -> Result<f64> {
    let model = Model::new(spec, theta, batch)?;
    let counts = map_chunks(batch.len(), |range| -> Result<usize> {
        let mut scratch = Scratch::new(spec);
        let mut correct = 0;
        for i in range {
            model.forward(batch.row(i), &mut scratch, i)?;
            let logits = scratch.acts.last().unwrap();
            let mut best = 0;
            for (k, &z) in logits.iter().enumerate() {
                if z > logits[best] {
                    best = k;
                }
            }
            if best == batch.labels[i] {
                correct += 1;
            }
        }
        Ok(correct)
    });
    let mut correct = 0;
    for c in counts {
        correct += c?;
    }
    Ok(correct as f64 / batch.len() as f64)
}

/// Softmax probability of the true class for every sample.
pub fn sample_probabilities(spec: &MlpSpec, theta: &[f64], batch: &Batch) -> Result<Vec<f64>> {
    let model = Model::new(spec, theta, batch)?;
    let mut scratch = Scratch::new(spec);
    (0..batch.len())
        .map(|i| {
            model.forward(batch.row(i), &mut scratch, i)?;
            let logits = scratch.acts.last().unwrap();
            let (m, s) = softmax_parts(logits);
            Ok((logits[batch.labels[i]] - m).exp() / s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_423() -> MlpSpec {
        MlpSpec::new(vec![4, 3, 2], 7, 1.0).unwrap()
    }

    fn batch_8() -> Batch {
        let features: Vec<f64> = (0..32).map(|i| ((i as f64) * 0.731).sin()).collect();
        let labels = (0..8).map(|i| i % 2).collect();
        Batch::new(features, 4, labels).unwrap()
    }

    #[test]
    fn param_count_formula() {
        assert_eq!(spec_423().param_count(), 23);
        assert_eq!(init_params(&spec_423()).len(), 23);
        assert_eq!(MlpSpec::new(vec![784, 100, 10], 0, 1.0).unwrap().param_count(), 79_510);
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(vec![4], 0, 1.0).is_err());
        assert!(MlpSpec::new(vec![4, 1], 0, 1.0).is_err());
        assert!(MlpSpec::new(vec![4, 0, 2], 0, 1.0).is_err());
        assert!(MlpSpec::new(vec![4, 2], 0, -1.0).is_err());
    }

    #[test]
    fn zero_scale_init_is_zero_and_init_is_deterministic() {
        let spec = MlpSpec::new(vec![4, 3, 2], 7, 0.0).unwrap();
        assert!(init_params(&spec).iter().all(|&v| v == 0.0));
        assert_eq!(init_params(&spec_423()), init_params(&spec_423()));
        let other = MlpSpec::new(vec![4, 3, 2], 8, 1.0).unwrap();
        assert_ne!(init_params(&spec_423()), init_params(&other));
    }

    #[test]
    fn init_weights_respect_fan_in_bound_and_biases_are_zero() {
        let spec = MlpSpec::new(vec![16, 8, 3], 1, 2.0).unwrap();
        let theta = init_params(&spec);
        for layer in spec.layers() {
            let bound = 2.0 / (layer.n_in as f64).sqrt();
            assert!(theta[layer.w_off..layer.b_off].iter().all(|w| w.abs() <= bound));
            assert!(theta[layer.b_off..layer.b_off + layer.n_out].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn uniform_softmax_at_zero() {
        let spec = MlpSpec::new(vec![4, 3, 2], 0, 0.0).unwrap();
        let theta = init_params(&spec);
        let loss = forward_loss(&spec, &theta, &batch_8()).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        let spec10 = MlpSpec::new(vec![4, 5, 10], 0, 0.0).unwrap();
        let loss10 = forward_loss(&spec10, &init_params(&spec10), &batch_8()).unwrap();
        assert!((loss10 - 10f64.ln()).abs() < 1e-14);
        let stats = per_sample_stats(&spec, &theta, &batch_8()).unwrap();
        assert!(stats.iter().all(|s| s.prob == 0.5));
    }

    #[test]
    fn dimension_errors() {
        let spec = spec_423();
        let theta = init_params(&spec);
        assert!(matches!(
            forward_loss(&spec, &theta[..22], &batch_8()),
            Err(Error::DimensionMismatch { .. })
        ));
        let wrong_dim = Batch::new(vec![0.0; 6], 3, vec![0, 1]).unwrap();
        assert!(forward_loss(&spec, &theta, &wrong_dim).is_err());
        let bad_label = Batch::new(vec![0.0; 4], 4, vec![2]).unwrap();
        assert!(forward_loss(&spec, &theta, &bad_label).is_err());
    }

    #[test]
    fn batch_rejects_bad_input() {
        assert!(Batch::new(vec![], 2, vec![]).is_err());
        assert!(Batch::new(vec![0.0; 3], 2, vec![0, 1]).is_err());
        assert!(Batch::new(vec![f64::NAN, 0.0], 2, vec![0]).is_err());
    }

    #[test]
    fn non_finite_logits_are_reported() {
        let spec = spec_423();
        let mut theta = init_params(&spec);
        theta[0] = f64::INFINITY;
        let err = forward_loss(&spec, &theta, &batch_8()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn loss_and_grad_loss_is_bit_identical_to_forward_loss() {
        let spec = spec_423();
        let theta = init_params(&spec);
        let big = Batch::new(
            (0..4 * 300).map(|i| ((i as f64) * 0.1).cos()).collect(),
            4,
            (0..300).map(|i| i % 2).collect(),
        )
        .unwrap();
        let l = forward_loss(&spec, &theta, &big).unwrap();
        let (l2, _) = loss_and_grad(&spec, &theta, &big).unwrap();
        assert_eq!(l.to_bits(), l2.to_bits());
    }

    #[test]
    fn duplicated_batch_leaves_gradient_unchanged() {
        let spec = spec_423();
        let theta = init_params(&spec);
        let b = batch_8();
        let doubled = Batch::concat(&[&b, &b]).unwrap();
        let (_, g1) = loss_and_grad(&spec, &theta, &b).unwrap();
        let (_, g2) = loss_and_grad(&spec, &theta, &doubled).unwrap();
        for (a, c) in g1.iter().zip(g2.iter()) {
            assert!((a - c).abs() < 1e-15, "{a} vs {c}");
        }
    }

    #[test]
    fn symmetric_batch_has_zero_output_bias_gradient_at_zero() {
        let spec = MlpSpec::new(vec![2, 3, 2], 0, 0.0).unwrap();
        let theta = init_params(&spec);
        let b = Batch::new(vec![1.0, 2.0, 1.0, 2.0], 2, vec![0, 1]).unwrap();
        let (_, g) = loss_and_grad(&spec, &theta, &b).unwrap();
        let last = *spec.layers().last().unwrap();
        assert!(g[last.b_off..last.b_off + 2].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn per_sample_mean_matches_batch_gradient() {
        let spec = spec_423();
        let theta = init_params(&spec);
        let b = batch_8();
        let stats = per_sample_stats(&spec, &theta, &b).unwrap();
        let mean = mean_gradient(&stats, spec.param_count());
        let (_, g) = loss_and_grad(&spec, &theta, &b).unwrap();
        for (a, c) in mean.iter().zip(g.iter()) {
            assert!((a - c).abs() < 1e-12 * 8.0);
        }
        for s in &stats {
            assert!((s.loss + s.prob.ln()).abs() < 1e-12);
            assert!(s.prob > 0.0 && s.prob <= 1.0);
        }
    }

    #[test]
    fn single_sample_gradient_is_exact() {
        let spec = spec_423();
        let theta = init_params(&spec);
        let one = batch_8().gather(&[3]);
        let stats = per_sample_stats(&spec, &theta, &one).unwrap();
        let (_, g) = loss_and_grad(&spec, &theta, &one).unwrap();
        assert_eq!(stats[0].grad, g);
    }

    #[test]
    fn accuracy_ties_go_to_class_zero() {
        let spec = MlpSpec::new(vec![4, 3, 3], 0, 0.0).unwrap();
        let theta = init_params(&spec);
        let b = Batch::new(vec![0.5; 16], 4, vec![0, 1, 0, 2]).unwrap();
        assert_eq!(accuracy(&spec, &theta, &b).unwrap(), 0.5);
        let none = Batch::new(vec![0.5; 8], 4, vec![1, 2]).unwrap();
        assert_eq!(accuracy(&spec, &theta, &none).unwrap(), 0.0);
    }

    #[test]
    fn probabilities_agree_with_per_sample_stats() {
        let spec = spec_423();
        let theta = init_params(&spec);
        let b = batch_8();
        let p = sample_probabilities(&spec, &theta, &b).unwrap();
        let stats = per_sample_stats(&spec, &theta, &b).unwrap();
        for (a, s) in p.iter().zip(&stats) {
            assert_eq!(*a, s.prob);
        }
    }
}
