#![allow(dead_code)]

use sgd_walk_core::data::{synth_blobs, Dataset};
use sgd_walk_core::net::{init_params, Batch, MlpSpec};
use sgd_walk_core::ParamVector;

/// The 23-parameter [4, 3, 2] model used across the curvature fixtures.
pub fn spec23(seed: u64) -> MlpSpec {
    MlpSpec::new(vec![4, 3, 2], seed, 1.5).unwrap()
}

pub fn fixture16() -> Dataset {
    synth_blobs(21, 8, 2, 4, 1.5).unwrap()
}

pub fn theta23(seed: u64) -> ParamVector {
    let mut theta = init_params(&spec23(seed));
    // Non-zero biases so the fixture is not a special point.
    let n = theta.len();
    for (j, v) in theta.iter_mut().enumerate() {
        *v += 0.05 * ((j as f64) * 1.37 + seed as f64).sin();
    }
    assert_eq!(n, 23);
    theta
}

/// Independent straight-line forward pass: explicit loops, probabilities by
/// direct normalization, no shared code with the library.
pub fn reference_loss(layer_sizes: &[usize], theta: &[f64], batch: &Batch) -> f64 {
    let mut total = 0.0;
    for i in 0..batch.len() {
        let mut a: Vec<f64> = batch.row(i).to_vec();
        let mut off = 0;
        let n_layers = layer_sizes.len() - 1;
        for l in 0..n_layers {
            let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let mut z = vec![0.0; n_out];
            for o in 0..n_out {
                let mut s = theta[off + n_in * n_out + o];
                for k in 0..n_in {
                    s += theta[off + o * n_in + k] * a[k];
                }
                z[o] = if l + 1 < n_layers { s.max(0.0) } else { s };
            }
            off += (n_in + 1) * n_out;
            a = z;
        }
        let denom: f64 = a.iter().map(|z| z.exp()).sum();
        let p = a[batch.labels()[i]].exp() / denom;
        total += -p.ln();
    }
    total / batch.len() as f64
}

/// Relative error with an absolute floor on the denominator.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
