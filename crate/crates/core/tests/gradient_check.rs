mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgd_walk_core::net::{forward_loss, init_params, loss_and_grad, per_sample_stats, Batch, MlpSpec};

use common::{reference_loss, rel_err};

fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize) -> Batch {
    let features = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
    Batch::new(features, d, labels).unwrap()
}

fn central_difference(spec: &MlpSpec, theta: &[f64], batch: &Batch) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            let h = 1e-5 * (1.0 + theta[j].abs());
            x[j] = theta[j] + h;
            let lp = forward_loss(spec, &x, batch).unwrap();
            x[j] = theta[j] - h;
            let lm = forward_loss(spec, &x, batch).unwrap();
            x[j] = theta[j];
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for draw in 0..100u64 {
        // 3-4-5-3 has 51 parameters; keep to <= 50 by alternating two shapes.
        let layers = if draw % 2 == 0 { vec![4, 3, 2] } else { vec![3, 5, 3] };
        let spec = MlpSpec::new(layers, draw, 1.5).unwrap();
        assert!(spec.param_count() <= 50);
        let mut theta = init_params(&spec);
        for v in theta.iter_mut() {
            *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        let batch = random_batch(&mut rng, 8, spec.input_dim(), spec.num_classes());
        let (_, g) = loss_and_grad(&spec, &theta, &batch).unwrap();
        let fd = central_difference(&spec, &theta, &batch);
        for (a, b) in g.iter().zip(&fd) {
            worst = worst.max(rel_err(*a, *b, 1e-4));
        }
    }
    assert!(worst < 1e-6, "max relative error {worst:e}");
}

#[test]
fn forward_loss_matches_independent_reference() {
    let spec = MlpSpec::new(vec![4, 3, 2], 7, 1.0).unwrap();
    let theta = init_params(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let batch = random_batch(&mut rng, 8, 4, 2);
    let ours = forward_loss(&spec, &theta, &batch).unwrap();
    let reference = reference_loss(spec.layer_sizes(), &theta, &batch);
    assert!((ours - reference).abs() < 1e-13, "{ours} vs {reference}");

    let wide = MlpSpec::new(vec![6, 9, 7, 4], 3, 2.0).unwrap();
    let theta = init_params(&wide);
    let batch = random_batch(&mut rng, 200, 6, 4);
    let ours = forward_loss(&wide, &theta, &batch).unwrap();
    let reference = reference_loss(wide.layer_sizes(), &theta, &batch);
    assert!((ours - reference).abs() < 1e-12);
}

#[test]
fn loss_is_additive_over_partitions() {
    let spec = MlpSpec::new(vec![5, 6, 3], 1, 1.0).unwrap();
    let theta = init_params(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let full = random_batch(&mut rng, 300, 5, 3);
    let whole = forward_loss(&spec, &theta, &full).unwrap();
    for cuts in [vec![0, 1, 300], vec![0, 64, 128, 250, 300], vec![0, 150, 300]] {
        let mut weighted = 0.0;
        for w in cuts.windows(2) {
            let idx: Vec<usize> = (w[0]..w[1]).collect();
            let part = full.gather(&idx);
            weighted += forward_loss(&spec, &theta, &part).unwrap() * part.len() as f64;
        }
        assert!((weighted / 300.0 - whole).abs() < 1e-12 * 300.0);
    }
}

#[test]
fn zero_scale_gives_log_k_for_any_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in [2usize, 3, 10] {
        let spec = MlpSpec::new(vec![3, 4, k], 0, 0.0).unwrap();
        let batch = random_batch(&mut rng, 17, 3, k);
        let l = forward_loss(&spec, &init_params(&spec), &batch).unwrap();
        assert!((l - (k as f64).ln()).abs() < 1e-14);
    }
}

#[test]
fn large_logits_stay_finite() {
    let spec = MlpSpec::new(vec![2, 3, 2], 0, 1.0).unwrap();
    let theta: Vec<f64> = init_params(&spec).iter().map(|v| v * 1e4).collect();
    let batch = Batch::new(vec![50.0, -40.0, 30.0, 20.0], 2, vec![0, 1]).unwrap();
    let l = forward_loss(&spec, &theta, &batch).unwrap();
    assert!(l.is_finite());
    let stats = per_sample_stats(&spec, &theta, &batch).unwrap();
    assert!(stats.iter().all(|s| s.grad.is_finite()));
}
