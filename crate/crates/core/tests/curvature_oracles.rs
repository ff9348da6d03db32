mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use sgd_walk_core::curvature::{
    full_hessian_bruteforce, gauss_newton_residual, gradient_covariance, hvp, spectral_norm,
    spectral_norm_seeded,
};
use sgd_walk_core::data::Dataset;
use sgd_walk_core::net::{per_sample_stats, Batch};
use sgd_walk_core::objective::{MlpObjective, Objective, QuadraticForm};

use common::{fixture16, spec23, theta23};

fn max_abs_eig(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

fn basis(p: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; p];
    e[j] = 1.0;
    e
}

#[test]
fn hvp_columns_match_bruteforce_hessian() {
    let spec = spec23(7);
    let data = fixture16();
    let obj = MlpObjective::new(&spec, data.as_batch());
    let theta = theta23(7);
    let h = full_hessian_bruteforce(&obj, &theta).unwrap();
    let p = theta.len();
    let mut cols = DMatrix::zeros(p, p);
    for j in 0..p {
        let hv = hvp(&obj, &theta, &basis(p, j)).unwrap();
        cols.set_column(j, &nalgebra::DVector::from_column_slice(&hv));
    }
    let rel = (&cols - &h).abs().max() / h.abs().max();
    assert!(rel < 1e-4, "hvp vs brute force: {rel:e}");
    // Asymmetry of the gradient-difference Hessian gates the tolerance budget.
    let asym = (&cols - cols.transpose()).abs().max();
    assert!(asym < 1e-5, "asymmetry {asym:e}");
}

#[test]
fn hvp_is_linear() {
    let spec = spec23(3);
    let data = fixture16();
    let obj = MlpObjective::new(&spec, data.as_batch());
    let theta = theta23(3);
    let v: Vec<f64> = (0..23).map(|j| ((j * 7 % 5) as f64) - 2.0).collect();
    let w: Vec<f64> = (0..23).map(|j| (j as f64 * 0.3).cos()).collect();
    let hv = hvp(&obj, &theta, &v).unwrap();
    let hw = hvp(&obj, &theta, &w).unwrap();
    let scaled: Vec<f64> = v.iter().map(|x| -3.5 * x).collect();
    let h_scaled = hvp(&obj, &theta, &scaled).unwrap();
    let sum: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
    let h_sum = hvp(&obj, &theta, &sum).unwrap();
    let scale = hv.norm().max(hw.norm());
    for j in 0..23 {
        assert!((h_scaled[j] + 3.5 * hv[j]).abs() <= 1e-8 * 3.5 * scale);
        assert!((h_sum[j] - hv[j] - hw[j]).abs() <= 1e-6 * scale);
    }
}

#[test]
fn dead_unit_has_empty_hessian_rows() {
    let spec = spec23(5);
    let data = fixture16();
    let obj = MlpObjective::new(&spec, data.as_batch());
    let mut theta = theta23(5);
    // Hidden unit 0: incoming weights 0..4, bias at 12; outgoing weights at 15 and 18.
    theta[12] = -100.0;
    let h = full_hessian_bruteforce(&obj, &theta).unwrap();
    for dead in [0, 1, 2, 3, 12, 15, 18] {
        let row_max = h.row(dead).abs().max();
        assert!(row_max < 1e-6, "row {dead}: {row_max:e}");
    }
    assert!(h.abs().max() > 1e-3);
}

#[test]
fn spectral_norm_matches_dense_eigensolve() {
    // Two MLP fixtures plus a rotated indefinite quadratic whose extreme eigenvalue is negative.
    let data = fixture16();
    for seed in [7u64, 11] {
        let spec = spec23(seed);
        let obj = MlpObjective::new(&spec, data.as_batch());
        let theta = theta23(seed);
        let dense = max_abs_eig(&full_hessian_bruteforce(&obj, &theta).unwrap());
        let est = spectral_norm(&obj, &theta, 500, 1e-7).unwrap();
        let rel = (est.value - dense).abs() / dense;
        assert!(rel < 1e-3, "seed {seed}: {} vs {dense} ({rel:e})", est.value);
    }
    let q = rotated_indefinite();
    let theta = vec![0.2; 6];
    let dense = max_abs_eig(&full_hessian_bruteforce(&q, &theta).unwrap());
    let est = spectral_norm(&q, &theta, 500, 1e-7).unwrap();
    assert!((dense - 6.0).abs() < 1e-5);
    assert!((est.value - dense).abs() / dense < 1e-3);
}

fn rotated_indefinite() -> QuadraticForm {
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 2.5, 1.0, 0.3, -1.5, -6.0]));
    let m = DMatrix::from_fn(6, 6, |i, j| ((i * 6 + j) as f64 * 0.77).sin());
    let q = m.qr().q();
    QuadraticForm::new(&q * diag * q.transpose())
}

#[test]
fn spectral_norm_is_start_seed_invariant() {
    let spec = spec23(7);
    let data = fixture16();
    let obj = MlpObjective::new(&spec, data.as_batch());
    let theta = theta23(7);
    let tol = 1e-6;
    let a = spectral_norm_seeded(&obj, &theta, 500, tol, 1).unwrap();
    let b = spectral_norm_seeded(&obj, &theta, 500, tol, 2).unwrap();
    assert!((a.value - b.value).abs() <= 2.0 * tol * a.value);
    assert!(a.converged && b.converged);
    assert!(a.residual <= tol * a.value);
}

#[test]
fn covariance_identities() {
    let spec = spec23(7);
    let data = fixture16();
    let theta = theta23(7);
    let cov = gradient_covariance(&spec, &data, &theta).unwrap();
    let c = &cov.matrix;
    assert!((c - c.transpose()).abs().max() <= 1e-10 * c.abs().max());

    let stats = per_sample_stats(&spec, &theta, data.as_batch()).unwrap();
    let n = stats.len() as f64;
    let mean_sq = stats.iter().map(|s| s.grad.norm().powi(2)).sum::<f64>() / n;
    let trace_expected = mean_sq - cov.mean_grad.norm().powi(2);
    assert!((c.trace() - trace_expected).abs() <= 1e-10 * trace_expected.abs());

    // Uncentered second moment computed directly.
    let mut second = DMatrix::zeros(23, 23);
    for s in &stats {
        let g = nalgebra::DVector::from_column_slice(&s.grad);
        second += &g * g.transpose();
    }
    second /= n;
    let g = nalgebra::DVector::from_column_slice(&cov.mean_grad);
    let recon = c + &g * g.transpose();
    assert!((&recon - &second).abs().max() <= 1e-10 * second.abs().max());

    let eig = SymmetricEigen::new(c.clone()).eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-10 * c.trace(), "min eigenvalue {min:e}");
}

#[test]
fn covariance_of_repeated_sample_is_zero() {
    let spec = spec23(7);
    let theta = theta23(7);
    let batch = Batch::new([0.4, -1.0, 0.3, 2.0].repeat(5), 4, vec![1; 5]).unwrap();
    let ds = Dataset::new(batch, 2).unwrap();
    let cov = gradient_covariance(&spec, &ds, &theta).unwrap();
    assert!(cov.matrix.abs().max() < 1e-28);
    assert!(gradient_covariance(&spec, &ds.head(1), &theta).is_err());
}

#[test]
fn gauss_newton_identity_holds() {
    let spec = spec23(7);
    let data = fixture16();
    let theta = theta23(7);
    let gap = gauss_newton_residual(&spec, &data, &theta).unwrap();
    assert!(gap.relative_gap < 1e-3, "{gap:?}");

    let single = data.head(1);
    let gap1 = gauss_newton_residual(&spec, &single, &theta).unwrap();
    assert!(gap1.relative_gap < 1e-3, "{gap1:?}");

    let doubled_batch = Batch::concat(&[data.as_batch(), data.as_batch()]).unwrap();
    let doubled = Dataset::new(doubled_batch, 2).unwrap();
    let gap2 = gauss_newton_residual(&spec, &doubled, &theta).unwrap();
    assert!((gap2.relative_gap - gap.relative_gap).abs() < 1e-6, "{gap:?} vs {gap2:?}");
}

#[test]
fn saturated_probability_is_rejected() {
    let spec = spec23(7);
    let data = fixture16();
    let theta: Vec<f64> = theta23(7).iter().map(|v| v * 1e3).collect();
    let obj = MlpObjective::new(&spec, data.as_batch());
    assert!(obj.loss(&theta).is_ok());
    let err = gauss_newton_residual(&spec, &data, &theta).unwrap_err();
    assert!(err.to_string().contains("sample"), "{err}");
}
