//! Second-order diagnostics: Hessian-vector products, the Hessian spectral
//! norm, per-sample gradient covariance, and the Gauss-Newton decomposition
//! `H = C + g g^T + (1/N) sum_i (dL_i/dp_i) d^2 p_i / dtheta^2` for the
//! negative log-likelihood.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::net::{mean_gradient, per_sample_stats, sample_probabilities, MlpSpec};
use crate::objective::{MlpObjective, Objective};
use crate::params::{dot, norm, ParamVector};

/// Dense paths (Hessian, covariance) refuse models above this many parameters.
pub const DENSE_PARAM_LIMIT: usize = 200;

pub const DEFAULT_POWER_SEED: u64 = 0x005e_ed0f_7a11;

/// Smallest probability accepted by the residual-term computation.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// `||H v - rho v|| / ||v||` at exit, with `rho` the signed Rayleigh quotient.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct CovarianceResult {
    pub matrix: DMatrix<f64>,
    pub mean_grad: ParamVector,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussNewtonGap {
    /// `||H - C - g g^T - R||_F`
    pub abs_gap: f64,
    /// `abs_gap / ||H||_F`
    pub relative_gap: f64,
}

fn guard(p: usize) -> Result<()> {
    if p > DENSE_PARAM_LIMIT {
        return Err(Error::TooLarge {
            what: "parameter count",
            size: p,
            limit: DENSE_PARAM_LIMIT,
        });
    }
    Ok(())
}

/// `H v` by central differences of the gradient along `v / ||v||`,
/// step `cbrt(eps) * (1 + ||theta||)`.
pub fn hvp<O: Objective + ?Sized>(objective: &O, theta: &[f64], v: &[f64]) -> Result<ParamVector> {
    check_len("hvp parameters", objective.dim(), theta.len())?;
    check_len("hvp direction", theta.len(), v.len())?;
    let vn = norm(v);
    if vn == 0.0 || !vn.is_finite() {
        return Err(Error::ZeroVector);
    }
    let eps = f64::EPSILON.cbrt() * (1.0 + norm(theta));
    let plus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t + eps * d / vn).collect();
    let minus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t - eps * d / vn).collect();
    let (_, gp) = objective.loss_and_grad(&plus)?;
    let (_, gm) = objective.loss_and_grad(&minus)?;
    Ok(gp
        .iter()
        .zip(gm.iter())
        .map(|(a, b)| (a - b) / (2.0 * eps) * vn)
        .collect())
}

fn second_difference_step(x: f64) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + x.abs())
}

/// Dense Hessian of any scalar-vector map by central second differences, symmetrized.
/// `f` returns a vector of values; one Hessian per output component.
fn hessians_by_second_differences<F>(theta: &[f64], outputs: usize, f: F) -> Result<Vec<DMatrix<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let p = theta.len();
    let mut h: Vec<DMatrix<f64>> = (0..outputs).map(|_| DMatrix::zeros(p, p)).collect();
    let steps: Vec<f64> = theta.iter().map(|&x| second_difference_step(x)).collect();
    let center = f(theta)?;
    let mut x = theta.to_vec();
    for j in 0..p {
        let hj = steps[j];
        x[j] = theta[j] + hj;
        let fp = f(&x)?;
        x[j] = theta[j] - hj;
        let fm = f(&x)?;
        x[j] = theta[j];
        for (o, m) in h.iter_mut().enumerate() {
            m[(j, j)] = (fp[o] - 2.0 * center[o] + fm[o]) / (hj * hj);
        }
        for k in (j + 1)..p {
            let hk = steps[k];
            let mut eval = |sj: f64, sk: f64| {
                x[j] = theta[j] + sj * hj;
                x[k] = theta[k] + sk * hk;
                let r = f(&x);
                x[j] = theta[j];
                x[k] = theta[k];
                r
            };
            let fpp = eval(1.0, 1.0)?;
            let fpm = eval(1.0, -1.0)?;
            let fmp = eval(-1.0, 1.0)?;
            let fmm = eval(-1.0, -1.0)?;
            for (o, m) in h.iter_mut().enumerate() {
                let v = (fpp[o] - fpm[o] - fmp[o] + fmm[o]) / (4.0 * hj * hk);
                m[(j, k)] = v;
                m[(k, j)] = v;
            }
        }
    }
    Ok(h.into_iter().map(|m| (&m + m.transpose()) * 0.5).collect())
}

/// Dense Hessian from second differences of the scalar loss (test oracle; `P <= 200`).
pub fn full_hessian_bruteforce<O: Objective + ?Sized>(objective: &O, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_len("hessian parameters", objective.dim(), theta.len())?;
    guard(theta.len())?;
    let mut h = hessians_by_second_differences(theta, 1, |x| Ok(vec![objective.loss(x)?]))?;
    Ok(h.remove(0))
}

/// Largest-magnitude Hessian eigenvalue by power iteration on `H^2`.
pub fn spectral_norm<O: Objective + ?Sized>(
    objective: &O,
    theta: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<SpectralEstimate> {
    spectral_norm_seeded(objective, theta, max_iters, tol, DEFAULT_POWER_SEED)
}

pub fn spectral_norm_seeded<O: Objective + ?Sized>(
    objective: &O,
    theta: &[f64],
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectralEstimate> {
    if max_iters == 0 || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power iteration needs max_iters >= 1 and tol > 0 (got {max_iters}, {tol})"
        )));
    }
    let p = theta.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut prev: Option<f64> = None;
    let mut estimate = SpectralEstimate {
        value: 0.0,
        iterations_used: 0,
        converged: false,
        residual: f64::INFINITY,
    };
    for k in 1..=max_iters {
        let hv = hvp(objective, theta, &v)?;
        let rho = dot(&v, &hv);
        let residual = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - rho * b) * (a - rho * b))
            .sum::<f64>()
            .sqrt();
        let hv_norm = norm(&hv);
        if hv_norm == 0.0 {
            return Ok(SpectralEstimate {
                value: 0.0,
                iterations_used: k,
                converged: true,
                residual: 0.0,
            });
        }
        let hhv = hvp(objective, theta, &hv)?;
        let value = dot(&v, &hhv).max(0.0).sqrt();
        estimate = SpectralEstimate {
            value,
            iterations_used: k,
            converged: false,
            residual,
        };
        let hhv_norm = norm(&hhv);
        if hhv_norm == 0.0 || !hhv_norm.is_finite() {
            break;
        }
        v = hhv.iter().map(|x| x / hhv_norm).collect();
        if let Some(pv) = prev {
            if (value - pv).abs() < tol * value && residual <= tol * value {
                estimate.converged = true;
                break;
            }
        }
        prev = Some(value);
    }
    Ok(estimate)
}

/// `C = (1/N) sum_i (g_i - g)(g_i - g)^T` with `g` the mean per-sample gradient.
pub fn gradient_covariance(spec: &MlpSpec, dataset: &Dataset, theta: &[f64]) -> Result<CovarianceResult> {
    let p = spec.param_count();
    guard(p)?;
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidArgument("covariance needs at least 2 samples".into()));
    }
    covariance_from_samples(spec, dataset, theta)
}

fn covariance_from_samples(spec: &MlpSpec, dataset: &Dataset, theta: &[f64]) -> Result<CovarianceResult> {
    let p = spec.param_count();
    let stats = per_sample_stats(spec, theta, dataset.as_batch())?;
    let mean = mean_gradient(&stats, p);
    let mut c = DMatrix::zeros(p, p);
    for s in &stats {
        let d: Vec<f64> = s.grad.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
        for j in 0..p {
            for k in 0..p {
                c[(j, k)] += d[j] * d[k];
            }
        }
    }
    c /= stats.len() as f64;
    let c = (&c + c.transpose()) * 0.5;
    Ok(CovarianceResult {
        matrix: c,
        mean_grad: mean,
        n: stats.len(),
    })
}

/// Residual term `(1/N) sum_i (-1/p_i) d^2 p_i / dtheta^2` by second differences of each `p_i`.
pub fn nll_residual_term(spec: &MlpSpec, dataset: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
    let p = spec.param_count();
    guard(p)?;
    let batch = dataset.as_batch();
    let probs = sample_probabilities(spec, theta, batch)?;
    for (i, &pi) in probs.iter().enumerate() {
        if !(pi > PROB_FLOOR && pi < 1.0) {
            return Err(Error::ProbabilityOutOfRange { sample: i, prob: pi });
        }
    }
    let hess = hessians_by_second_differences(theta, batch.len(), |x| sample_probabilities(spec, x, batch))?;
    let mut r = DMatrix::zeros(p, p);
    for (pi, h) in probs.iter().zip(&hess) {
        r -= h / *pi;
    }
    Ok(r / batch.len() as f64)
}

/// Check `H = C + g g^T + R` with every term computed independently.
pub fn gauss_newton_residual(spec: &MlpSpec, dataset: &Dataset, theta: &[f64]) -> Result<GaussNewtonGap> {
    guard(spec.param_count())?;
    let objective = MlpObjective::new(spec, dataset.as_batch());
    let h = full_hessian_bruteforce(&objective, theta)?;
    let cov = covariance_from_samples(spec, dataset, theta)?;
    let g = nalgebra::DVector::from_column_slice(&cov.mean_grad);
    let outer = &g * g.transpose();
    let r = nll_residual_term(spec, dataset, theta)?;
    let gap = (&h - &cov.matrix - outer - r).norm();
    let hn = h.norm();
    Ok(GaussNewtonGap {
        abs_gap: gap,
        relative_gap: if hn > 0.0 { gap / hn } else { gap },
    })
}
