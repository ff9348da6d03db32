//! Scalar diagnostics over trajectories and interpolation slices.

use std::ops::Range;

use crate::error::{check_len, Error, Result};
use crate::optim::TrajectoryLog;
use crate::params::{dot, norm};
use crate::walk::InterpolationSlice;

/// Default relative threshold for a barrier to count as significant.
pub const DEFAULT_SIGNIFICANCE_REL: f64 = 0.01;

/// Cosine of the angle between two gradients, clamped to `[-1, 1]`.
/// `Ok(None)` when either vector has zero norm.
pub fn cosine(g_prev: &[f64], g_cur: &[f64]) -> Result<Option<f64>> {
    check_len("cosine", g_prev.len(), g_cur.len())?;
    let na = norm(g_prev);
    let nb = norm(g_cur);
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Ok(None);
    }
    Ok(Some((dot(g_prev, g_cur) / (na * nb)).clamp(-1.0, 1.0)))
}

pub fn distance_from_init(theta: &[f64], theta0: &[f64]) -> Result<f64> {
    check_len("distance_from_init", theta0.len(), theta.len())?;
    Ok(theta
        .iter()
        .zip(theta0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

pub fn param_norm(theta: &[f64]) -> f64 {
    norm(theta)
}

/// `(L_t + L_next - 2 L_min) / 2`. Negative when the interior minimum sits above both ends.
pub fn height(loss_t: f64, loss_next: f64, loss_min: f64) -> f64 {
    (loss_t + loss_next - 2.0 * loss_min) / 2.0
}

/// A barrier is an interior point whose loss is strictly above both endpoint losses.
/// Returns the flag and how far the interior maximum exceeds the larger endpoint.
pub fn detect_barrier(losses: &[f64]) -> (bool, f64) {
    let n = losses.len();
    if n < 3 {
        return (false, 0.0);
    }
    let ends = losses[0].max(losses[n - 1]);
    let interior = losses[1..n - 1]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if interior > ends {
        (true, interior - ends)
    } else {
        (false, 0.0)
    }
}

/// Per-iteration scalars derived from a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub t: u64,
    /// `cos(g_{t-1}, g_t)`; missing at `t = 0`, at the final iterate, or for zero gradients.
    pub cosine: Option<f64>,
    pub dist_init: f64,
    pub param_norm: f64,
}

/// Metrics for `t` in `0..=T` (the last entry is the final iterate).
pub fn step_metrics(log: &TrajectoryLog) -> Result<Vec<StepMetrics>> {
    let theta0 = log.theta0();
    let mut out = Vec::with_capacity(log.len() as usize + 1);
    let mut prev_grad: Option<crate::params::ParamVector> = None;
    for t in 0..log.len() {
        let rec = log.record(t)?;
        let cos = match &prev_grad {
            Some(p) => cosine(p, &rec.grad)?,
            None => None,
        };
        out.push(StepMetrics {
            t,
            cosine: cos,
            dist_init: distance_from_init(&rec.theta, theta0)?,
            param_norm: param_norm(&rec.theta),
        });
        prev_grad = Some(rec.grad);
    }
    let last = log.final_theta();
    out.push(StepMetrics {
        t: log.len(),
        cosine: None,
        dist_init: distance_from_init(last, theta0)?,
        param_norm: param_norm(last),
    });
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochSummary {
    pub epoch: u64,
    pub slice_count: usize,
    pub mean_height: Option<f64>,
    pub height_sem: Option<f64>,
    pub barrier_count: usize,
    pub significant_barrier_count: usize,
    pub mean_cosine: Option<f64>,
    pub end_distance: f64,
    pub end_param_norm: f64,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard deviation over `sqrt(n)`; zero for a single value.
fn sem(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let n = values.len();
    if n < 2 {
        return Some(0.0);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    Some(var.sqrt() / (n as f64).sqrt())
}

/// Aggregate slices and step metrics per epoch.
///
/// `epochs` lists `(epoch, iteration range)`; `steps` must cover every
/// iteration up to and including each range end (the iterate that closes the epoch).
pub fn epoch_summaries(
    slices: &[InterpolationSlice],
    steps: &[StepMetrics],
    epochs: &[(u64, Range<u64>)],
    significance_rel: f64,
) -> Result<Vec<EpochSummary>> {
    let step_at = |t: u64| -> Result<&StepMetrics> {
        steps
            .iter()
            .find(|s| s.t == t)
            .ok_or_else(|| Error::Misaligned(format!("no step metrics for iteration {t}")))
    };
    for s in slices {
        if !epochs.iter().any(|(_, r)| r.contains(&s.t)) {
            return Err(Error::Misaligned(format!(
                "slice at iteration {} falls outside every epoch range",
                s.t
            )));
        }
    }
    epochs
        .iter()
        .map(|(epoch, range)| {
            let in_epoch: Vec<&InterpolationSlice> =
                slices.iter().filter(|s| range.contains(&s.t)).collect();
            let heights: Vec<f64> = in_epoch.iter().map(|s| s.height).collect();
            let barrier_count = in_epoch.iter().filter(|s| s.barrier).count();
            let significant_barrier_count = in_epoch
                .iter()
                .filter(|s| s.barrier && s.barrier_magnitude > significance_rel * s.losses[0])
                .count();
            let mut cosines = Vec::new();
            for t in range.clone() {
                if let Some(c) = step_at(t)?.cosine {
                    cosines.push(c);
                }
            }
            let end = step_at(range.end)?;
            Ok(EpochSummary {
                epoch: *epoch,
                slice_count: in_epoch.len(),
                mean_height: mean(&heights),
                height_sem: sem(&heights),
                barrier_count,
                significant_barrier_count,
                mean_cosine: mean(&cosines),
                end_distance: end.dist_init,
                end_param_norm: end.param_norm,
            })
        })
        .collect()
}

/// Centered moving average; windows are clipped at the ends, so the output
/// has the input's length.
pub fn smoothed_series(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be at least 1".into()));
    }
    let left = (window - 1) / 2;
    let right = window / 2;
    let n = values.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect())
}
