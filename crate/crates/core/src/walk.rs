//! Loss along the straight segment between consecutive iterates.
//!
//! Each segment `theta_t -> theta_{t+1}` is probed at `alpha = j / 11` for
//! `j = 0..=11`: both endpoints plus ten evenly spaced interior points. The
//! valley floor is the lowest interior point.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::metrics::{detect_barrier, height};
use crate::objective::Objective;
use crate::optim::TrajectoryLog;
use crate::params::ParamVector;

pub const GRID_LEN: usize = 12;
pub const INTERIOR: usize = GRID_LEN - 2;

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationSlice {
    pub t: u64,
    pub alphas: [f64; GRID_LEN],
    pub losses: [f64; GRID_LEN],
    /// Index in `1..=10` of the lowest interior loss (lowest index on ties).
    pub floor_index: usize,
    pub height: f64,
    pub barrier: bool,
    pub barrier_magnitude: f64,
}

impl InterpolationSlice {
    pub fn floor_loss(&self) -> f64 {
        self.losses[self.floor_index]
    }

    pub fn height_is_negative(&self) -> bool {
        self.height < 0.0
    }
}

pub fn alpha_grid() -> [f64; GRID_LEN] {
    let mut a = [0.0; GRID_LEN];
    for (j, v) in a.iter_mut().enumerate() {
        *v = j as f64 / (GRID_LEN - 1) as f64;
    }
    a
}

/// `(alpha, (1 - alpha) * theta_t + alpha * theta_next)` over the grid,
/// evaluated as one fused `theta_t + alpha * (theta_next - theta_t)`.
/// The endpoints are copied verbatim.
pub fn interp_points(theta_t: &[f64], theta_next: &[f64]) -> Result<Vec<(f64, ParamVector)>> {
    check_len("interp_points", theta_t.len(), theta_next.len())?;
    Ok(alpha_grid()
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let point: ParamVector = if j == 0 {
                theta_t.to_vec().into()
            } else if j == GRID_LEN - 1 {
                theta_next.to_vec().into()
            } else {
                theta_t
                    .iter()
                    .zip(theta_next)
                    .map(|(x, y)| a.mul_add(y - x, *x))
                    .collect()
            };
            (a, point)
        })
        .collect())
}

fn assemble(t: u64, losses: [f64; GRID_LEN]) -> InterpolationSlice {
    let mut floor_index = 1;
    for j in 2..=INTERIOR {
        if losses[j] < losses[floor_index] {
            floor_index = j;
        }
    }
    let (barrier, barrier_magnitude) = detect_barrier(&losses);
    InterpolationSlice {
        t,
        alphas: alpha_grid(),
        losses,
        floor_index,
        height: height(losses[0], losses[GRID_LEN - 1], losses[floor_index]),
        barrier,
        barrier_magnitude,
    }
}

fn slice_with_ends<O: Objective + ?Sized>(
    objective: &O,
    theta_t: &[f64],
    theta_next: &[f64],
    t: u64,
    ends: Option<(f64, f64)>,
) -> Result<InterpolationSlice> {
    let points = interp_points(theta_t, theta_next)?;
    let evaluated: Vec<Result<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(j, (_, p))| match (j, ends) {
            (0, Some((l0, _))) => Ok(l0),
            (j, Some((_, l1))) if j == GRID_LEN - 1 => Ok(l1),
            _ => objective.loss(p),
        })
        .collect();
    let mut losses = [0.0; GRID_LEN];
    for (slot, l) in losses.iter_mut().zip(evaluated) {
        *slot = l?;
        if !slot.is_finite() {
            return Err(Error::NonFinite {
                context: format!("interpolated loss at iteration {t}"),
            });
        }
    }
    Ok(assemble(t, losses))
}

/// Evaluate the objective on the whole grid between `theta_t` and `theta_next`.
pub fn slice<O: Objective + ?Sized>(
    objective: &O,
    theta_t: &[f64],
    theta_next: &[f64],
    t: u64,
) -> Result<InterpolationSlice> {
    slice_with_ends(objective, theta_t, theta_next, t, None)
}

/// One slice per consecutive pair `(t, t + 1)` for `t` in `range`.
pub fn slice_all<O: Objective + ?Sized>(
    log: &TrajectoryLog,
    objective: &O,
    range: Range<u64>,
) -> Result<Vec<InterpolationSlice>> {
    if range.is_empty() {
        return Ok(Vec::new());
    }
    if range.end > log.len() {
        return Err(Error::InvalidArgument(format!(
            "slice range {range:?} exceeds the {} recorded updates",
            log.len()
        )));
    }
    let mut out = Vec::with_capacity((range.end - range.start) as usize);
    let mut theta_t = log.theta(range.start)?;
    let mut loss_t = objective.loss(&theta_t)?;
    for t in range {
        let theta_next = log.theta(t + 1)?;
        let loss_next = objective.loss(&theta_next)?;
        out.push(slice_with_ends(objective, &theta_t, &theta_next, t, Some((loss_t, loss_next)))?);
        theta_t = theta_next;
        loss_t = loss_next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::QuadraticForm;

    #[test]
    fn grid_shape() {
        let a = alpha_grid();
        assert_eq!(a[0], 0.0);
        assert_eq!(a[11], 1.0);
        for w in a.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - 1.0 / 11.0).abs() < 1e-15);
        }
    }

    #[test]
    fn interp_endpoints_and_arithmetic() {
        let a = [0.1, -0.3];
        let b = [2.0, 7.5];
        let pts = interp_points(&a, &b).unwrap();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0].1.as_slice(), &a);
        assert_eq!(pts[11].1.as_slice(), &b);
        let pts = interp_points(&[0.0, 0.0], &[11.0, 22.0]).unwrap();
        assert_eq!(pts[3].1.as_slice(), &[3.0, 6.0]);
        let same = interp_points(&a, &a).unwrap();
        assert!(same.iter().all(|(_, p)| p.as_slice() == a));
        assert!(interp_points(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn symmetric_parabola_floor() {
        let q = QuadraticForm::diagonal(&[2.0]);
        let s = slice(&q, &[-1.0], &[1.0], 0).unwrap();
        assert!(s.floor_index == 5 || s.floor_index == 6);
        assert!(!s.barrier);
        assert!(s.height > 0.0);
    }

    #[test]
    fn monotone_segment_floor_at_last_interior_point() {
        let q = QuadraticForm::diagonal(&[2.0]);
        let s = slice(&q, &[3.0], &[1.0], 4).unwrap();
        assert_eq!(s.floor_index, 10);
        assert!(!s.barrier);
        assert_eq!(s.height, (s.losses[0] + s.losses[11] - 2.0 * s.losses[10]) / 2.0);
        assert!(s.height > 0.0);
    }

    #[test]
    fn hump_gives_barrier_and_negative_height() {
        let q = QuadraticForm::diagonal(&[-2.0]);
        let s = slice(&q, &[-1.0], &[1.0], 0).unwrap();
        assert!(s.barrier);
        assert!(s.barrier_magnitude > 0.0);
        assert!(s.height_is_negative());
    }
}
