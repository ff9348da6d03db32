use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sgd_walk_core::metrics::{cosine, detect_barrier, epoch_summaries, height, StepMetrics};
use sgd_walk_core::objective::QuadraticForm;
use sgd_walk_core::quadlab::{quad_gd_trajectory, QuadSurface};
use sgd_walk_core::walk::{interp_points, slice, InterpolationSlice, GRID_LEN};

/// Least-squares quadratic fit in alpha; returns the max residual relative to the largest loss.
fn parabola_residual(s: &InterpolationSlice) -> f64 {
    let a = DMatrix::from_fn(GRID_LEN, 3, |i, j| s.alphas[i].powi(j as i32));
    let y = DVector::from_column_slice(&s.losses);
    let coef = a.clone().svd(true, true).solve(&y, 1e-14).unwrap();
    let scale = s.losses.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (a * coef - y).abs().max() / scale
}

#[test]
fn quadratic_slices_are_parabolas() {
    let surface = QuadSurface::new(vec![0.5, 1.0, 2.0, 3.5]).unwrap();
    for eta in [0.2, 0.7, 0.95] {
        let traj = quad_gd_trajectory(&surface, eta, &[1.0, -2.0, 0.5, 0.25], 6).unwrap();
        for t in 0..6 {
            let s = slice(&surface, &traj[t], &traj[t + 1], t as u64).unwrap();
            let r = parabola_residual(&s);
            assert!(r < 1e-10, "eta {eta} t {t}: residual {r:e}");
        }
    }
}

#[test]
fn interior_minimum_iff_the_step_overshoots() {
    for (lambda, eta, overshoots) in [(1.0, 0.5, false), (2.0, 0.3, false), (1.0, 1.5, true), (2.0, 0.9, true)] {
        let surface = QuadSurface::new(vec![lambda]).unwrap();
        let traj = quad_gd_trajectory(&surface, eta, &[1.0], 1).unwrap();
        let s = slice(&surface, &traj[0], &traj[1], 0).unwrap();
        let interior = s.floor_loss() < s.losses[0].min(s.losses[GRID_LEN - 1]);
        assert_eq!(interior, overshoots, "lambda {lambda} eta {eta}");
        assert!(!s.barrier);
    }
}

#[test]
fn symmetric_parabola_floor_sits_mid_grid() {
    let q = QuadraticForm::diagonal(&[2.0]);
    let s = slice(&q, &[-1.0], &[1.0], 0).unwrap();
    assert!(s.floor_index == 5 || s.floor_index == 6);
    assert!(!s.barrier);
    assert!(s.height > 0.0 && s.height < 2.0);
}

fn steps(n: u64) -> Vec<StepMetrics> {
    (0..=n)
        .map(|t| StepMetrics {
            t,
            cosine: if t == 0 { None } else { Some(((t * 37 % 11) as f64 / 5.5) - 1.0) },
            dist_init: t as f64 * 0.5,
            param_norm: 1.0 + t as f64,
        })
        .collect()
}

fn fake_slice(t: u64, losses: [f64; GRID_LEN]) -> InterpolationSlice {
    let (barrier, barrier_magnitude) = detect_barrier(&losses);
    let mut floor_index = 1;
    for j in 2..GRID_LEN - 1 {
        if losses[j] < losses[floor_index] {
            floor_index = j;
        }
    }
    InterpolationSlice {
        t,
        alphas: sgd_walk_core::walk::alpha_grid(),
        losses,
        floor_index,
        height: height(losses[0], losses[GRID_LEN - 1], losses[floor_index]),
        barrier,
        barrier_magnitude,
    }
}

proptest! {
    #[test]
    fn cosine_is_scale_invariant(
        a in prop::collection::vec(-10.0f64..10.0, 6),
        b in prop::collection::vec(-10.0f64..10.0, 6),
        s in 1e-3f64..1e3,
        u in 1e-3f64..1e3,
    ) {
        let base = cosine(&a, &b).unwrap();
        let sa: Vec<f64> = a.iter().map(|x| x * s).collect();
        let ub: Vec<f64> = b.iter().map(|x| x * u).collect();
        let scaled = cosine(&sa, &ub).unwrap();
        match (base, scaled) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x, y),
        }
        if let Some(c) = base {
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn height_and_barrier_ignore_constant_offsets(
        raw in prop::collection::vec(0i32..64, GRID_LEN),
        offset in -100i32..100,
    ) {
        // Multiples of 1/8 keep every addition exact.
        let losses: Vec<f64> = raw.iter().map(|&v| v as f64 / 8.0).collect();
        let shifted: Vec<f64> = losses.iter().map(|v| v + offset as f64).collect();
        let (b0, m0) = detect_barrier(&losses);
        let (b1, m1) = detect_barrier(&shifted);
        prop_assert_eq!(b0, b1);
        prop_assert_eq!(m0, m1);
        let min = losses[1..GRID_LEN - 1].iter().cloned().fold(f64::INFINITY, f64::min);
        let h0 = height(losses[0], losses[GRID_LEN - 1], min);
        let h1 = height(shifted[0], shifted[GRID_LEN - 1], min + offset as f64);
        prop_assert_eq!(h0, h1);
    }

    #[test]
    fn interpolation_is_affine(
        x in prop::collection::vec(-5.0f64..5.0, 4),
        y in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let points = interp_points(&x, &y).unwrap();
        prop_assert_eq!(points[0].1.as_slice(), x.as_slice());
        prop_assert_eq!(points[GRID_LEN - 1].1.as_slice(), y.as_slice());
        for (a, p) in &points {
            for i in 0..4 {
                let expect = (1.0 - a) * x[i] + a * y[i];
                prop_assert!((p[i] - expect).abs() <= 1e-14 * (1.0 + x[i].abs() + y[i].abs()));
            }
        }
    }

    #[test]
    fn epoch_summaries_concatenate(
        raw in prop::collection::vec(prop::collection::vec(0.0f64..4.0, GRID_LEN), 12),
        cut in 1usize..11,
    ) {
        let slices: Vec<InterpolationSlice> = raw
            .iter()
            .enumerate()
            .map(|(t, l)| fake_slice(t as u64, l.clone().try_into().unwrap()))
            .collect();
        let st = steps(12);
        let epochs = vec![(0, 0..cut as u64), (1, cut as u64..12)];
        let whole = epoch_summaries(&slices, &st, &epochs, 0.01).unwrap();
        let first = epoch_summaries(&slices[..cut], &st, &epochs[..1], 0.01).unwrap();
        let second = epoch_summaries(&slices[cut..], &st, &epochs[1..], 0.01).unwrap();
        prop_assert_eq!(whole, [first, second].concat());
    }
}
