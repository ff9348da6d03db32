use nalgebra::DMatrix;
use sgd_walk_core::objective::Objective;
use sgd_walk_core::quadlab::{contraction_rate, damping_class, quad_gd_trajectory, DampingClass, QuadSurface};

#[test]
fn per_coordinate_errors_follow_the_closed_form() {
    // Each (lambda, eta) is chosen so eta * lambda is exact in binary.
    let grid = [
        (2.0, 0.25, DampingClass::Overdamped),
        (0.5, 1.0, DampingClass::Overdamped),
        (2.0, 0.5, DampingClass::Critical),
        (4.0, 0.375, DampingClass::Underdamped),
        (1.0, 1.75, DampingClass::Underdamped),
        (4.0, 0.5, DampingClass::Boundary),
        (1.0, 2.0, DampingClass::Boundary),
        (2.0, 1.25, DampingClass::Divergent),
    ];
    let mut seen = Vec::new();
    for (lambda, eta, class) in grid {
        assert_eq!(damping_class(lambda, eta), class);
        seen.push(class);
        let surface = QuadSurface::new(vec![lambda, lambda]).unwrap();
        let e0 = [0.75, -1.3];
        let traj = quad_gd_trajectory(&surface, eta, &e0, 100).unwrap();
        let rate = contraction_rate(lambda, eta);
        for (t, theta) in traj.iter().enumerate() {
            for i in 0..2 {
                let expect = rate.powi(t as i32) * e0[i].abs();
                let got = theta[i].abs();
                assert!(
                    (got - expect).abs() <= 1e-10 * expect,
                    "lambda {lambda} eta {eta} t {t}: {got} vs {expect}"
                );
            }
        }
    }
    for class in DampingClass::ALL {
        assert!(seen.contains(&class), "{class} not covered");
    }
}

#[test]
fn mixed_spectrum_coordinates_are_independent() {
    let lambdas = vec![0.5, 1.0, 2.0];
    let surface = QuadSurface::new(lambdas.clone()).unwrap();
    let eta = 0.75;
    let e0 = [1.0, -2.0, 3.0];
    let traj = quad_gd_trajectory(&surface, eta, &e0, 100).unwrap();
    for (i, &l) in lambdas.iter().enumerate() {
        let r = contraction_rate(l, eta);
        let expect = r.powi(100) * e0[i].abs();
        assert!((traj[100][i].abs() - expect).abs() <= 1e-10 * expect);
    }
}

fn rotation(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| ((i * n + j) as f64 * 1.913).cos()).qr().q()
}

#[test]
fn rotation_does_not_change_losses() {
    let lambdas = vec![0.3, 1.1, 1.9, 0.8];
    let q = rotation(4);
    let rotated = QuadSurface::new(lambdas.clone()).unwrap().with_rotation(q.clone()).unwrap();
    let plain = QuadSurface::new(lambdas).unwrap();
    let theta0 = [0.4, -1.0, 2.0, 0.7];
    let e0 = rotated.to_eigenbasis(&theta0);
    let a = quad_gd_trajectory(&rotated, 0.9, &theta0, 60).unwrap();
    let b = quad_gd_trajectory(&plain, 0.9, &e0, 60).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let (lx, ly) = (rotated.loss(x).unwrap(), plain.loss(y).unwrap());
        assert!((lx - ly).abs() <= 1e-12 * lx.abs().max(1e-300), "{lx} vs {ly}");
    }
}

#[test]
fn non_orthogonal_rotation_is_rejected() {
    let mut q = rotation(3);
    q[(0, 0)] += 1e-6;
    assert!(QuadSurface::new(vec![1.0, 2.0, 3.0]).unwrap().with_rotation(q).is_err());
}
