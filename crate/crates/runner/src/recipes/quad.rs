use sgd_walk_core::quadlab::{contraction_rate, damping_class, quad_gd_trajectory, QuadSurface};

use super::{Recipe, RunContext};
use crate::artifacts::{num, Table, RATES_HEADER};
use crate::error::Result;

/// Contraction rate and damping class for each `lambda` in `quad_lambdas` and
/// `eta = k / 10`, plus the simulated error magnitude over `quad_steps` GD
/// steps from `e_0 = 1`.
pub struct QuadRates;

impl Recipe for QuadRates {
    fn name(&self) -> &'static str {
        "quad-rates"
    }

    fn about(&self) -> &'static str {
        "GD convergence rates on one-dimensional quadratics"
    }

    fn needs_data(&self) -> bool {
        false
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let a = &ctx.config.analysis;
        let mut rates = Table::new(&RATES_HEADER);
        let mut traj = Table::new(&["lambda", "eta", "t", "abs_error"]);
        for &lambda in &a.quad_lambdas {
            let surface = QuadSurface::new(vec![lambda])?;
            for k in 1..=a.quad_eta_steps {
                let eta = k as f64 / 10.0;
                rates.row([
                    num(lambda),
                    num(eta),
                    num(contraction_rate(lambda, eta)),
                    damping_class(lambda, eta).to_string(),
                ]);
                let path = quad_gd_trajectory(&surface, eta, &[1.0], a.quad_steps)?;
                for (t, theta) in path.iter().enumerate() {
                    traj.row([num(lambda), num(eta), t.to_string(), num(theta[0].abs())]);
                }
            }
        }
        ctx.out.write("rates.csv", &rates.into_bytes())?;
        ctx.out.write("trajectories.csv", &traj.into_bytes())
    }
}
