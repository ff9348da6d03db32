use std::sync::Arc;

use sgd_walk_core::optim::{Constant, NoiseConfig};

use super::{Recipe, RunContext};
use crate::artifacts::{num, opt, Table};
use crate::error::Result;

/// Plain GD against GD plus isotropic Gaussian noise at each factor in
/// `iso_factors`; all runs share the tuned GD rate, the initial point and the
/// update budget `iso_iterations`.
pub struct IsoNoise;

impl Recipe for IsoNoise {
    fn name(&self) -> &'static str {
        "iso-noise"
    }

    fn about(&self) -> &'static str {
        "GD versus GD with isotropic gradient noise"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let n = ctx.full_batch()?;
        let iters = ctx.config.analysis.iso_iterations;
        let lr = ctx.base_rate("gd", n, &NoiseConfig::none())?;
        let mut runs = vec![("gd".to_string(), 0.0, NoiseConfig::none())];
        for f in ctx.config.analysis.iso_factors.clone() {
            runs.push((format!("iso-x{f}"), f, ctx.noise(&format!("iso:{f}"))?));
        }
        let mut summary = Table::new(&[
            "run",
            "factor",
            "sigma2",
            "final_loss",
            "final_accuracy",
            "dist_init",
            "param_norm",
            "mean_cosine",
        ]);
        for (name, factor, noise) in runs {
            let cfg = ctx.train_config(n, Arc::new(Constant { lr }), noise, 1, Some(iters))?;
            let log = ctx.train(cfg.clone(), &name)?;
            let emitted = ctx.emit(&name, &cfg, &log, &[])?;
            let last = emitted.eval.last().expect("final evaluation is always recorded");
            let cos: Vec<f64> = emitted.steps.iter().filter_map(|s| s.cosine).collect();
            let mean_cos = (!cos.is_empty()).then(|| cos.iter().sum::<f64>() / cos.len() as f64);
            summary.row([
                name,
                num(factor),
                opt(log.meta.noise_sigma2),
                num(last.full_loss),
                num(last.accuracy),
                num(last.dist_init),
                num(last.param_norm),
                opt(mean_cos),
            ]);
        }
        ctx.out.write("summary.csv", &summary.into_bytes())
    }
}
