use sgd_walk_core::curvature::spectral_norm_seeded;
use sgd_walk_core::net::accuracy;
use sgd_walk_core::objective::MlpObjective;

use super::{Recipe, RunContext};
use crate::artifacts::{num, opt, Table, CURVATURE_HEADER};
use crate::error::Result;

/// SGD run with the Hessian spectral norm (power iteration on the first
/// `curvature_subset` training samples) and validation accuracy at the start
/// and after every `curvature_period` epochs.
pub struct SpectralTrack;

impl Recipe for SpectralTrack {
    fn name(&self) -> &'static str {
        "spectral-track"
    }

    fn about(&self) -> &'static str {
        "Hessian spectral norm and validation accuracy during SGD"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let t = &ctx.config.train;
        let (batch, epochs) = (t.batch_size, t.epochs);
        let noise = ctx.noise(&t.noise.clone())?;
        let schedule = ctx.schedule("sgd", batch, &noise)?;
        let cfg = ctx.train_config(batch, schedule, noise, epochs, None)?;
        let log = ctx.train(cfg.clone(), "")?;
        ctx.emit("", &cfg, &log, &[])?;

        let a = ctx.config.analysis.clone();
        let start = std::time::Instant::now();
        let subset = ctx.train_set()?.head(a.curvature_subset.min(ctx.full_batch()?));
        let objective = MlpObjective::new(&cfg.spec, subset.as_batch());
        let mut checkpoints = vec![(0u64, 0u64)];
        for (epoch, range) in log.epoch_ranges() {
            let done = epoch + 1;
            if done % a.curvature_period == 0 || range.end == log.len() {
                checkpoints.push((done, range.end));
            }
        }
        let mut table = Table::new(&CURVATURE_HEADER);
        for (epoch, t) in checkpoints {
            let theta = log.theta(t)?;
            let est = spectral_norm_seeded(&objective, &theta, a.power_iters, a.power_tol, ctx.seeds.power)?;
            let val = match &ctx.data()?.val {
                Some(v) => Some(accuracy(&cfg.spec, &theta, v.as_batch())?),
                None => None,
            };
            table.row([
                epoch.to_string(),
                num(est.value),
                est.converged.to_string(),
                est.iterations_used.to_string(),
                opt(val),
            ]);
        }
        ctx.out.record_phase("curvature", start.elapsed().as_secs_f64());
        ctx.out.write("curvature.csv", &table.into_bytes())
    }
}
