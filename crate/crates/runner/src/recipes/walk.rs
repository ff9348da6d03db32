use sgd_walk_core::optim::NoiseConfig;

use super::{Recipe, RunContext};
use crate::error::Result;

/// Full-batch GD: trajectory, cosine and distance over `gd_iterations`
/// updates, with slices of the first `slice_iterations` pairs.
pub struct WalkGd;

impl Recipe for WalkGd {
    fn name(&self) -> &'static str {
        "walk-gd"
    }

    fn about(&self) -> &'static str {
        "full-batch GD; early slices, cosine and distance"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let a = &ctx.config.analysis;
        let (iters, slices) = (a.gd_iterations, a.slice_iterations);
        let n = ctx.full_batch()?;
        let schedule = ctx.schedule("gd", n, &NoiseConfig::none())?;
        let cfg = ctx.train_config(n, schedule, NoiseConfig::none(), iters, None)?;
        let log = ctx.train(cfg.clone(), "")?;
        ctx.emit("", &cfg, &log, &[0..slices])?;
        Ok(())
    }
}

/// Mini-batch SGD over `train.epochs` epochs. Slices the whole first epoch,
/// the first `slice_iterations` pairs, and optionally the final epoch. A GD
/// companion run at the same rate covers `slice_iterations` updates.
pub struct WalkSgd;

impl Recipe for WalkSgd {
    fn name(&self) -> &'static str {
        "walk-sgd"
    }

    fn about(&self) -> &'static str {
        "mini-batch SGD; first- and last-epoch slices plus a GD companion"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let t = &ctx.config.train;
        let (batch, epochs) = (t.batch_size, t.epochs);
        let noise = ctx.noise(&t.noise.clone())?;
        let schedule = ctx.schedule("sgd", batch, &noise)?;
        let cfg = ctx.train_config(batch, schedule.clone(), noise, epochs, None)?;
        let log = ctx.train(cfg.clone(), "sgd")?;
        let ranges = log.epoch_ranges();
        let mut wanted = vec![0..ctx.config.analysis.slice_iterations];
        if let Some((_, first)) = ranges.first() {
            wanted.push(first.clone());
        }
        if ctx.config.analysis.late_epoch_slices && ranges.len() > 1 {
            wanted.push(ranges.last().unwrap().1.clone());
        }
        ctx.emit("sgd", &cfg, &log, &wanted)?;

        let n = ctx.full_batch()?;
        let companion_iters = ctx.config.analysis.slice_iterations;
        let gd_cfg = ctx.train_config(n, schedule, NoiseConfig::none(), 1, Some(companion_iters))?;
        let gd = ctx.train(gd_cfg.clone(), "gd-companion")?;
        ctx.emit("gd-companion", &gd_cfg, &gd, &[])?;
        Ok(())
    }
}

/// SGD with every consecutive pair sliced; epochs.csv carries the per-epoch
/// barrier counts.
pub struct BarrierCensus;

impl Recipe for BarrierCensus {
    fn name(&self) -> &'static str {
        "barrier-census"
    }

    fn about(&self) -> &'static str {
        "SGD with every pair sliced; barrier counts per epoch"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let t = &ctx.config.train;
        let (batch, epochs) = (t.batch_size, t.epochs);
        let noise = ctx.noise(&t.noise.clone())?;
        let schedule = ctx.schedule("sgd", batch, &noise)?;
        let cfg = ctx.train_config(batch, schedule, noise, epochs, None)?;
        let log = ctx.train(cfg.clone(), "")?;
        let all = 0..log.len();
        ctx.emit("", &cfg, &log, &[all])?;
        Ok(())
    }
}
