use std::sync::Arc;

use sgd_walk_core::optim::Constant;

use super::{Recipe, RunContext};
use crate::artifacts::{num, opt, Table};
use crate::error::Result;

/// SGD at the tuned rate times each of `height_lr_factors`, same seeds and
/// batch size, every pair sliced. heights.csv gathers the per-epoch mean
/// height of each run.
pub struct HeightVsLr;

impl Recipe for HeightVsLr {
    fn name(&self) -> &'static str {
        "height-vs-lr"
    }

    fn about(&self) -> &'static str {
        "valley-floor height per epoch at several learning rates"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let t = &ctx.config.train;
        let (batch, epochs) = (t.batch_size, t.epochs);
        let noise = ctx.noise(&t.noise.clone())?;
        let base = ctx.base_rate("sgd", batch, &noise)?;
        let mut table = Table::new(&["lr_factor", "lr", "epoch", "mean_height", "height_sem", "slice_count"]);
        for factor in ctx.config.analysis.height_lr_factors.clone() {
            let lr = base * factor;
            let dir = format!("lr-x{factor}");
            let cfg = ctx.train_config(batch, Arc::new(Constant { lr }), noise, epochs, None)?;
            let log = ctx.train(cfg.clone(), &dir)?;
            let emitted = ctx.emit(&dir, &cfg, &log, &[0..log.len()])?;
            for e in &emitted.epochs {
                table.row([
                    num(factor),
                    num(lr),
                    e.epoch.to_string(),
                    opt(e.mean_height),
                    opt(e.height_sem),
                    e.slice_count.to_string(),
                ]);
            }
        }
        ctx.out.write("heights.csv", &table.into_bytes())
    }
}
