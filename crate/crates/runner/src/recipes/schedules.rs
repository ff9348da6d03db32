use std::sync::Arc;

use sgd_walk_core::optim::{Cyclical, LrSchedule, Stepwise, Trapezoid};

use super::{Recipe, RunContext};
use crate::artifacts::{num, opt, Table};
use crate::error::Result;

/// Stepwise, cyclical and trapezoid schedules built around the tuned SGD rate
/// `eta` over `T` updates:
///
/// - stepwise: `eta`, halved every `T / 3` updates
/// - cyclical: between `eta / 10` and `eta`, half cycle of one epoch
/// - trapezoid: from `eta / 10` up to `eta` over `T / 10`, plateau `6T / 10`, down over the rest
pub struct ScheduleCompare;

impl Recipe for ScheduleCompare {
    fn name(&self) -> &'static str {
        "schedule-compare"
    }

    fn about(&self) -> &'static str {
        "stepwise, cyclical and trapezoid schedules side by side"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let t = &ctx.config.train;
        let (batch, epochs) = (t.batch_size, t.epochs);
        let noise = ctx.noise(&t.noise.clone())?;
        let eta = ctx.base_rate("sgd", batch, &noise)?;
        let ipe = ctx.train_config(batch, Arc::new(sgd_walk_core::optim::Constant { lr: eta }), noise, 1, None)?
            .sampler
            .batches_per_epoch(ctx.full_batch()?) as u64;
        let total = (epochs * ipe).max(3);
        let up = (total / 10).max(1);
        let plateau = (total * 6 / 10).max(1);
        let down = total.saturating_sub(up + plateau).max(1);
        let schedules: Vec<(&str, Arc<dyn LrSchedule>)> = vec![
            ("stepwise", Arc::new(Stepwise { lr0: eta, decay: 0.5, period: (total / 3).max(1) })),
            ("cyclical", Arc::new(Cyclical { lr_min: eta / 10.0, lr_max: eta, half_cycle: ipe.max(1) })),
            (
                "trapezoid",
                Arc::new(Trapezoid { lr_min: eta / 10.0, lr_max: eta, ramp_up: up, plateau, ramp_down: down }),
            ),
        ];
        let mut lrs = Table::new(&["schedule", "t", "lr"]);
        let mut summary = Table::new(&["schedule", "spec", "final_loss", "final_accuracy", "val_accuracy"]);
        for (name, schedule) in schedules {
            let cfg = ctx.train_config(batch, schedule.clone(), noise, epochs, None)?;
            let log = ctx.train(cfg.clone(), name)?;
            let emitted = ctx.emit(name, &cfg, &log, &[])?;
            for s in log.summaries() {
                lrs.row([name.to_string(), s.t.to_string(), num(s.lr)]);
            }
            let last = emitted.eval.last().expect("final evaluation is always recorded");
            summary.row([
                name.to_string(),
                schedule.describe(),
                num(last.full_loss),
                num(last.accuracy),
                opt(last.val_accuracy),
            ]);
        }
        ctx.out.write("schedules.csv", &lrs.into_bytes())?;
        ctx.out.write("summary.csv", &summary.into_bytes())
    }
}
