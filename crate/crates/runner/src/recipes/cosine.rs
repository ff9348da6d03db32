use std::sync::Arc;

use sgd_walk_core::metrics::smoothed_series;
use sgd_walk_core::optim::{Constant, NoiseConfig};

use super::{Recipe, RunContext};
use crate::artifacts::{num, Table};
use crate::error::Result;

/// Consecutive-gradient cosine under two sweeps sharing one base rate (tuned
/// at `cosine_lr_batch`): batch sizes at the base rate, and rate multipliers
/// at `cosine_lr_batch`. Every run takes `cosine_iterations` updates.
pub struct CosineStudy;

struct Run {
    grid: &'static str,
    batch: usize,
    factor: f64,
}

impl Recipe for CosineStudy {
    fn name(&self) -> &'static str {
        "cosine-study"
    }

    fn about(&self) -> &'static str {
        "gradient cosine across batch sizes and learning rates"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let a = ctx.config.analysis.clone();
        let n = ctx.full_batch()?;
        let base = ctx.base_rate("cosine", a.cosine_lr_batch, &NoiseConfig::none())?;
        let mut runs = Vec::new();
        for &b in &a.cosine_batch_sizes {
            runs.push(Run { grid: "batch", batch: if b == 0 { n } else { b }, factor: 1.0 });
        }
        for &f in &a.cosine_lr_factors {
            runs.push(Run { grid: "lr", batch: a.cosine_lr_batch, factor: f });
        }

        let mut series = Table::new(&["run", "batch_size", "lr", "t", "cosine", "smoothed"]);
        let mut summary = Table::new(&["grid", "run", "batch_size", "lr", "mean_cosine", "mean_smoothed_cosine"]);
        let mut done: Vec<(String, f64, f64)> = Vec::new();
        for run in runs {
            let lr = base * run.factor;
            let name = format!("b{}-lr-x{}", run.batch, run.factor);
            let (mean, mean_smoothed) = match done.iter().find(|(d, _, _)| *d == name) {
                Some(&(_, m, s)) => (m, s),
                None => {
                    let cfg = ctx.train_config(
                        run.batch,
                        Arc::new(Constant { lr }),
                        NoiseConfig::none(),
                        1,
                        Some(a.cosine_iterations),
                    )?;
                    let log = ctx.train(cfg.clone(), &name)?;
                    let emitted = ctx.emit(&name, &cfg, &log, &[])?;
                    let defined: Vec<(u64, f64)> =
                        emitted.steps.iter().filter_map(|s| s.cosine.map(|c| (s.t, c))).filter(|(t, _)| *t < log.len()).collect();
                    let values: Vec<f64> = defined.iter().map(|(_, c)| *c).collect();
                    let smoothed = smoothed_series(&values, a.smoothing_window)?;
                    for ((t, c), s) in defined.iter().zip(&smoothed) {
                        series.row([name.clone(), run.batch.to_string(), num(lr), t.to_string(), num(*c), num(*s)]);
                    }
                    let m = mean_of(&values);
                    let s = mean_of(&smoothed);
                    done.push((name.clone(), m, s));
                    (m, s)
                }
            };
            summary.row([
                run.grid.to_string(),
                name,
                run.batch.to_string(),
                num(lr),
                num(mean),
                num(mean_smoothed),
            ]);
        }
        ctx.out.write("cosine.csv", &series.into_bytes())?;
        ctx.out.write("summary.csv", &summary.into_bytes())
    }
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
