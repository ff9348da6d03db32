//! Update rules, learning-rate schedules and the recording training loop.

pub mod noise;
pub mod schedule;
pub mod train;
pub mod trajectory;

pub use noise::{freeze_noise_scale, isotropic_grad, max_gradient_variance, NoiseConfig, NoiseMode};
pub use schedule::{Constant, Cyclical, LrSchedule, ScheduleRegistry, Stepwise, Trapezoid};
pub use train::{gd_step, train, TrainConfig};
pub use trajectory::{RunMeta, SpillReader, SpillWriter, StepRecord, StepSummary, TrajectoryLog};

/// Learning rate of `schedule` at iteration `t`.
pub fn lr_at(schedule: &dyn LrSchedule, t: u64) -> f64 {
    schedule.lr_at(t)
}
