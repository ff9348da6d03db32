//! Named experiment recipes.
//!
//! Each recipe implements [`Recipe`] and is registered by name in a
//! [`RecipeRegistry`]; the CLI picks one at runtime from `--experiment`.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use sgd_walk_core::data::{load_idx, synth_blobs, Dataset, SamplerConfig};
use sgd_walk_core::metrics::{epoch_summaries, step_metrics, EpochSummary, StepMetrics};
use sgd_walk_core::net::{accuracy, forward_loss, MlpSpec};
use sgd_walk_core::objective::MlpObjective;
use sgd_walk_core::optim::{train, Constant, LrSchedule, NoiseConfig, ScheduleRegistry, TrainConfig, TrajectoryLog};
use sgd_walk_core::walk::{slice_all, InterpolationSlice};

use crate::artifacts::{epochs_csv, eval_csv, interp_csv, trajectory_csv, EvalRow};
use crate::config::{DataSource, ExperimentConfig};
use crate::error::{Result, RunError};
use crate::output::{sha256_hex, RunManifest, RunOutput};
use crate::seeds::Seeds;

mod cosine;
mod height;
mod noise;
mod quad;
mod schedules;
mod spectral;
mod walk;

pub trait Recipe: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn needs_data(&self) -> bool {
        true
    }
    fn run(&self, ctx: &mut RunContext) -> Result<()>;
}

pub struct RecipeRegistry {
    recipes: BTreeMap<&'static str, Box<dyn Recipe>>,
}

impl RecipeRegistry {
    pub fn empty() -> Self {
        RecipeRegistry { recipes: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(walk::WalkGd));
        reg.register(Box::new(walk::WalkSgd));
        reg.register(Box::new(walk::BarrierCensus));
        reg.register(Box::new(height::HeightVsLr));
        reg.register(Box::new(cosine::CosineStudy));
        reg.register(Box::new(noise::IsoNoise));
        reg.register(Box::new(spectral::SpectralTrack));
        reg.register(Box::new(quad::QuadRates));
        reg.register(Box::new(schedules::ScheduleCompare));
        reg
    }

    pub fn register(&mut self, recipe: Box<dyn Recipe>) {
        self.recipes.insert(recipe.name(), recipe);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Recipe> {
        self.recipes.get(name).map(|r| r.as_ref()).ok_or_else(|| {
            RunError::Config(format!(
                "unknown experiment '{name}'; known: {}",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.recipes.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Recipe> + '_ {
        self.recipes.values().map(|r| r.as_ref())
    }
}

pub struct Data {
    pub train: Dataset,
    pub val: Option<Dataset>,
}

pub fn load_data(config: &ExperimentConfig, seeds: &Seeds) -> Result<Data> {
    let d = &config.data;
    let total = d.train_size + d.holdout;
    let all = match d.source {
        DataSource::Blobs => synth_blobs(
            seeds.data,
            total / d.blobs_classes,
            d.blobs_classes,
            d.blobs_dim,
            d.blobs_separation,
        )?,
        DataSource::Idx => {
            let images = d.images.as_deref().expect("validated");
            let labels = d.labels.as_deref().expect("validated");
            let ds = load_idx(images, labels, Some(total))?;
            if ds.len() < total {
                return Err(RunError::Config(format!(
                    "IDX files hold {} samples, need train_size + holdout = {total}",
                    ds.len()
                )));
            }
            ds
        }
    };
    if d.holdout == 0 {
        return Ok(Data { train: all, val: None });
    }
    let (train, val) = all.split_tail(d.holdout)?;
    Ok(Data { train, val: Some(val) })
}

/// What a recipe sees: configuration, seeds, data, and the run writer.
pub struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub seeds: Seeds,
    data: Option<Data>,
    pub out: RunOutput,
}

/// Per-run analysis products handed back to recipes.
pub struct Emitted {
    pub steps: Vec<StepMetrics>,
    pub slices: Vec<InterpolationSlice>,
    pub epochs: Vec<EpochSummary>,
    pub eval: Vec<EvalRow>,
}

impl<'a> RunContext<'a> {
    pub fn data(&self) -> Result<&Data> {
        self.data
            .as_ref()
            .ok_or_else(|| RunError::Config("this recipe was registered without data".into()))
    }

    pub fn train_set(&self) -> Result<&Dataset> {
        Ok(&self.data()?.train)
    }

    pub fn full_batch(&self) -> Result<usize> {
        Ok(self.train_set()?.len())
    }

    pub fn spec(&self) -> Result<MlpSpec> {
        let train = self.train_set()?;
        let mut layers = vec![train.dim()];
        layers.extend(&self.config.model.hidden);
        layers.push(train.num_classes());
        Ok(MlpSpec::new(layers, self.seeds.init, self.config.model.init_scale)?)
    }

    pub fn noise(&self, text: &str) -> Result<NoiseConfig> {
        crate::config::parse_noise(text, self.seeds.noise)
    }

    /// Training config with `epochs` chosen to cover `iterations` updates when given.
    pub fn train_config(
        &self,
        batch_size: usize,
        schedule: Arc<dyn LrSchedule>,
        noise: NoiseConfig,
        epochs: u64,
        max_iterations: Option<u64>,
    ) -> Result<TrainConfig> {
        let n = self.full_batch()?;
        let batch_size = if noise.is_isotropic() { n } else { batch_size };
        let sampler = SamplerConfig {
            batch_size,
            shuffle_seed: self.seeds.shuffle,
            drop_last: self.config.train.drop_last,
        };
        let epochs = match max_iterations {
            Some(iters) => epochs.max(iters.div_ceil(sampler.batches_per_epoch(n) as u64)).max(1),
            None => epochs,
        };
        Ok(TrainConfig {
            spec: self.spec()?,
            sampler,
            schedule,
            noise,
            epochs,
            max_iterations,
            record_full_gradient_cosine: false,
            eval_period_epochs: self.config.train.eval_period,
            spill: None,
        })
    }

    /// Train, spilling under `dir` when the config asks for it.
    pub fn train(&mut self, mut cfg: TrainConfig, dir: &str) -> Result<TrajectoryLog> {
        let start = std::time::Instant::now();
        let spill_rel = rel(dir, "trajectory.spill");
        if let Some(cap) = self.config.train.spill_cap {
            let path = self.out.path(&spill_rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| RunError::io(parent, e))?;
            }
            cfg.spill = Some((path, cap));
        }
        let log = train(&cfg, self.train_set()?)?;
        if log.is_spilled() {
            self.out.adopt(&spill_rel)?;
        }
        self.out.record_phase(&rel(dir, "train"), start.elapsed().as_secs_f64());
        Ok(log)
    }

    /// Constant rate for `label`: tuned from the grid when `train.lr = "auto"`,
    /// otherwise the configured constant.
    pub fn base_rate(&mut self, label: &str, batch_size: usize, noise: &NoiseConfig) -> Result<f64> {
        let text = self.config.train.lr.trim();
        if text != "auto" {
            let schedule = ScheduleRegistry::builtin()
                .parse(text)
                .map_err(|e| RunError::Config(e.to_string()))?;
            if schedule.kind() != "constant" {
                return Err(RunError::Config(format!(
                    "this recipe needs a constant rate (or \"auto\"), got '{text}'"
                )));
            }
            let lr = schedule.lr_at(0);
            self.out.record_lr(label, lr);
            return Ok(lr);
        }
        let start = std::time::Instant::now();
        let lr = self.tune(batch_size, noise)?;
        self.out.record_phase(&format!("tune {label}"), start.elapsed().as_secs_f64());
        self.out.record_lr(label, lr);
        Ok(lr)
    }

    /// Any configured schedule, or a tuned constant when `train.lr = "auto"`.
    pub fn schedule(&mut self, label: &str, batch_size: usize, noise: &NoiseConfig) -> Result<Arc<dyn LrSchedule>> {
        let text = self.config.train.lr.trim();
        if text == "auto" {
            let lr = self.base_rate(label, batch_size, noise)?;
            return Ok(Arc::new(Constant { lr }));
        }
        let schedule = ScheduleRegistry::builtin()
            .parse(text)
            .map_err(|e| RunError::Config(e.to_string()))?;
        self.out.record_lr(label, schedule.lr_at(0));
        Ok(schedule)
    }

    /// Largest grid rate whose trial run neither blows up nor ends above its
    /// initial loss. A trial blows up when training aborts on a non-finite value
    /// or any recorded loss exceeds `divergence_factor` times the initial loss.
    fn tune(&mut self, batch_size: usize, noise: &NoiseConfig) -> Result<f64> {
        let mut grid = self.config.train.lr_grid.clone();
        grid.sort_by(|a, b| b.total_cmp(a));
        let spec = self.spec()?;
        let l0 = forward_loss(&spec, &sgd_walk_core::net::init_params(&spec), self.train_set()?.as_batch())?;
        let ceiling = self.config.train.divergence_factor * l0;
        for &lr in &grid {
            let cfg = self.train_config(
                batch_size,
                Arc::new(Constant { lr }),
                *noise,
                1,
                Some(self.config.train.tune_iterations),
            )?;
            let log = match train(&cfg, self.train_set()?) {
                Ok(log) => log,
                Err(sgd_walk_core::Error::Diverged { .. }) | Err(sgd_walk_core::Error::NonFinite { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            let blew_up = log.summaries().iter().any(|s| {
                s.minibatch_loss > ceiling || s.full_loss.is_some_and(|l| l > ceiling)
            });
            let final_loss = log.final_eval().map(|(l, _)| l).unwrap_or(f64::INFINITY);
            if !blew_up && final_loss < l0 {
                return Ok(lr);
            }
        }
        Err(sgd_walk_core::Error::Diverged {
            iteration: 0,
            last_good: None,
            reason: format!("every rate in the tuning grid {grid:?} diverged"),
        }
        .into())
    }

    /// Write trajectory.csv, eval.csv, interp.csv (when slicing) and epochs.csv under `dir`.
    pub fn emit(
        &mut self,
        dir: &str,
        cfg: &TrainConfig,
        log: &TrajectoryLog,
        slice_ranges: &[Range<u64>],
    ) -> Result<Emitted> {
        let start = std::time::Instant::now();
        let steps = step_metrics(log)?;
        let eval = self.eval_rows(cfg, log, &steps)?;
        let train = self.train_set()?;
        let objective = MlpObjective::new(&cfg.spec, train.as_batch());
        let mut slices = Vec::new();
        for range in merge_ranges(slice_ranges, log.len()) {
            slices.extend(slice_all(log, &objective, range)?);
        }
        let epochs = epoch_summaries(&slices, &steps, &log.epoch_ranges(), self.config.analysis.significance_rel)?;
        self.out.write(&rel(dir, "trajectory.csv"), &trajectory_csv(log, &steps))?;
        self.out.write(&rel(dir, "eval.csv"), &eval_csv(&eval))?;
        if !slices.is_empty() {
            self.out.write(&rel(dir, "interp.csv"), &interp_csv(&slices))?;
        }
        self.out.write(&rel(dir, "epochs.csv"), &epochs_csv(&epochs))?;
        self.out.record_phase(&rel(dir, "analyse"), start.elapsed().as_secs_f64());
        Ok(Emitted { steps, slices, epochs, eval })
    }

    fn eval_rows(&self, cfg: &TrainConfig, log: &TrajectoryLog, steps: &[StepMetrics]) -> Result<Vec<EvalRow>> {
        let ipe = log.meta.iterations_per_epoch.max(1);
        let val = self.data()?.val.as_ref();
        let val_acc = |theta: &[f64]| -> Result<Option<f64>> {
            match val {
                Some(v) => Ok(Some(accuracy(&cfg.spec, theta, v.as_batch())?)),
                None => Ok(None),
            }
        };
        let mut rows = Vec::new();
        for s in log.summaries() {
            if let (Some(full_loss), Some(acc)) = (s.full_loss, s.accuracy) {
                let m = &steps[s.t as usize];
                rows.push(EvalRow {
                    t: s.t,
                    epoch: s.t / ipe,
                    full_loss,
                    accuracy: acc,
                    val_accuracy: val_acc(&log.theta(s.t)?)?,
                    dist_init: m.dist_init,
                    param_norm: m.param_norm,
                });
            }
        }
        if let Some((full_loss, acc)) = log.final_eval() {
            let t = log.len();
            let m = &steps[t as usize];
            rows.push(EvalRow {
                t,
                epoch: t / ipe,
                full_loss,
                accuracy: acc,
                val_accuracy: val_acc(log.final_theta())?,
                dist_init: m.dist_init,
                param_norm: m.param_norm,
            });
        }
        Ok(rows)
    }
}

/// `dir/name`, or `name` when `dir` is empty.
pub fn rel(dir: &str, name: &str) -> String {
    if dir.is_empty() {
        name.to_string()
    } else {
        format!("{dir}/{name}")
    }
}

/// Sort, clip to `0..limit`, and merge overlapping or touching ranges.
pub fn merge_ranges(ranges: &[Range<u64>], limit: u64) -> Vec<Range<u64>> {
    let mut rs: Vec<Range<u64>> = ranges
        .iter()
        .map(|r| r.start.min(limit)..r.end.min(limit))
        .filter(|r| !r.is_empty())
        .collect();
    rs.sort_by_key(|r| r.start);
    let mut out: Vec<Range<u64>> = Vec::new();
    for r in rs {
        match out.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => out.push(r),
        }
    }
    out
}

/// Run one experiment into `out_dir`, which must be absent or empty.
///
/// On failure the manifest is still written, listing completed phases and
/// the files emitted so far.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    run_with_registry(&RecipeRegistry::builtin(), config, out_dir)
}

pub fn run_with_registry(registry: &RecipeRegistry, config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    config.validate()?;
    let recipe = registry.get(&config.experiment.name)?;
    if let Ok(mut entries) = std::fs::read_dir(out_dir) {
        if entries.next().is_some() {
            return Err(RunError::Config(format!("output directory {} is not empty", out_dir.display())));
        }
    }
    let seeds = Seeds::from_master(config.experiment.master_seed);
    let digest = sha256_hex(config.canonical().as_bytes());
    let mut out = RunOutput::create(out_dir)?;
    let data = if recipe.needs_data() {
        match out.phase("load data", |_| load_data(config, &seeds)) {
            Ok(d) => Some(d),
            Err(e) => {
                out.finish(recipe.name(), config.experiment.master_seed, digest, format!("failed: {e}"))?;
                return Err(e);
            }
        }
    } else {
        None
    };
    let mut ctx = RunContext { config, seeds, data, out };
    let result = recipe.run(&mut ctx);
    let status = match &result {
        Ok(()) => "complete".to_string(),
        Err(e) => format!("failed: {e}"),
    };
    let manifest = ctx.out.finish(recipe.name(), config.experiment.master_seed, digest, status)?;
    result.map(|()| manifest)
}
