#![allow(dead_code)]

use sgd_walk::ExperimentConfig;

/// A configuration small enough for every recipe to finish in about a second.
pub fn small(name: &str, seed: u64) -> ExperimentConfig {
    let text = format!(
        r#"
[experiment]
name = "{name}"
master_seed = {seed}

[data]
train_size = 200
holdout = 40
blobs_classes = 4
blobs_dim = 8

[model]
hidden = [16]

[train]
batch_size = 20
epochs = 2
tune_iterations = 10

[analysis]
gd_iterations = 12
slice_iterations = 5
cosine_batch_sizes = [0, 8]
cosine_lr_batch = 8
cosine_iterations = 20
smoothing_window = 5
iso_iterations = 10
curvature_subset = 50
power_iters = 20
quad_steps = 10
"#
    );
    ExperimentConfig::from_toml(&text).unwrap()
}
