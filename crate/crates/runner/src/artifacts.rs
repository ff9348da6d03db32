//! CSV emission. Floats are written in Rust's shortest round-trip form;
//! undefined values are blank.

use sgd_walk_core::metrics::{EpochSummary, StepMetrics};
use sgd_walk_core::optim::TrajectoryLog;
use sgd_walk_core::walk::InterpolationSlice;

use crate::error::Result;

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "minibatch_loss", "full_loss", "lr", "cosine", "dist_init", "param_norm"];
pub const INTERP_HEADER: [&str; 3] = ["t", "alpha", "loss"];
pub const EPOCHS_HEADER: [&str; 8] = [
    "epoch",
    "mean_height",
    "height_sem",
    "barrier_count",
    "significant_barrier_count",
    "mean_cosine",
    "end_distance",
    "end_param_norm",
];
pub const EVAL_HEADER: [&str; 7] = ["t", "epoch", "full_loss", "accuracy", "val_accuracy", "dist_init", "param_norm"];
pub const CURVATURE_HEADER: [&str; 5] = ["epoch", "spectral_norm", "converged", "power_iters", "val_accuracy"];
pub const RATES_HEADER: [&str; 4] = ["lambda", "eta", "rate", "class"];

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// In-memory CSV table with a fixed header.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

pub fn trajectory_csv(log: &TrajectoryLog, steps: &[StepMetrics]) -> Vec<u8> {
    let mut table = Table::new(&TRAJECTORY_HEADER);
    for (s, m) in log.summaries().iter().zip(steps) {
        debug_assert_eq!(s.t, m.t);
        table.row([
            s.t.to_string(),
            num(s.minibatch_loss),
            opt(s.full_loss),
            num(s.lr),
            opt(m.cosine),
            num(m.dist_init),
            num(m.param_norm),
        ]);
    }
    table.into_bytes()
}

pub fn interp_csv(slices: &[InterpolationSlice]) -> Vec<u8> {
    let mut table = Table::new(&INTERP_HEADER);
    for s in slices {
        for (a, l) in s.alphas.iter().zip(&s.losses) {
            table.row([s.t.to_string(), num(*a), num(*l)]);
        }
    }
    table.into_bytes()
}

pub fn epochs_csv(summaries: &[EpochSummary]) -> Vec<u8> {
    let mut table = Table::new(&EPOCHS_HEADER);
    for e in summaries {
        table.row([
            e.epoch.to_string(),
            opt(e.mean_height),
            opt(e.height_sem),
            e.barrier_count.to_string(),
            e.significant_barrier_count.to_string(),
            opt(e.mean_cosine),
            num(e.end_distance),
            num(e.end_param_norm),
        ]);
    }
    table.into_bytes()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub t: u64,
    pub epoch: u64,
    pub full_loss: f64,
    pub accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub dist_init: f64,
    pub param_norm: f64,
}

pub fn eval_csv(rows: &[EvalRow]) -> Vec<u8> {
    let mut table = Table::new(&EVAL_HEADER);
    for r in rows {
        table.row([
            r.t.to_string(),
            r.epoch.to_string(),
            num(r.full_loss),
            num(r.accuracy),
            opt(r.val_accuracy),
            num(r.dist_init),
            num(r.param_norm),
        ]);
    }
    table.into_bytes()
}

/// Rows of a CSV file as header-keyed string maps, for readers and tests.
pub fn read_rows(path: &std::path::Path) -> Result<Vec<std::collections::BTreeMap<String, String>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, 0, e))?.clone();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, i + 1, e))?;
        rows.push(header.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect());
    }
    Ok(rows)
}

pub(crate) fn csv_error(path: &std::path::Path, row: usize, e: csv::Error) -> crate::error::RunError {
    if let csv::ErrorKind::Io(io) = e.kind() {
        if io.kind() == std::io::ErrorKind::NotFound {
            return crate::error::RunError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(io.kind(), io.to_string()),
            };
        }
    }
    crate::error::RunError::Csv {
        file: path.to_path_buf(),
        row,
        message: e.to_string(),
    }
}
