//! Per-iteration training records and the binary spill file.
//!
//! Spill file layout (all integers and floats little-endian):
//!
//! ```text
//! header:  b"SGDWALK1" | u64 P | 32-byte config digest
//! record:  u64 t | f64 lr | f64 minibatch_loss | P x f64 theta_t | P x f64 g_t
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::params::ParamVector;

pub const SPILL_MAGIC: &[u8; 8] = b"SGDWALK1";
pub const SPILL_HEADER_LEN: u64 = 8 + 8 + 32;

pub fn spill_record_len(p: usize) -> u64 {
    24 + 16 * p as u64
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub lr: f64,
    pub minibatch_loss: f64,
    pub theta: ParamVector,
    pub grad: ParamVector,
}

/// Scalar side of a step, always kept in memory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSummary {
    pub t: u64,
    pub epoch: u64,
    pub lr: f64,
    pub minibatch_loss: f64,
    /// Full-dataset loss at `theta_t`, when evaluated.
    pub full_loss: Option<f64>,
    /// Full-dataset accuracy at `theta_t`, when evaluated.
    pub accuracy: Option<f64>,
    /// Cosine between consecutive full-dataset gradients, when tracked.
    pub full_grad_cosine: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMeta {
    pub config_digest: [u8; 32],
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub noise_seed: u64,
    pub noise_sigma2: Option<f64>,
    pub iterations_per_epoch: u64,
}

pub struct SpillWriter {
    out: BufWriter<File>,
    path: PathBuf,
    p: usize,
    written: u64,
}

impl SpillWriter {
    pub fn create(path: &Path, p: usize, digest: &[u8; 32]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut header = Vec::with_capacity(SPILL_HEADER_LEN as usize);
        header.extend_from_slice(SPILL_MAGIC);
        header.extend_from_slice(&(p as u64).to_le_bytes());
        header.extend_from_slice(digest);
        out.write_all(&header).map_err(|e| Error::io(path, e))?;
        Ok(SpillWriter {
            out,
            path: path.to_path_buf(),
            p,
            written: 0,
        })
    }

    pub fn append(&mut self, rec: &StepRecord) -> Result<()> {
        if rec.theta.len() != self.p || rec.grad.len() != self.p {
            return Err(Error::DimensionMismatch {
                context: "spill record",
                expected: self.p,
                actual: rec.theta.len().max(rec.grad.len()),
            });
        }
        if rec.t != self.written {
            return Err(Error::Misaligned(format!(
                "spill record {} written at position {}",
                rec.t, self.written
            )));
        }
        let mut buf = Vec::with_capacity(spill_record_len(self.p) as usize);
        buf.extend_from_slice(&rec.t.to_le_bytes());
        buf.extend_from_slice(&rec.lr.to_le_bytes());
        buf.extend_from_slice(&rec.minibatch_loss.to_le_bytes());
        for v in rec.theta.iter().chain(rec.grad.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf).map_err(|e| Error::io(&self.path, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<SpillReader> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        drop(self.out);
        SpillReader::open(&self.path)
    }
}

/// Random-access reader over a spill file.
#[derive(Debug)]
pub struct SpillReader {
    file: Mutex<File>,
    path: PathBuf,
    p: usize,
    digest: [u8; 32],
    len: u64,
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

impl SpillReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut header = [0u8; SPILL_HEADER_LEN as usize];
        file.read_exact(&mut header).map_err(|_| Error::ShortRead {
            path: path.to_path_buf(),
            offset: 0,
            needed: SPILL_HEADER_LEN,
        })?;
        if &header[..8] != SPILL_MAGIC {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: "not a trajectory spill file (bad magic)".into(),
            });
        }
        let p = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&header[16..48]);
        let size = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let body = size - SPILL_HEADER_LEN;
        let rec = spill_record_len(p);
        if !body.is_multiple_of(rec) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("truncated record at byte offset {}", SPILL_HEADER_LEN + body / rec * rec),
            });
        }
        Ok(SpillReader {
            file: Mutex::new(file),
            path: path.to_path_buf(),
            p,
            digest,
            len: body / rec,
        })
    }

    pub fn param_count(&self) -> usize {
        self.p
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read(&self, t: u64) -> Result<StepRecord> {
        if t >= self.len {
            return Err(Error::InvalidArgument(format!(
                "record {t} out of range (file holds {})",
                self.len
            )));
        }
        let rec_len = spill_record_len(self.p);
        let mut buf = vec![0u8; rec_len as usize];
        {
            let mut f = self.file.lock().unwrap();
            f.seek(SeekFrom::Start(SPILL_HEADER_LEN + t * rec_len))
                .and_then(|_| f.read_exact(&mut buf))
                .map_err(|e| Error::io(&self.path, e))?;
        }
        let p = self.p;
        Ok(StepRecord {
            t: u64::from_le_bytes(buf[0..8].try_into().unwrap()),
            lr: f64_at(&buf, 8),
            minibatch_loss: f64_at(&buf, 16),
            theta: (0..p).map(|j| f64_at(&buf, 24 + 8 * j)).collect(),
            grad: (0..p).map(|j| f64_at(&buf, 24 + 8 * (p + j))).collect(),
        })
    }
}

#[derive(Debug)]
enum Store {
    Memory(Vec<(ParamVector, ParamVector)>),
    Spilled(SpillReader),
}

/// Everything recorded by one training run.
///
/// Holds `T` step records (`theta_t`, `g_t`, `lr_t` for `t < T`) plus the
/// final iterate `theta_T`, so `theta(t)` is defined for `t` in `0..=T`.
#[derive(Debug)]
pub struct TrajectoryLog {
    pub meta: RunMeta,
    theta0: ParamVector,
    summaries: Vec<StepSummary>,
    store: Store,
    final_theta: ParamVector,
    final_eval: Option<(f64, f64)>,
}

pub(crate) struct LogBuilder {
    log: TrajectoryLog,
    spill_cap: Option<(PathBuf, usize)>,
    writer: Option<SpillWriter>,
}

impl LogBuilder {
    pub(crate) fn new(meta: RunMeta, theta0: ParamVector, spill: Option<(PathBuf, usize)>) -> Self {
        LogBuilder {
            log: TrajectoryLog {
                meta,
                final_theta: theta0.clone(),
                theta0,
                summaries: Vec::new(),
                store: Store::Memory(Vec::new()),
                final_eval: None,
            },
            spill_cap: spill,
            writer: None,
        }
    }

    pub(crate) fn push(&mut self, summary: StepSummary, theta: ParamVector, grad: ParamVector) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            w.append(&StepRecord {
                t: summary.t,
                lr: summary.lr,
                minibatch_loss: summary.minibatch_loss,
                theta,
                grad,
            })?;
        } else if let Store::Memory(records) = &mut self.log.store {
            records.push((theta, grad));
            if let Some((path, cap)) = &self.spill_cap {
                if records.len() > *cap {
                    let mut w = SpillWriter::create(path, self.log.theta0.len(), &self.log.meta.config_digest)?;
                    for (s, (th, g)) in self.log.summaries.iter().chain([&summary]).zip(records.drain(..)) {
                        w.append(&StepRecord {
                            t: s.t,
                            lr: s.lr,
                            minibatch_loss: s.minibatch_loss,
                            theta: th,
                            grad: g,
                        })?;
                    }
                    self.writer = Some(w);
                }
            }
        }
        self.log.summaries.push(summary);
        Ok(())
    }

    pub(crate) fn finish(mut self, final_theta: ParamVector, final_eval: Option<(f64, f64)>) -> Result<TrajectoryLog> {
        if let Some(w) = self.writer.take() {
            self.log.store = Store::Spilled(w.finish()?);
        }
        self.log.final_theta = final_theta;
        self.log.final_eval = final_eval;
        Ok(self.log)
    }
}

impl TrajectoryLog {
    /// Number of recorded updates `T`.
    pub fn len(&self) -> u64 {
        self.summaries.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    pub fn is_spilled(&self) -> bool {
        matches!(self.store, Store::Spilled(_))
    }

    pub fn theta0(&self) -> &ParamVector {
        &self.theta0
    }

    pub fn final_theta(&self) -> &ParamVector {
        &self.final_theta
    }

    /// (full-dataset loss, accuracy) at the final iterate.
    pub fn final_eval(&self) -> Option<(f64, f64)> {
        self.final_eval
    }

    pub fn summaries(&self) -> &[StepSummary] {
        &self.summaries
    }

    pub fn record(&self, t: u64) -> Result<StepRecord> {
        let s = self.summaries.get(t as usize).ok_or_else(|| {
            Error::InvalidArgument(format!("iteration {t} out of range (log has {})", self.len()))
        })?;
        match &self.store {
            Store::Memory(records) => {
                let (theta, grad) = &records[t as usize];
                Ok(StepRecord {
                    t,
                    lr: s.lr,
                    minibatch_loss: s.minibatch_loss,
                    theta: theta.clone(),
                    grad: grad.clone(),
                })
            }
            Store::Spilled(reader) => reader.read(t),
        }
    }

    /// `theta_t` for `t` in `0..=T`.
    pub fn theta(&self, t: u64) -> Result<ParamVector> {
        if t == self.len() {
            return Ok(self.final_theta.clone());
        }
        if t == 0 {
            return Ok(self.theta0.clone());
        }
        Ok(self.record(t)?.theta)
    }

    pub fn grad(&self, t: u64) -> Result<ParamVector> {
        Ok(self.record(t)?.grad)
    }

    /// Iteration ranges of each epoch present in the log, in order.
    pub fn epoch_ranges(&self) -> Vec<(u64, Range<u64>)> {
        let mut out: Vec<(u64, Range<u64>)> = Vec::new();
        for s in &self.summaries {
            match out.last_mut() {
                Some((e, r)) if *e == s.epoch => r.end = s.t + 1,
                _ => out.push((s.epoch, s.t..s.t + 1)),
            }
        }
        out
    }
}
