//! Datasets: IDX ingestion, synthetic Gaussian blobs and seeded epoch batching.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::net::Batch;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Batch,
    num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Batch, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument("need at least 2 classes".into()));
        }
        if let Some(&y) = samples.labels().iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset {
            samples,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// The whole dataset as one batch, in storage order.
    pub fn as_batch(&self) -> &Batch {
        &self.samples
    }

    /// First `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len()).max(1);
        let idx: Vec<usize> = (0..n).collect();
        Dataset {
            samples: self.samples.gather(&idx),
            num_classes: self.num_classes,
        }
    }

    /// Split into (first `len - n_tail`, last `n_tail`) samples.
    pub fn split_tail(&self, n_tail: usize) -> Result<(Dataset, Dataset)> {
        if n_tail == 0 || n_tail >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot hold out {n_tail} of {} samples",
                self.len()
            )));
        }
        let cut = self.len() - n_tail;
        let head: Vec<usize> = (0..cut).collect();
        let tail: Vec<usize> = (cut..self.len()).collect();
        Ok((
            Dataset {
                samples: self.samples.gather(&head),
                num_classes: self.num_classes,
            },
            Dataset {
                samples: self.samples.gather(&tail),
                num_classes: self.num_classes,
            },
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub shuffle_seed: u64,
    pub drop_last: bool,
}

impl SamplerConfig {
    pub fn full_batch(n: usize) -> Self {
        SamplerConfig {
            batch_size: n,
            shuffle_seed: 0,
            drop_last: false,
        }
    }

    pub fn batches_per_epoch(&self, n: usize) -> usize {
        if self.drop_last {
            n / self.batch_size
        } else {
            n.div_ceil(self.batch_size)
        }
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::ShortRead {
                path: self.path.to_path_buf(),
                offset: self.bytes.len() as u64,
                needed: (n - (self.bytes.len() - self.pos)) as u64,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let observed = self.u32_be()?;
        if observed != expected {
            return Err(Error::BadMagic {
                path: self.path.to_path_buf(),
                observed,
                expected,
            });
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parse an IDX image file (magic 0x803) and label file (magic 0x801).
/// Pixels are scaled by 1/255.
pub fn load_idx(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<Dataset> {
    let img_bytes = read_file(images_path)?;
    let lbl_bytes = read_file(labels_path)?;
    parse_idx(images_path, &img_bytes, labels_path, &lbl_bytes, limit)
}

pub fn parse_idx(
    images_path: &Path,
    images: &[u8],
    labels_path: &Path,
    labels: &[u8],
    limit: Option<usize>,
) -> Result<Dataset> {
    let mut img = Reader {
        path: images_path,
        bytes: images,
        pos: 0,
    };
    img.magic(IDX_IMAGES_MAGIC)?;
    let n_img = img.u32_be()? as usize;
    let rows = img.u32_be()? as usize;
    let cols = img.u32_be()? as usize;

    let mut lbl = Reader {
        path: labels_path,
        bytes: labels,
        pos: 0,
    };
    lbl.magic(IDX_LABELS_MAGIC)?;
    let n_lbl = lbl.u32_be()? as usize;

    let take_img = limit.map_or(n_img, |l| l.min(n_img));
    let take_lbl = limit.map_or(n_lbl, |l| l.min(n_lbl));
    if take_img != take_lbl {
        return Err(Error::CountMismatch {
            images: take_img,
            labels: take_lbl,
        });
    }
    let dim = rows * cols;
    if take_img == 0 || dim == 0 {
        return Err(Error::Format {
            path: images_path.to_path_buf(),
            message: "no samples".into(),
        });
    }
    let pixels = img.take(take_img * dim)?;
    let features: Vec<f64> = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let label_bytes = lbl.take(take_lbl)?;
    let label_vec: Vec<usize> = label_bytes.iter().map(|&b| usize::from(b)).collect();
    let num_classes = label_vec.iter().copied().max().unwrap_or(0).max(1) + 1;
    Dataset::new(Batch::new(features, dim, label_vec)?, num_classes)
}

/// Unit class directions: the first `k` coordinate axes when `d >= k`,
/// otherwise normalized Gaussian draws.
fn class_directions(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            if d >= k {
                let mut u = vec![0.0; d];
                u[c] = 1.0;
                u
            } else {
                let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            }
        })
        .collect()
}

/// `k` Gaussian blobs with unit noise, class `c` centred at `separation * u_c`.
/// Samples are interleaved by class so every prefix is balanced.
pub fn synth_blobs(seed: u64, n_per_class: usize, k: usize, d: usize, separation: f64) -> Result<Dataset> {
    if k < 2 || d < 2 || n_per_class == 0 {
        return Err(Error::InvalidArgument(format!(
            "blobs need k >= 2, d >= 2, n >= 1 (got k={k}, d={d}, n={n_per_class})"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "separation must be finite and non-negative, got {separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = class_directions(&mut rng, k, d);
    let mut features = Vec::with_capacity(n_per_class * k * d);
    let mut labels = Vec::with_capacity(n_per_class * k);
    for _ in 0..n_per_class {
        for (c, u) in dirs.iter().enumerate() {
            for &uj in u {
                let noise: f64 = rng.sample(StandardNormal);
                features.push(separation * uj + noise);
            }
            labels.push(c);
        }
    }
    Dataset::new(Batch::new(features, d, labels)?, k)
}

/// Index blocks for one epoch. Full-batch sampling keeps storage order.
pub fn epoch_indices(n: usize, sampler: &SamplerConfig, epoch: u64) -> Result<Vec<Vec<usize>>> {
    let b = sampler.batch_size;
    if b == 0 || b > n {
        return Err(Error::InvalidArgument(format!(
            "batch size {b} must be in 1..={n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    if b < n {
        let mut rng = ChaCha8Rng::seed_from_u64(sampler.shuffle_seed);
        rng.set_stream(epoch);
        perm.shuffle(&mut rng);
    }
    Ok(perm
        .chunks(b)
        .filter(|c| !(sampler.drop_last && c.len() < b))
        .map(<[usize]>::to_vec)
        .collect())
}

pub fn epoch_batches(dataset: &Dataset, sampler: &SamplerConfig, epoch: u64) -> Result<Vec<Batch>> {
    Ok(epoch_indices(dataset.len(), sampler, epoch)?
        .iter()
        .map(|idx| dataset.as_batch().gather(idx))
        .collect())
}
