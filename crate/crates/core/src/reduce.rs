//! Fixed-order summation.
//!
//! Every sum over samples goes through these helpers so the result does not
//! depend on how many worker threads produced the per-chunk partials: items
//! are grouped into consecutive chunks of [`CHUNK`], each chunk is summed left
//! to right, and chunk partials are combined by recursive halving.

use rayon::prelude::*;

pub const CHUNK: usize = 64;

/// Pairwise combine of already-ordered partial sums.
pub fn pairwise_sum(parts: &[f64]) -> f64 {
    match parts.len() {
        0 => 0.0,
        1 => parts[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&parts[..mid]) + pairwise_sum(&parts[mid..])
        }
    }
}

/// Deterministic sum of a slice of scalars.
pub fn det_sum(values: &[f64]) -> f64 {
    let partials: Vec<f64> = values
        .chunks(CHUNK)
        .map(|c| c.iter().fold(0.0, |acc, v| acc + v))
        .collect();
    pairwise_sum(&partials)
}

/// Pairwise combine of ordered vector partials, in place into the first one.
pub fn pairwise_sum_vecs(mut parts: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    if parts.is_empty() {
        return None;
    }
    fn go(parts: &mut [Vec<f64>]) {
        let n = parts.len();
        if n <= 1 {
            return;
        }
        let mid = n / 2;
        let (left, right) = parts.split_at_mut(mid);
        go(left);
        go(right);
        for (a, b) in left[0].iter_mut().zip(right[0].iter()) {
            *a += *b;
        }
    }
    go(&mut parts);
    Some(parts.swap_remove(0))
}

/// Map each chunk of `0..n` (in parallel) and hand back the results in chunk order.
pub fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect()
}
