//! Euclidean distance kernels.
//!
//! Rankings are computed on squared distances accumulated in `f64`; the square root is
//! applied only when a [`Neighbor`](crate::Neighbor) is materialized.

use crate::error::{Error, Result};
use crate::types::Vector;

/// Exact Euclidean distance between two vectors of equal dimension.
pub fn euclidean_distance(a: &Vector, b: &Vector) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    Ok(squared_l2(a, b).sqrt())
}

/// Squared Euclidean distance. Callers guarantee equal lengths.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let rem_a = chunks_a.remainder();
    let rem_b = chunks_b.remainder();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for lane in 0..4 {
            let d = ca[lane] as f64 - cb[lane] as f64;
            acc[lane] += d * d;
        }
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in rem_a.iter().zip(rem_b) {
        let d = *x as f64 - *y as f64;
        sum += d * d;
    }
    sum
}

/// Inner product accumulated in `f64`.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let rem_a = chunks_a.remainder();
    let rem_b = chunks_b.remainder();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for lane in 0..4 {
            acc[lane] += ca[lane] as f64 * cb[lane] as f64;
        }
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in rem_a.iter().zip(rem_b) {
        sum += *x as f64 * *y as f64;
    }
    sum
}
