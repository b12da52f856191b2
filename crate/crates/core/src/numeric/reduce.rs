use super::matrix::Matrix;
use crate::{Error, Result};

const LANES: usize = 8;

/// Inner product with independent partial sums so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let a_chunks = a.chunks_exact(LANES);
    let b_chunks = b.chunks_exact(LANES);
    let tail: f64 = a_chunks
        .remainder()
        .iter()
        .zip(b_chunks.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in a_chunks.zip(b_chunks) {
        for l in 0..LANES {
            acc[l] += ca[l] * cb[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Dot products of four rows against one shared vector.
///
/// Each result is bit-identical to [`dot`] on the same pair; sharing the load
/// of `b` across the rows is the only difference.
#[inline]
pub fn dot4(a: [&[f64]; 4], b: &[f64]) -> [f64; 4] {
    let n = b.len();
    let body = n - n % LANES;
    let mut acc = [[0.0f64; LANES]; 4];
    let mut c = 0;
    while c < body {
        let bb = &b[c..c + LANES];
        for (r, row) in a.iter().enumerate() {
            let aa = &row[c..c + LANES];
            for l in 0..LANES {
                acc[r][l] += aa[l] * bb[l];
            }
        }
        c += LANES;
    }
    let mut out = [0.0; 4];
    for (r, row) in a.iter().enumerate() {
        let tail: f64 = row[body..].iter().zip(&b[body..]).map(|(x, y)| x * y).sum();
        out[r] = acc[r].iter().sum::<f64>() + tail;
    }
    out
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Stable softmax of one row, in place. The row must be non-empty and finite.
#[inline]
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = 1.0 / sum;
    for x in row.iter_mut() {
        *x *= inv;
    }
}

/// Softmax over each row, computed with per-row max subtraction.
pub fn row_softmax(m: &Matrix) -> Result<Matrix> {
    if !m.is_finite() {
        return Err(Error::NonFinite { op: "row_softmax" });
    }
    let mut out = m.clone();
    let cols = out.cols();
    for row in out.data_mut().chunks_exact_mut(cols) {
        softmax_in_place(row);
    }
    Ok(out)
}

/// `ln Σ exp(v_j)` via the max-shift identity.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::contract("log_sum_exp", "empty input"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { op: "log_sum_exp" });
    }
    Ok(log_sum_exp_unchecked(v))
}

pub(crate) fn log_sum_exp_unchecked(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `max(v) - mean(v)`; the sampled sparsity measurement over a score row.
pub(crate) fn max_minus_mean(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    max - mean
}
