//! Brute-force references for the test and verification suites.
//!
//! Nothing here calls the library's reduction helpers: each function does its
//! own max shift, exponentials and sums with plain index loops so a bug in the
//! optimized kernels cannot validate itself.

use crate::numeric::Matrix;
use crate::{Error, Result};

fn scaled_score(q_i: &[f64], k: &Matrix, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..q_i.len() {
        s += q_i[c] * k.get(j, c);
    }
    s / (q_i.len() as f64).sqrt()
}

fn distribution(q_i: &[f64], k: &Matrix) -> Vec<f64> {
    let l = k.rows();
    let mut scores = vec![0.0; l];
    let mut max = f64::NEG_INFINITY;
    for j in 0..l {
        scores[j] = scaled_score(q_i, k, j);
        if scores[j] > max {
            max = scores[j];
        }
    }
    let mut total = 0.0;
    for j in 0..l {
        scores[j] = (scores[j] - max).exp();
        total += scores[j];
    }
    for j in 0..l {
        scores[j] /= total;
    }
    scores
}

/// Triple-loop scaled dot-product attention.
pub fn oracle_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix> {
    if q.cols() != k.cols() || k.rows() != v.rows() {
        return Err(Error::shape("oracle_attention", q.shape(), k.shape()));
    }
    let mut out = Matrix::zeros(q.rows(), v.cols());
    for i in 0..q.rows() {
        let p = distribution(q.row(i), k);
        for c in 0..v.cols() {
            let mut acc = 0.0;
            for j in 0..k.rows() {
                acc += p[j] * v.get(j, c);
            }
            out.set(i, c, acc);
        }
    }
    Ok(out)
}

/// Divergence of the uniform distribution from the explicit attention
/// distribution `p` of `q_i`: `Σ_j (1/L) ln((1/L) / p_j)`.
///
/// This is the direction the closed form `lse(s) - mean(s) - ln L` evaluates
/// to. The opposite direction is [`oracle_kl_attention_from_uniform`].
pub fn oracle_kl(q_i: &[f64], k: &Matrix) -> Result<f64> {
    if q_i.len() != k.cols() {
        return Err(Error::shape("oracle_kl", (1, q_i.len()), k.shape()));
    }
    let p = distribution(q_i, k);
    let u = 1.0 / p.len() as f64;
    let mut kl = 0.0;
    for &p_j in &p {
        kl += u * (u / p_j).ln();
    }
    Ok(kl)
}

/// `Σ_j p_j ln(p_j L)`: divergence of the attention distribution from uniform.
pub fn oracle_kl_attention_from_uniform(q_i: &[f64], k: &Matrix) -> Result<f64> {
    if q_i.len() != k.cols() {
        return Err(Error::shape(
            "oracle_kl_attention_from_uniform",
            (1, q_i.len()),
            k.shape(),
        ));
    }
    let p = distribution(q_i, k);
    let l = p.len() as f64;
    let mut kl = 0.0;
    for &p_j in &p {
        if p_j > 0.0 {
            kl += p_j * (p_j * l).ln();
        }
    }
    Ok(kl)
}

/// Stable descending sort, first `k`, returned ascending.
pub fn oracle_topk(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::contract(
            "oracle_topk",
            format!("k = {k} outside 1..={}", scores.len()),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // `sort_by` is stable, so equal scores keep ascending index order.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut picked = order[..k].to_vec();
    picked.sort();
    Ok(picked)
}
