//! Vanilla scaled dot-product attention and the multi-head wrapper.
//!
//! The per-row kernel in [`attend_rows`] is shared with the prob-sparse path so
//! that a full selection reproduces dense attention exactly.

use crate::numeric::{axpy, dot, dot4, matmul, randn_matrix, softmax_in_place, AllocMeter, Matrix, Rng};
use crate::{Error, Result};

/// Query/key/value projections of one head, each `d_x × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWeights {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

impl ProjectionWeights {
    pub fn new(w_q: Matrix, w_k: Matrix, w_v: Matrix) -> Result<Self> {
        for (other, name) in [(&w_k, "w_k"), (&w_v, "w_v")] {
            if other.shape() != w_q.shape() {
                return Err(Error::Config(format!(
                    "projection {name} is {:?}, w_q is {:?}",
                    other.shape(),
                    w_q.shape()
                )));
            }
        }
        Ok(Self { w_q, w_k, w_v })
    }

    /// Unit-normal entries scaled by `1/sqrt(d_x)`.
    pub fn random(d_x: usize, d: usize, rng: &mut Rng) -> Self {
        let s = 1.0 / (d_x as f64).sqrt();
        Self {
            w_q: randn_matrix(d_x, d, rng).scale(s),
            w_k: randn_matrix(d_x, d, rng).scale(s),
            w_v: randn_matrix(d_x, d, rng).scale(s),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_q.rows()
    }

    pub fn head_dim(&self) -> usize {
        self.w_q.cols()
    }
}

/// Attention result. `weights` holds the softmax rows that were actually
/// computed and is only filled when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnOutput {
    pub values: Matrix,
    pub weights: Option<Matrix>,
}

pub fn project_qkv(x: &Matrix, w: &ProjectionWeights) -> Result<(Matrix, Matrix, Matrix)> {
    if x.cols() != w.input_dim() {
        return Err(Error::shape("project_qkv", x.shape(), w.w_q.shape()));
    }
    Ok((matmul(x, &w.w_q)?, matmul(x, &w.w_k)?, matmul(x, &w.w_v)?))
}

fn check_qkv(op: &'static str, q: &Matrix, k: &Matrix, v: &Matrix) -> Result<()> {
    if q.cols() != k.cols() {
        return Err(Error::shape(op, q.shape(), k.shape()));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape(op, k.shape(), v.shape()));
    }
    if !(q.is_finite() && k.is_finite() && v.is_finite()) {
        return Err(Error::NonFinite { op });
    }
    Ok(())
}

/// `softmax(q kᵀ / sqrt(d)) v` with `d = q.cols()`.
///
/// Charges the `L_q × L_k` score slab to `meter`.
pub fn attention_dense(q: &Matrix, k: &Matrix, v: &Matrix, meter: &mut AllocMeter) -> Result<AttnOutput> {
    dense_impl(q, k, v, meter, false)
}

/// Same as [`attention_dense`] but keeps the attention weights.
pub fn attention_dense_with_weights(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    meter: &mut AllocMeter,
) -> Result<AttnOutput> {
    dense_impl(q, k, v, meter, true)
}

fn dense_impl(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    meter: &mut AllocMeter,
    keep_weights: bool,
) -> Result<AttnOutput> {
    check_qkv("attention_dense", q, k, v)?;
    let rows: Vec<usize> = (0..q.rows()).collect();
    let mut slab = meter.buffer(q.rows() * k.rows());
    let mut values = Matrix::zeros(q.rows(), v.cols());
    attend_rows(q, k, v, &rows, &mut slab, &mut values);
    let weights = keep_weights
        .then(|| Matrix::from_vec(q.rows(), k.rows(), slab))
        .transpose()?;
    Ok(AttnOutput { values, weights })
}

/// Vector form: `Σ_j p(k_j | q_i) v_j`.
pub fn attention_row(q_i: &[f64], k: &Matrix, v: &Matrix) -> Result<Vec<f64>> {
    if q_i.len() != k.cols() {
        return Err(Error::shape("attention_row", (1, q_i.len()), k.shape()));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape("attention_row", k.shape(), v.shape()));
    }
    let scale = 1.0 / (q_i.len() as f64).sqrt();
    let mut p: Vec<f64> = k.row_iter().map(|k_j| dot(q_i, k_j) * scale).collect();
    if p.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { op: "attention_row" });
    }
    softmax_in_place(&mut p);
    let mut out = vec![0.0; v.cols()];
    for (&p_j, v_j) in p.iter().zip(v.row_iter()) {
        axpy(p_j, v_j, &mut out);
    }
    Ok(out)
}

/// Computes full attention for each query index in `rows`, writing softmax
/// weights into consecutive `k.rows()`-wide rows of `slab` and results into the
/// matching rows of `out`. Shapes are the caller's responsibility.
pub(crate) fn attend_rows(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    rows: &[usize],
    slab: &mut [f64],
    out: &mut Matrix,
) {
    let l_k = k.rows();
    debug_assert_eq!(slab.len(), rows.len() * l_k);
    let scale = 1.0 / (q.cols() as f64).sqrt();

    // Four queries per pass over the keys; each block is normalized and
    // reduced while its scores are still in cache.
    let mut blocks = rows.chunks_exact(4);
    let mut slabs = slab.chunks_exact_mut(4 * l_k);
    for (block, weights) in blocks.by_ref().zip(slabs.by_ref()) {
        let qs = [q.row(block[0]), q.row(block[1]), q.row(block[2]), q.row(block[3])];
        {
            let (w0, rest) = weights.split_at_mut(l_k);
            let (w1, rest) = rest.split_at_mut(l_k);
            let (w2, w3) = rest.split_at_mut(l_k);
            for (j, k_j) in k.row_iter().enumerate() {
                let s = dot4(qs, k_j);
                w0[j] = s[0] * scale;
                w1[j] = s[1] * scale;
                w2[j] = s[2] * scale;
                w3[j] = s[3] * scale;
            }
        }
        for (&i, w) in block.iter().zip(weights.chunks_exact_mut(l_k)) {
            softmax_in_place(w);
            weighted_sum(w, v, out.row_mut(i));
        }
    }
    let done = rows.len() - blocks.remainder().len();
    for (&i, weights) in rows[done..].iter().zip(slab[done * l_k..].chunks_exact_mut(l_k)) {
        let q_i = q.row(i);
        for (w, k_j) in weights.iter_mut().zip(k.row_iter()) {
            *w = dot(q_i, k_j) * scale;
        }
        softmax_in_place(weights);
        weighted_sum(weights, v, out.row_mut(i));
    }
}

/// `out = Σ_j p_j v_j`, accumulating four value rows per pass over `out`.
fn weighted_sum(p: &[f64], v: &Matrix, out: &mut [f64]) {
    out.fill(0.0);
    let mut p_blocks = p.chunks_exact(4);
    let mut j = 0;
    for pb in p_blocks.by_ref() {
        let (v0, v1, v2, v3) = (v.row(j), v.row(j + 1), v.row(j + 2), v.row(j + 3));
        for c in 0..out.len() {
            out[c] += pb[0] * v0[c] + pb[1] * v1[c] + pb[2] * v2[c] + pb[3] * v3[c];
        }
        j += 4;
    }
    for &p_j in p_blocks.remainder() {
        axpy(p_j, v.row(j), out);
        j += 1;
    }
}

/// The seam between vanilla and prob-sparse attention inside multi-head
/// attention. `head` identifies the head so stateful kernels can keep
/// per-head state.
pub trait AttentionKernel {
    fn attend(
        &mut self,
        head: usize,
        q: &Matrix,
        k: &Matrix,
        v: &Matrix,
        meter: &mut AllocMeter,
    ) -> Result<AttnOutput>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DenseAttention;

impl AttentionKernel for DenseAttention {
    fn attend(
        &mut self,
        _head: usize,
        q: &Matrix,
        k: &Matrix,
        v: &Matrix,
        meter: &mut AllocMeter,
    ) -> Result<AttnOutput> {
        attention_dense(q, k, v, meter)
    }
}

/// Multi-head self-attention weights. `w_o` is `d_model × d_model`; when absent
/// the concatenated heads are returned as-is.
#[derive(Debug, Clone, PartialEq)]
pub struct MhsaWeights {
    pub heads: Vec<ProjectionWeights>,
    pub w_o: Option<Matrix>,
}

impl MhsaWeights {
    pub fn new(heads: Vec<ProjectionWeights>, w_o: Option<Matrix>) -> Result<Self> {
        let w = Self { heads, w_o };
        w.validate()?;
        Ok(w)
    }

    /// Random heads of width `d_model / heads` plus a random output projection.
    pub fn random(d_model: usize, heads: usize, rng: &mut Rng) -> Result<Self> {
        let d = head_dim(d_model, heads)?;
        let head_weights = (0..heads)
            .map(|_| ProjectionWeights::random(d_model, d, rng))
            .collect();
        let w_o = randn_matrix(d_model, d_model, rng).scale(1.0 / (d_model as f64).sqrt());
        Self::new(head_weights, Some(w_o))
    }

    pub fn zeros(d_model: usize, heads: usize) -> Result<Self> {
        let d = head_dim(d_model, heads)?;
        let z = || Matrix::zeros(d_model, d);
        let head_weights = (0..heads)
            .map(|_| ProjectionWeights::new(z(), z(), z()))
            .collect::<Result<_>>()?;
        Self::new(head_weights, None)
    }

    pub fn d_model(&self) -> usize {
        self.heads.first().map_or(0, |h| h.input_dim())
    }

    fn validate(&self) -> Result<()> {
        let d_model = self.d_model();
        let d = head_dim(d_model, self.heads.len())?;
        for (h, w) in self.heads.iter().enumerate() {
            if w.input_dim() != d_model || w.head_dim() != d {
                return Err(Error::Config(format!(
                    "head {h} projects {}x{}, expected {d_model}x{d}",
                    w.input_dim(),
                    w.head_dim()
                )));
            }
        }
        if let Some(w_o) = &self.w_o {
            if w_o.shape() != (d_model, d_model) {
                return Err(Error::Config(format!(
                    "output projection is {:?}, expected {d_model}x{d_model}",
                    w_o.shape()
                )));
            }
        }
        Ok(())
    }
}

fn head_dim(d_model: usize, heads: usize) -> Result<usize> {
    if heads == 0 {
        return Err(Error::Config("at least one attention head is required".into()));
    }
    if d_model == 0 || d_model % heads != 0 {
        return Err(Error::Config(format!(
            "d_model {d_model} is not divisible by {heads} heads"
        )));
    }
    Ok(d_model / heads)
}

/// Projects `x` per head, runs `kernel` on each head, concatenates along the
/// feature axis and applies the output projection.
pub fn multi_head_attention(
    x: &Matrix,
    w: &MhsaWeights,
    kernel: &mut dyn AttentionKernel,
    meter: &mut AllocMeter,
) -> Result<Matrix> {
    w.validate()?;
    let d_model = w.d_model();
    if x.cols() != d_model {
        return Err(Error::shape("multi_head_attention", x.shape(), (d_model, d_model)));
    }
    let d = d_model / w.heads.len();
    let mut concat = Matrix::zeros(x.rows(), d_model);
    for (h, proj) in w.heads.iter().enumerate() {
        let (q, k, v) = project_qkv(x, proj)?;
        let out = kernel.attend(h, &q, &k, &v, meter)?;
        concat.set_column_block(h * d, &out.values)?;
    }
    match &w.w_o {
        Some(w_o) => matmul(&concat, w_o),
        None => Ok(concat),
    }
}
