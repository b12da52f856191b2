//! Query-sparsity measurement, top-k query selection and prob-sparse attention.
//!
//! A query whose attention distribution is close to uniform contributes little
//! beyond the mean of the values. Its distance from uniform is
//!
//! ```text
//! KL(q_i) = lse_j(s_ij) - mean_j(s_ij) - ln L,   s_ij = q_i · k_j / sqrt(d)
//! ```
//!
//! and dropping the constant gives the exact measurement `lse - mean`. The
//! cheap surrogate replaces `lse` with `max` over a random subset of
//! `ceil(r_sample · ln L)` keys. The top `ceil(r_sparse · L)` queries get full
//! attention; all other queries output their own value row.

use crate::attention::{attend_rows, AttentionKernel, AttnOutput};
use crate::numeric::{
    dot, log_sum_exp_unchecked, max_minus_mean, sample_without_replacement, AllocMeter, Matrix, Rng,
};
use crate::{Error, Result};

/// Sampling rate, sparse rate and sharing period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityParams {
    r_sample: f64,
    r_sparse: f64,
    share_every: usize,
}

impl SparsityParams {
    pub fn new(r_sample: f64, r_sparse: f64, share_every: usize) -> Result<Self> {
        if !(r_sample.is_finite() && r_sample > 0.0) {
            return Err(Error::Config(format!("r_sample must be > 0, got {r_sample}")));
        }
        if !(r_sparse > 0.0 && r_sparse <= 1.0) {
            return Err(Error::Config(format!("r_sparse must lie in (0, 1], got {r_sparse}")));
        }
        if share_every == 0 {
            return Err(Error::Config("share_every must be >= 1".into()));
        }
        Ok(Self {
            r_sample,
            r_sparse,
            share_every,
        })
    }

    pub fn r_sample(&self) -> f64 {
        self.r_sample
    }

    pub fn r_sparse(&self) -> f64 {
        self.r_sparse
    }

    pub fn share_every(&self) -> usize {
        self.share_every
    }

    /// Number of queries kept: `clamp(ceil(r_sparse · L), 1, L)`.
    pub fn l_sparse(&self, seq_len: usize) -> usize {
        ceil_count(self.r_sparse * seq_len as f64, seq_len)
    }

    /// Number of sampled keys: `clamp(ceil(r_sample · ln L), 1, L)`.
    pub fn l_tilde(&self, seq_len: usize) -> usize {
        ceil_count(self.r_sample * (seq_len as f64).ln(), seq_len)
    }
}

impl Default for SparsityParams {
    /// `r_sample = 1`, `r_sparse = 0.5`, `share_every = 4`.
    fn default() -> Self {
        Self {
            r_sample: 1.0,
            r_sparse: 0.5,
            share_every: 4,
        }
    }
}

// Products such as 0.35 * 100 land a few ulps above the integer; those must
// not round up to the next count.
fn ceil_count(x: f64, seq_len: usize) -> usize {
    let slack = 1e-9 * x.abs().max(1.0);
    let c = (x - slack).ceil();
    if c < 1.0 {
        1
    } else {
        (c as usize).min(seq_len.max(1))
    }
}

/// Per-query scores and the chosen query set.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsitySelection {
    /// Sampled measurement for every query, length `L`.
    pub scores: Vec<f64>,
    /// Selected query indices, strictly ascending.
    pub indices: Vec<usize>,
    pub l_sparse: usize,
    pub l_tilde: usize,
}

impl SparsitySelection {
    /// A hand-built selection with zero scores, treated as measured over every
    /// key. Indices must be strictly ascending and below `seq_len`.
    pub fn from_indices(seq_len: usize, indices: Vec<usize>) -> Result<Self> {
        let sel = Self {
            scores: vec![0.0; seq_len],
            l_sparse: indices.len(),
            indices,
            l_tilde: seq_len,
        };
        sel.check(seq_len, "SparsitySelection::from_indices")?;
        Ok(sel)
    }

    pub fn seq_len(&self) -> usize {
        self.scores.len()
    }

    pub fn contains(&self, query: usize) -> bool {
        self.indices.binary_search(&query).is_ok()
    }

    fn check(&self, seq_len: usize, op: &'static str) -> Result<()> {
        if self.scores.len() != seq_len {
            return Err(Error::contract(
                op,
                format!("selection covers {} queries, input has {seq_len}", self.scores.len()),
            ));
        }
        if self.indices.len() != self.l_sparse {
            return Err(Error::contract(
                op,
                format!("{} indices but l_sparse = {}", self.indices.len(), self.l_sparse),
            ));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract(op, "indices must be strictly ascending"));
        }
        if let Some(&last) = self.indices.last() {
            if last >= seq_len {
                return Err(Error::contract(op, format!("index {last} out of range 0..{seq_len}")));
            }
        }
        Ok(())
    }
}

fn scaled_scores(op: &'static str, q_i: &[f64], k: &Matrix) -> Result<Vec<f64>> {
    if q_i.len() != k.cols() {
        return Err(Error::shape(op, (1, q_i.len()), k.shape()));
    }
    let scale = 1.0 / (q_i.len() as f64).sqrt();
    let s: Vec<f64> = k.row_iter().map(|k_j| dot(q_i, k_j) * scale).collect();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { op });
    }
    Ok(s)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// KL divergence of the query's attention distribution from uniform,
/// `lse(s) - mean(s) - ln L`.
pub fn kl_from_uniform(q_i: &[f64], k: &Matrix) -> Result<f64> {
    let s = scaled_scores("kl_from_uniform", q_i, k)?;
    Ok(log_sum_exp_unchecked(&s) - mean(&s) - (s.len() as f64).ln())
}

/// Exact measurement `lse(s) - mean(s)`; always `>= ln L`.
pub fn sparsity_measure_exact(q_i: &[f64], k: &Matrix) -> Result<f64> {
    let s = scaled_scores("sparsity_measure_exact", q_i, k)?;
    Ok(log_sum_exp_unchecked(&s) - mean(&s))
}

/// Sampled measurement `max(s) - mean(s)` over the keys in `sample_idx`.
pub fn sparsity_measure_sampled(q_i: &[f64], k: &Matrix, sample_idx: &[usize]) -> Result<f64> {
    const OP: &str = "sparsity_measure_sampled";
    if sample_idx.is_empty() {
        return Err(Error::contract(OP, "empty key sample"));
    }
    if q_i.len() != k.cols() {
        return Err(Error::shape(OP, (1, q_i.len()), k.shape()));
    }
    let mut seen = vec![false; k.rows()];
    for &j in sample_idx {
        if j >= k.rows() || std::mem::replace(&mut seen[j], true) {
            return Err(Error::contract(
                OP,
                format!("sample index {j} is out of range or repeated"),
            ));
        }
    }
    let scale = 1.0 / (q_i.len() as f64).sqrt();
    let s: Vec<f64> = sample_idx.iter().map(|&j| dot(q_i, k.row(j)) * scale).collect();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { op: OP });
    }
    Ok(max_minus_mean(&s))
}

/// Indices of the `k` largest scores, ties broken toward the lower index,
/// returned ascending.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(scores.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k < idx.len() {
        let by_rank = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
        if k > 0 {
            idx.select_nth_unstable_by(k - 1, by_rank);
        }
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

/// Scores every query against one shared random key sample and keeps the top
/// `l_sparse`. Charges the `L × L̃` sampled-score slab to `meter`.
pub fn select_queries(
    q: &Matrix,
    k: &Matrix,
    params: &SparsityParams,
    rng: &mut Rng,
    meter: &mut AllocMeter,
) -> Result<SparsitySelection> {
    const OP: &str = "select_queries";
    if q.shape() != k.shape() {
        return Err(Error::shape(OP, q.shape(), k.shape()));
    }
    let seq_len = q.rows();
    let l_tilde = params.l_tilde(seq_len);
    let l_sparse = params.l_sparse(seq_len);
    let sample = sample_without_replacement(seq_len, l_tilde, rng)?;

    let scale = 1.0 / (q.cols() as f64).sqrt();
    let mut slab = meter.buffer(seq_len * l_tilde);
    let mut scores = Vec::with_capacity(seq_len);
    for (q_i, row) in q.row_iter().zip(slab.chunks_exact_mut(l_tilde)) {
        for (s, &j) in row.iter_mut().zip(&sample) {
            *s = dot(q_i, k.row(j)) * scale;
        }
        scores.push(max_minus_mean(row));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { op: OP });
    }

    let indices = top_k_indices(&scores, l_sparse);
    Ok(SparsitySelection {
        scores,
        indices,
        l_sparse,
        l_tilde,
    })
}

/// Full attention on the selected queries, value passthrough on the rest.
///
/// Unselected rows are copied bit-for-bit from `v`. Only the
/// `l_sparse × L` score slab is allocated and charged.
pub fn attention_prob_sparse(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    sel: &SparsitySelection,
    meter: &mut AllocMeter,
) -> Result<AttnOutput> {
    const OP: &str = "attention_prob_sparse";
    if q.cols() != k.cols() {
        return Err(Error::shape(OP, q.shape(), k.shape()));
    }
    if q.rows() != k.rows() || k.rows() != v.rows() {
        return Err(Error::shape(OP, q.shape(), v.shape()));
    }
    if !(q.is_finite() && k.is_finite() && v.is_finite()) {
        return Err(Error::NonFinite { op: OP });
    }
    sel.check(q.rows(), OP)?;

    let mut values = v.clone();
    if !sel.indices.is_empty() {
        let mut slab = meter.buffer(sel.indices.len() * k.rows());
        attend_rows(q, k, v, &sel.indices, &mut slab, &mut values);
    }
    Ok(AttnOutput {
        values,
        weights: None,
    })
}

/// Selection cache for one attention head across the layers of a stack.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerShareState {
    pub cached: Option<SparsitySelection>,
    /// Index of the next layer to be served.
    pub layer_counter: usize,
    /// Number of fresh selections computed so far.
    pub measurements_computed: usize,
}

impl LayerShareState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Computes a fresh selection on layers `0, N, 2N, ...` (with `N =
/// share_every`) and returns the cached one on every other layer.
pub fn shared_select<'s>(
    q: &Matrix,
    k: &Matrix,
    params: &SparsityParams,
    state: &'s mut LayerShareState,
    rng: &mut Rng,
    meter: &mut AllocMeter,
) -> Result<&'s SparsitySelection> {
    const OP: &str = "shared_select";
    let fresh = state.layer_counter % params.share_every() == 0;
    if fresh {
        state.cached = Some(select_queries(q, k, params, rng, meter)?);
        state.measurements_computed += 1;
    }
    let layer = state.layer_counter;
    state.layer_counter += 1;
    let sel = state.cached.as_ref().ok_or_else(|| {
        Error::contract(OP, format!("no cached selection at non-computing layer {layer}"))
    })?;
    if sel.seq_len() != q.rows() {
        return Err(Error::contract(
            OP,
            format!(
                "cached selection covers {} queries, layer {layer} has {}",
                sel.seq_len(),
                q.rows()
            ),
        ));
    }
    Ok(sel)
}

/// Prob-sparse [`AttentionKernel`] with one [`LayerShareState`] per head.
///
/// Every call for a given head advances that head's layer counter, so one
/// kernel instance should serve exactly one forward pass through a stack.
#[derive(Debug, Clone)]
pub struct ProbSparseAttention {
    params: SparsityParams,
    rng: Rng,
    states: Vec<LayerShareState>,
}

impl ProbSparseAttention {
    pub fn new(params: SparsityParams, rng: Rng) -> Self {
        Self {
            params,
            rng,
            states: Vec::new(),
        }
    }

    pub fn params(&self) -> &SparsityParams {
        &self.params
    }

    pub fn states(&self) -> &[LayerShareState] {
        &self.states
    }

    /// Fresh selections computed per head (all heads advance together).
    pub fn measurements_computed(&self) -> usize {
        self.states
            .iter()
            .map(|s| s.measurements_computed)
            .max()
            .unwrap_or(0)
    }

    pub fn reset(&mut self) {
        self.states.clear();
    }
}

impl AttentionKernel for ProbSparseAttention {
    fn attend(
        &mut self,
        head: usize,
        q: &Matrix,
        k: &Matrix,
        v: &Matrix,
        meter: &mut AllocMeter,
    ) -> Result<AttnOutput> {
        if self.states.len() <= head {
            self.states.resize_with(head + 1, LayerShareState::new);
        }
        let sel = shared_select(q, k, &self.params, &mut self.states[head], &mut self.rng, meter)?;
        attention_prob_sparse(q, k, v, sel, meter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::attention_dense;
    use crate::numeric::randn_matrix;
    use crate::oracle::{oracle_kl, oracle_topk};

    fn params(r_sample: f64, r_sparse: f64, share_every: usize) -> SparsityParams {
        SparsityParams::new(r_sample, r_sparse, share_every).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SparsityParams::new(0.0, 0.5, 1).is_err());
        assert!(SparsityParams::new(1.0, 0.0, 1).is_err());
        assert!(SparsityParams::new(1.0, 1.01, 1).is_err());
        assert!(SparsityParams::new(1.0, 0.5, 0).is_err());
        assert!(SparsityParams::new(1.0, 1.0, 1).is_ok());
    }

    #[test]
    fn counts_use_clamped_ceiling() {
        let p = params(1.0, 0.5, 1);
        assert_eq!(p.l_sparse(2048), 1024);
        assert_eq!(p.l_sparse(7), 4);
        assert_eq!(p.l_sparse(1), 1);
        // ln 2048 = 7.62...
        assert_eq!(p.l_tilde(2048), 8);
        assert_eq!(p.l_tilde(1), 1);
        assert_eq!(p.l_tilde(2), 1);
        assert_eq!(params(5.0, 0.5, 1).l_tilde(2048), 39);
        assert_eq!(params(1e6, 0.5, 1).l_tilde(32), 32);
        // 0.35 * 100 is 35.000000000000006 in binary floating point.
        assert_eq!(params(1.0, 0.35, 1).l_sparse(100), 35);
    }

    #[test]
    fn kl_of_uniform_scores_is_zero() {
        let mut rng = Rng::seed_from_u64(1);
        let k = randn_matrix(9, 4, &mut rng);
        assert!(kl_from_uniform(&[0.0; 4], &k).unwrap().abs() < 1e-15);
        let k1 = randn_matrix(1, 4, &mut rng);
        let q = [0.4, -2.0, 1.0, 3.0];
        assert!(kl_from_uniform(&q, &k1).unwrap().abs() < 1e-15);
        assert_eq!(sparsity_measure_exact(&q, &k1).unwrap(), 0.0);
    }

    #[test]
    fn kl_matches_explicit_distribution() {
        let mut rng = Rng::seed_from_u64(2);
        let q = randn_matrix(1, 4, &mut rng);
        let k = randn_matrix(16, 4, &mut rng);
        let kl = kl_from_uniform(q.row(0), &k).unwrap();
        assert!((kl - oracle_kl(q.row(0), &k).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn exact_measure_examples() {
        let mut rng = Rng::seed_from_u64(3);
        let k4 = randn_matrix(4, 3, &mut rng);
        let m = sparsity_measure_exact(&[0.0; 3], &k4).unwrap();
        assert!((m - 4f64.ln()).abs() < 1e-15);

        let q = randn_matrix(1, 3, &mut rng);
        let k = randn_matrix(20, 3, &mut rng);
        let exact = sparsity_measure_exact(q.row(0), &k).unwrap();
        let kl = kl_from_uniform(q.row(0), &k).unwrap();
        assert!((exact - (kl + 20f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn sampled_measure_examples() {
        // d = 1 so the scaled scores equal the raw products 1, 2, 3.
        let k = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        assert_eq!(sparsity_measure_sampled(&[1.0], &k, &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(sparsity_measure_sampled(&[0.0], &k, &[0, 2]).unwrap(), 0.0);
        assert!(sparsity_measure_sampled(&[1.0], &k, &[]).is_err());
        assert!(sparsity_measure_sampled(&[1.0], &k, &[0, 0]).is_err());
        assert!(sparsity_measure_sampled(&[1.0], &k, &[3]).is_err());
    }

    #[test]
    fn full_sample_is_sandwiched_by_exact() {
        let mut rng = Rng::seed_from_u64(4);
        for _ in 0..50 {
            let q = randn_matrix(1, 5, &mut rng).scale(3.0);
            let k = randn_matrix(12, 5, &mut rng);
            let all: Vec<usize> = (0..12).collect();
            let exact = sparsity_measure_exact(q.row(0), &k).unwrap();
            let sampled = sparsity_measure_sampled(q.row(0), &k, &all).unwrap();
            let gap = exact - sampled;
            assert!(gap >= 0.0 && gap <= 12f64.ln() + 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn top_k_breaks_ties_toward_low_index() {
        assert_eq!(top_k_indices(&[1.0; 5], 2), vec![0, 1]);
        assert_eq!(top_k_indices(&[0.0, 3.0, 1.0, 3.0, 2.0], 2), vec![1, 3]);
        assert_eq!(top_k_indices(&[0.0, 3.0, 1.0, 3.0, 2.0], 3), vec![1, 3, 4]);
        assert_eq!(top_k_indices(&[5.0, 4.0], 2), vec![0, 1]);
    }

    #[test]
    fn full_sparse_rate_selects_everything() {
        let mut rng = Rng::seed_from_u64(5);
        let q = randn_matrix(10, 4, &mut rng);
        let k = randn_matrix(10, 4, &mut rng);
        let sel = select_queries(&q, &k, &params(1.0, 1.0, 1), &mut rng, &mut AllocMeter::new()).unwrap();
        assert_eq!(sel.indices, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn single_query_is_always_selected() {
        let mut rng = Rng::seed_from_u64(6);
        let q = randn_matrix(1, 3, &mut rng);
        let k = randn_matrix(1, 3, &mut rng);
        for p in [params(0.1, 0.01, 1), params(10.0, 1.0, 3)] {
            let sel = select_queries(&q, &k, &p, &mut rng, &mut AllocMeter::new()).unwrap();
            assert_eq!(sel.indices, vec![0]);
            assert_eq!(sel.l_tilde, 1);
        }
    }

    #[test]
    fn full_sampling_selects_exhaustive_top_half() {
        let mut rng = Rng::seed_from_u64(7);
        let q = randn_matrix(32, 6, &mut rng).scale(2.0);
        let k = randn_matrix(32, 6, &mut rng);
        let p = params(1000.0, 0.5, 1);
        let sel = select_queries(&q, &k, &p, &mut rng, &mut AllocMeter::new()).unwrap();
        assert_eq!(sel.l_tilde, 32);
        assert_eq!(sel.indices.len(), 16);

        let all: Vec<usize> = (0..32).collect();
        let scores: Vec<f64> = (0..32)
            .map(|i| sparsity_measure_sampled(q.row(i), &k, &all).unwrap())
            .collect();
        for (a, b) in scores.iter().zip(&sel.scores) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(sel.indices, oracle_topk(&scores, 16).unwrap());
    }

    #[test]
    fn selection_is_deterministic_per_seed() {
        let mut rng = Rng::seed_from_u64(8);
        let q = randn_matrix(50, 4, &mut rng);
        let k = randn_matrix(50, 4, &mut rng);
        let p = params(1.0, 0.3, 1);
        let run = |seed| {
            select_queries(&q, &k, &p, &mut Rng::seed_from_u64(seed), &mut AllocMeter::new()).unwrap()
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn select_charges_sampling_slab() {
        let mut rng = Rng::seed_from_u64(9);
        let q = randn_matrix(64, 4, &mut rng);
        let k = randn_matrix(64, 4, &mut rng);
        let mut meter = AllocMeter::new();
        let sel = select_queries(&q, &k, &params(1.0, 0.5, 1), &mut rng, &mut meter).unwrap();
        assert_eq!(sel.l_tilde, 5);
        assert_eq!(meter.transient_bytes(), 64 * 5 * 8);
    }

    #[test]
    fn full_selection_matches_dense() {
        let mut rng = Rng::seed_from_u64(10);
        let q = randn_matrix(20, 8, &mut rng);
        let k = randn_matrix(20, 8, &mut rng);
        let v = randn_matrix(20, 5, &mut rng);
        let sel = SparsitySelection::from_indices(20, (0..20).collect()).unwrap();
        let mut meter = AllocMeter::new();
        let sparse = attention_prob_sparse(&q, &k, &v, &sel, &mut meter).unwrap();
        let dense = attention_dense(&q, &k, &v, &mut meter).unwrap();
        assert!(sparse.values.max_abs_diff(&dense.values) < 1e-9);
    }

    #[test]
    fn unselected_rows_pass_values_through() {
        let mut rng = Rng::seed_from_u64(11);
        let q = randn_matrix(64, 8, &mut rng);
        let k = randn_matrix(64, 8, &mut rng);
        let v = randn_matrix(64, 8, &mut rng);
        let p = params(1.0, 0.5, 1);
        let mut meter = AllocMeter::new();
        let sel = select_queries(&q, &k, &p, &mut rng, &mut meter).unwrap();
        let out = attention_prob_sparse(&q, &k, &v, &sel, &mut meter).unwrap();
        let dense = attention_dense(&q, &k, &v, &mut meter).unwrap();
        for i in 0..64 {
            if sel.contains(i) {
                for (a, b) in out.values.row(i).iter().zip(dense.values.row(i)) {
                    assert!((a - b).abs() < 1e-10);
                }
            } else {
                assert_eq!(out.values.row(i), v.row(i));
            }
        }
    }

    #[test]
    fn empty_selection_returns_values() {
        let mut rng = Rng::seed_from_u64(12);
        let q = randn_matrix(6, 3, &mut rng);
        let v = randn_matrix(6, 2, &mut rng);
        let sel = SparsitySelection::from_indices(6, vec![]).unwrap();
        let mut meter = AllocMeter::new();
        let out = attention_prob_sparse(&q, &q, &v, &sel, &mut meter).unwrap();
        assert_eq!(out.values, v);
        assert_eq!(meter.transient_bytes(), 0);
    }

    #[test]
    fn inconsistent_selection_is_rejected() {
        let m = Matrix::zeros(4, 2);
        let mut meter = AllocMeter::new();
        let sel = SparsitySelection::from_indices(5, vec![0, 4]).unwrap();
        assert!(matches!(
            attention_prob_sparse(&m, &m, &m, &sel, &mut meter),
            Err(Error::Contract { .. })
        ));
        assert!(SparsitySelection::from_indices(4, vec![2, 1]).is_err());
        assert!(SparsitySelection::from_indices(4, vec![4]).is_err());
        // Cross attention has no value row per query to pass through.
        let v = Matrix::zeros(3, 2);
        let sel = SparsitySelection::from_indices(4, vec![0]).unwrap();
        assert!(attention_prob_sparse(&m, &m, &v, &sel, &mut meter).is_err());
    }

    fn share_run(share_every: usize, layers: usize) -> (LayerShareState, Vec<Vec<usize>>) {
        let mut rng = Rng::seed_from_u64(13);
        let p = params(1.0, 0.5, share_every);
        let mut state = LayerShareState::new();
        let mut seen = Vec::new();
        for _ in 0..layers {
            let q = randn_matrix(24, 4, &mut rng);
            let k = randn_matrix(24, 4, &mut rng);
            let sel = shared_select(&q, &k, &p, &mut state, &mut rng, &mut AllocMeter::new()).unwrap();
            seen.push(sel.indices.clone());
        }
        (state, seen)
    }

    #[test]
    fn sharing_every_layer() {
        let (state, _) = share_run(1, 16);
        assert_eq!(state.measurements_computed, 16);
        assert_eq!(state.layer_counter, 16);
    }

    #[test]
    fn sharing_every_four_layers() {
        let (state, seen) = share_run(4, 16);
        assert_eq!(state.measurements_computed, 4);
        for window in seen.chunks(4) {
            assert!(window.iter().all(|s| s == &window[0]));
        }
    }

    #[test]
    fn sharing_every_eight_layers() {
        let (state, seen) = share_run(8, 16);
        assert_eq!(state.measurements_computed, 2);
        assert!(seen[..8].iter().all(|s| s == &seen[0]));
        assert!(seen[8..].iter().all(|s| s == &seen[8]));
    }

    #[test]
    fn cache_miss_is_contract_violation() {
        let m = Matrix::zeros(4, 2);
        let mut state = LayerShareState {
            layer_counter: 1,
            ..Default::default()
        };
        let err = shared_select(
            &m,
            &m,
            &params(1.0, 0.5, 4),
            &mut state,
            &mut Rng::seed_from_u64(0),
            &mut AllocMeter::new(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract { op: "shared_select", .. }));
    }
}
