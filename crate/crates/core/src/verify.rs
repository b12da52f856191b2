//! Seeded property suite behind `probsparse verify`.
//!
//! Each property runs a number of random instances. Instance `i` of property
//! `p` draws from its own generator seeded by mixing the suite seed, `p` and
//! `i`, so a failure can be replayed from the printed seed alone via
//! [`Rng::seed_from_u64`].

use std::fmt;

use crate::attention::{attention_dense, attention_row};
use crate::conformer::{AttnMode, Encoder, EncoderConfig};
use crate::numeric::{
    log_sum_exp, matmul, randn_matrix, row_softmax, sample_without_replacement, AllocMeter, Matrix, Rng,
};
use crate::oracle::{oracle_attention, oracle_kl, oracle_topk};
use crate::sparse::{
    attention_prob_sparse, kl_from_uniform, select_queries, shared_select, sparsity_measure_exact,
    sparsity_measure_sampled, top_k_indices, LayerShareState, SparsityParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub instances: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub instance: usize,
    pub seed: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub instances: usize,
    pub failure: Option<Failure>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub seed: u64,
    pub results: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(PropertyResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyResult> {
        self.results.iter().filter(|r| !r.passed())
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(8);
        writeln!(f, "{:<width$}  {:>9}  result", "property", "instances")?;
        writeln!(f, "{}", "-".repeat(width + 19))?;
        for r in &self.results {
            match &r.failure {
                None => writeln!(f, "{:<width$}  {:>9}  PASS", r.name, r.instances)?,
                Some(fail) => writeln!(
                    f,
                    "{:<width$}  {:>9}  FAIL  instance {} seed {}: {}",
                    r.name, r.instances, fail.instance, fail.seed, fail.detail
                )?,
            }
        }
        let passed = self.results.iter().filter(|r| r.passed()).count();
        write!(
            f,
            "{passed}/{} properties passed (suite seed {})",
            self.results.len(),
            self.seed
        )
    }
}

type Check = std::result::Result<(), String>;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of instance `instance` of property number `property`.
pub fn instance_seed(suite_seed: u64, property: usize, instance: usize) -> u64 {
    splitmix(splitmix(splitmix(suite_seed) ^ property as u64) ^ instance as u64)
}

fn run_property(
    name: &'static str,
    property: usize,
    suite_seed: u64,
    instances: usize,
    mut check: impl FnMut(&mut Rng) -> Check,
) -> PropertyResult {
    for i in 0..instances {
        let seed = instance_seed(suite_seed, property, i);
        if let Err(detail) = check(&mut Rng::seed_from_u64(seed)) {
            return PropertyResult {
                name,
                instances: i + 1,
                failure: Some(Failure {
                    instance: i,
                    seed,
                    detail,
                }),
            };
        }
    }
    PropertyResult {
        name,
        instances,
        failure: None,
    }
}

fn ensure(cond: bool, detail: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(detail())
    }
}

fn err<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Random `(q, k, v)` for self-attention with `L <= max_l`, `d <= max_d`.
fn random_qkv(rng: &mut Rng, max_l: usize, max_d: usize) -> (Matrix, Matrix, Matrix) {
    let l = rng.int_inclusive(1, max_l);
    let d = rng.int_inclusive(1, max_d);
    let dv = rng.int_inclusive(1, max_d);
    let spread = rng.uniform_range(0.1, 3.0);
    (
        randn_matrix(l, d, rng).scale(spread),
        randn_matrix(l, d, rng).scale(spread),
        randn_matrix(l, dv, rng),
    )
}

fn max_diff_at(a: &Matrix, b: &Matrix, tol: f64, what: &str) -> Check {
    let diff = a.max_abs_diff(b);
    ensure(diff <= tol, || format!("{what}: max |diff| {diff:e} > {tol:e}"))
}

/// Compares `selector` with [`oracle_topk`] on tie-heavy random score vectors.
pub fn check_topk_agreement(
    selector: &dyn Fn(&[f64], usize) -> Vec<usize>,
    suite_seed: u64,
    instances: usize,
) -> PropertyResult {
    run_property("top-k matches oracle (ties to low index)", 16, suite_seed, instances, |rng| {
        let n = rng.int_inclusive(1, 40);
        let k = rng.int_inclusive(1, n);
        // Few distinct values so ties are common.
        let levels = rng.int_inclusive(1, 4);
        let scores: Vec<f64> = (0..n).map(|_| rng.int_inclusive(0, levels) as f64).collect();
        let got = selector(&scores, k);
        let want = oracle_topk(&scores, k).map_err(err)?;
        ensure(got == want, || format!("scores {scores:?}, k {k}: got {got:?}, oracle {want:?}"))
    })
}

/// Runs every property and collects the results.
pub fn run_suite(cfg: SuiteConfig) -> SuiteReport {
    let s = cfg.seed;
    let n = cfg.instances;
    let few = n.min(20);
    let mut results = Vec::new();

    results.push(run_property("matmul identity and shape", 0, s, n, |rng| {
        let (r, c, p) = (rng.int_inclusive(1, 12), rng.int_inclusive(1, 12), rng.int_inclusive(1, 12));
        let a = randn_matrix(r, c, rng);
        let b = randn_matrix(c, p, rng);
        let prod = matmul(&a, &b).map_err(err)?;
        ensure(prod.shape() == (r, p), || format!("shape {:?}", prod.shape()))?;
        ensure(matmul(&a, &Matrix::identity(c)).map_err(err)? == a, || "a·I != a".into())
    }));

    results.push(run_property("row_softmax rows sum to 1 (|x| <= 1e4)", 1, s, n, |rng| {
        let m = randn_matrix(rng.int_inclusive(1, 8), rng.int_inclusive(1, 64), rng)
            .scale(rng.uniform_range(0.0, 1e4));
        let p = row_softmax(&m).map_err(err)?;
        for row in p.row_iter() {
            let sum: f64 = row.iter().sum();
            ensure(row.iter().all(|&x| x >= 0.0), || "negative weight".into())?;
            ensure((sum - 1.0).abs() <= 1e-12, || format!("row sum {sum}"))?;
        }
        Ok(())
    }));

    results.push(run_property("log_sum_exp within [max, max + ln n]", 2, s, n, |rng| {
        let v: Vec<f64> = (0..rng.int_inclusive(1, 64)).map(|_| rng.normal() * 50.0).collect();
        let lse = log_sum_exp(&v).map_err(err)?;
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ln_n = (v.len() as f64).ln();
        ensure(lse >= max && lse <= max + ln_n + 1e-12 * max.abs().max(1.0), || {
            format!("lse {lse}, max {max}, ln n {ln_n}")
        })
    }));

    results.push(run_property("log_sum_exp shift equivariance (1e-10)", 3, s, n, |rng| {
        let v: Vec<f64> = (0..rng.int_inclusive(1, 64)).map(|_| rng.normal() * 5.0).collect();
        let c = rng.uniform_range(-100.0, 100.0);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let a = log_sum_exp(&shifted).map_err(err)?;
        let b = log_sum_exp(&v).map_err(err)? + c;
        ensure((a - b).abs() <= 1e-10, || format!("|diff| {:e}", (a - b).abs()))
    }));

    results.push(run_property("seeded streams are bit-identical", 4, s, n, |rng| {
        let seed = rng.next_u64();
        let nn = rng.int_inclusive(1, 200);
        let kk = rng.int_inclusive(1, nn);
        let draw = || {
            let mut r = Rng::seed_from_u64(seed);
            let m = randn_matrix(3, 4, &mut r);
            let idx = sample_without_replacement(nn, kk, &mut r).expect("valid sample");
            (m, idx)
        };
        let (m1, i1) = draw();
        let (m2, i2) = draw();
        ensure(m1.data() == m2.data() && i1 == i2, || format!("seed {seed} diverged"))?;
        ensure(i1.windows(2).all(|w| w[0] < w[1]) && i1.iter().all(|&i| i < nn), || {
            format!("sample {i1:?} not sorted/distinct")
        })
    }));

    results.push(run_property("attention_dense == oracle_attention (1e-10)", 5, s, n, |rng| {
        let (q, k, v) = random_qkv(rng, 64, 16);
        let got = attention_dense(&q, &k, &v, &mut AllocMeter::new()).map_err(err)?;
        max_diff_at(&got.values, &oracle_attention(&q, &k, &v).map_err(err)?, 1e-10, "dense vs oracle")
    }));

    results.push(run_property("attention_dense == stacked attention_row (1e-10)", 6, s, n, |rng| {
        let (q, k, v) = random_qkv(rng, 64, 16);
        let got = attention_dense(&q, &k, &v, &mut AllocMeter::new()).map_err(err)?;
        let rows: Vec<Vec<f64>> = q
            .row_iter()
            .map(|q_i| attention_row(q_i, &k, &v))
            .collect::<crate::Result<_>>()
            .map_err(err)?;
        max_diff_at(&got.values, &Matrix::from_rows(&rows).map_err(err)?, 1e-10, "matrix vs vector form")
    }));

    results.push(run_property("attention rows inside value hull", 7, s, n, |rng| {
        let (q, k, v) = random_qkv(rng, 64, 16);
        let out = attention_dense(&q, &k, &v, &mut AllocMeter::new()).map_err(err)?.values;
        for c in 0..v.cols() {
            let (lo, hi) = (0..v.rows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
                (lo.min(v.get(j, c)), hi.max(v.get(j, c)))
            });
            let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
            for i in 0..out.rows() {
                let x = out.get(i, c);
                ensure(x >= lo - slack && x <= hi + slack, || {
                    format!("out[{i}][{c}] = {x} outside [{lo}, {hi}]")
                })?;
            }
        }
        Ok(())
    }));

    results.push(run_property("key/value permutation invariance (1e-12)", 8, s, n, |rng| {
        let (q, k, v) = random_qkv(rng, 64, 16);
        let mut perm: Vec<usize> = (0..k.rows()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.int_inclusive(0, i));
        }
        let kp = Matrix::from_fn(k.rows(), k.cols(), |i, j| k.get(perm[i], j));
        let vp = Matrix::from_fn(v.rows(), v.cols(), |i, j| v.get(perm[i], j));
        let mut meter = AllocMeter::new();
        let a = attention_dense(&q, &k, &v, &mut meter).map_err(err)?;
        let b = attention_dense(&q, &kp, &vp, &mut meter).map_err(err)?;
        max_diff_at(&a.values, &b.values, 1e-12, "permuted keys")
    }));

    results.push(run_property("scaling q, k by sqrt(s) == scaling scores by s (1e-10)", 9, s, n, |rng| {
        let (q, k, v) = random_qkv(rng, 64, 16);
        let factor = rng.uniform_range(0.1, 4.0);
        let root = factor.sqrt();
        let scaled = attention_dense(&q.scale(root), &k.scale(root), &v, &mut AllocMeter::new())
            .map_err(err)?;
        let d = q.cols() as f64;
        let raw = matmul(&q, &k.transpose()).map_err(err)?.scale(factor / d.sqrt());
        let reference = matmul(&row_softmax(&raw).map_err(err)?, &v).map_err(err)?;
        max_diff_at(&scaled.values, &reference, 1e-10, "scaled path")
    }));

    results.push(run_property("kl_from_uniform == oracle_kl (1e-9)", 10, s, n, |rng| {
        let (q, k, _) = random_qkv(rng, 64, 16);
        let q_i = q.row(rng.int_inclusive(0, q.rows() - 1));
        let kl = kl_from_uniform(q_i, &k).map_err(err)?;
        let oracle = oracle_kl(q_i, &k).map_err(err)?;
        ensure((kl - oracle).abs() <= 1e-9, || format!("kl {kl} vs oracle {oracle}"))
    }));

    results.push(run_property("exact measure >= ln L and == KL + ln L (1e-10)", 11, s, n, |rng| {
        let (q, k, _) = random_qkv(rng, 64, 16);
        let ln_l = (k.rows() as f64).ln();
        for q_i in q.row_iter() {
            let m = sparsity_measure_exact(q_i, &k).map_err(err)?;
            let kl = kl_from_uniform(q_i, &k).map_err(err)?;
            ensure(m >= ln_l - 1e-10, || format!("measure {m} < ln L {ln_l}"))?;
            ensure((kl - (m - ln_l)).abs() <= 1e-10, || format!("kl {kl} vs m - ln L {}", m - ln_l))?;
        }
        Ok(())
    }));

    results.push(run_property("full-sample sandwich 0 <= exact - sampled <= ln L", 12, s, n, |rng| {
        let (q, k, _) = random_qkv(rng, 64, 16);
        let all: Vec<usize> = (0..k.rows()).collect();
        let ln_l = (k.rows() as f64).ln();
        for q_i in q.row_iter() {
            let gap = sparsity_measure_exact(q_i, &k).map_err(err)?
                - sparsity_measure_sampled(q_i, &k, &all).map_err(err)?;
            ensure((0.0..=ln_l).contains(&gap), || format!("gap {gap} outside [0, {ln_l}]"))?;
        }
        Ok(())
    }));

    results.push(run_property("r_sparse = 1 sparse == dense (1e-9, L<=256, d<=32)", 13, s, n, |rng| {
        let (q, k, v) = random_qkv(rng, 256, 32);
        let mut meter = AllocMeter::new();
        let p = SparsityParams::new(rng.uniform_range(0.5, 5.0), 1.0, 1).map_err(err)?;
        let sel = select_queries(&q, &k, &p, rng, &mut meter).map_err(err)?;
        let sparse = attention_prob_sparse(&q, &k, &v, &sel, &mut meter).map_err(err)?;
        let dense = attention_dense(&q, &k, &v, &mut meter).map_err(err)?;
        max_diff_at(&sparse.values, &dense.values, 1e-9, "full selection")
    }));

    results.push(run_property("unselected rows are bit-identical to v (r_sparse = 0.5)", 14, s, n, |rng| {
        let (q, k, v) = random_qkv(rng, 64, 16);
        let mut meter = AllocMeter::new();
        let p = SparsityParams::new(1.0, 0.5, 1).map_err(err)?;
        let sel = select_queries(&q, &k, &p, rng, &mut meter).map_err(err)?;
        let out = attention_prob_sparse(&q, &k, &v, &sel, &mut meter).map_err(err)?;
        let dense = attention_dense(&q, &k, &v, &mut meter).map_err(err)?;
        for i in 0..q.rows() {
            if sel.contains(i) {
                let diff = out.values.row(i).iter().zip(dense.values.row(i)).map(|(a, b)| (a - b).abs());
                ensure(diff.fold(0.0, f64::max) <= 1e-10, || format!("selected row {i} drifted"))?;
            } else {
                let same = out.values.row(i).iter().zip(v.row(i)).all(|(a, b)| a.to_bits() == b.to_bits());
                ensure(same, || format!("row {i} is not a bit-exact copy of v"))?;
            }
        }
        Ok(())
    }));

    results.push(run_property("select_queries == exhaustive top-k (full sampling)", 15, s, n, |rng| {
        let (q, k, _) = random_qkv(rng, 64, 16);
        let r_sparse = rng.uniform_range(0.05, 1.0);
        let p = SparsityParams::new(1e6, r_sparse, 1).map_err(err)?;
        let sel = select_queries(&q, &k, &p, rng, &mut AllocMeter::new()).map_err(err)?;
        let all: Vec<usize> = (0..k.rows()).collect();
        let scores: Vec<f64> = q
            .row_iter()
            .map(|q_i| sparsity_measure_sampled(q_i, &k, &all))
            .collect::<crate::Result<_>>()
            .map_err(err)?;
        let want = oracle_topk(&scores, p.l_sparse(q.rows())).map_err(err)?;
        ensure(sel.indices == want, || format!("got {:?}, oracle {want:?}", sel.indices))
    }));

    results.push(check_topk_agreement(&top_k_indices, s, n));

    results.push(run_property("selection is deterministic per seed", 17, s, n, |rng| {
        let (q, k, _) = random_qkv(rng, 64, 16);
        let p = SparsityParams::new(rng.uniform_range(0.5, 5.0), rng.uniform_range(0.05, 1.0), 1)
            .map_err(err)?;
        let seed = rng.next_u64();
        let run = || select_queries(&q, &k, &p, &mut Rng::seed_from_u64(seed), &mut AllocMeter::new());
        let (a, b) = (run().map_err(err)?, run().map_err(err)?);
        let same_scores = a.scores.iter().zip(&b.scores).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(a.indices == b.indices && same_scores, || format!("seed {seed} diverged"))
    }));

    results.push(run_property("sharing computes 16/4/2 selections over 16 layers", 18, s, few, |rng| {
        for (share, expected) in [(1, 16), (4, 4), (8, 2)] {
            let p = SparsityParams::new(1.0, 0.5, share).map_err(err)?;
            let mut state = LayerShareState::new();
            let mut window_sets: Vec<Vec<usize>> = Vec::new();
            for layer in 0..16 {
                let l = 24;
                let q = randn_matrix(l, 4, rng);
                let k = randn_matrix(l, 4, rng);
                let sel = shared_select(&q, &k, &p, &mut state, rng, &mut AllocMeter::new()).map_err(err)?;
                if layer % share == 0 {
                    window_sets.push(sel.indices.clone());
                } else {
                    ensure(window_sets.last() == Some(&sel.indices), || {
                        format!("layer {layer} changed selection inside its window")
                    })?;
                }
            }
            ensure(state.measurements_computed == expected, || {
                format!("N_share {share}: {} fresh selections", state.measurements_computed)
            })?;
        }
        Ok(())
    }));

    results.push(run_property("encoder r_sparse = 1 == dense after 16 layers (1e-6)", 19, s, few, |rng| {
        let sparsity = SparsityParams::new(1.0, 1.0, 4).map_err(err)?;
        let cfg = EncoderConfig {
            num_layers: 16,
            d_model: 16,
            heads: 4,
            d_ff: 32,
            kernel_size: 3,
            sparsity,
            attn_mode: AttnMode::Dense,
        };
        let enc = Encoder::random(cfg, rng).map_err(err)?;
        let x = randn_matrix(rng.int_inclusive(1, 32), 16, rng);
        let mut meter = AllocMeter::new();
        let dense = enc.forward(&x, rng, &mut meter).map_err(err)?;
        let sparse = enc
            .with_attention(AttnMode::ProbSparse, sparsity)
            .forward(&x, rng, &mut meter)
            .map_err(err)?;
        ensure(dense.output.is_finite(), || "non-finite encoder output".into())?;
        max_diff_at(&dense.output, &sparse.output, 1e-6, "encoder")
    }));

    results.push(run_property("sparse score bytes <= r_sparse * dense + sampling slab", 20, s, 1, |rng| {
        for l in [512usize, 2048] {
            let p = SparsityParams::new(1.0, 0.5, 1).map_err(err)?;
            let q = randn_matrix(l, 8, rng);
            let k = randn_matrix(l, 8, rng);
            let v = randn_matrix(l, 8, rng);
            let mut dense = AllocMeter::new();
            attention_dense(&q, &k, &v, &mut dense).map_err(err)?;
            let mut sparse = AllocMeter::new();
            let sel = select_queries(&q, &k, &p, rng, &mut sparse).map_err(err)?;
            attention_prob_sparse(&q, &k, &v, &sel, &mut sparse).map_err(err)?;
            let slab = (l * sel.l_tilde * 8) as f64;
            let bound = p.r_sparse() * dense.transient_bytes() as f64 + slab;
            ensure(sparse.transient_bytes() as f64 <= bound, || {
                format!("L {l}: sparse {} > bound {bound}", sparse.transient_bytes())
            })?;
        }
        Ok(())
    }));

    SuiteReport { seed: s, results }
}
