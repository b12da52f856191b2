use std::time::Instant;

use probsparse::numeric::randn_matrix;
use probsparse::{
    multi_head_attention, AllocMeter, AttentionKernel, AttnMode, DenseAttention, Encoder, EncoderConfig,
    Matrix, MhsaWeights, ProbSparseAttention, Rng, SparsityParams,
};

use crate::{BenchConfig, BenchError, Mode, Scope};

/// One timed observation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub mode: Mode,
    pub scope: Scope,
    pub seq_len: usize,
    pub trial: usize,
    pub wall_time_ns: u64,
    pub transient_bytes: u64,
    pub params: SparsityParams,
    pub seed: u64,
}

enum Subject {
    Attention(MhsaWeights),
    Encoder { dense: Encoder, sparse: Encoder },
}

impl Subject {
    fn build(cfg: &BenchConfig) -> Result<Self, BenchError> {
        let mut rng = Rng::seed_from_u64(cfg.seed);
        Ok(match cfg.scope {
            Scope::Attention => Subject::Attention(MhsaWeights::random(cfg.d_model, cfg.heads, &mut rng)?),
            Scope::Encoder => {
                let enc_cfg = EncoderConfig {
                    num_layers: cfg.layers,
                    d_model: cfg.d_model,
                    heads: cfg.heads,
                    sparsity: cfg.params,
                    attn_mode: AttnMode::Dense,
                    ..EncoderConfig::default()
                };
                let dense = Encoder::random(enc_cfg, &mut rng)?;
                let sparse = dense.with_attention(AttnMode::ProbSparse, cfg.params);
                Subject::Encoder { dense, sparse }
            }
        })
    }

    /// Runs once and returns `(wall ns, transient bytes)`. Only the forward
    /// call sits inside the timed region.
    fn measure(&self, mode: Mode, x: &Matrix, params: SparsityParams, rng: Rng) -> Result<(u64, u64), BenchError> {
        let mut meter = AllocMeter::new();
        let start;
        match self {
            Subject::Attention(w) => {
                let mut dense = DenseAttention;
                let mut sparse = ProbSparseAttention::new(params, rng);
                let kernel: &mut dyn AttentionKernel = match mode {
                    Mode::Dense => &mut dense,
                    Mode::ProbSparse => &mut sparse,
                };
                start = Instant::now();
                std::hint::black_box(multi_head_attention(x, w, kernel, &mut meter)?);
            }
            Subject::Encoder { dense, sparse } => {
                let enc = match mode {
                    Mode::Dense => dense,
                    Mode::ProbSparse => sparse,
                };
                let mut rng = rng;
                start = Instant::now();
                std::hint::black_box(enc.forward(x, &mut rng, &mut meter)?);
            }
        }
        let elapsed = start.elapsed().as_nanos().max(1);
        Ok((u64::try_from(elapsed).unwrap_or(u64::MAX), meter.transient_bytes()))
    }
}

fn input_seed(seed: u64, seq_len: usize, trial: usize) -> u64 {
    seed ^ (seq_len as u64).rotate_left(32) ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Runs the sweep on the current thread.
///
/// For every length: `cfg.warmup` untimed runs per mode, then `cfg.trials`
/// trials with the modes interleaved inside each trial. Records are ordered by
/// length, trial, then mode.
pub fn run_bench(cfg: &BenchConfig, mut progress: impl FnMut(&BenchRecord)) -> Result<Vec<BenchRecord>, BenchError> {
    cfg.validate()?;
    let subject = Subject::build(cfg)?;
    let mut records = Vec::with_capacity(cfg.seq_lens.len() * cfg.trials * cfg.modes.len());
    for &seq_len in &cfg.seq_lens {
        let input = |trial: usize| {
            let mut rng = Rng::seed_from_u64(input_seed(cfg.seed, seq_len, trial));
            let x = randn_matrix(seq_len, cfg.d_model, &mut rng);
            (x, rng.fork())
        };
        for _ in 0..cfg.warmup {
            let (x, rng) = input(0);
            for &mode in &cfg.modes {
                subject.measure(mode, &x, cfg.params, rng.clone())?;
            }
        }
        for trial in 0..cfg.trials {
            let (x, rng) = input(trial);
            for &mode in &cfg.modes {
                let (wall_time_ns, transient_bytes) = subject.measure(mode, &x, cfg.params, rng.clone())?;
                let record = BenchRecord {
                    mode,
                    scope: cfg.scope,
                    seq_len,
                    trial,
                    wall_time_ns,
                    transient_bytes,
                    params: cfg.params,
                    seed: cfg.seed,
                };
                progress(&record);
                records.push(record);
            }
        }
    }
    Ok(records)
}
