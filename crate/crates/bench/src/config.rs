use std::fmt;

use probsparse::SparsityParams;

use crate::BenchError;

pub const DEFAULT_SEQ_LENS: [usize; 4] = [512, 1024, 2048, 4096];

/// Untimed iterations per `(seq_len, mode)` before the recorded trials.
pub const WARMUP_RUNS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Dense,
    ProbSparse,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Dense => "dense",
            Mode::ProbSparse => "probsparse",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    /// Multi-head self-attention only: projections plus per-head kernel.
    Attention,
    /// Full Conformer encoder stack.
    Encoder,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Attention => "attention",
            Scope::Encoder => "encoder",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub modes: Vec<Mode>,
    pub scope: Scope,
    pub seq_lens: Vec<usize>,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub params: SparsityParams,
    pub trials: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            modes: vec![Mode::Dense, Mode::ProbSparse],
            scope: Scope::Attention,
            seq_lens: DEFAULT_SEQ_LENS.to_vec(),
            d_model: 256,
            heads: 4,
            layers: 16,
            params: SparsityParams::default(),
            trials: 5,
            warmup: WARMUP_RUNS,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let usage = |msg: String| Err(BenchError::Usage(msg));
        if self.modes.is_empty() {
            return usage("at least one mode is required".into());
        }
        if self.seq_lens.is_empty() || self.seq_lens.contains(&0) {
            return usage(format!("sequence lengths must be positive, got {:?}", self.seq_lens));
        }
        if self.trials == 0 {
            return usage("--trials must be at least 1".into());
        }
        if self.heads == 0 || self.d_model == 0 || self.d_model % self.heads != 0 {
            return usage(format!(
                "--d-model {} must be a positive multiple of --heads {}",
                self.d_model, self.heads
            ));
        }
        if self.scope == Scope::Encoder && self.layers == 0 {
            return usage("--layers must be at least 1 for the encoder scope".into());
        }
        Ok(())
    }
}

/// Parses `512,1024,2048` into lengths.
pub fn parse_seq_lens(s: &str) -> Result<Vec<usize>, BenchError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| BenchError::Usage(format!("invalid sequence length {t:?}")))
        })
        .collect()
}
