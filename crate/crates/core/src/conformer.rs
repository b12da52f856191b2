//! Conformer block and encoder stack.
//!
//! Block layout, all residual:
//!
//! ```text
//! x <- x + 1/2 FFN1(x)
//! x <- x + MHSA(x)
//! x <- x + Conv(x)
//! y <- LayerNorm(x + 1/2 FFN2(x))
//! ```
//!
//! Each sub-module normalizes its own input first. The feed-forward module is
//! linear, swish, linear. The convolution module is a pointwise GLU expansion,
//! a same-padded depthwise convolution over time, a normalization, swish and a
//! pointwise projection.

use crate::attention::{multi_head_attention, AttentionKernel, DenseAttention, MhsaWeights};
use crate::numeric::{matmul, randn_matrix, AllocMeter, Matrix, Rng};
use crate::sparse::{ProbSparseAttention, SparsityParams};
use crate::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

/// Per-feature normalization applied ahead of (or after) a sub-module.
#[derive(Debug, Clone, PartialEq)]
pub enum Norm {
    /// Leaves the input unchanged.
    Identity,
    /// Layer normalization over the feature axis with learned scale and shift.
    Layer { scale: Vec<f64>, shift: Vec<f64> },
}

impl Norm {
    /// Layer norm with unit scale and zero shift.
    pub fn layer(dim: usize) -> Self {
        Norm::Layer {
            scale: vec![1.0; dim],
            shift: vec![0.0; dim],
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Norm::Identity => Ok(x.clone()),
            Norm::Layer { scale, shift } => {
                if scale.len() != x.cols() || shift.len() != x.cols() {
                    return Err(Error::shape("layer_norm", x.shape(), (1, scale.len())));
                }
                let mut out = x.clone();
                let n = x.cols() as f64;
                for i in 0..out.rows() {
                    let row = out.row_mut(i);
                    let mean = row.iter().sum::<f64>() / n;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                    for ((v, g), b) in row.iter_mut().zip(scale).zip(shift) {
                        *v = (*v - mean) * inv * g + b;
                    }
                }
                Ok(out)
            }
        }
    }
}

fn random_linear(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Matrix {
    randn_matrix(fan_in, fan_out, rng).scale(1.0 / (fan_in as f64).sqrt())
}

fn linear(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    let mut out = matmul(x, w)?;
    out.add_row_bias(b)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardWeights {
    pub norm: Norm,
    /// `d_model × d_ff`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `d_ff × d_model`
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl FeedForwardWeights {
    pub fn random(d_model: usize, d_ff: usize, rng: &mut Rng) -> Self {
        Self {
            norm: Norm::layer(d_model),
            w1: random_linear(d_model, d_ff, rng),
            b1: vec![0.0; d_ff],
            w2: random_linear(d_ff, d_model, rng),
            b2: vec![0.0; d_model],
        }
    }

    pub fn zeros(d_model: usize, d_ff: usize) -> Self {
        Self {
            norm: Norm::Identity,
            w1: Matrix::zeros(d_model, d_ff),
            b1: vec![0.0; d_ff],
            w2: Matrix::zeros(d_ff, d_model),
            b2: vec![0.0; d_model],
        }
    }
}

pub fn ffn_forward(x: &Matrix, w: &FeedForwardWeights) -> Result<Matrix> {
    if x.cols() != w.w1.rows() {
        return Err(Error::shape("ffn_forward", x.shape(), w.w1.shape()));
    }
    let h = linear(&w.norm.apply(x)?, &w.w1, &w.b1)?.map(swish);
    linear(&h, &w.w2, &w.b2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvModuleWeights {
    pub norm: Norm,
    /// `d_model × 2·d_model`; the second half gates the first.
    pub pw1: Matrix,
    pub pw1_bias: Vec<f64>,
    /// `kernel_size × d_model`, one tap column per channel.
    pub depthwise: Matrix,
    pub dw_bias: Vec<f64>,
    pub conv_norm: Norm,
    /// `d_model × d_model`
    pub pw2: Matrix,
    pub pw2_bias: Vec<f64>,
}

impl ConvModuleWeights {
    pub fn random(d_model: usize, kernel_size: usize, rng: &mut Rng) -> Self {
        Self {
            norm: Norm::layer(d_model),
            pw1: random_linear(d_model, 2 * d_model, rng),
            pw1_bias: vec![0.0; 2 * d_model],
            depthwise: random_linear(kernel_size, d_model, rng),
            dw_bias: vec![0.0; d_model],
            conv_norm: Norm::layer(d_model),
            pw2: random_linear(d_model, d_model, rng),
            pw2_bias: vec![0.0; d_model],
        }
    }

    pub fn zeros(d_model: usize, kernel_size: usize) -> Self {
        Self {
            norm: Norm::Identity,
            pw1: Matrix::zeros(d_model, 2 * d_model),
            pw1_bias: vec![0.0; 2 * d_model],
            depthwise: Matrix::zeros(kernel_size, d_model),
            dw_bias: vec![0.0; d_model],
            conv_norm: Norm::Identity,
            pw2: Matrix::zeros(d_model, d_model),
            pw2_bias: vec![0.0; d_model],
        }
    }

    pub fn kernel_size(&self) -> usize {
        self.depthwise.rows()
    }
}

/// `a ⊙ sigmoid(b)` where `[a | b]` splits the columns in half.
pub fn glu(x: &Matrix) -> Matrix {
    let d = x.cols() / 2;
    Matrix::from_fn(x.rows(), d, |t, c| x.get(t, c) * sigmoid(x.get(t, d + c)))
}

/// Same-padded depthwise convolution over the time axis:
/// `out[t][c] = bias[c] + Σ_m taps[m][c] · x[t + m - K/2][c]`.
pub fn depthwise_conv(x: &Matrix, taps: &Matrix, bias: &[f64]) -> Result<Matrix> {
    let ks = taps.rows();
    if ks % 2 == 0 {
        return Err(Error::Config(format!("depthwise kernel size {ks} must be odd")));
    }
    if taps.cols() != x.cols() || bias.len() != x.cols() {
        return Err(Error::shape("depthwise_conv", x.shape(), taps.shape()));
    }
    let half = ks / 2;
    let len = x.rows();
    let mut out = Matrix::zeros(len, x.cols());
    for t in 0..len {
        let out_row = out.row_mut(t);
        out_row.copy_from_slice(bias);
        for m in 0..ks {
            let Some(src) = (t + m).checked_sub(half).filter(|&s| s < len) else {
                continue;
            };
            for ((o, w), xv) in out_row.iter_mut().zip(taps.row(m)).zip(x.row(src)) {
                *o += w * xv;
            }
        }
    }
    Ok(out)
}

pub fn conv_module_forward(x: &Matrix, w: &ConvModuleWeights) -> Result<Matrix> {
    if x.cols() != w.pw1.rows() || w.pw1.cols() != 2 * x.cols() {
        return Err(Error::shape("conv_module_forward", x.shape(), w.pw1.shape()));
    }
    let gated = glu(&linear(&w.norm.apply(x)?, &w.pw1, &w.pw1_bias)?);
    let conv = depthwise_conv(&gated, &w.depthwise, &w.dw_bias)?;
    let act = w.conv_norm.apply(&conv)?.map(swish);
    linear(&act, &w.pw2, &w.pw2_bias)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformerBlockWeights {
    pub ffn1: FeedForwardWeights,
    pub mhsa_norm: Norm,
    pub mhsa: MhsaWeights,
    pub conv: ConvModuleWeights,
    pub ffn2: FeedForwardWeights,
    pub final_norm: Norm,
}

impl ConformerBlockWeights {
    pub fn random(cfg: &EncoderConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            ffn1: FeedForwardWeights::random(cfg.d_model, cfg.d_ff, rng),
            mhsa_norm: Norm::layer(cfg.d_model),
            mhsa: MhsaWeights::random(cfg.d_model, cfg.heads, rng)?,
            conv: ConvModuleWeights::random(cfg.d_model, cfg.kernel_size, rng),
            ffn2: FeedForwardWeights::random(cfg.d_model, cfg.d_ff, rng),
            final_norm: Norm::layer(cfg.d_model),
        })
    }

    /// All-zero weights, pass-through sub-module norms, unit final layer norm.
    pub fn zeros(cfg: &EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            ffn1: FeedForwardWeights::zeros(cfg.d_model, cfg.d_ff),
            mhsa_norm: Norm::Identity,
            mhsa: MhsaWeights::zeros(cfg.d_model, cfg.heads)?,
            conv: ConvModuleWeights::zeros(cfg.d_model, cfg.kernel_size),
            ffn2: FeedForwardWeights::zeros(cfg.d_model, cfg.d_ff),
            final_norm: Norm::layer(cfg.d_model),
        })
    }
}

pub fn conformer_block_forward(
    x: &Matrix,
    w: &ConformerBlockWeights,
    attn: &mut dyn AttentionKernel,
    meter: &mut AllocMeter,
) -> Result<Matrix> {
    let x = x.add_scaled(&ffn_forward(x, &w.ffn1)?, 0.5)?;
    let mhsa = multi_head_attention(&w.mhsa_norm.apply(&x)?, &w.mhsa, attn, meter)?;
    let x = x.add_scaled(&mhsa, 1.0)?;
    let x = x.add_scaled(&conv_module_forward(&x, &w.conv)?, 1.0)?;
    let x = x.add_scaled(&ffn_forward(&x, &w.ffn2)?, 0.5)?;
    w.final_norm.apply(&x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttnMode {
    Dense,
    ProbSparse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub kernel_size: usize,
    pub sparsity: SparsityParams,
    pub attn_mode: AttnMode,
}

impl Default for EncoderConfig {
    /// 16 layers, width 256, 4 heads, feed-forward 1024, kernel 3, prob-sparse.
    fn default() -> Self {
        Self {
            num_layers: 16,
            d_model: 256,
            heads: 4,
            d_ff: 1024,
            kernel_size: 3,
            sparsity: SparsityParams::default(),
            attn_mode: AttnMode::ProbSparse,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.d_ff == 0 {
            return Err(Error::Config("d_ff must be positive".into()));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel_size {} must be odd",
                self.kernel_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub output: Matrix,
    /// Layers at which a fresh query selection was computed. Zero in dense mode.
    pub measurements_computed: usize,
    /// Selected query indices used by each layer, per head. Empty in dense mode.
    pub selections: Vec<Vec<Vec<usize>>>,
}

/// Runs `weights.len()` blocks in sequence. In prob-sparse mode one kernel (and
/// therefore one set of sharing state) serves the whole pass.
pub fn encoder_forward(
    x: &Matrix,
    cfg: &EncoderConfig,
    weights: &[ConformerBlockWeights],
    rng: &mut Rng,
    meter: &mut AllocMeter,
) -> Result<EncoderOutput> {
    cfg.validate()?;
    if x.cols() != cfg.d_model {
        return Err(Error::shape("encoder_forward", x.shape(), (x.rows(), cfg.d_model)));
    }
    if weights.len() != cfg.num_layers {
        return Err(Error::Config(format!(
            "{} layer weights for a {}-layer encoder",
            weights.len(),
            cfg.num_layers
        )));
    }
    let mut h = x.clone();
    match cfg.attn_mode {
        AttnMode::Dense => {
            for w in weights {
                h = conformer_block_forward(&h, w, &mut DenseAttention, meter)?;
            }
            Ok(EncoderOutput {
                output: h,
                measurements_computed: 0,
                selections: Vec::new(),
            })
        }
        AttnMode::ProbSparse => {
            let mut kernel = ProbSparseAttention::new(cfg.sparsity, rng.fork());
            let mut selections = Vec::with_capacity(weights.len());
            for w in weights {
                h = conformer_block_forward(&h, w, &mut kernel, meter)?;
                selections.push(
                    kernel
                        .states()
                        .iter()
                        .map(|s| s.cached.as_ref().map(|c| c.indices.clone()).unwrap_or_default())
                        .collect(),
                );
            }
            Ok(EncoderOutput {
                output: h,
                measurements_computed: kernel.measurements_computed(),
                selections,
            })
        }
    }
}

/// Encoder configuration plus per-layer weights.
#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    layers: Vec<ConformerBlockWeights>,
}

impl Encoder {
    pub fn new(config: EncoderConfig, layers: Vec<ConformerBlockWeights>) -> Result<Self> {
        config.validate()?;
        if layers.len() != config.num_layers {
            return Err(Error::Config(format!(
                "{} layer weights for a {}-layer encoder",
                layers.len(),
                config.num_layers
            )));
        }
        Ok(Self { config, layers })
    }

    /// Seeded random weights; see [`ConformerBlockWeights::random`].
    pub fn random(config: EncoderConfig, rng: &mut Rng) -> Result<Self> {
        let layers = (0..config.num_layers)
            .map(|_| ConformerBlockWeights::random(&config, rng))
            .collect::<Result<_>>()?;
        Self::new(config, layers)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn layers(&self) -> &[ConformerBlockWeights] {
        &self.layers
    }

    /// Same weights, different attention mode or sparsity parameters.
    pub fn with_attention(&self, mode: AttnMode, sparsity: SparsityParams) -> Self {
        let mut e = self.clone();
        e.config.attn_mode = mode;
        e.config.sparsity = sparsity;
        e
    }

    pub fn forward(&self, x: &Matrix, rng: &mut Rng, meter: &mut AllocMeter) -> Result<EncoderOutput> {
        encoder_forward(x, &self.config, &self.layers, rng, meter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(num_layers: usize) -> EncoderConfig {
        EncoderConfig {
            num_layers,
            d_model: 8,
            heads: 2,
            d_ff: 16,
            kernel_size: 3,
            sparsity: SparsityParams::new(1.0, 0.5, 4).unwrap(),
            attn_mode: AttnMode::ProbSparse,
        }
    }

    // Explicit loops, no matmul.
    fn ffn_oracle(x: &Matrix, w: &FeedForwardWeights) -> Matrix {
        let n = w.norm.apply(x).unwrap();
        let (d_model, d_ff) = w.w1.shape();
        let mut out = Matrix::zeros(x.rows(), d_model);
        for t in 0..x.rows() {
            let mut hidden = vec![0.0; d_ff];
            for f in 0..d_ff {
                let mut acc = w.b1[f];
                for c in 0..d_model {
                    acc += n.get(t, c) * w.w1.get(c, f);
                }
                hidden[f] = acc / (1.0 + (-acc).exp());
            }
            for c in 0..d_model {
                let mut acc = w.b2[c];
                for f in 0..d_ff {
                    acc += hidden[f] * w.w2.get(f, c);
                }
                out.set(t, c, acc);
            }
        }
        out
    }

    fn conv_oracle(x: &Matrix, taps: &Matrix, bias: &[f64]) -> Matrix {
        let k = taps.rows() as isize;
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for t in 0..x.rows() as isize {
            for c in 0..x.cols() {
                let mut acc = bias[c];
                for m in 0..k {
                    let src = t + m - k / 2;
                    if src >= 0 && src < x.rows() as isize {
                        acc += taps.get(m as usize, c) * x.get(src as usize, c);
                    }
                }
                out.set(t as usize, c, acc);
            }
        }
        out
    }

    #[test]
    fn ffn_zero_weights_give_zero() {
        let x = randn_matrix(5, 8, &mut Rng::seed_from_u64(1));
        let out = ffn_forward(&x, &FeedForwardWeights::zeros(8, 16)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ffn_single_frame_shape() {
        let mut rng = Rng::seed_from_u64(2);
        let w = FeedForwardWeights::random(8, 32, &mut rng);
        let out = ffn_forward(&randn_matrix(1, 8, &mut rng), &w).unwrap();
        assert_eq!(out.shape(), (1, 8));
        assert!(ffn_forward(&Matrix::zeros(2, 7), &w).is_err());
    }

    #[test]
    fn ffn_matches_loop_oracle() {
        let mut rng = Rng::seed_from_u64(3);
        let mut w = FeedForwardWeights::random(8, 12, &mut rng);
        w.b1 = (0..12).map(|_| rng.normal()).collect();
        w.b2 = (0..8).map(|_| rng.normal()).collect();
        let x = randn_matrix(4, 8, &mut rng);
        let got = ffn_forward(&x, &w).unwrap();
        assert!(got.max_abs_diff(&ffn_oracle(&x, &w)) < 1e-12);
    }

    #[test]
    fn delta_kernel_is_identity_convolution() {
        let mut rng = Rng::seed_from_u64(4);
        let x = randn_matrix(6, 4, &mut rng);
        let mut taps = Matrix::zeros(3, 4);
        for c in 0..4 {
            taps.set(1, c, 1.0);
        }
        assert_eq!(depthwise_conv(&x, &taps, &[0.0; 4]).unwrap(), x);
    }

    #[test]
    fn delta_kernel_module_reduces_to_glu_then_swish() {
        let d = 4;
        let mut rng = Rng::seed_from_u64(5);
        let x = randn_matrix(6, d, &mut rng);
        let mut w = ConvModuleWeights::zeros(d, 3);
        // pw1 = [I | 0]: value half is x, gate half is 0.
        for c in 0..d {
            w.pw1.set(c, c, 1.0);
            w.depthwise.set(1, c, 1.0);
        }
        w.pw2 = Matrix::identity(d);
        let post_glu = glu(&matmul(&x, &w.pw1).unwrap());
        assert!(post_glu.max_abs_diff(&x.scale(0.5)) < 1e-15);
        let out = conv_module_forward(&x, &w).unwrap();
        assert!(out.max_abs_diff(&post_glu.map(swish)) < 1e-15);
    }

    #[test]
    fn conv_single_frame_uses_zero_padding() {
        let mut rng = Rng::seed_from_u64(6);
        let w = ConvModuleWeights::random(4, 3, &mut rng);
        let x = randn_matrix(1, 4, &mut rng);
        let out = conv_module_forward(&x, &w).unwrap();
        assert_eq!(out.shape(), (1, 4));
        assert!(out.is_finite());

        let taps = randn_matrix(3, 4, &mut rng);
        let expected = Matrix::from_fn(1, 4, |_, c| taps.get(1, c) * x.get(0, c));
        assert!(depthwise_conv(&x, &taps, &[0.0; 4]).unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn depthwise_matches_sliding_window_oracle() {
        let mut rng = Rng::seed_from_u64(7);
        let x = randn_matrix(6, 4, &mut rng);
        let taps = randn_matrix(3, 4, &mut rng);
        let bias: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let got = depthwise_conv(&x, &taps, &bias).unwrap();
        assert!(got.max_abs_diff(&conv_oracle(&x, &taps, &bias)) < 1e-14);

        let taps5 = randn_matrix(5, 4, &mut rng);
        let got = depthwise_conv(&x, &taps5, &bias).unwrap();
        assert!(got.max_abs_diff(&conv_oracle(&x, &taps5, &bias)) < 1e-14);
    }

    #[test]
    fn conv_module_matches_staged_oracle() {
        let mut rng = Rng::seed_from_u64(8);
        let w = ConvModuleWeights::random(4, 3, &mut rng);
        let x = randn_matrix(6, 4, &mut rng);
        let mut pre = matmul(&w.norm.apply(&x).unwrap(), &w.pw1).unwrap();
        pre.add_row_bias(&w.pw1_bias).unwrap();
        let gated = Matrix::from_fn(6, 4, |t, c| {
            pre.get(t, c) / (1.0 + (-pre.get(t, c + 4)).exp())
        });
        let conv = conv_oracle(&gated, &w.depthwise, &w.dw_bias);
        let act = w.conv_norm.apply(&conv).unwrap().map(|v| v / (1.0 + (-v).exp()));
        let mut expected = matmul(&act, &w.pw2).unwrap();
        expected.add_row_bias(&w.pw2_bias).unwrap();
        assert!(conv_module_forward(&x, &w).unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn even_kernel_is_rejected() {
        let x = Matrix::zeros(3, 2);
        assert!(depthwise_conv(&x, &Matrix::zeros(2, 2), &[0.0; 2]).is_err());
        let mut cfg = small_cfg(1);
        cfg.kernel_size = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_block_is_final_layer_norm() {
        let cfg = small_cfg(1);
        let w = ConformerBlockWeights::zeros(&cfg).unwrap();
        let x = randn_matrix(7, 8, &mut Rng::seed_from_u64(9));
        let out = conformer_block_forward(&x, &w, &mut DenseAttention, &mut AllocMeter::new()).unwrap();
        assert!(out.max_abs_diff(&Norm::layer(8).apply(&x).unwrap()) < 1e-15);
    }

    #[test]
    fn block_preserves_shape() {
        let cfg = small_cfg(1);
        let mut rng = Rng::seed_from_u64(10);
        let w = ConformerBlockWeights::random(&cfg, &mut rng).unwrap();
        for l in [1, 7, 64] {
            let x = randn_matrix(l, 8, &mut rng);
            let out = conformer_block_forward(&x, &w, &mut DenseAttention, &mut AllocMeter::new()).unwrap();
            assert_eq!(out.shape(), (l, 8));
        }
    }

    #[test]
    fn block_full_selection_matches_dense() {
        let cfg = small_cfg(1);
        let mut rng = Rng::seed_from_u64(11);
        let w = ConformerBlockWeights::random(&cfg, &mut rng).unwrap();
        let x = randn_matrix(20, 8, &mut rng);
        let mut meter = AllocMeter::new();
        let dense = conformer_block_forward(&x, &w, &mut DenseAttention, &mut meter).unwrap();
        let mut sparse_kernel =
            ProbSparseAttention::new(SparsityParams::new(1.0, 1.0, 1).unwrap(), Rng::seed_from_u64(0));
        let sparse = conformer_block_forward(&x, &w, &mut sparse_kernel, &mut meter).unwrap();
        assert!(dense.max_abs_diff(&sparse) < 1e-8);
    }

    #[test]
    fn empty_encoder_is_identity() {
        let enc = Encoder::random(small_cfg(0), &mut Rng::seed_from_u64(12)).unwrap();
        let x = randn_matrix(5, 8, &mut Rng::seed_from_u64(13));
        let out = enc.forward(&x, &mut Rng::seed_from_u64(0), &mut AllocMeter::new()).unwrap();
        assert_eq!(out.output, x);
        assert_eq!(out.measurements_computed, 0);
    }

    #[test]
    fn encoder_shares_every_four_layers() {
        let enc = Encoder::random(small_cfg(16), &mut Rng::seed_from_u64(14)).unwrap();
        let x = randn_matrix(12, 8, &mut Rng::seed_from_u64(15));
        let out = enc.forward(&x, &mut Rng::seed_from_u64(1), &mut AllocMeter::new()).unwrap();
        assert_eq!(out.measurements_computed, 4);
        assert_eq!(out.selections.len(), 16);
        for window in out.selections.chunks(4) {
            assert!(window.iter().all(|s| s == &window[0]));
            assert!(window[0].iter().all(|head| head.len() == 6));
        }
        assert!(out.output.is_finite());
    }

    #[test]
    fn encoder_rejects_wrong_width() {
        let enc = Encoder::random(small_cfg(2), &mut Rng::seed_from_u64(16)).unwrap();
        let x = Matrix::zeros(3, 9);
        assert!(enc.forward(&x, &mut Rng::seed_from_u64(0), &mut AllocMeter::new()).is_err());
        let mut cfg = small_cfg(2);
        cfg.heads = 3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
