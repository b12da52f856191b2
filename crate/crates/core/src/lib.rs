//! Prob-sparse self-attention.
//!
//! Each query is scored by how far its attention distribution over the keys
//! sits from uniform. Only the highest-scoring queries get the full softmax
//! weighted sum; every other query passes its own value row through unchanged.
//! The crate also ships a Conformer encoder stack that reuses one query
//! selection across several consecutive layers, and the brute-force reference
//! implementations the test suites check against.
//!
//! Module map:
//!
//! - [`numeric`]: row-major [`Matrix`], stable reductions, seeded [`Rng`] and
//!   the [`AllocMeter`] transient-byte accountant.
//! - [`attention`]: vanilla scaled dot-product attention and multi-head
//!   wrapper with a pluggable [`AttentionKernel`].
//! - [`sparse`]: sparsity measurements, top-k query selection, sparse attention
//!   with passthrough, and cross-layer selection sharing.
//! - [`conformer`]: feed-forward, convolution and block forward passes plus the
//!   stacked [`Encoder`].
//! - [`oracle`]: independent brute-force references.
//! - [`verify`]: the seeded property suite behind `probsparse verify`.

pub mod attention;
pub mod conformer;
mod error;
pub mod numeric;
pub mod oracle;
pub mod sparse;
pub mod verify;

pub use attention::{
    attention_dense, attention_row, multi_head_attention, project_qkv, AttentionKernel, AttnOutput,
    DenseAttention, MhsaWeights, ProjectionWeights,
};
pub use conformer::{AttnMode, ConformerBlockWeights, Encoder, EncoderConfig, EncoderOutput};
pub use error::{Error, Result};
pub use numeric::{AllocMeter, Matrix, Rng};
pub use sparse::{
    attention_prob_sparse, select_queries, shared_select, LayerShareState, ProbSparseAttention,
    SparsityParams, SparsitySelection,
};
