//! Dense row-major linear algebra, stable reductions, seeded randomness and
//! transient-allocation accounting.
//!
//! Everything is `f64`. The attention kernels only need a handful of
//! primitives (row dot products, `axpy`, row softmax, log-sum-exp) so those are
//! hand-written here rather than pulled from a BLAS.

mod alloc;
mod matrix;
mod reduce;
mod rng;

pub use alloc::AllocMeter;
pub use matrix::{matmul, matmul_metered, Matrix};
pub use reduce::{axpy, dot, dot4, log_sum_exp, row_softmax, softmax_in_place};
pub(crate) use reduce::{log_sum_exp_unchecked, max_minus_mean};
pub use rng::{randn_matrix, sample_without_replacement, Rng};
