//! Dense vs prob-sparse attention benchmark harness.
//!
//! [`run_bench`] sweeps sequence lengths and records wall time plus
//! transient score-buffer bytes for each `(seq_len, trial, mode)`. The records
//! serialize to CSV ([`write_csv`]) and reduce to per-length medians and
//! ratios ([`summarize`], [`render_report`]).

mod config;
mod error;
mod report;
mod run;

pub use config::{parse_seq_lens, BenchConfig, Mode, Scope, DEFAULT_SEQ_LENS, WARMUP_RUNS};
pub use error::BenchError;
pub use report::{
    csv_string, median, render_report, summarize, write_csv, write_report, SummaryRow, CSV_HEADER,
    REFERENCE_MEMORY_BAND, REFERENCE_SPEEDUP_BAND,
};
pub use run::{run_bench, BenchRecord};
