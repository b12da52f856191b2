use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{BenchError, BenchRecord, Mode, Scope};

pub const CSV_HEADER: &str = "mode,scope,seq_len,trial,wall_time_ns,transient_bytes,r_sparse,r_sample,n_share,seed";

/// Published speed-up and memory-reduction ranges for the sparse attention
/// module, in percent.
pub const REFERENCE_SPEEDUP_BAND: (f64, f64) = (8.0, 45.0);
pub const REFERENCE_MEMORY_BAND: (f64, f64) = (15.0, 45.0);

pub fn csv_string(records: &[BenchRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.mode,
            r.scope,
            r.seq_len,
            r.trial,
            r.wall_time_ns,
            r.transient_bytes,
            r.params.r_sparse(),
            r.params.r_sample(),
            r.params.share_every(),
            r.seed
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), BenchError> {
    fs::write(path, contents).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv(path: &Path, records: &[BenchRecord]) -> Result<(), BenchError> {
    write_file(path, &csv_string(records))
}

pub fn write_report(path: &Path, rows: &[SummaryRow]) -> Result<(), BenchError> {
    write_file(path, &render_report(rows))
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] as f64 + v[mid] as f64) / 2.0
    })
}

/// Per-length medians for one scope. Ratios are present only when both modes
/// were measured at that length.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scope: Scope,
    pub seq_len: usize,
    pub dense_ns: Option<f64>,
    pub sparse_ns: Option<f64>,
    pub dense_bytes: Option<f64>,
    pub sparse_bytes: Option<f64>,
}

impl SummaryRow {
    /// `dense / sparse` wall time.
    pub fn speedup_ratio(&self) -> Option<f64> {
        Some(self.dense_ns? / self.sparse_ns?)
    }

    /// `1 - sparse / dense` wall time: the fraction of dense time saved.
    pub fn time_reduction(&self) -> Option<f64> {
        Some(1.0 - self.sparse_ns? / self.dense_ns?)
    }

    /// `1 - sparse_bytes / dense_bytes`.
    pub fn memory_reduction(&self) -> Option<f64> {
        let dense = self.dense_bytes?;
        (dense > 0.0).then(|| 1.0 - self.sparse_bytes.unwrap_or(f64::NAN) / dense)
            .filter(|r| r.is_finite())
    }
}

pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    type Samples = BTreeMap<Mode, (Vec<u64>, Vec<u64>)>;
    let mut groups: BTreeMap<(Scope, usize), Samples> = BTreeMap::new();
    for r in records {
        let entry = groups.entry((r.scope, r.seq_len)).or_default().entry(r.mode).or_default();
        entry.0.push(r.wall_time_ns);
        entry.1.push(r.transient_bytes);
    }
    groups
        .into_iter()
        .map(|((scope, seq_len), modes)| {
            let time = |m| modes.get(&m).and_then(|s: &(Vec<u64>, Vec<u64>)| median(&s.0));
            let bytes = |m| modes.get(&m).and_then(|s: &(Vec<u64>, Vec<u64>)| median(&s.1));
            SummaryRow {
                scope,
                seq_len,
                dense_ns: time(Mode::Dense),
                sparse_ns: time(Mode::ProbSparse),
                dense_bytes: bytes(Mode::Dense),
                sparse_bytes: bytes(Mode::ProbSparse),
            }
        })
        .collect()
}

fn ms(ns: Option<f64>) -> String {
    ns.map_or_else(|| "-".into(), |v| format!("{:.3}", v / 1e6))
}

fn pct(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |v| format!("{:.1}", v * 100.0))
}

/// Markdown with one table per scope.
pub fn render_report(rows: &[SummaryRow]) -> String {
    let mut out = String::from("# Dense vs prob-sparse attention\n");
    let mut scopes: Vec<Scope> = rows.iter().map(|r| r.scope).collect();
    scopes.dedup();
    for scope in scopes {
        let _ = write!(
            out,
            "\n## Scope: {scope}\n\n\
             | seq_len | dense median (ms) | sparse median (ms) | speedup % | memory reduction % |\n\
             |--------:|------------------:|-------------------:|----------:|-------------------:|\n"
        );
        for r in rows.iter().filter(|r| r.scope == scope) {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                r.seq_len,
                ms(r.dense_ns),
                ms(r.sparse_ns),
                pct(r.time_reduction()),
                pct(r.memory_reduction())
            );
        }
    }
    let _ = write!(
        out,
        "\nspeedup % is `(1 - sparse/dense) * 100` of median wall time; memory reduction % is \
         `(1 - sparse/dense) * 100` of transient score-buffer bytes.\n\n\
         Reference band for the sparse self-attention module: {:.0}% to {:.0}% speed-up and \
         {:.0}% to {:.0}% memory reduction. Absolute figures depend on hardware.\n",
        REFERENCE_SPEEDUP_BAND.0, REFERENCE_SPEEDUP_BAND.1, REFERENCE_MEMORY_BAND.0, REFERENCE_MEMORY_BAND.1
    );
    out
}
