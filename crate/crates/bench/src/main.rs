use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use probsparse::verify::{run_suite, SuiteConfig};
use probsparse::SparsityParams;
use probsparse_bench::{
    parse_seq_lens, run_bench, summarize, write_csv, write_report, BenchConfig, BenchError, Mode, Scope,
    WARMUP_RUNS,
};

#[derive(Parser)]
#[command(name = "probsparse", version, about = "Prob-sparse attention benchmark and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time dense and prob-sparse attention across sequence lengths.
    Bench(BenchArgs),
    /// Run the seeded oracle and invariant suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dense,
    Probsparse,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Attention,
    Encoder,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "attention")]
    scope: ScopeArg,
    /// Comma-separated sequence lengths.
    #[arg(long, default_value = "512,1024,2048,4096")]
    seq_lens: String,
    #[arg(long, default_value_t = 256)]
    d_model: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 16)]
    layers: usize,
    #[arg(long, default_value_t = 0.5)]
    r_sparse: f64,
    #[arg(long, default_value_t = 1.0)]
    r_sample: f64,
    #[arg(long, default_value_t = 4)]
    n_share: usize,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
    #[arg(long, default_value = "bench.md")]
    report: PathBuf,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    instances: usize,
}

fn bench(args: BenchArgs) -> Result<(), BenchError> {
    let params = SparsityParams::new(args.r_sample, args.r_sparse, args.n_share)
        .map_err(|e| BenchError::Usage(e.to_string()))?;
    let cfg = BenchConfig {
        modes: match args.mode {
            ModeArg::Dense => vec![Mode::Dense],
            ModeArg::Probsparse => vec![Mode::ProbSparse],
            ModeArg::Both => vec![Mode::Dense, Mode::ProbSparse],
        },
        scope: match args.scope {
            ScopeArg::Attention => Scope::Attention,
            ScopeArg::Encoder => Scope::Encoder,
        },
        seq_lens: parse_seq_lens(&args.seq_lens)?,
        d_model: args.d_model,
        heads: args.heads,
        layers: args.layers,
        params,
        trials: args.trials,
        warmup: WARMUP_RUNS,
        seed: args.seed,
    };
    let records = run_bench(&cfg, |r| {
        eprintln!(
            "{:>10} {:<9} L={:<6} trial {}  {:>10.3} ms  {:>12} B",
            r.mode,
            r.scope,
            r.seq_len,
            r.trial,
            r.wall_time_ns as f64 / 1e6,
            r.transient_bytes
        );
    })?;
    write_csv(&args.out, &records)?;
    let summary = summarize(&records);
    write_report(&args.report, &summary)?;
    print!("{}", probsparse_bench::render_report(&summary));
    eprintln!("wrote {} and {}", args.out.display(), args.report.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Bench(args) => match bench(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Verify(args) => {
            let report = run_suite(SuiteConfig {
                seed: args.seed,
                instances: args.instances,
            });
            println!("{report}");
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                for f in report.failures() {
                    if let Some(fail) = &f.failure {
                        eprintln!("replay {}: Rng::seed_from_u64({})", f.name, fail.seed);
                    }
                }
                ExitCode::FAILURE
            }
        }
    }
}
