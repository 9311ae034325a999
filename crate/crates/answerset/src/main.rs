use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use answerset::harness::{
    self, evaluate, ingest, overlap, score, simulate, write_eval_report, write_overlap_report,
    write_score_report, HarnessError, RunConfig,
};

/// Score, evaluate, and analyze multi-answer generation dumps, or run the
/// tabular GRPO simulator.
#[derive(Parser)]
#[command(name = "answerset", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonFlags {
    /// Seed for every randomized choice (pass@1 selection, simulator streams).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of equal-width calibration bins.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// N-gram size for the overlap analysis.
    #[arg(long = "ngram-n", default_value_t = 4)]
    ngram_n: usize,
    /// Rescale percentage confidences in (1, 100] instead of flagging them.
    #[arg(long = "lenient-confidence", default_value_t = false)]
    lenient_confidence: bool,
    /// Directory the report files are written to.
    #[arg(long = "out", default_value = ".")]
    out: PathBuf,
}

impl CommonFlags {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            bins: self.bins,
            ngram_n: self.ngram_n,
            lenient_confidence: self.lenient_confidence,
            out_dir: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute gated reward breakdowns for every generation in a dump.
    Score {
        /// JSONL dump, one record per line.
        input: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Compute the full metric suite per (method, source) group.
    Evaluate {
        input: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// N-gram overlap across repeated samples of the same prompt.
    Overlap {
        input: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run simulator experiments from a JSON config file.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn report_issues(issues: &[harness::LineIssue]) {
    for issue in issues {
        eprintln!("warning: line {}: {}", issue.line, issue.message);
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Score { input, flags } => {
            let config = flags.run_config();
            let ingested = ingest(&input)?;
            report_issues(&ingested.issues);
            let report = score(&ingested.records, &config)?;
            for path in write_score_report(&report, &config.out_dir)? {
                println!("wrote {}", path.display());
            }
            for aggregate in &report.aggregates {
                println!(
                    "{}: mean_total {:.4} over {} generations (gate pass rate {:.2})",
                    aggregate.method,
                    aggregate.mean_total,
                    aggregate.n_rows,
                    aggregate.gate_pass_rate
                );
            }
        }
        Command::Evaluate { input, flags } => {
            let config = flags.run_config();
            let ingested = ingest(&input)?;
            report_issues(&ingested.issues);
            let report = evaluate(&ingested.records, &config)?;
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            for path in write_eval_report(&report, &config.out_dir)? {
                println!("wrote {}", path.display());
            }
            for group in &report.groups {
                println!(
                    "{} [{}]: coverage {:.4}, avg correct {:.4}, pass@1 {:.4}, pass@k {:.4}",
                    group.method,
                    group.source.label(),
                    group.report.coverage_mean,
                    group.report.correct_count,
                    group.report.pass1,
                    group.report.pass_at_k
                );
            }
        }
        Command::Overlap { input, flags } => {
            let config = flags.run_config();
            let ingested = ingest(&input)?;
            report_issues(&ingested.issues);
            let report = overlap(&ingested.records, &config)?;
            for path in write_overlap_report(&report, &config.out_dir)? {
                println!("wrote {}", path.display());
            }
            for aggregate in &report.aggregates {
                println!(
                    "{}: mean {}-gram overlap {:.4} over {} prompts",
                    aggregate.method, config.ngram_n, aggregate.mean_overlap, aggregate.n_rows
                );
            }
        }
        Command::Simulate {
            config: config_path,
            flags,
        } => {
            let config = flags.run_config();
            let output = simulate(&config_path, &config)?;
            for path in &output.written {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
