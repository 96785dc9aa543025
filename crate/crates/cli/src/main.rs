//! `storypref`: command-line driver for every pipeline stage.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use storypref_core::pairforge::Method;

#[derive(Parser)]
#[command(name = "storypref", version, about = "Story-preference benchmark toolkit")]
struct Cli {
    /// Pipeline config file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress at info level (RUST_LOG takes precedence).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Out {
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a story file and rewrite it with a provenance header.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Corpus label recorded in the header.
        #[arg(long, default_value = "corpus")]
        label: String,
        #[command(flatten)]
        out: Out,
    },
    /// Keep stories with at least the minimum word count.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        min_words: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// Print count, average and median length of a story file.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write candidate sets: one set of stories per premise.
    GenerateCandidates {
        #[arg(long)]
        premises: PathBuf,
        /// Human stories; one matching a premise id joins that premise's set.
        #[arg(long)]
        stories: Option<PathBuf>,
        /// Comma-separated generator names, replacing the configured list.
        #[arg(long, value_delimiter = ',')]
        backend: Vec<String>,
        #[command(flatten)]
        out: Out,
    },
    /// Score every candidate with every judge of the panel.
    PanelScore {
        #[arg(long)]
        candidates: PathBuf,
        /// Comma-separated judge names, replacing the configured panel.
        #[arg(long, value_delimiter = ',')]
        backend: Vec<String>,
        #[command(flatten)]
        out: Out,
    },
    /// Measure panel agreement and route each set to an annotation mode.
    AgreeAndRoute {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        out: Out,
    },
    /// Assemble categorized benchmark instances from routed sets.
    Categorize {
        #[arg(long)]
        routed: PathBuf,
        /// Final decisions exported from the annotation service.
        #[arg(long)]
        decisions: Option<PathBuf>,
        /// Accept proposed rankings of undecided verification and human best-check sets.
        #[arg(long)]
        auto_confirm: bool,
        #[command(flatten)]
        out: Out,
    },
    /// Build preference pairs with one method.
    ForgePairs {
        /// back-generation, rewriting, continuation or llm-vs-llm.
        method: Method,
        #[arg(long)]
        stories: Option<PathBuf>,
        #[arg(long)]
        premises: Option<PathBuf>,
        /// Backend writing premises, rewrites or continuations.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        min_words: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// Merge pair files into one training file and report per-method counts.
    ExportPairs {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Evaluate a reward-model adapter on a benchmark file.
    Evaluate {
        #[arg(long)]
        benchmark: PathBuf,
        /// Adapter name from the config, or `mock:<name>` for a seeded mock.
        #[arg(long)]
        adapter: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Best-of-N selection per premise.
    Bon {
        #[arg(long)]
        stories: PathBuf,
        #[arg(long)]
        premises: PathBuf,
        #[arg(long)]
        adapter: String,
        #[command(flatten)]
        out: Out,
    },
    /// Compare two adapters' BoN selections against human rankings.
    HeadToHead {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sentence-length kurtosis per story file.
    Kurtosis {
        /// Story files, each labelled by its file stem.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Label of the reference set for relative differences.
        #[arg(long)]
        reference: Option<String>,
        /// Per-story kurtosis output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the annotation queue over HTTP.
    AnnotateServe {
        #[arg(long)]
        routed: PathBuf,
        /// Append-only event log, replayed on start.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
    /// Replay an annotation log into a final-decision file.
    AnnotateExport {
        #[arg(long)]
        routed: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Recompute the provenance hashes of output files.
    Verify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Also require this config hash.
        #[arg(long)]
        expect_config: Option<String>,
    },
    /// Print the effective config as TOML.
    ShowConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
