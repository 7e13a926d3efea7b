//! `candleprobe` command line: dataset generation and ingestion, training,
//! evaluation, attack campaigns, and SVG rendering.
//!
//! Exit codes are a stable contract for scripting: 0 success, 1 internal
//! error, 2 missing or invalid input, 3 numeric divergence. No environment
//! variables are consulted; behavior is controlled by flags and the config
//! file alone.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "candleprobe", version, about = "Field-encoded candlestick classification and diagonal local-search attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset and split it into train/test files.
    Generate {
        /// Output directory for train.gafl, test.gafl, manifest.txt.
        #[arg(long)]
        out: PathBuf,
        /// Config file (line-oriented `key = value` with [section] headers).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Samples per pattern label (label 0 gets twice as many).
        #[arg(long = "per-label")]
        per_label: Option<usize>,
        #[arg(long = "train-fraction")]
        train_fraction: Option<f64>,
    },
    /// Harvest labeled windows from a CSV of OHLC bars.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        /// Output directory for windows.gafl (plus train/test when splitting).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Window offset; defaults to 10 (non-overlapping windows).
        #[arg(long)]
        stride: Option<usize>,
        /// When set, also write a stratified train/test split.
        #[arg(long = "train-fraction")]
        train_fraction: Option<f64>,
        /// Column names; use `--col-timestamp none` for files without one.
        #[arg(long = "col-timestamp", default_value = "timestamp")]
        col_timestamp: String,
        #[arg(long = "col-open", default_value = "open")]
        col_open: String,
        #[arg(long = "col-high", default_value = "high")]
        col_high: String,
        #[arg(long = "col-low", default_value = "low")]
        col_low: String,
        #[arg(long = "col-close", default_value = "close")]
        col_close: String,
    },
    /// Train the classifier on generated or ingested dataset files.
    Train {
        /// Directory containing train.gafl and test.gafl.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for model.gcnn and metrics.log.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint against a dataset file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the diagonal local-search attack campaign and write reports.
    Attack {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output directory for report.txt, report.csv, figures/, outcomes/.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Render this many before/after figure pairs per label.
        #[arg(long, default_value_t = 0)]
        render: usize,
        /// Also write per-sample outcome records under outcomes/.
        #[arg(long)]
        archive: bool,
        /// Attack label-0 samples too (by default only the eight patterns).
        #[arg(long = "include-none")]
        include_none: bool,
    },
    /// Render one dataset sample as candlestick and heatmap SVGs.
    Render {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
        /// Heatmap channel: open, high, low, or close.
        #[arg(long, default_value = "close")]
        channel: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { out, config, seed, per_label, train_fraction } => {
            commands::generate(out, config, seed, per_label, train_fraction)
        }
        Command::Ingest {
            csv,
            out,
            config,
            seed,
            stride,
            train_fraction,
            col_timestamp,
            col_open,
            col_high,
            col_low,
            col_close,
        } => commands::ingest(commands::IngestArgs {
            csv,
            out,
            config,
            seed,
            stride,
            train_fraction,
            col_timestamp,
            col_open,
            col_high,
            col_low,
            col_close,
        }),
        Command::Train { data, out, config, seed, epochs } => {
            commands::train(data, out, config, seed, epochs)
        }
        Command::Eval { checkpoint, data } => commands::eval(checkpoint, data),
        Command::Attack {
            checkpoint,
            data,
            out,
            config,
            seed,
            workers,
            render,
            archive,
            include_none,
        } => commands::attack(commands::AttackArgs {
            checkpoint,
            data,
            out,
            config,
            seed,
            workers,
            render,
            archive,
            include_none,
        }),
        Command::Render { data, index, out, channel } => {
            commands::render(data, index, out, channel)
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code())
        }
    }
}
