//! Command-line pipeline: ingest, align, convert, stats, train, tag,
//! broadcast, eval, split. Logs go to standard error, data to files or
//! standard output. Exit status: 0 on full success, 1 for an alignment run
//! that produced error records, 2 for fatal errors and usage problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod ops;
mod stats;

#[derive(Parser)]
#[command(
    name = "necorpus",
    version,
    about = "Align stand-off named-entity annotations onto CoNLL-U and train a CRF tagger"
)]
struct Cli {
    /// Cap worker parallelism (0 = all cores). Output is identical at any
    /// thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and canonicalize an inline-ENAMEX file
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge ENAMEX mentions onto a CoNLL-U tokenization (extended output)
    Align {
        /// Sentence-per-line text with inline ENAMEX elements
        #[arg(long)]
        enamex: PathBuf,
        /// CoNLL-U file with the same sentences in the same order
        #[arg(long)]
        conllu: PathBuf,
        /// Extended 13-column output
        #[arg(long)]
        out: PathBuf,
        /// Error records, one `sentence_id TAB kind TAB detail` per line
        #[arg(long)]
        errors: PathBuf,
    },
    /// Re-emit an extended corpus as inline ENAMEX text (single-space
    /// detokenization)
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print corpus statistics of an extended corpus
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Train the CRF tagger on extended corpora
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        /// Gazetteer file, one space-separated entry per line; repeatable,
        /// priority follows flag order
        #[arg(long = "gazetteer")]
        gazetteers: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        l1: f64,
        #[arg(long, default_value_t = 0.1)]
        l2: f64,
        /// Recorded in the model; training itself is deterministic
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_epochs: usize,
        #[arg(long, default_value_t = 5)]
        patience: usize,
        #[arg(long)]
        model_out: PathBuf,
        /// Training log (`epoch TAB objective TAB dev_error`); stderr when
        /// omitted
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Tag a corpus (plain or extended input) with a trained model
    Tag {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Must repeat the gazetteers the model was trained with
        #[arg(long = "gazetteer")]
        gazetteers: Vec<PathBuf>,
        /// Apply mention broadcasting after decoding
        #[arg(long)]
        broadcast: bool,
    },
    /// Apply mention broadcasting to an extended corpus
    Broadcast {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entity-level evaluation of a predicted corpus against gold
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Also write machine-readable records
        /// (`type TAB tp TAB fp TAB fn TAB P TAB R TAB F1`)
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Split a corpus into train/dev/test parts with sentence-id manifests
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated part sizes `train,dev,test`; must sum to the
        /// corpus size
        #[arg(long)]
        sizes: String,
        /// Shuffle seed; omit for the chronological split
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match necorpus::par::with_threads(cli.threads, || ops::run(cli.command)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
