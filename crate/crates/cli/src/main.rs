use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "vulspg", version, about = "Slice property graph vulnerability detector for C")]
struct Cli {
    /// Settings file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphKind {
    Cfg,
    Pdg,
    Cpg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Dot,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Spg,
    Program,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a C file and dump its AST as JSON.
    Parse {
        file: PathBuf,
        /// Write the AST here instead of stdout.
        #[arg(long)]
        emit_ast: Option<PathBuf>,
    },
    /// Export the CFG, PDG or CPG of a C file.
    Graph {
        file: PathBuf,
        #[arg(long, value_enum)]
        emit: GraphKind,
        #[arg(long, value_enum, default_value = "dot")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List syntax-based vulnerability candidates.
    Syvc {
        file: PathBuf,
        /// Comma-separated kinds out of fc,au,pu,ae,fp,fr.
        #[arg(long)]
        kinds: Option<String>,
        /// Sensitive-API list, one name per line.
        #[arg(long)]
        api: Option<PathBuf>,
    },
    /// Print the slice sets of one criterion.
    Slice {
        file: PathBuf,
        /// `kind:element:line`, e.g. `fp:size:1`.
        #[arg(long)]
        criterion: String,
        #[arg(long)]
        api: Option<PathBuf>,
    },
    /// Generate SPGs for source files or a labeled manifest.
    Spg {
        files: Vec<PathBuf>,
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long)]
        api: Option<PathBuf>,
        /// Manifest of `path<TAB>vulnerable-lines` rows used for labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Directory receiving one JSON and one DOT file per SPG.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train token embeddings on a directory of C files or a manifest.
    Pretrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the classifier on the training split of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Pretrained embeddings; trained on the training split when absent.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify every SPG of each file and give a per-program verdict.
    Detect {
        files: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// JSON report destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detection metrics on the test split of a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Evaluate every program instead of the test split.
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value = "spg")]
        level: Level,
        /// JSON metrics destination; printed after the table when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SPG counts per kind and vulnerable-line coverage of a manifest.
    Coverage {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
