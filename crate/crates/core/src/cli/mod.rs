//! Command-line front end. Each subcommand reads and writes artifacts in
//! the output directory, so stages can be run one at a time.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::CategorySource;
pub use config::RunConfig;

use crate::error::Error;
use crate::temporal::RegressionMode;

/// A failure after argument parsing; reported with exit code 2.
#[derive(Debug)]
pub enum CliError {
    Data(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lexbias", version, about = "Gender bias measurement for legal text corpora")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FixtureSet {
    /// Caliskan employment words scored against Garg gender terms.
    CaliskanGarg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Levels,
    Diff,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// jsonl or plain_dir.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-threaded training for byte-identical outputs.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Output directory for artifacts and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    slice_years: Option<u32>,
    #[arg(long, global = true)]
    k_each: Option<usize>,
    #[arg(long, global = true)]
    kmeans_k: Option<usize>,
    #[arg(long, global = true, value_enum)]
    fixtures: Option<FixtureSet>,
    #[arg(long, global = true)]
    labor_csv: Option<PathBuf>,
    /// Regress levels or consecutive differences.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
struct CategoryArgs {
    /// Annotated theming sheet (word,z,category).
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Use the clusters retained by `cluster`.
    #[arg(long, conflicts_with = "categories")]
    from_clusters: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the corpus, tag sentences by gender and write histograms.
    Ingest,
    /// Score words by weighted log-odds and keep the most gendered.
    Wlor,
    /// Train or import a word embedding.
    Embed {
        #[command(subcommand)]
        action: EmbedCommand,
    },
    /// Cluster the embedding and keep clusters rich in gendered words.
    Cluster {
        /// Cluster only the gendered words rather than the full vocabulary.
        #[arg(long)]
        cluster_top500_only: bool,
    },
    /// Score bias categories against the gender axis.
    Weat(CategoryArgs),
    /// Check how stable each category word is across base pairs.
    Stability(CategoryArgs),
    /// Track category bias across time slices.
    Timeline(CategoryArgs),
    /// Collect existing reports into one summary.
    Report,
}

#[derive(Debug, Subcommand)]
enum EmbedCommand {
    /// Train skip-gram with negative sampling on the corpus.
    Train,
    /// Import a word2vec text file.
    Import {
        path: PathBuf,
        /// Frequency sidecar (word,count).
        #[arg(long)]
        freq: Option<PathBuf>,
    },
}

fn build_config(g: &GlobalArgs) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &g.corpus {
        cfg.corpus = Some(v.clone());
    }
    if let Some(v) = &g.format {
        cfg.format = v.clone();
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if g.deterministic {
        cfg.deterministic = true;
    }
    if let Some(v) = &g.out {
        cfg.out = v.clone();
    }
    if let Some(v) = g.slice_years {
        cfg.slice_years = v;
    }
    if let Some(v) = g.k_each {
        cfg.k_each = v;
    }
    if let Some(v) = g.kmeans_k {
        cfg.kmeans_k = v;
    }
    if let Some(FixtureSet::CaliskanGarg) = g.fixtures {
        cfg.fixtures = Some("caliskan-garg".into());
    }
    if let Some(v) = &g.labor_csv {
        cfg.labor_csv = Some(v.clone());
    }
    if let Some(m) = g.mode {
        cfg.mode = match m {
            ModeArg::Levels => RegressionMode::Levels,
            ModeArg::Diff => RegressionMode::Diff,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = build_config(&cli.global)?;
    if let Command::Cluster { cluster_top500_only: true } = cli.command {
        cfg.cluster_gendered_only = true;
    }
    let ctx = commands::Ctx::new(cfg);
    let src = |a: CategoryArgs| CategorySource {
        theming: a.categories,
        from_clusters: a.from_clusters,
    };
    match cli.command {
        Command::Ingest => commands::ingest(&ctx),
        Command::Wlor => commands::wlor(&ctx),
        Command::Embed { action: EmbedCommand::Train } => commands::embed_train(&ctx),
        Command::Embed {
            action: EmbedCommand::Import { path, freq },
        } => commands::embed_import(&ctx, &path, freq.as_deref()),
        Command::Cluster { .. } => commands::cluster(&ctx),
        Command::Weat(a) => commands::weat(&ctx, &src(a)),
        Command::Stability(a) => commands::stability(&ctx, &src(a)),
        Command::Timeline(a) => commands::timeline(&ctx, &src(a)),
        Command::Report => commands::report(&ctx),
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit code:
/// 0 on success, 1 for usage errors, 2 for data errors.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
