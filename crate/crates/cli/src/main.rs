//! Train sphere embeddings over triple files, then answer head/tail queries
//! as exact sets, score against ranking baselines, or dump radius
//! statistics.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{
    cmd_analyze_radius, cmd_eval, cmd_query, cmd_train, AnalyzeRadiusArgs, AppError, EvalArgs,
    QueryArgs, TrainArgs,
};
use sphere_kge::kg::QueryDirection;

#[derive(Parser)]
#[command(name = "sphere-kge", version, about = "Sphere-based KG embeddings with exact set retrieval")]
struct Cli {
    /// Threads for parallel evaluation (0 = all cores). Training is
    /// single-threaded for reproducibility.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from train/valid/test TSVs and write a checkpoint.
    Train {
        /// Config file (`key = value` lines); defaults apply otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory with train.txt/valid.txt/test.txt (or $SPHERE_KGE_DATA).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Training-log CSV path (default: <out>.log.csv).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also dump entities.tsv/relations.tsv into this directory.
        #[arg(long)]
        dump_vocab: Option<PathBuf>,
    },
    /// Evaluate a checkpoint: per-mode F1 / retrieve-rate metrics as CSV.
    Eval {
        /// Checkpoint path.
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Modes: `sphere,top_l=1,3,...` (default: sphere + l=1,3,5,10,20,100).
        #[arg(long)]
        mode: Option<String>,
        /// Extra top-l values, comma separated.
        #[arg(long)]
        l: Option<String>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieve the answer set of one query, nearest first.
    Query {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// `tail` answers (anchor, relation, ?); `head` answers (?, relation, anchor).
        #[arg(long)]
        direction: Direction,
        /// Entity name of the anchor.
        #[arg(long)]
        anchor: String,
        /// Relation name.
        #[arg(long)]
        relation: String,
    },
    /// Bucket learned radii by entity occurrence count.
    AnalyzeRadius {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Tail,
    Head,
}

impl From<Direction> for QueryDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Tail => QueryDirection::Tail,
            Direction::Head => QueryDirection::Head,
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| AppError::Usage(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Train { config, data, out, seed, log, dump_vocab } => cmd_train(TrainArgs {
            config_path: config,
            data,
            out,
            seed,
            log_path: log,
            dump_vocab,
        }),
        Command::Eval { ckpt, data, mode, l, out } => {
            cmd_eval(EvalArgs { ckpt, data, mode, l, out })
        }
        Command::Query { ckpt, data, direction, anchor, relation } => cmd_query(QueryArgs {
            ckpt,
            data,
            direction: direction.into(),
            anchor,
            relation,
        }),
        Command::AnalyzeRadius { ckpt, data, out } => {
            cmd_analyze_radius(AnalyzeRadiusArgs { ckpt, data, out })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // Parse failure: report as a usage error (exit 1).
            eprint!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
