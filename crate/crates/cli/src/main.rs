mod commands;
mod config;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, Provider, Rejection, Widths};

#[derive(Debug, Parser)]
#[command(name = "mdvqa", version, about = "No-reference video quality toolkit")]
struct Cli {
    /// TOML file whose keys mirror the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode videos (Y4M files or PNG frame directories) and write their feature files.
    Extract(ExtractArgs),
    /// Train a model on a labeled manifest.
    Train(TrainArgs),
    /// Score every manifest video with a trained model.
    Predict(PredictArgs),
    /// Repeated train/test splits with SRCC and PLCC per split.
    Eval(EvalArgs),
    /// Turn a ratings CSV into MOS.
    Mos(MosArgs),
    /// Write train/test id lists.
    Split(SplitArgs),
    /// Per-CRF score distribution.
    CrfSummary(CrfArgs),
    /// Run the rating server.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct Grouping {
    /// Keep all encodes of a source on one side of a split (default).
    #[arg(long, conflicts_with = "ungrouped")]
    grouped: bool,
    /// Split videos independently of their source group.
    #[arg(long)]
    ungrouped: bool,
}

impl Grouping {
    fn get(&self) -> Option<bool> {
        match (self.grouped, self.ungrouped) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Args)]
struct TrainFlags {
    /// Maximum epochs [default: 50].
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
    /// Videos per optimizer step [default: 8].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Hidden widths h_s,h_d,n_m_out,head1,head2 [default: 128,32,64,128,32].
    #[arg(long)]
    dims: Option<Widths>,
    /// Expected L; checked against the manifest.
    #[arg(long = "L")]
    l: Option<usize>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Y4M files or directories of PNG frames; the video id is the file stem.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Directory for the feature files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest to create or update [default: OUT/manifest.json].
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Half the number of sampled frames per clip [default: 8].
    #[arg(long = "L")]
    l: Option<usize>,
    /// Source of semantic and motion features [default: toy].
    #[arg(long, value_enum)]
    provider: Option<Provider>,
    /// With `--provider files`: directory holding ID.semantic.feat and ID.motion.feat.
    #[arg(long)]
    features_dir: Option<PathBuf>,
    /// Toy backbone weight seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch loss CSV [default: OUT with extension .loss.csv].
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Initialization and shuffle seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Scores CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory for splits.csv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of random splits [default: 30].
    #[arg(long)]
    splits: Option<usize>,
    /// Train fraction [default: 0.8].
    #[arg(long)]
    ratio: Option<f64>,
    /// Split s uses seed + s [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    grouping: Grouping,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Args)]
struct MosArgs {
    /// Ratings CSV (subject_id,video_id,rating,timestamp_iso8601).
    ratings: PathBuf,
    /// MOS CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// When subject screening runs [default: before-zscore].
    #[arg(long, value_enum)]
    rejection: Option<Rejection>,
    /// Also store the MOS values in this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory for split_NNN.json files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of splits [default: 1].
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[command(flatten)]
    grouping: Grouping,
}

#[derive(Debug, Args)]
struct CrfArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Predicted scores CSV (video_id,score) instead of the manifest MOS.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Summary CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory with one media file per video, named by video id.
    #[arg(long)]
    media_dir: Option<PathBuf>,
    /// Event log and CSV snapshots.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// [default: 127.0.0.1:8080]
    #[arg(long)]
    addr: Option<SocketAddr>,
    /// Playlist shuffle seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Videos per session [default: 50].
    #[arg(long)]
    playlist_size: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    let result = cli
        .config
        .as_deref()
        .map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
        .and_then(|cfg| commands::run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
