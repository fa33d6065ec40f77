use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use storycause::corpus::FixtureShape;

mod commands;
mod config;
mod error;

use config::{process_env, Flags, RunConfig};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "storycause",
    version,
    about = "Event-causality extraction and evaluation from the command line"
)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run extraction prompts over a story file.
    Extract {
        /// Stories, one JSON object per line.
        #[arg(long)]
        stories: PathBuf,
        /// Use one demonstration per template (stories outside the annotated corpus).
        #[arg(long)]
        single_demo: bool,
    },
    /// Vote over a detection table.
    Ensemble {
        #[arg(long)]
        detections: PathBuf,
    },
    /// Extract, vote and score against GLUCOSE-style annotations.
    EvalGlucose {
        #[arg(long)]
        glucose: PathBuf,
        /// Score an existing detection table instead of extracting.
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Rate generated stories and correlate with human ratings.
    ScoreStories {
        #[arg(long)]
        stories: PathBuf,
        /// baseline, insert_causal, two_stage, a comma list, or all.
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Correlate an existing scores file with human ratings.
    Correlate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        stories: PathBuf,
    },
    /// Align video segments to story sentences.
    Align {
        /// Directory of `<id>.sim`, `<id>.segments` and optional `<id>.gold`.
        #[arg(long)]
        data: PathBuf,
        /// Event graphs keyed by video id.
        #[arg(long)]
        graphs: Option<PathBuf>,
    },
    /// Pick the threshold t with the best clip accuracy on a dev split.
    CalibrateThreshold {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graphs: Option<PathBuf>,
        /// start:stop:step
        #[arg(long, default_value = "0:1:0.05")]
        grid: String,
    },
    /// Write a seeded synthetic fixture bundle.
    MakeFixture {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        n_stories: usize,
        #[arg(long, default_value_t = 5)]
        sentences: usize,
        #[arg(long, default_value_t = 0.3)]
        edge_density: f64,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(&cli.flags, &process_env)?;
    match cli.command {
        Command::Extract {
            stories,
            single_demo,
        } => commands::extract(&cfg, &stories, single_demo),
        Command::Ensemble { detections } => commands::ensemble(&cfg, &detections),
        Command::EvalGlucose {
            glucose,
            detections,
        } => commands::eval_glucose(&cfg, &glucose, detections.as_deref()),
        Command::ScoreStories { stories, variant } => {
            commands::score_stories(&cfg, &stories, &variant)
        }
        Command::Correlate { scores, stories } => commands::correlate(&cfg, &scores, &stories),
        Command::Align { data, graphs } => commands::align(&cfg, &data, graphs.as_deref()),
        Command::CalibrateThreshold { data, graphs, grid } => {
            commands::calibrate(&cfg, &data, graphs.as_deref(), &grid)
        }
        Command::MakeFixture {
            seed,
            n_stories,
            sentences,
            edge_density,
        } => commands::fixture(
            &cfg,
            seed,
            FixtureShape {
                n_stories,
                sentences_per_story: sentences,
                edge_density,
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
