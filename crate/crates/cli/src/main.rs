use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use odtrails_cli::{run_pipeline, run_stage, write_synth_fixture, Overrides, PipelineConfig, Stage, SynthOptions};

/// Spatio-temporal taxi trail analysis: clean trips, factorize the
/// hour x pickup x dropoff tensor, extract clusters and rank mobility
/// hypotheses by Bayesian evidence.
#[derive(Debug, Parser)]
#[command(name = "odtrails", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean raw trips and map them onto tracts.
    Ingest(StageArgs),
    /// Fit the non-negative CP decomposition of the trip tensor.
    Factorize(StageArgs),
    /// Select per-component clusters and their transition counts.
    ExtractClusters(StageArgs),
    /// Build the hypothesis catalog and write its manifest.
    BuildHypotheses(StageArgs),
    /// Rank hypotheses per cluster and overall across the k grid.
    Rank(StageArgs),
    /// Run every stage in order.
    Pipeline(StageArgs),
    /// Write a synthetic city with a planted weekend-nightlife cluster.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct StageArgs {
    /// Pipeline config file (TOML).
    #[arg(short, long, env = "ODTRAILS_CONFIG")]
    config: PathBuf,
    /// Tracts file, overriding the config.
    #[arg(long, env = "ODTRAILS_TRACTS")]
    tracts: Option<PathBuf>,
    /// Raw trips file, overriding the config.
    #[arg(long, env = "ODTRAILS_TRIPS")]
    trips: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, env = "ODTRAILS_OUTPUT")]
    output: Option<PathBuf>,
    /// Number of CP components.
    #[arg(long)]
    r: Option<usize>,
    /// Top-N hours and dropoff tracts per cluster.
    #[arg(long)]
    n: Option<usize>,
    /// Concentration values, comma-separated; replaces the k grid.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    /// Random seed of the factorization.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory receiving tracts.csv, trips.csv, planted.csv and demo.cfg.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    rows: usize,
    #[arg(long, default_value_t = 5)]
    cols: usize,
    /// Trips in the planted weekend-night cluster.
    #[arg(long, default_value_t = 20_000)]
    planted: usize,
    /// Uniform background trips.
    #[arg(long, default_value_t = 30_000)]
    background: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn load(args: &StageArgs) -> anyhow::Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&args.config)?;
    config.apply(&Overrides {
        tracts: args.tracts.clone(),
        trips: args.trips.clone(),
        output_dir: args.output.clone(),
        r: args.r,
        n: args.n,
        k_grid: args.k.clone(),
        seed: args.seed,
    });
    Ok(config)
}

fn stage_command(stage: Option<Stage>, args: &StageArgs) -> ExitCode {
    let config = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e:#}");
            return ExitCode::from(2);
        }
    };
    let outcome = match stage {
        Some(stage) => run_stage(stage, &config).map(|report| vec![(stage, report)]),
        None => run_pipeline(&config),
    };
    match outcome {
        Ok(reports) => {
            for (stage, report) in reports {
                eprintln!("{stage}: {report}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest(a) => stage_command(Some(Stage::Ingest), a),
        Command::Factorize(a) => stage_command(Some(Stage::Factorize), a),
        Command::ExtractClusters(a) => stage_command(Some(Stage::ExtractClusters), a),
        Command::BuildHypotheses(a) => stage_command(Some(Stage::BuildHypotheses), a),
        Command::Rank(a) => stage_command(Some(Stage::Rank), a),
        Command::Pipeline(a) => stage_command(None, a),
        Command::Synth(a) => {
            let opts = SynthOptions {
                rows: a.rows,
                cols: a.cols,
                planted_trips: a.planted,
                background_trips: a.background,
                seed: a.seed,
            };
            match write_synth_fixture(&a.out, &opts) {
                Ok(report) => {
                    eprintln!("synth: {report}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: stage `synth` failed: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
