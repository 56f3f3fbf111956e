//! `egolink`: simulate, curate, associate, evaluate, and report on
//! cross-camera track association runs.

mod commands;
mod error;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use egolink::metadata::LogFormat;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "egolink", version, about = "Cross-camera track association pipeline")]
struct Cli {
    /// Size of the worker thread pool. Defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CameraFormat {
    Csv,
    Jsonl,
}

impl From<CameraFormat> for LogFormat {
    fn from(f: CameraFormat) -> Self {
        match f {
            CameraFormat::Csv => LogFormat::Csv,
            CameraFormat::Jsonl => LogFormat::JsonLines,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scenario description.
    Simulate {
        /// Scenario TOML.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for tracklets, camera logs, and ground truth.
        #[arg(long)]
        out: PathBuf,
        /// Replace the output directory if it already exists.
        #[arg(long)]
        overwrite: bool,
    },
    /// Filter a tracklet corpus by annotation quality rules.
    Curate {
        /// Curation rules TOML.
        #[arg(long)]
        rules: PathBuf,
        /// Input tracklets, JSON lines.
        #[arg(long = "in")]
        input: PathBuf,
        /// Curated tracklets, JSON lines.
        #[arg(long)]
        out: PathBuf,
        /// Curation summary, JSON.
        #[arg(long)]
        report: PathBuf,
    },
    /// Score queries against the corpus with metadata gating.
    Associate {
        /// Tracklet corpus, JSON lines.
        #[arg(long)]
        tracklets: PathBuf,
        /// Directory of per-camera metadata logs.
        #[arg(long)]
        cameras: PathBuf,
        /// Association parameters TOML.
        #[arg(long)]
        config: PathBuf,
        /// "all-cross-camera" or a file with one track id per line.
        #[arg(long)]
        queries: String,
        /// Camera log format.
        #[arg(long, value_enum, default_value = "csv")]
        camera_format: CameraFormat,
        /// Affinity matrix with diagnostics, JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a retrieval protocol and compute CMC and mAP.
    Evaluate {
        /// Labeled tracklet corpus, JSON lines.
        #[arg(long)]
        tracklets: PathBuf,
        /// Directory of per-camera metadata logs.
        #[arg(long)]
        cameras: PathBuf,
        /// Association parameters TOML.
        #[arg(long)]
        config: PathBuf,
        /// Evaluation protocol. Only "cross-camera" is defined.
        #[arg(long)]
        protocol: String,
        /// Camera log format.
        #[arg(long, value_enum, default_value = "csv")]
        camera_format: CameraFormat,
        /// Evaluation report, JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an evaluation report as a metric table and CMC plot.
    Report {
        /// Evaluation report, JSON.
        #[arg(long = "in")]
        input: PathBuf,
        /// CMC curve, SVG.
        #[arg(long)]
        plot: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::validation(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { config, out, overwrite } => commands::simulate(&config, &out, overwrite),
        Command::Curate { rules, input, out, report } => {
            commands::curate_cmd(&rules, &input, &out, &report)
        }
        Command::Associate { tracklets, cameras, config, queries, camera_format, out } => {
            commands::associate(&tracklets, &cameras, &config, &queries, camera_format.into(), &out)
        }
        Command::Evaluate { tracklets, cameras, config, protocol, camera_format, out } => {
            commands::evaluate_cmd(
                &tracklets,
                &cameras,
                &config,
                &protocol,
                camera_format.into(),
                &out,
            )
        }
        Command::Report { input, plot } => commands::report_cmd(&input, &plot),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EGOLINK_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("error serializes"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
