//! Command-line front end: parse arguments, load the configuration, and
//! hand off to the library pipeline. Stage summaries go to stderr; all
//! machine-readable output goes to files under the configured out_dir.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use skytraj::pipeline::{run, Stage};

#[derive(Parser)]
#[command(
    name = "skytraj",
    version,
    about = "Turn aerial tracking output into georeferenced, smoothed, conflict-annotated trajectories"
)]
struct Cli {
    #[command(subcommand)]
    stage: StageCmd,

    /// Run configuration (TOML); relative paths inside resolve against its directory
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the configured output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Size of the worker thread pool (default: all cores); results do not depend on it
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Print the fully resolved configuration (all defaults filled in) and exit
    #[arg(long, global = true)]
    print_config: bool,

    /// Turn recoverable input warnings into errors
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum StageCmd {
    /// Georeference raw pixel tracks into the local metric frame
    Georef,
    /// Smooth georeferenced tracks and fill detection gaps
    Smooth,
    /// Drop ghost, duplicate, and out-of-scope tracks
    Filter,
    /// Detect vehicle-vehicle conflicts and classify them
    Conflicts,
    /// Assign routes to signal movements and scan for violations
    Match,
    /// Compute scene metrics and write the final export bundle
    Metrics,
    /// Run every stage in order
    All,
}

impl From<StageCmd> for Stage {
    fn from(cmd: StageCmd) -> Stage {
        match cmd {
            StageCmd::Georef => Stage::Georef,
            StageCmd::Smooth => Stage::Smooth,
            StageCmd::Filter => Stage::Filter,
            StageCmd::Conflicts => Stage::Conflicts,
            StageCmd::Match => Stage::Match,
            StageCmd::Metrics => Stage::Metrics,
            StageCmd::All => Stage::All,
        }
    }
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> anyhow::Result<()> {
    let cli = Cli::parse();

    let config_path = cli
        .config
        .as_deref()
        .context("--config <FILE> is required")?;
    let mut cfg = skytraj::config::PipelineConfig::from_file(config_path)
        .with_context(|| format!("loading configuration {}", config_path.display()))?;
    if let Some(out) = cli.out {
        cfg.paths.out_dir = out;
    }
    cfg.validate().context("invalid configuration")?;

    if cli.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }

    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }

    let summaries = run(cli.stage.into(), &cfg, cli.strict)?;
    for summary in &summaries {
        for line in &summary.lines {
            eprintln!("[{}] {}", summary.stage, line);
        }
    }
    Ok(())
}
