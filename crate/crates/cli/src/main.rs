use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use imbstream::classifier::ClassifierKind;
use imbstream::io::StreamFormat;
use imbstream_cli::experiment::{run_experiment, Experiment, RunOptions, CACHE_ENV};
use imbstream_cli::{export_stream, generate_streams, label_stream};

#[derive(Parser)]
#[command(name = "imbstream", version, about = "Synthetic imbalanced drifting streams and online classifier benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment file (a list of streams) or a single stream configuration.
    #[arg(long, required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Scenario identifier such as `imb_0.10_0.10`; repeatable.
    #[arg(long, conflicts_with = "config")]
    scenario: Vec<String>,
    /// Overrides the seed of every stream.
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn load(&self) -> Result<Experiment> {
        Ok(match &self.config {
            Some(p) => Experiment::load(p, self.seed)?,
            None => Experiment::from_scenarios(&self.scenario, self.seed)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write every configured stream as CSV into a directory.
    Generate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the stream × classifier grid.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of vfdt, ob, oob, uob.
        #[arg(long, value_delimiter = ',')]
        classifiers: Option<Vec<ClassifierKind>>,
        /// Evaluation window in examples.
        #[arg(long)]
        window: Option<usize>,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Stream cache directory.
        #[arg(long, env = CACHE_ENV)]
        cache_dir: Option<PathBuf>,
        #[arg(long, short)]
        verbose: bool,
    },
    /// Tag examples of a stream file as safe, borderline, rare or outlier, window by window.
    Label {
        /// Stream file in CSV or ARFF.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        window: usize,
    },
    /// Write a single stream as CSV or ARFF.
    Export {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: StreamFormat,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { source, out } => {
            for p in generate_streams(&source.load()?, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Run { source, out, classifiers, window, jobs, cache_dir, verbose } => {
            let exp = source.load()?;
            let opts = RunOptions {
                classifiers: classifiers.or_else(|| exp.classifiers.clone()).unwrap_or_else(|| ClassifierKind::ALL.to_vec()),
                window: window.or(exp.window).unwrap_or(1000),
                jobs,
                cache_dir,
                verbose,
            };
            if opts.window == 0 {
                bail!("--window must be positive");
            }
            let manifest = run_experiment(&exp, &out, &opts).context("experiment failed")?;
            let failed: Vec<_> = manifest.cells.iter().filter(|c| c.error.is_some()).collect();
            for c in &failed {
                eprintln!("{} {}: {}", c.stream_id, c.classifier, c.error.as_deref().unwrap_or(""));
            }
            println!("{} cells, {} failed; results in {}", manifest.cells.len(), failed.len(), out.display());
            return Ok(manifest.all_ok());
        }
        Command::Label { input, out, k, window } => {
            if window == 0 {
                bail!("--window must be positive");
            }
            let n = label_stream(&input, k, window, &out)?;
            println!("{n} windows written to {}", out.display());
        }
        Command::Export { source, out, format } => {
            let n = export_stream(&source.load()?, format, &out)?;
            println!("{n} examples written to {}", out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
