//! `ifa`: run experiment matrices, aggregate results, serve correction
//! sessions and fetch the bundled datasets.

mod fetch;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ifa_core::config::ExperimentConfig;
use ifa_core::experiment::{self, Experiment};
use ifa_core::{engine, results, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "ifa", version, about = "Interactive feature attribution experiments")]
struct Cli {
    /// Maximum parallel runs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Overrides the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (scenario, strategy) pair of a config and write CSV results.
    Run {
        config: PathBuf,
        /// Output directory, instead of the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate the run files in a directory.
    Aggregate { dir: PathBuf },
    /// Start the HTTP session service for a config.
    Serve {
        config: PathBuf,
        /// Bind address, instead of the config's `[service] bind`.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Download (or convert local copies of) a dataset into CSV.
    FetchData {
        /// `boston` or `titanic`.
        name: String,
        /// Output CSV path.
        path: PathBuf,
        /// Local file or URL; repeat to concatenate parts.
        #[arg(long = "source")]
        sources: Vec<String>,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    Ok(cfg)
}

fn cmd_run(config: &PathBuf, out: Option<PathBuf>, jobs: usize, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let dir = out.unwrap_or_else(|| cfg.experiment.output_dir.clone());
    let agg = experiment::run_matrix(cfg, jobs)?;
    results::write_all(&dir, &agg)?;
    print_summary(&agg);
    say(format_args!("wrote {} runs to {}", agg.runs.len(), dir.display()));
    Ok(())
}

/// Prints a line, ignoring a closed stdout (e.g. piped into `head`).
fn say(line: std::fmt::Arguments) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_summary(agg: &engine::AggregateResult) {
    for s in &agg.strategies {
        let last = s.mean_series.last().copied().unwrap_or(f64::NAN);
        match s.mean_diff.as_ref().and_then(|d| d.last()) {
            Some(d) => say(format_args!("{:<30} final mean {last:.6}  vs baseline {d:+.6}", s.strategy.name())),
            None => say(format_args!("{:<30} final mean {last:.6}", s.strategy.name())),
        }
    }
}

fn cmd_aggregate(dir: &Path) -> Result<()> {
    let agg = results::aggregate_dir(dir)?;
    results::write_aggregate(dir, &agg)?;
    print_summary(&agg);
    Ok(())
}

fn cmd_serve(config: &PathBuf, bind: Option<String>, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let addr = bind.unwrap_or_else(|| cfg.service.bind.clone());
    let log_dir = cfg.session_log_dir();
    let state = ifa_service::AppState::new(Experiment::new(cfg)?, Some(log_dir.clone()));
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        println!("session logs in {}", log_dir.display());
        ifa_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    Ok(())
}

fn cmd_fetch(name: &str, path: &PathBuf, sources: Vec<String>) -> Result<()> {
    let name: fetch::Name = name.parse()?;
    let sources = if sources.is_empty() {
        vec![name.default_url().to_string()]
    } else {
        sources
    };
    let texts = sources.iter().map(|s| fetch::read_source(s)).collect::<Result<Vec<_>>>()?;
    let (csv, rows) = name.normalize(&texts)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, csv)?;
    say(format_args!("wrote {rows} rows to {}", path.display()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out, cli.jobs, cli.seed),
        Command::Aggregate { dir } => cmd_aggregate(&dir),
        Command::Serve { config, bind } => cmd_serve(&config, bind, cli.seed),
        Command::FetchData { name, path, sources } => cmd_fetch(&name, &path, sources),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), one_line(&e));
            ExitCode::FAILURE
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().replace('\n', " ")
}
