//! Command line front end: run training suites and render reports.
//!
//! `run` and `suite` both execute every (method, seed) cell of a configured
//! suite and write epoch CSVs plus `summary.json`; `run` additionally accepts
//! method and seed overrides. `report` turns a finished output directory into
//! SVG figures and a Markdown summary.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use stepe::{
    load_epochs_csv, render_convergence, render_dynamics, render_seed_band, render_tables,
    run_and_save, Method, RunConfig, RunLog, SuiteResult,
};

#[derive(Parser)]
#[command(
    name = "stepe",
    version,
    about = "Sample-selection training on noisy labels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite, optionally narrowing the configured methods and seeds.
    Run(RunArgs),
    /// Run a suite exactly as configured.
    Suite(SuiteArgs),
    /// Render figures and tables from a finished suite's output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (`key = value` lines, `#` comments).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Write outputs here instead of the configured `run.out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replace the configured method list (comma separated).
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    methods: Vec<String>,
    /// Replace the configured seed list (comma separated).
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Configuration file (`key = value` lines, `#` comments).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Suite output directory holding `*_epochs.csv` and `summary.json`.
    #[arg(long = "in", value_name = "DIR")]
    dir: PathBuf,
    /// Figures to render; without `--figs` and `--tables`, everything is rendered.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    figs: Vec<Fig>,
    /// Render `tables.md` from `summary.json`.
    #[arg(long)]
    tables: bool,
    /// Seed for the single-seed figures (default: seed 42 if present, else the smallest).
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fig {
    /// Test accuracy per epoch, one curve per method.
    Conv,
    /// Kept/dropped ratios and noise metrics of the step-wise run.
    Dyn,
    /// Accuracy mean with a +/- one-std band across seeds.
    Band,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = load_config(&args.config)?;
            if let Some(out) = args.out {
                cfg.out_dir = out;
            }
            if !args.methods.is_empty() {
                cfg.methods = args
                    .methods
                    .iter()
                    .map(|name| name.trim().parse::<Method>())
                    .collect::<stepe::Result<_>>()?;
            }
            if !args.seeds.is_empty() {
                cfg.seeds = args.seeds;
            }
            cfg.validate().context("after command line overrides")?;
            execute(&cfg)
        }
        Command::Suite(args) => execute(&load_config(&args.config)?),
        Command::Report(args) => report(&args),
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_file(path).with_context(|| format!("loading {}", path.display()))
}

/// Run every cell, persist outputs, print the summary tables. A suite with
/// failed cells still writes everything it has, then exits nonzero.
fn execute(cfg: &RunConfig) -> Result<ExitCode> {
    let suite = run_and_save(cfg).context("running suite")?;
    print!("{}", render_tables(&suite)?);
    println!("\nwrote {}", cfg.out_dir.display());
    if suite.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &suite.failures {
            eprintln!("cell failed: {} seed {}: {}", f.method, f.seed, f.error);
        }
        Ok(ExitCode::FAILURE)
    }
}

fn report(args: &ReportArgs) -> Result<ExitCode> {
    if !args.dir.is_dir() {
        bail!("{} is not a directory", args.dir.display());
    }
    let explicit = !args.figs.is_empty();
    let figs: Vec<Fig> = if explicit {
        args.figs.clone()
    } else if args.tables {
        Vec::new()
    } else {
        vec![Fig::Conv, Fig::Dyn, Fig::Band]
    };
    let tables = args.tables || (!explicit && !args.tables);

    let logs = load_logs(&args.dir)?;
    let mut written = 0usize;

    if !figs.is_empty() {
        if logs.is_empty() {
            bail!("no *_epochs.csv files in {}", args.dir.display());
        }
        let seed = pick_seed(&logs, args.seed)?;
        if figs.contains(&Fig::Conv) {
            let at_seed: Vec<RunLog> = logs.iter().filter(|l| l.seed == seed).cloned().collect();
            let svg = render_convergence(&at_seed).context("rendering convergence")?;
            written += write_artifact(&args.dir.join("convergence.svg"), &svg)?;
        }
        if figs.contains(&Fig::Dyn) {
            match logs
                .iter()
                .find(|l| l.method == Method::StepE.name() && l.seed == seed)
            {
                Some(log) => {
                    let (svg, has_noise_panel) =
                        render_dynamics(log).context("rendering dynamics")?;
                    if !has_noise_panel {
                        eprintln!(
                            "note: no noise metrics in {}_{}; dynamics shows ratios only",
                            log.method, log.seed
                        );
                    }
                    written += write_artifact(&args.dir.join("dynamics.svg"), &svg)?;
                }
                None if explicit => bail!("no step_e run at seed {seed} for the dynamics figure"),
                None => eprintln!("note: no step_e run at seed {seed}; skipping dynamics figure"),
            }
        }
        if figs.contains(&Fig::Band) {
            let groups = seed_groups(&logs);
            if groups.is_empty() {
                if explicit {
                    bail!("seed-band figure needs at least one method with two or more seeds");
                }
                eprintln!("note: no method has two or more seeds; skipping seed-band figure");
            } else {
                let svg = render_seed_band(&groups).context("rendering seed band")?;
                written += write_artifact(&args.dir.join("seed_band.svg"), &svg)?;
            }
        }
    }

    if tables {
        let path = args.dir.join("summary.json");
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let suite: SuiteResult = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                let md = render_tables(&suite)?;
                written += write_artifact(&args.dir.join("tables.md"), &md)?;
            }
            Err(err) if args.tables => {
                return Err(anyhow::Error::new(err).context(format!("reading {}", path.display())));
            }
            Err(_) => eprintln!(
                "note: no summary.json in {}; skipping tables",
                args.dir.display()
            ),
        }
    }

    if written == 0 {
        bail!("nothing to report in {}", args.dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn load_logs(dir: &Path) -> Result<Vec<RunLog>> {
    let mut logs = Vec::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for entry in entries {
        let path = entry.context("reading directory entry")?.path();
        let is_log = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with("_epochs.csv"));
        if is_log {
            logs.push(
                load_epochs_csv(&path).with_context(|| format!("loading {}", path.display()))?,
            );
        }
    }
    logs.sort_by(|a, b| (&a.method, a.seed).cmp(&(&b.method, b.seed)));
    Ok(logs)
}

fn pick_seed(logs: &[RunLog], requested: Option<u64>) -> Result<u64> {
    let mut seeds: Vec<u64> = logs.iter().map(|l| l.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    match requested {
        Some(seed) if seeds.contains(&seed) => Ok(seed),
        Some(seed) => bail!("no runs at seed {seed}; available: {seeds:?}"),
        None if seeds.contains(&42) => Ok(42),
        None => Ok(seeds[0]),
    }
}

/// Per-method log groups with at least two seeds, method-sorted.
fn seed_groups(logs: &[RunLog]) -> Vec<Vec<RunLog>> {
    let mut methods: Vec<&str> = logs.iter().map(|l| l.method.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    methods
        .into_iter()
        .map(|m| {
            logs.iter()
                .filter(|l| l.method == m)
                .cloned()
                .collect::<Vec<_>>()
        })
        .filter(|group| group.len() >= 2)
        .collect()
}

fn write_artifact(path: &Path, content: &str) -> Result<usize> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(1)
}
