use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use imanpl_bench::config::{OutputFormat, ProblemKind, Settings};
use imanpl_bench::results::write_results;
use imanpl_bench::{emit_tables, run_experiment, summarize, sweep_and_select, ExperimentConfig, Result};

/// Runs IManPL over a grid of regularization weights and seeds.
#[derive(Debug, Parser)]
#[command(name = "imanpl", version)]
struct Cli {
    /// TOML file of `key = value` settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

fn summary_path(out: &Path, format: OutputFormat) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Markdown => "md",
    };
    out.with_file_name(format!("{stem}.summary.{ext}"))
}

fn run(cli: Cli) -> Result<bool> {
    let base = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let cfg = ExperimentConfig::from_settings(cli.settings.over(base))?;
    let rows = run_experiment(&cfg)?;
    let summaries = summarize(&rows);
    let table = match &cfg.out {
        Some(out) => {
            write_results(out, &rows)?;
            emit_tables(&summaries, cfg.format, &summary_path(out, cfg.format))?
        }
        None => imanpl_bench::render_table(&summaries, cfg.format)?,
    };
    print!("{table}");
    if cfg.problem == ProblemKind::Ssc {
        for best in sweep_and_select(&rows)? {
            println!(
                "best u for {} {} {}: {:e} (NMI {:.3})",
                best.dataset, best.algorithm, best.it_type, best.u, best.nmi_mean
            );
        }
    }
    let mut ok = true;
    for r in rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("u={:e} seed={}: {}", r.u, r.seed, r.status);
        ok = false;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
