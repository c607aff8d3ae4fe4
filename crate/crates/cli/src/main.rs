mod config;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{CommandFactory, Parser, Subcommand};

use duration_curve::harness::{run_sweep, RunOptions};
use duration_curve::report::{p95_report, write_sweep, OutputOptions};

use config::{parse_config, RunArgs, RunConfig};

/// Simulate duration-response trial designs and score curve fits by sABC.
#[derive(Debug, Parser)]
#[command(name = "durcurve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset or custom experiment and write CSV/SVG output
    Run(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = match parse_config(&args) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}\n");
                    let mut cmd = Cli::command();
                    let run = cmd.find_subcommand_mut("run").expect("run subcommand");
                    eprintln!("{}", run.render_usage());
                    return ExitCode::from(2);
                }
            };
            match run(&cfg) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

/// Returns `Ok(false)` when some cells failed.
fn run(cfg: &RunConfig) -> anyhow::Result<bool> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .context("building worker pool")?;
    let cells = cfg.cells();
    eprintln!(
        "running {} ({} cells x {} simulations, seed {})",
        cfg.experiment_name(),
        cells.len(),
        cfg.n_sims,
        cfg.master_seed
    );
    let started = Instant::now();
    let opts = RunOptions {
        step: cfg.step,
        curve_sample: if cfg.emit_curves || cfg.svg { cfg.curve_sample } else { 0 },
        fp_selection: cfg.fp_selection,
    };
    let sweep = pool.install(|| run_sweep(&cells, &opts))?;
    let files = write_sweep(
        &sweep,
        &cfg.output_dir,
        OutputOptions {
            emit_curves: cfg.emit_curves,
            svg: cfg.svg,
        },
    )?;
    print!("{}", p95_report(&sweep.summary_rows()));
    eprintln!(
        "wrote {} in {:.1}s",
        files.summary.display(),
        started.elapsed().as_secs_f64()
    );
    for f in &sweep.failures {
        eprintln!("failed cell {}: {}", f.cell.id(), f.error);
    }
    Ok(sweep.failures.is_empty())
}
