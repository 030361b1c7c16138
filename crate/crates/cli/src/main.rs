use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rasec::config::{read_document, ScenarioConfig};
use rasec::experiment::{self, parse_seeds, parse_values, schemes};
use rasec::optimizer::Baseline;
use rasec::parallel::worker_count;
use rasec::report::{log_csv, results_csv, results_svg};
use rasec::Result;

/// Secrecy-rate optimization for a sensing-assisted rotatable array with a
/// multi-layer transmitting RIS. Worker threads follow RASEC_WORKERS.
#[derive(Parser)]
#[command(name = "rasec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render median R_s per scheme as an SVG line plot.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Leave the wall-time column empty so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One result row per seed from the two-stage optimizer.
    Optimize {
        #[command(flatten)]
        io: Output,
        /// Inclusive range `a..b` or comma list.
        #[arg(long, default_value = "0..19")]
        seeds: String,
        /// Extra schemes run next to the proposed one.
        #[arg(long, value_delimiter = ',')]
        baseline: Vec<Baseline>,
    },
    /// Grid over one configuration key times seeds.
    Sweep {
        #[command(flatten)]
        io: Output,
        /// Configuration key, e.g. P_t_dBm.
        #[arg(long)]
        var: String,
        /// Comma list; negative values are accepted, e.g. `-10,0,10`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, default_value = "0..19")]
        seeds: String,
        #[arg(long, value_delimiter = ',')]
        baseline: Vec<Baseline>,
    },
    /// Multi-agent training; CSV is the episode log, the evaluation row goes
    /// to standard error.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Episode log destination instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluation rows (learned policy, two-stage reference) as CSV.
        #[arg(long)]
        eval_out: Option<PathBuf>,
    },
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn finish_rows(rows: &[experiment::ResultRow], io: &Output, title: &str) -> Result<()> {
    emit(&results_csv(rows, !io.no_timing)?, io.out.as_deref())?;
    if let Some(p) = &io.svg {
        std::fs::write(p, results_svg(rows, title))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let workers = worker_count();
    match cli.command {
        Command::Optimize {
            io,
            seeds,
            baseline,
        } => {
            let cfg = ScenarioConfig::load(&io.config)?;
            let rows =
                experiment::optimize(&cfg, &parse_seeds(&seeds)?, &schemes(&baseline), workers);
            finish_rows(&rows, &io, "R_s per scheme")
        }
        Command::Sweep {
            io,
            var,
            values,
            seeds,
            baseline,
        } => {
            let doc = read_document(&io.config)?;
            let rows = experiment::sweep(
                &doc,
                &var,
                &parse_values(&values)?,
                &parse_seeds(&seeds)?,
                &schemes(&baseline),
                workers,
            )?;
            finish_rows(&rows, &io, &format!("R_s versus {var}"))
        }
        Command::Train {
            config,
            episodes,
            seed,
            out,
            eval_out,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let report = experiment::train(&cfg, seed, episodes)?;
            emit(&log_csv(&report.log)?, out.as_deref())?;
            let eval = results_csv(&[report.evaluation, report.reference], true)?;
            match eval_out {
                Some(p) => std::fs::write(p, eval)?,
                None => eprint!("{eval}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
