use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qoctrl::config::{parse_config, parse_config_str};
use qoctrl::runner::{run_uncontrolled_baseline, write_outputs};
use qoctrl::run_sweep;
use qoctrl_core::dynamics::TimeGrid;
use qoctrl_core::pulses::read_pulses;

#[derive(Parser)]
#[command(name = "qoctrl", version, about = "Optimal control for quantum parameter estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the uncontrolled QFI of a scenario as CSV.
    Baseline {
        scenario: String,
        /// Comma-separated durations.
        #[arg(long = "T", value_delimiter = ',', required = true)]
        durations: Vec<f64>,
        #[arg(long, default_value_t = qoctrl::config::DEFAULT_DT)]
        dt: f64,
    },
    /// Inspect saved pulse tables.
    Pulses {
        #[command(subcommand)]
        command: PulsesCommand,
    },
}

#[derive(Subcommand)]
enum PulsesCommand {
    /// Summarise a pulse table.
    Show { path: PathBuf },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, workers, out } => {
            let mut config = parse_config(&config)?;
            if let Some(w) = workers {
                if w == 0 {
                    bail!("--workers must be at least 1");
                }
                config.workers = w;
            }
            let dir = out.unwrap_or_else(|| config.output_dir.clone());
            let output = run_sweep(&config)?;
            for path in write_outputs(&config, &output, &dir)? {
                println!("{}", path.display());
            }
        }
        Command::Baseline { scenario, durations, dt } => {
            let list: Vec<String> = durations.iter().map(|t| t.to_string()).collect();
            let text = format!(
                "scenario = {scenario:?}\nT = [{}]\ndt = {dt}\nsweep = \"uncontrolled_baseline\"\n",
                list.join(", ")
            );
            let config = parse_config_str(&text)?;
            let mut output = run_uncontrolled_baseline(&config)?;
            output.table.comments.push(format!("qoctrl {}", env!("CARGO_PKG_VERSION")));
            output.table.comments.extend(config.provenance());
            output.table.write(io::stdout().lock())?;
        }
        Command::Pulses {
            command: PulsesCommand::Show { path },
        } => show_pulses(&path)?,
    }
    Ok(())
}

fn show_pulses(path: &std::path::Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let data: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .collect();
    if data.len() < 2 {
        bail!("{}: pulse table has no rows", path.display());
    }
    let first_t: f64 = data[1]
        .split(',')
        .next()
        .unwrap_or_default()
        .trim()
        .parse()
        .context("first time stamp")?;
    // Rows sit on interval midpoints, so the first one is at dt / 2.
    let n = data.len() - 1;
    let grid = TimeGrid::new(2.0 * first_t * n as f64, n)?;
    let (labels, schedule) = read_pulses(text.as_bytes(), &grid)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{}", path.display())?;
    writeln!(out, "intervals: {n}  dt: {}  T: {}", grid.dt(), grid.t_final())?;
    for (j, label) in labels.iter().enumerate() {
        let row = schedule.amplitudes().row(j);
        let max = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let area: f64 = row.iter().sum::<f64>() * grid.dt();
        writeln!(out, "{label}: max |u| = {max:.6}, area = {area:.6}")?;
    }
    Ok(())
}
