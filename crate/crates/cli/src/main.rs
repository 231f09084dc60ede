use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use helium_gl::config::Config;
use helium_gl::run::{self, Failure};

#[derive(Parser)]
#[command(name = "helium-gl", version, about = "Ginzburg-Landau superfluid helium simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured run; writes timeseries.csv and snapshots.
    Simulate(Args),
    /// Equilibrium phase map and lambda line.
    PhaseDiagram(Args),
    /// Operator, thermodynamic and run-time invariant checks.
    Check(Args),
    /// Compare the direct run with two gauge-transformed complex runs.
    GaugeCompare(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML config; omitted keys take their defaults.
    config: Option<PathBuf>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &Args) -> Result<Config, Failure> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
    .map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

fn dispatch(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::Simulate(a) => {
            let s = run::simulate(&load(a)?)?;
            match s.last {
                Some(r) => println!(
                    "{} steps to t = {}: E = {:.12e}, mass = {:.12e}, first-law residual {:.2e}",
                    s.steps, r.t, r.e_total, r.mass_total, r.first_law_residual
                ),
                None => println!("0 steps"),
            }
            if s.phase_warnings > 0 {
                println!("phi^2 exceeded 1 after {} steps", s.phase_warnings);
            }
        }
        Command::PhaseDiagram(a) => {
            let s = run::phase_diagram(&load(a)?)?;
            match s.fit {
                Some((b, slope)) => {
                    println!("lambda line: {} points, {} skipped; theta = {b:.6} + {slope:.6} p", s.points, s.skipped);
                    if slope != 0.0 {
                        println!("dp/dtheta = {:.6}", 1.0 / slope);
                    }
                }
                None if s.points == 0 => println!("no phase boundary inside the sweep window"),
                None => println!("lambda line: {} point, no fit", s.points),
            }
        }
        Command::Check(a) => {
            let lines = run::check(&load(a)?)?;
            for l in &lines {
                println!("{l}");
            }
            let failed: Vec<&str> = lines.iter().filter(|l| !l.pass).map(|l| l.name).collect();
            if !failed.is_empty() {
                return Err(Failure::Invariant(failed.join(", ")));
            }
        }
        Command::GaugeCompare(a) => {
            let worst = run::gauge_compare(&load(a)?)?;
            println!("max gauge mismatch {worst:.3e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with config errors; 2 is reserved.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
