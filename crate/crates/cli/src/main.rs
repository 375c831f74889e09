use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use isac_cli::output::Pipeline;
use isac_cli::runner::{run_baseline, run_capon, run_solve, run_sweep, run_validate, SweepKind};
use isac_cli::scenario::ScenarioFile;
use isac_cli::CliError;

#[derive(Parser)]
#[command(name = "isac", version, about = "Secure ISAC transmit beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.gamma_grid`.
    #[arg(long)]
    gamma_grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Joint design under perfect or bounded CSI errors.
    #[command(name = "solve-p1")]
    SolvePOne(Common),
    /// Joint design under Gaussian CSI errors (outage constraint).
    #[command(name = "solve-p2")]
    SolvePTwo(Common),
    /// Separate two-stage design and the sensing-only bound.
    Baseline(Common),
    /// Parameter sweep writing sweep.csv (rmse.csv for snr).
    Sweep {
        #[arg(value_enum)]
        over: SweepOver,
        #[command(flatten)]
        common: Common,
    },
    /// Capon angle RMSE versus sensing SNR.
    Capon(Common),
    /// Re-check a saved design.json.
    Validate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepOver {
    R0,
    Theta0,
    Rho,
    Snr,
}

fn load(common: &Common) -> Result<ScenarioFile, CliError> {
    let mut s = ScenarioFile::load(&common.scenario)?;
    if let Some(seed) = common.seed {
        s.run.seed = seed;
    }
    if let Some(g) = common.gamma_grid {
        s.run.gamma_grid = g;
    }
    s.validate()?;
    std::fs::create_dir_all(&common.out)?;
    Ok(s)
}

fn run(cli: Cli) -> Result<String, CliError> {
    let report = match cli.command {
        Command::SolvePOne(c) => run_solve(&load(&c)?, Pipeline::P1, &c.out)?,
        Command::SolvePTwo(c) => run_solve(&load(&c)?, Pipeline::P2, &c.out)?,
        Command::Baseline(c) => run_baseline(&load(&c)?, &c.out)?,
        Command::Sweep { over, common } => {
            let kind = match over {
                SweepOver::R0 => SweepKind::R0,
                SweepOver::Theta0 => SweepKind::Theta0,
                SweepOver::Rho => SweepKind::Rho,
                SweepOver::Snr => SweepKind::Snr,
            };
            run_sweep(&load(&common)?, kind, &common.out)?
        }
        Command::Capon(c) => run_capon(&load(&c)?, &c.out, "capon")?,
        Command::Validate { design, out } => {
            std::fs::create_dir_all(&out)?;
            run_validate(&design, &out)?
        }
    };
    Ok(format!("{}: {}", report.command, report.status))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Scenario(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
