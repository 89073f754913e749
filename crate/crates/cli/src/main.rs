use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dimineq_cli::report::{write_reports, ReportRow};
use dimineq_cli::runner::{run_scenario, RunOptions};
use dimineq_cli::scenario::Scenario;
use dimineq_cli::sweep::{run_sweep, SweepFile};
use dimineq_cli::{verdict_status, CliError, BUNDLED_SCENARIOS, INPUT_ERROR};

#[derive(Parser)]
#[command(name = "dimineq", version, about = "Evaluate dimensional functional inequalities and Fokker-Planck audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory for reports
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Multiplier applied to every tolerance
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,

    /// Seed for stochastic jobs without their own
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (defaults to the number of cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write report.csv / report.json
    Verify { scenario: PathBuf },
    /// Run a parameter sweep and write a long-format CSV
    Sweep { sweepfile: PathBuf },
    /// Run the built-in closed-form Gaussian self-test suite
    Oracle,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn report_failures(rows: &[ReportRow]) {
    for r in rows.iter().filter(|r| !r.verdict) {
        eprintln!(
            "FAIL {}/{} [{}]: lhs={:e} rhs={:e} slack={:e} tolerance={:e}",
            r.scenario, r.id, r.item, r.lhs, r.rhs, r.slack, r.tolerance
        );
    }
}

fn finish(rows: &[ReportRow], csv: &Path, json: &Path) -> Result<i32, CliError> {
    write_reports(rows, csv, json)?;
    report_failures(rows);
    let failed = rows.iter().filter(|r| !r.verdict).count();
    println!("{} rows, {failed} failing; report in {}", rows.len(), csv.display());
    Ok(verdict_status(failed == 0))
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    if !(cli.tol_scale >= 0.0) {
        return Err(CliError::Validation("--tol-scale must be nonnegative".into()));
    }
    let opts = RunOptions {
        tol_scale: cli.tol_scale,
        seed: cli.seed,
        out_dir: Some(cli.out.clone()),
    };
    std::fs::create_dir_all(&cli.out).map_err(|source| CliError::Io {
        path: cli.out.clone(),
        source,
    })?;
    match &cli.command {
        Command::Verify { scenario } => {
            let s = Scenario::parse(&read(scenario)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", scenario.display())))?;
            let rows = run_scenario(&s, &opts)?;
            finish(&rows, &cli.out.join(&s.output.csv), &cli.out.join(&s.output.json))
        }
        Command::Sweep { sweepfile } => {
            let sweep = SweepFile::parse(&read(sweepfile)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", sweepfile.display())))?;
            let result = run_sweep(&sweep, &opts)?;
            let path = cli.out.join(&sweep.output);
            std::fs::write(&path, result.to_csv()).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            println!("{} rows; sweep in {}", result.rows.len(), path.display());
            Ok(verdict_status(result.passed()))
        }
        Command::Oracle => {
            let mut rows = Vec::new();
            for (_, text) in BUNDLED_SCENARIOS {
                rows.extend(run_scenario(&Scenario::parse(text)?, &opts)?);
            }
            finish(&rows, &cli.out.join("report.csv"), &cli.out.join("report.json"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(INPUT_ERROR as u8);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(INPUT_ERROR as u8)
        }
    }
}
