//! Command-line front end: scenario runs, verification suites, and batch
//! sweeps. Exit codes: 0 clean, 1 configuration or usage error, 2 safety
//! violation, 3 run aborted (QP infeasible or numeric fault).

mod fixtures;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use safeguide::clf::LyapunovData;
use safeguide::error::{Error, Result};
use safeguide::model::to_polar;
use safeguide::scenario::ScenarioFile;
use safeguide::sim::{monitor_invariants, run, MonitorConfig, RunStatus, ViolationKind};
use safeguide::sweep::run_sweep;

const EXIT_CONFIG: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_ABORT: u8 = 3;

/// Safety-critical guidance for a force-controlled unicycle: a strict-CLF
/// parking controller filtered through a CBF quadratic program.
///
/// Scenario arguments accept a TOML file path or a bundled fixture name
/// (example1, example2, example1_nominal_monitored). The environment variable
/// SAFEGUIDE_THREADS caps sweep parallelism.
#[derive(Parser)]
#[command(name = "safeguide", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Clf,
    Cbf,
    Qp,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario; write the trajectory, an invariant report, and a
    /// gnuplot script.
    Run {
        /// Scenario file or bundled fixture name.
        scenario: String,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Trajectory format.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Re-run certification grids and randomized property checks.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Random samples per randomized property.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// RNG seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run seeded random initial conditions from the scenario's [sweep]
    /// section and aggregate to JSON.
    Sweep {
        /// Scenario file or bundled fixture name (must contain [sweep]).
        scenario: String,
        /// Number of initial conditions (overrides [sweep] count).
        #[arg(long)]
        n: usize,
        /// RNG seed (overrides [sweep] seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Summary file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(scenario: &str) -> Result<(String, ScenarioFile)> {
    if let Some(text) = fixtures::by_name(scenario) {
        return Ok((scenario.to_string(), ScenarioFile::parse(text)?));
    }
    let path = Path::new(scenario);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{scenario}: no such file, and not a bundled fixture (available: {})",
            fixtures::NAMES.join(", ")
        )));
    }
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .unwrap_or_else(|| "scenario".to_string());
    Ok((stem, ScenarioFile::load(path)?))
}

fn status_str(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Completed => "completed",
        RunStatus::Converged => "converged",
        RunStatus::SafetyViolation => "safety violation",
        RunStatus::Infeasible => "qp infeasible",
        RunStatus::NumericFault => "numeric fault",
    }
}

fn plot_script(csv_name: &str, stem: &str, barrier: bool) -> String {
    let h_panel = if barrier {
        format!("plot '{csv_name}' using 1:16 with lines lw 2 title 'h(t)', 0 with lines dashtype 2 notitle\n")
    } else {
        format!("plot '{csv_name}' using 1:9 with lines lw 2 title 'rho(t)'\n")
    };
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 1100,420\n\
         set output '{stem}.png'\n\
         set multiplot layout 1,2\n\
         set xlabel 'x [m]'\n\
         set ylabel 'y [m]'\n\
         plot '{csv_name}' using 2:3 with lines lw 2 title 'path'\n\
         set xlabel 't [s]'\n\
         set ylabel ''\n\
         {h_panel}\
         unset multiplot\n"
    )
}

fn cmd_run(scenario: &str, out: &Path, format: Format) -> Result<u8> {
    let (stem, file) = resolve(scenario)?;
    let sc = file.to_scenario()?;
    let tr = run(&sc)?;
    let lyap = LyapunovData::from_gains(&sc.gains)?;
    let report = monitor_invariants(&tr, &sc.gains, &lyap, sc.barrier.as_ref(), &MonitorConfig::default());

    std::fs::create_dir_all(out)?;
    let traj_name = match format {
        Format::Csv => format!("{stem}_trajectory.csv"),
        Format::Json => format!("{stem}_trajectory.json"),
    };
    let traj_path = out.join(&traj_name);
    match format {
        Format::Csv => tr.write_csv_file(&traj_path)?,
        Format::Json => {
            let text = serde_json::to_string_pretty(&tr.to_json()).expect("trajectory serializes");
            std::fs::write(&traj_path, text)?;
        }
    }

    let (final_rho, _, _) = to_polar(tr.final_state());
    let report_path = out.join(format!("{stem}_report.json"));
    let report_json = serde_json::json!({
        "status": tr.status,
        "converged_at": tr.converged_at,
        "violation": tr.violation,
        "fault": tr.fault,
        "min_h": tr.min_h(),
        "final_rho": final_rho,
        "monitor": report,
        "monitor_ok": report.ok(),
    });
    let report_text = serde_json::to_string_pretty(&report_json).expect("report serializes");
    std::fs::write(&report_path, report_text)?;

    let mut written = vec![traj_name.clone(), format!("{stem}_report.json")];
    if format == Format::Csv {
        let plot_path = out.join(format!("{stem}_plot.gp"));
        std::fs::write(&plot_path, plot_script(&traj_name, &stem, sc.barrier.is_some()))?;
        written.push(format!("{stem}_plot.gp"));
    }

    println!("status: {}", status_str(tr.status));
    if let Some(t) = tr.converged_at {
        println!("converged at t = {t:.3} s (rho = {final_rho:.3e})");
    } else {
        println!("final rho = {final_rho:.3e}");
    }
    if let Some(h) = tr.min_h() {
        println!("min h = {h:.6}");
    }
    match tr.violation {
        Some(v) if v.kind == ViolationKind::Monitored => {
            println!("note: barrier crossed at t = {:.3} s (h = {:.4}; monitored, not enforced)", v.t, v.h);
        }
        Some(v) => {
            println!("barrier violated at t = {:.3} s (h = {:.4}); run aborted", v.t, v.h);
        }
        None => {}
    }
    if let Some(f) = &tr.fault {
        println!("fault: {f}");
    }
    println!("wrote {}", written.join(", "));

    Ok(match tr.status {
        RunStatus::Completed | RunStatus::Converged => 0,
        RunStatus::SafetyViolation => EXIT_VIOLATION,
        RunStatus::Infeasible | RunStatus::NumericFault => EXIT_ABORT,
    })
}

fn cmd_verify(suite: Suite, samples: usize, seed: u64) -> u8 {
    let mut ok = true;
    if matches!(suite, Suite::Clf | Suite::All) {
        println!("clf suite (samples = {samples}, seed = {seed}):");
        ok &= verify::verify_clf(samples, seed);
    }
    if matches!(suite, Suite::Cbf | Suite::All) {
        println!("cbf suite:");
        ok &= verify::verify_cbf();
    }
    if matches!(suite, Suite::Qp | Suite::All) {
        println!("qp suite (samples = {samples}, seed = {seed}):");
        ok &= verify::verify_qp(samples, seed);
    }
    if ok {
        println!("all properties hold");
        0
    } else {
        println!("verification FAILED");
        EXIT_CONFIG
    }
}

fn cmd_sweep(scenario: &str, n: usize, seed: Option<u64>, out: Option<&Path>) -> Result<u8> {
    let (_, file) = resolve(scenario)?;
    let mut sweep = file
        .sweep
        .ok_or_else(|| Error::Config(format!("{scenario}: missing [sweep] section")))?;
    sweep.count = n;
    if let Some(seed) = seed {
        sweep.seed = seed;
    }
    let base = file.to_scenario()?;
    let threads = std::env::var("SAFEGUIDE_THREADS").ok().and_then(|v| v.parse().ok());
    let summary = run_sweep(&base, &sweep, threads)?;
    let json = summary.to_json_string();
    match out {
        Some(path) => {
            std::fs::write(path, &json)?;
            println!(
                "{} runs: {} violations, {} converged, {} stalled, {} faults; wrote {}",
                summary.count,
                summary.violations,
                summary.converged,
                summary.stalled,
                summary.faults,
                path.display()
            );
        }
        None => println!("{json}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run { scenario, out, format } => cmd_run(&scenario, &out, format),
        Command::Verify { suite, samples, seed } => Ok(cmd_verify(suite, samples, seed)),
        Command::Sweep { scenario, n, seed, out } => cmd_sweep(&scenario, n, seed, out.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
