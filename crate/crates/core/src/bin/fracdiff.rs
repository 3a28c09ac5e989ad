use clap::{Parser, Subcommand};
use fracdiff::harness::{self, Run, Select};
use fracdiff::mlf::{ml, MlParams};
use fracdiff::scenario::{Kind, PropKind, Scenario};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Time-fractional diffusion solvers and property checks.
///
/// Outputs go to the directory named by FRACDIFF_OUT_DIR (default: current directory).
#[derive(Parser)]
#[command(name = "fracdiff", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a scenario and check every declared property
    Run { scenario: PathBuf },
    /// Run every *.scn file of a directory concurrently
    Bundle { dir: PathBuf },
    /// Refinement study with observed orders
    Converge {
        scenario: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Evaluate the Mittag-Leffler function E_{alpha,beta}(z)
    MlEval {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
    /// Solve only, without property checks
    Solve { scenario: PathBuf },
    /// Run the monotone iteration properties
    Monotone { scenario: PathBuf },
    /// Run the comparison properties
    Compare { scenario: PathBuf },
    /// Steady state of the reaction; writes columns x,u
    Steady { scenario: PathBuf },
    /// Run the decay envelope properties
    Envelope { scenario: PathBuf },
    /// Run a multi-order system or semilinear pair scenario
    System { scenario: PathBuf },
}

fn emit(run: &Run) -> Result<bool, fracdiff::Error> {
    let (csv, rep) = harness::write_run(&harness::output_dir(), run)?;
    print!("{}", run.report.render());
    println!("wrote {} and {}", csv.display(), rep.display());
    Ok(run.report.all_as_declared())
}

fn load(path: &Path) -> Result<Scenario, fracdiff::Error> {
    Scenario::from_file(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run { scenario } => load(&scenario).and_then(|sc| harness::run(&sc, Select::All)).and_then(|r| emit(&r)),
        Cmd::Solve { scenario } => load(&scenario).and_then(|sc| harness::run(&sc, Select::Nothing)).and_then(|r| emit(&r)),
        Cmd::Monotone { scenario } => {
            load(&scenario).and_then(|sc| harness::run(&sc, Select::Only(PropKind::Monotone))).and_then(|r| emit(&r))
        }
        Cmd::Compare { scenario } => {
            load(&scenario).and_then(|sc| harness::run(&sc, Select::Only(PropKind::Comparison))).and_then(|r| emit(&r))
        }
        Cmd::Envelope { scenario } => {
            load(&scenario).and_then(|sc| harness::run(&sc, Select::Only(PropKind::Envelope))).and_then(|r| emit(&r))
        }
        Cmd::Steady { scenario } => load(&scenario).and_then(|sc| harness::steady(&sc)).and_then(|r| emit(&r)),
        Cmd::System { scenario } => load(&scenario)
            .and_then(|sc| match sc.kind {
                Kind::System | Kind::Pair => harness::run(&sc, Select::All),
                k => Err(fracdiff::Error::Unsupported(format!("'system' takes system or pair scenarios, not {k}"))),
            })
            .and_then(|r| emit(&r)),
        Cmd::Converge { scenario, levels } => {
            load(&scenario).and_then(|sc| harness::converge(&sc, levels)).and_then(|r| emit(&r))
        }
        Cmd::MlEval { alpha, beta, z } => MlParams::new(alpha, beta).and_then(|p| ml(p, z)).map(|v| {
            println!("{v:.17e}");
            true
        }),
        Cmd::Bundle { dir } => bundle(&dir),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn bundle(dir: &Path) -> Result<bool, fracdiff::Error> {
    let entries = harness::run_bundle(dir)?;
    if entries.is_empty() {
        return Err(fracdiff::Error::Io(format!("no .scn files in {}", dir.display())));
    }
    let out = harness::output_dir();
    let mut ok = true;
    for e in &entries {
        match &e.outcome {
            Ok(run) => {
                harness::write_run(&out, run)?;
                let r = &run.report;
                let status = if r.all_as_declared() { "ok" } else { "UNEXPECTED" };
                println!(
                    "{:<28} {status:<10} PASS {} FAIL {} NOT-APPLICABLE {} ({:.2} s)",
                    r.scenario,
                    r.count(fracdiff::semilinear::Verdict::Pass),
                    r.count(fracdiff::semilinear::Verdict::Fail),
                    r.count(fracdiff::semilinear::Verdict::NotApplicable),
                    r.runtime.as_secs_f64()
                );
                ok &= r.all_as_declared();
            }
            Err(err) => {
                println!("{:<28} ERROR      {err}", e.path.display());
                ok = false;
            }
        }
    }
    println!("{} scenarios, outputs in {}", entries.len(), out.display());
    Ok(ok)
}
