use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use klexpand::cli::{self, BenchmarkConfig, CliError, RunReport};

#[derive(Parser)]
#[command(name = "klexpand", version, about = "Karhunen-Loeve eigenpairs by matrix-free isogeometric Galerkin and collocation")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write its CSV files.
    Run { config: PathBuf },
    /// Run every `*.cfg` in a directory and write `summary.csv` there.
    Sweep { dir: PathBuf },
}

fn print_report(r: &RunReport) {
    let ntilde = r.n_tilde.map(|n| format!(" Ntilde={n}")).unwrap_or_default();
    println!(
        "{} [{}] N={}{} p={} h={:.4} setup={:.3}s matvec={:.3e}s eigensolve={:.3}s n_iter={}",
        r.case, r.method, r.n, ntilde, r.degree, r.h, r.setup_seconds, r.matvec_mean_seconds, r.eigensolve_seconds, r.n_iter
    );
    let shown: Vec<String> = r.eigenvalues.iter().take(6).map(|l| format!("{l:.8e}")).collect();
    println!("  eigenvalues: {}", shown.join(" "));
    if let Some(e) = r.mean_rel_error {
        println!("  mean relative error over {} modes: {e:.3e}", r.rel_errors.as_ref().map_or(0, Vec::len));
    }
    println!("  output: {}", r.output.display());
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run { config } => {
            let cfg = match BenchmarkConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return code(2);
                }
            };
            match cli::run(&cfg) {
                Ok(r) => {
                    print_report(&r);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    if let CliError::Partial { report, .. } = &e {
                        print_report(report);
                    }
                    eprintln!("error: {e}");
                    code(e.exit_code())
                }
            }
        }
        Command::Sweep { dir } => match cli::sweep_dir(&dir) {
            Ok(outcome) => {
                for entry in &outcome.entries {
                    match &entry.result {
                        Ok(r) => print_report(r),
                        Err(e) => eprintln!("{}: {e}", entry.case),
                    }
                }
                println!("summary: {}", outcome.summary.display());
                code(outcome.exit_code())
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
    }
}
