use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctscatter::cli::{self, RunConfig};

#[derive(Parser)]
#[command(name = "ctscatter", version, about = "Wave-packet charge-transfer cross sections")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep and write tables, S-matrix dump, convergence report and manifest.
    Run { config: PathBuf },
    /// Dry-run checks without propagating.
    Validate { config: PathBuf },
    /// Close-coupling reference |S|² for the configured K values.
    Oracle { config: PathBuf },
    /// Write the diabatic curves and the ADT matrix only.
    Diabatize { config: PathBuf },
}

fn execute(command: Command) -> ctscatter::Result<i32> {
    match command {
        Command::Run { config } => {
            let out = cli::run(&RunConfig::load(config)?)?;
            for p in &out.report.packets {
                println!(
                    "packet {}: K_max = {}, converged = {}, truncation = {:.1e}",
                    p.packet, p.k_max_used, p.converged, p.truncation_estimate
                );
            }
            println!("{} rows -> {}", out.table.rows.len(), out.out_dir.join("cross_sections.csv").display());
            if !out.report.unitarity_violations.is_empty() {
                eprintln!("unitarity outside tolerance at {:?} eV/amu", out.report.unitarity_violations);
            }
            Ok(out.status.exit_code())
        }
        Command::Validate { config } => {
            let findings = cli::validate(&RunConfig::load(config)?);
            for f in &findings {
                println!("{f}");
            }
            if findings.is_empty() {
                println!("no findings");
                Ok(cli::EXIT_OK)
            } else {
                Ok(cli::EXIT_CONFIG)
            }
        }
        Command::Oracle { config } => {
            let out = cli::oracle(&RunConfig::load(config)?)?;
            println!("{} rows -> {}", out.rows.len(), out.path.display());
            if let Some(d) = out.max_difference {
                println!("max |S²(wave packet) − S²(oracle)| = {d:.2e}");
            }
            Ok(cli::EXIT_OK)
        }
        Command::Diabatize { config } => {
            let out = cli::diabatize(&RunConfig::load(config)?)?;
            println!("{}\n{}", out.curves_path.display(), out.matrix_path.display());
            println!("max ‖DᵀD − I‖ = {:.1e}", out.orthogonality_defect);
            Ok(cli::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match execute(args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", cli::error_json(&e));
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
