//! Validates and runs a TOML run configuration through the library, the same
//! path the `ctscatter run` subcommand takes.
//!
//! ```text
//! CTSCATTER_WORKERS=2 cargo run --release --example run_config -- crates/core/configs/sigma_pi.toml
//! ```

use std::path::Path;

use ctscatter::cli::{self, RunConfig};

fn main() -> ctscatter::Result<()> {
    let default = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/sigma_pi.toml");
    let path = std::env::args().nth(1).map_or(default, Into::into);
    let config = RunConfig::load(&path)?;
    let findings = cli::validate(&config);
    for f in &findings {
        println!("{}: {}", f.check, f.message);
    }
    if !findings.is_empty() {
        return Ok(());
    }
    let outcome = cli::run(&config)?;
    println!("{:?}, {} rows in {}", outcome.status, outcome.table.rows.len(), outcome.out_dir.display());
    for p in &outcome.report.packets {
        println!(
            "  packet {} (k0 = {}): K_max = {}, converged = {}, truncation {:.1e}",
            p.packet, p.k0, p.k_max_used, p.converged, p.truncation_estimate
        );
    }
    Ok(())
}
