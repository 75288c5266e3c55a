//! Writes the bundled adiabatic model data sets as curve and coupling files.
//!
//! ```text
//! cargo run --example write_model_data -- crates/core/data
//! ```

use std::path::PathBuf;

use ctscatter::models;
use ctscatter::molecular_data::{write_coupling_set, write_curve_set};

fn main() -> ctscatter::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let sets = [
        ("n2_sigma", models::n2_like_adiabatic()?),
        ("sigma_pi", models::sigma_pi_adiabatic()?),
    ];
    for (stem, (curves, couplings)) in sets {
        let c = dir.join(format!("{stem}.curves"));
        let f = dir.join(format!("{stem}.couplings"));
        write_curve_set(&curves, &c)?;
        write_coupling_set(&couplings, &f)?;
        println!("{} ({} channels), {}", c.display(), curves.len(), f.display());
    }
    Ok(())
}
