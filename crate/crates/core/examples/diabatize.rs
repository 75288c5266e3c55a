//! Adiabatic-to-diabatic transformation of the sigma_pi and n2_sigma data
//! sets with the two-by-two (banded) and full coupling matrices.
//!
//! ```text
//! cargo run --release --example diabatize -- /tmp/diabatic
//! ```

use std::path::{Path, PathBuf};

use ctscatter::diabatization::{diabatize_blocks, CouplingMode, DiabaticPotential};
use ctscatter::molecular_data::{load_coupling_set, load_curve_set};

fn main() -> ctscatter::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().display().to_string()));
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for stem in ["sigma_pi", "n2_sigma"] {
        let curves = load_curve_set(data.join(format!("{stem}.curves")))?;
        let couplings = load_coupling_set(data.join(format!("{stem}.couplings")))?;
        for mode in [CouplingMode::TwoByTwo, CouplingMode::Full] {
            let model = diabatize_blocks(&curves, &couplings, mode, curves.mesh())?;
            println!(
                "{stem} {mode:?}: ‖DDᵀ − I‖ = {:.1e}, largest asymptotic Ud off-diagonal {:.1e}",
                model.adt().orthogonality_defect(),
                model.asymptotic_offdiagonal()
            );
            for r in [2.0, 5.0, 8.0] {
                let m = model.matrix_at(r);
                println!("  Ud({r}) =");
                for row in m.row_iter() {
                    let v: Vec<String> = row.iter().map(|x| format!("{x:+.5}")).collect();
                    println!("    [{}]", v.join(" "));
                }
            }
            let tag = format!("{stem}_{mode:?}").to_lowercase();
            model.write(out.join(format!("{tag}.curves")), out.join(format!("{tag}_matrices.txt")))?;
        }
    }
    println!("wrote diabatic curves and matrices to {}", out.display());
    Ok(())
}
