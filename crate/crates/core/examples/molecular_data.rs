//! Loads the bundled HeH⁺ singlet channel table and a curve/coupling pair,
//! then prints the channel list and a few interpolated values.
//!
//! ```text
//! cargo run --example molecular_data
//! ```

use std::path::Path;

use ctscatter::molecular_data::{apply_tail_switch, load_coupling_set, load_curve_set, reduced_mass};
use ctscatter::units::{MASS_H, MASS_HE};

fn main() -> ctscatter::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let table = load_curve_set(data.join("heh_singlets.curves"))?;
    println!("{} channels", table.len());
    for c in table.channels() {
        println!(
            "  m={:2} {:7} {:>3} {:<18} E∞ = {:.8}",
            c.m,
            c.symmetry_label(),
            c.arrangement.tag(),
            c.label,
            c.asymptotic_energy
        );
    }

    let curves = load_curve_set(data.join("sigma_pi.curves"))?;
    let couplings = load_coupling_set(data.join("sigma_pi.couplings"))?;
    println!("\nsigma_pi: {} curves on {} mesh points", curves.len(), curves.mesh().len());
    for r in [1.0, 3.0, 6.0, 12.0, 25.0] {
        let v: Vec<String> = (0..curves.len()).map(|i| format!("{:+.6}", curves.potential(i, r))).collect();
        println!("  R = {r:5.1}  U = [{}]", v.join(", "));
    }
    for f in couplings.all() {
        println!(
            "  {} ⟨{}Λ{}|{}Λ{}⟩ at R = 4: {:+.5}",
            f.kind.tag(),
            f.from.m,
            f.from.lambda,
            f.to.m,
            f.to.lambda,
            f.eval(4.0)
        );
    }

    let mu = reduced_mass(MASS_H, MASS_HE)?;
    println!("\nμ(H, He) = {mu:.3} mₑ");
    let g = apply_tail_switch(|r| r, 30.0, 1.0, 0.0);
    println!("tail switch of raw(R) = R at R_s = 30: g(25) = {:.6}, g(60) = {:.2e}", g(25.0), g(60.0));
    Ok(())
}
