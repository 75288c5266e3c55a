//! Parity-adapted (K, ε) blocks of the sigma_pi toy model with and without
//! the rotational (Λ-changing) couplings.
//!
//! ```text
//! cargo run --example hamiltonian_block -- 5
//! ```

use ctscatter::models;
use ctscatter::rotational_basis::{assemble_block, build_basis, Parity};

fn main() -> ctscatter::Result<()> {
    let k: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let m = models::sigma_pi()?;
    let channels = m.potential.channels();
    for rot in [false, true] {
        for parity in [Parity::E, Parity::F] {
            let basis = build_basis(channels, k, parity, rot, 0);
            if basis.is_empty() {
                println!("K={k} {parity:?} rotation={rot}: empty");
                continue;
            }
            let labels: Vec<String> = basis
                .states()
                .iter()
                .map(|s| format!("{}({})", s.channel.symmetry_label(), s.channel.label))
                .collect();
            let block = assemble_block(m.potential.clone(), &m.couplings, basis, m.mu, rot)?;
            println!("K={k} {parity:?} rotation={rot}: {}", labels.join(", "));
            for r in [3.0, 6.0] {
                println!("  H(R = {r}) (hartree, centrifugal included):");
                for row in block.matrix_at(r).row_iter() {
                    let v: Vec<String> = row.iter().map(|x| format!("{x:+.3e}")).collect();
                    println!("    [{}]", v.join(" "));
                }
            }
        }
    }
    Ok(())
}
