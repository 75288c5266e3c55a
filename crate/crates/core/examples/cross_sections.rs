//! K-summed state-to-state cross sections, using the two-state model or, with
//! `sigma-pi`, the Σ/Π toy with the rotational coupling switched on.
//!
//! ```text
//! cargo run --release --example cross_sections -- sigma-pi /tmp/xs.csv
//! ```

use ctscatter::models;
use ctscatter::smatrix::{
    sweep, total_from_initial, CrossSectionRow, CrossSectionTable, GridSchedule, GridSetup, KSumPolicy, NoStore,
    StateId, SweepSpec,
};
use ctscatter::units::{cm_to_collision, BOHR2_TO_CM2};

fn main() -> ctscatter::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let rotational = args.get(1).is_some_and(|a| a == "sigma-pi");
    let m = if rotational { models::sigma_pi()? } else { models::two_state() };
    let setup = GridSetup {
        r_min: 0.5,
        r_max: 60.0,
        n: 512,
        r0: 25.0,
        sigma: 1.5,
        r_c: 35.0,
        eta: 0.005,
    };
    let energies: Vec<f64> = (0..8).map(|i| 0.022 + 0.004 * i as f64).collect();
    let spec = SweepSpec {
        mu: m.mu,
        initial: m.entrance,
        include_rotational: rotational,
        schedule: GridSchedule::automatic(setup, 7.0, 2.0),
        k0: -10.0,
        dt: 8.0,
        t_max: 60000.0,
        norm_floor: 1e-10,
        decimation: 1,
        energies: energies.clone(),
        ksum: KSumPolicy::default(),
        packet_id: 0,
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let r = sweep(&m.potential, &m.couplings, &spec, &NoStore, workers)?;
    println!(
        "{}: K_max = {}, converged = {}, truncation {:.1e}",
        m.name, r.k_max_used, r.converged, r.truncation_estimate
    );

    let channels = m.potential.channels();
    let initial = StateId::from(&channels[m.entrance]);
    let mut rows = Vec::new();
    for (e, &ecm) in energies.iter().enumerate() {
        for (f, ch) in channels.iter().enumerate() {
            if f == m.entrance {
                continue;
            }
            rows.push(CrossSectionRow {
                energy: cm_to_collision(ecm, m.mu),
                initial: initial.clone(),
                final_state: StateId::from(ch),
                k_max_used: r.k_max_used,
                sigma_bohr2: r.sigma[e][f],
                unitarity_defect: r.unitarity_defect[e],
            });
            println!(
                "  E = {:.3} eV/amu  → {:<4} σ = {:8.4} a₀² = {:.3e} cm²",
                cm_to_collision(ecm, m.mu),
                ch.label,
                r.sigma[e][f],
                r.sigma[e][f] * BOHR2_TO_CM2
            );
        }
    }
    let table = CrossSectionTable { rotational, rows };
    for (e, row) in energies.iter().zip(&r.sigma) {
        let ct: f64 = row.iter().filter(|v| !v.is_nan()).sum();
        println!("  charge transfer from {} at {:.3} eV/amu: {ct:.4} a₀²", initial.label, cm_to_collision(*e, m.mu));
    }
    // the statistical (2l+1) average needs every Λ component of the entrance level
    let entrance = &channels[m.entrance];
    match total_from_initial(&table, entrance.arrangement, entrance.n, entrance.l) {
        Ok(t) => {
            for (e, s) in t {
                println!("  σ(n={} l={}) at {e:.3} eV/amu: {s:.4} a₀²", entrance.n, entrance.l);
            }
        }
        Err(e) => println!("  no level-averaged total: {e}"),
    }
    if let Some(path) = args.get(2) {
        table.write_csv(path)?;
        println!("wrote {path}");
    }
    Ok(())
}
