//! Wave-packet |S|² against the close-coupling oracle on the bundled models.
//!
//! ```text
//! cargo run --release --example oracle_compare -- 512 6
//! ```

use std::time::Instant;

use ctscatter::cc_oracle::{solve_cc, CcProblem};
use ctscatter::diabatization::CouplingMode;
use ctscatter::models::{self, ModelSystem};
use ctscatter::rotational_basis::{assemble_block, build_basis, Parity};
use ctscatter::smatrix::{find_band, run_block, GridSchedule, GridSetup, KSumPolicy, SweepSpec};

fn spec_for(model: &ModelSystem, setup: GridSetup, dt: f64, energies: Vec<f64>) -> SweepSpec {
    SweepSpec {
        mu: model.mu,
        initial: model.entrance,
        include_rotational: false,
        schedule: GridSchedule::automatic(setup, 7.0, 2.0),
        k0: -10.0,
        dt,
        t_max: 60000.0,
        norm_floor: 1e-10,
        decimation: 1,
        energies,
        ksum: KSumPolicy::default(),
        packet_id: 0,
    }
}

fn main() -> ctscatter::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(512);
    let dt: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(6.0);
    let setup = GridSetup {
        r_min: 0.5,
        r_max: 60.0,
        n,
        r0: 25.0,
        sigma: 1.5,
        r_c: 35.0,
        eta: 0.005,
    };
    let systems = vec![
        models::single_well(),
        models::two_state(),
        models::three_state(CouplingMode::TwoByTwo)?,
    ];
    for model in &systems {
        for k in [0u32, 5, 20] {
            let (s, packet) = spec_for(model, setup, dt, Vec::new()).packet_for(k)?;
            let band = find_band(&packet, &s.grid()?, k, model.mu)?;
            let energies = band.energies(15);
            let spec = spec_for(model, setup, dt, energies.clone());
            let t0 = Instant::now();
            let wp = run_block(&model.potential, &model.couplings, &spec, k, Parity::E)?.expect("entrance present");
            let t_wp = t0.elapsed().as_secs_f64();
            let basis = build_basis(model.potential.channels(), k, Parity::E, false, 0);
            let block = assemble_block(model.potential.clone(), &model.couplings, basis, model.mu, false)?;
            let e_ref = model.potential.channels()[model.entrance].asymptotic_energy;
            let mut worst: f64 = 0.0;
            let mut worst_u: f64 = 0.0;
            for (ie, &e) in energies.iter().enumerate() {
                let cc = solve_cc(&CcProblem {
                    block: &block,
                    energy: e + e_ref,
                    r_min: 0.5,
                    step: None,
                    r_match: None,
                })?;
                let col = cc.column(model.entrance, block.dim()).expect("entrance channel open");
                for f in 0..block.dim() {
                    worst = worst.max((col[f] - wp.s2[ie][f]).abs());
                }
                worst_u = worst_u.max((1.0 - wp.unitarity[ie]).abs());
            }
            println!(
                "{:12} K={:2} band=[{:.4},{:.4}] max|dS2|={:.2e} unit={:.2e} steps={} t={:.1}s",
                model.name, k, band.e_lo, band.e_hi, worst, worst_u, wp.report.steps, t_wp
            );
        }
    }
    Ok(())
}
