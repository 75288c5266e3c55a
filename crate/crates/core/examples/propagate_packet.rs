//! Propagates one K = 0 wave packet of the two-state model, dumps the
//! CAP-region time series to disk and turns it into |S|² afterwards.
//!
//! ```text
//! cargo run --release --example propagate_packet -- /tmp/two_state_k0.series
//! ```

use ctscatter::models;
use ctscatter::propagation::{
    cap_values, gaussian_packet, propagate_and_record, read_series, write_series, PacketSpec, Propagator,
    SeriesRecorder,
};
use ctscatter::rotational_basis::{assemble_block, build_basis, Parity};
use ctscatter::smatrix::{extract_s2, find_band, gamma_amplitude, GridSetup};

fn main() -> ctscatter::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir().join("two_state_k0.series").display().to_string()
    });
    let m = models::two_state();
    let setup = GridSetup {
        r_min: 0.5,
        r_max: 60.0,
        n: 512,
        r0: 25.0,
        sigma: 1.5,
        r_c: 35.0,
        eta: 0.005,
    };
    let packet = PacketSpec {
        r0: setup.r0,
        sigma: setup.sigma,
        k0: -10.0,
    };
    let (grid, cap) = (setup.grid()?, setup.cap()?);
    let w = cap_values(&grid, &cap)?;
    let basis = build_basis(m.potential.channels(), 0, Parity::E, false, 0);
    let block = assemble_block(m.potential.clone(), &m.couplings, basis, m.mu, false)?;
    let e_ref = m.potential.channels()[m.entrance].asymptotic_energy;

    let dt = 8.0;
    let mut prop = Propagator::new(&block, &grid, &cap, dt, e_ref)?;
    let mut psi = gaussian_packet(&grid, block.dim(), m.entrance, &packet, cap.r_c)?;
    let (r, s) = psi.position_moments(0);
    println!("t = 0: ⟨R⟩ = {r:.2}, ΔR = {s:.3}, ⟨k⟩ = {:.3}", psi.momentum_expectation(0));
    let mut rec = SeriesRecorder::new(&grid, &w, dt, e_ref, block.dim(), 1)?;
    let report = propagate_and_record(&mut psi, &mut prop, 60000.0, 1e-10, &mut rec)?;
    println!(
        "{} steps to t = {:.0}, final norm {:.1e}, warnings {:?}",
        report.steps, report.final_time, report.final_norm, report.warnings
    );

    let series = rec.into_series();
    write_series(&series, &path)?;
    let series = read_series(&path)?;
    println!("{} records over {} CAP points written to {path}", series.len(), series.support.len());

    let band = find_band(&packet, &grid, 0, m.mu)?;
    let energies = band.energies(8);
    let gamma2: Vec<f64> = energies
        .iter()
        .map(|&e| gamma_amplitude(&packet, &grid, (2.0 * m.mu * e).sqrt(), 0, m.mu).map(|g| g.norm_sqr()))
        .collect::<ctscatter::Result<_>>()?;
    let thresholds: Vec<f64> = block.thresholds().iter().map(|t| t - e_ref).collect();
    let s2 = extract_s2(&series.spectral(energies)?, &thresholds, &gamma2)?;
    println!("{:>9} {:>10} {:>10} {:>10}", "E", "|S_AA|²", "|S_BA|²", "sum");
    for (e, v) in s2.energies.iter().zip(&s2.values) {
        println!("{e:9.5} {:10.6} {:10.6} {:10.6}", v[0], v[1], v.iter().sum::<f64>());
    }
    Ok(())
}
