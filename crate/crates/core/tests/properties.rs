use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use ctscatter::cc_oracle::{solve_cc, CcProblem};
use ctscatter::diabatization::{solve_adt, CouplingMatrix};
use ctscatter::models;
use ctscatter::molecular_data::{apply_tail_switch, switch_weight, RadialMesh};
use ctscatter::propagation::{cap_values, gaussian_packet, CapSpec, PacketSpec, Propagator, UniformGrid};
use ctscatter::rotational_basis::{assemble_block, build_basis, Parity};
use ctscatter::smatrix::special::riccati_bessel_with_derivatives;

fn gauss(r: f64, c: f64, w: f64) -> f64 {
    (-((r - c) / w).powi(2)).exp()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adt_stays_orthogonal(
        amps in prop::array::uniform3(-0.8..0.8f64),
        centres in prop::array::uniform3(2.0..12.0f64),
        widths in prop::array::uniform3(0.3..2.0f64),
    ) {
        let f = CouplingMatrix::from_fn(3, move |r| {
            let g: Vec<f64> = (0..3).map(|i| amps[i] * gauss(r, centres[i], widths[i])).collect();
            DMatrix::from_row_slice(3, 3, &[0.0, g[0], g[1], -g[0], 0.0, g[2], -g[1], -g[2], 0.0])
        });
        let mesh = RadialMesh::uniform(0.5, 20.0, 400).unwrap();
        let adt = solve_adt(&f, &mesh).unwrap();
        prop_assert!(adt.orthogonality_defect() <= 1e-10);
        let last = adt.matrices().last().unwrap();
        prop_assert!((last - DMatrix::identity(3, 3)).amax() <= 1e-14);
    }

    #[test]
    fn tail_switch_blends_between_raw_and_atomic(
        r in 0.0..80.0f64,
        r_s in 5.0..40.0f64,
        w in 0.1..3.0f64,
        atomic in -1.0..1.0f64,
        slope in -2.0..2.0f64,
    ) {
        let s = switch_weight(r, r_s, w);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(switch_weight(r + 0.1, r_s, w) <= s);
        let raw = move |x: f64| slope * x;
        let g = apply_tail_switch(raw, r_s, w, atomic)(r);
        let (lo, hi) = (raw(r).min(atomic), raw(r).max(atomic));
        prop_assert!(g >= lo - 1e-12 && g <= hi + 1e-12);
    }

    #[test]
    fn blocks_are_symmetric(k in 0u32..60, f_parity in any::<bool>(), rot in any::<bool>(), r in 0.3..29.0f64) {
        let m = models::sigma_pi().unwrap();
        let parity = if f_parity { Parity::F } else { Parity::E };
        let basis = build_basis(m.potential.channels(), k, parity, rot, 0);
        prop_assume!(!basis.is_empty());
        let block = assemble_block(m.potential.clone(), &m.couplings, basis, m.mu, rot).unwrap();
        let h = block.matrix_at(r);
        prop_assert_eq!(&h, &h.transpose());
    }

    #[test]
    fn close_coupling_conserves_flux(k in 0u32..40, e in 0.01..0.08f64) {
        let m = models::two_state();
        let basis = build_basis(m.potential.channels(), k, Parity::E, false, 0);
        let block = assemble_block(m.potential.clone(), &m.couplings, basis, m.mu, false).unwrap();
        let cc = solve_cc(&CcProblem { block: &block, energy: e, r_min: 0.5, step: None, r_match: None }).unwrap();
        for col in 0..cc.open.len() {
            let sum: f64 = cc.s2.column(col).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-6, "column {col}: {sum}");
        }
    }

    #[test]
    fn riccati_wronskian(k in 0u32..80, x in 0.5..200.0f64) {
        let [j, jp, y, yp] = riccati_bessel_with_derivatives(k, x).unwrap();
        let w = Complex64::new(j, y) * Complex64::new(jp, -yp) - Complex64::new(j, -y) * Complex64::new(jp, yp);
        let scale = (j.hypot(y) * jp.hypot(yp)).max(1.0);
        prop_assert!((w - Complex64::new(0.0, -2.0)).norm() / scale <= 1e-10);
    }

    #[test]
    fn cap_never_adds_norm(eta in 0.001..0.05f64, r_c in 20.0..30.0f64, k0 in -12.0..-4.0f64) {
        let grid = UniformGrid::new(0.5, 40.0, 256).unwrap();
        let cap = CapSpec::new(eta, r_c).unwrap();
        let w = cap_values(&grid, &cap).unwrap();
        let mut prop = Propagator::from_potential(&grid, 1467.6, 1, |_| DMatrix::zeros(1, 1), &w, 5.0, 0.0).unwrap();
        let mut psi = gaussian_packet(&grid, 1, 0, &PacketSpec { r0: 12.0, sigma: 1.5, k0: -k0 }, r_c).unwrap();
        let mut last = psi.norm();
        for _ in 0..300 {
            prop.step(&mut psi).unwrap();
            let n = psi.norm();
            prop_assert!(n <= last + 1e-12);
            last = n;
        }
    }
}
