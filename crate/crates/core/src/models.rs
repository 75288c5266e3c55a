//! Small model systems with known structure, used by tests, examples and the
//! CLI demos. All use the H–He reduced mass.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::diabatization::{diabatize_blocks, AnalyticDiabatic, CouplingMode, DiabaticPotential};
use crate::error::Result;
use crate::molecular_data::{
    reduced_mass, Arrangement, CouplingFunction, CouplingKind, CouplingSet, CurveSet, ElectronicChannel,
    RadialMesh, TailPolicy,
};
use crate::units::{MASS_H, MASS_HE};

/// A ready-to-run scattering problem.
#[derive(Clone)]
pub struct ModelSystem {
    pub name: &'static str,
    pub mu: f64,
    pub potential: Arc<dyn DiabaticPotential>,
    pub couplings: CouplingSet,
    /// Entrance channel index in `potential.channels()`.
    pub entrance: usize,
}

impl std::fmt::Debug for ModelSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSystem")
            .field("name", &self.name)
            .field("mu", &self.mu)
            .field("channels", &self.potential.channels())
            .field("entrance", &self.entrance)
            .finish()
    }
}

pub fn heh_mu() -> f64 {
    reduced_mass(MASS_H, MASS_HE).expect("positive masses")
}

fn channel(m: u32, lambda: u32, energy: f64, arrangement: Arrangement, label: &str, n: u32, l: u32) -> ElectronicChannel {
    ElectronicChannel {
        m,
        lambda,
        multiplicity: 1,
        asymptotic_energy: energy,
        arrangement,
        label: label.to_string(),
        n,
        l,
    }
}

fn no_couplings() -> CouplingSet {
    CouplingSet::empty(RadialMesh::uniform(0.0, 1.0, 4).expect("valid mesh"))
}

fn gauss(r: f64, centre: f64, width: f64) -> f64 {
    (-((r - centre) / width).powi(2)).exp()
}

/// Smooth step from 1 to 0 around `r_x`.
fn cutoff(r: f64, r_x: f64, w: f64) -> f64 {
    1.0 / (1.0 + ((r - r_x) / w).exp())
}

/// One Morse well, `D[(1 − e^{−a(R−Re)})² − 1]`.
pub fn single_well() -> ModelSystem {
    let (d, a, re) = (0.03, 1.0, 2.5);
    let channels = vec![channel(1, 0, 0.0, Arrangement::HydrogenExcited, "well", 2, 0)];
    let potential = AnalyticDiabatic::new(channels, move |r| {
        let x = 1.0 - (-a * (r - re)).exp();
        DMatrix::from_element(1, 1, d * (x * x - 1.0))
    });
    ModelSystem {
        name: "single-well",
        mu: heh_mu(),
        potential: Arc::new(potential),
        couplings: no_couplings(),
        entrance: 0,
    }
}

fn two_state_matrix(r: f64, coupling: f64) -> DMatrix<f64> {
    let c = coupling * cutoff(r, 8.0, 0.5);
    DMatrix::from_row_slice(
        2,
        2,
        &[0.5 * (-0.8 * r).exp(), c, c, -0.008 + 0.3 * (-0.6 * r).exp()],
    )
}

/// Two repulsive diabatic states joined by a constant coupling that is cut
/// off smoothly beyond 8 bohr.
pub fn two_state() -> ModelSystem {
    two_state_with_coupling(0.003)
}

pub fn two_state_with_coupling(coupling: f64) -> ModelSystem {
    let channels = vec![
        channel(1, 0, 0.0, Arrangement::HydrogenExcited, "A", 2, 0),
        channel(2, 0, -0.008, Arrangement::HeliumExcited, "B", 2, 0),
    ];
    let potential = AnalyticDiabatic::new(channels, move |r| two_state_matrix(r, coupling));
    ModelSystem {
        name: "two-state",
        mu: heh_mu(),
        potential: Arc::new(potential),
        couplings: no_couplings(),
        entrance: 0,
    }
}

/// Adiabatic curves and radial couplings of the three-state avoided-crossing model.
pub fn three_state_adiabatic() -> Result<(CurveSet, CouplingSet)> {
    let mesh = RadialMesh::uniform(0.2, 40.0, 3981)?;
    let base = |r: f64| 0.4 * (-0.7 * r).exp();
    let u = [
        |r: f64, b: f64| -0.012 + b + 0.002 * gauss(r, 5.0, 1.0),
        |r: f64, b: f64| -0.006 + b - 0.002 * gauss(r, 5.0, 1.0) + 0.002 * gauss(r, 7.0, 1.0),
        |r: f64, b: f64| b - 0.002 * gauss(r, 7.0, 1.0),
    ];
    let channels = vec![
        channel(1, 0, -0.012, Arrangement::HeliumExcited, "X1", 2, 0),
        channel(2, 0, -0.006, Arrangement::HeliumExcited, "X2", 2, 1),
        channel(3, 0, 0.0, Arrangement::HydrogenExcited, "X3", 2, 0),
    ];
    let energies = u
        .iter()
        .map(|f| mesh.points().iter().map(|&r| f(r, base(r))).collect())
        .collect();
    let curves = CurveSet::new(channels.clone(), mesh.clone(), energies)?;

    let lobe = |centre: f64, width: f64, angle: f64| {
        let amp = angle / (width * std::f64::consts::PI.sqrt());
        mesh.points().iter().map(move |&r| amp * gauss(r, centre, width)).collect::<Vec<_>>()
    };
    let radial = |a: usize, b: usize, values: Vec<f64>| {
        CouplingFunction::new(
            CouplingKind::Radial,
            channels[a].key(),
            channels[b].key(),
            &mesh,
            values,
            TailPolicy::Zero,
        )
    };
    let couplings = CouplingSet::new(
        mesh.clone(),
        vec![
            radial(0, 1, lobe(5.0, 0.6, 0.5))?,
            radial(1, 2, lobe(7.0, 0.6, 0.4))?,
            radial(0, 2, lobe(6.0, 0.8, 0.1))?,
        ],
    )?;
    Ok((curves, couplings))
}

/// Three Σ states with Gaussian radial couplings at 5, 6 and 7 bohr,
/// diabatized with the given coupling mode. Entrance is the upper state.
pub fn three_state(mode: CouplingMode) -> Result<ModelSystem> {
    let (curves, couplings) = three_state_adiabatic()?;
    let model = diabatize_blocks(&curves, &couplings, mode, curves.mesh())?;
    Ok(ModelSystem {
        name: "three-state",
        mu: heh_mu(),
        potential: Arc::new(model),
        couplings,
        entrance: 2,
    })
}

/// Entrance Σ, a charge-transfer Σ and a charge-transfer Π state. The Π
/// state couples to the Σ states only through L+, switched off beyond 9 bohr.
pub fn sigma_pi() -> Result<ModelSystem> {
    let channels = vec![
        channel(1, 0, 0.0, Arrangement::HydrogenExcited, "S1", 2, 1),
        channel(2, 0, -0.008, Arrangement::HeliumExcited, "S2", 2, 1),
        channel(1, 1, -0.006, Arrangement::HeliumExcited, "P1", 2, 1),
    ];
    let potential = AnalyticDiabatic::new(channels.clone(), |r| {
        let s = two_state_matrix(r, 0.003);
        let mut v = DMatrix::zeros(3, 3);
        v.view_mut((0, 0), (2, 2)).copy_from(&s);
        v[(2, 2)] = -0.006 + 0.35 * (-0.65 * r).exp();
        v
    });
    let mesh = RadialMesh::uniform(0.2, 30.0, 299)?;
    let l_plus = |lower: usize, strength: f64| {
        let values = mesh.points().iter().map(|&r| strength * gauss(r, 4.0, 2.0)).collect();
        CouplingFunction::new(
            CouplingKind::LPlus,
            channels[2].key(),
            channels[lower].key(),
            &mesh,
            values,
            TailPolicy::Switch {
                r_s: 9.0,
                width: 0.5,
                atomic_value: 0.0,
            },
        )
    };
    let couplings = CouplingSet::new(mesh.clone(), vec![l_plus(0, 0.15)?, l_plus(1, 0.1)?])?;
    Ok(ModelSystem {
        name: "sigma-pi",
        mu: heh_mu(),
        potential: Arc::new(potential),
        couplings,
        entrance: 0,
    })
}

/// Adiabatic form of a Σ/Σ/Π system for file-driven runs: two Σ curves with
/// an avoided crossing at 6 bohr and a Π curve tied to both by L+.
pub fn sigma_pi_adiabatic() -> Result<(CurveSet, CouplingSet)> {
    let mesh = RadialMesh::uniform(0.2, 40.0, 399)?;
    let base = |r: f64| 0.5 * (-0.7 * r).exp();
    let channels = vec![
        channel(1, 0, -0.008, Arrangement::HeliumExcited, "S2", 2, 1),
        channel(2, 0, 0.0, Arrangement::HydrogenExcited, "S1", 2, 1),
        channel(1, 1, -0.006, Arrangement::HeliumExcited, "P1", 2, 1),
    ];
    let shapes: [&dyn Fn(f64) -> f64; 3] = [
        &|r| -0.008 + base(r) + 0.003 * gauss(r, 6.0, 1.2),
        &|r| base(r) - 0.003 * gauss(r, 6.0, 1.2),
        &|r| -0.006 + 0.35 * (-0.65 * r).exp(),
    ];
    let energies = shapes
        .iter()
        .map(|f| mesh.points().iter().map(|&r| f(r)).collect())
        .collect();
    let curves = CurveSet::new(channels.clone(), mesh.clone(), energies)?;
    let values = |f: &dyn Fn(f64) -> f64| mesh.points().iter().map(|&r| f(r)).collect::<Vec<_>>();
    let radial = CouplingFunction::new(
        CouplingKind::Radial,
        channels[0].key(),
        channels[1].key(),
        &mesh,
        values(&|r| 0.5 / (0.8 * std::f64::consts::PI.sqrt()) * gauss(r, 6.0, 0.8)),
        TailPolicy::Zero,
    )?;
    let switched = TailPolicy::Switch {
        r_s: 9.0,
        width: 0.5,
        atomic_value: 0.0,
    };
    let l_plus = |lower: usize, strength: f64| {
        CouplingFunction::new(
            CouplingKind::LPlus,
            channels[2].key(),
            channels[lower].key(),
            &mesh,
            values(&|r| strength * gauss(r, 4.0, 2.0)),
            switched,
        )
    };
    let couplings = CouplingSet::new(mesh.clone(), vec![radial, l_plus(1, 0.15)?, l_plus(0, 0.1)?])?;
    Ok((curves, couplings))
}

/// Asymptotes of the four n = 2 singlet Σ⁺ states (hartree).
pub const N2_SIGMA_ASYMPTOTES: [f64; 4] = [-2.14589424, -2.12556499, -2.12433765, -2.12374055];

/// Four Σ states with the n = 2 asymptotes, avoided crossings at 6, 9 and 12
/// bohr and Gaussian radial couplings between neighbours (plus a weak 1–3 term).
pub fn n2_like_adiabatic() -> Result<(CurveSet, CouplingSet)> {
    let mesh = RadialMesh::uniform(0.5, 60.0, 596)?;
    let e = N2_SIGMA_ASYMPTOTES;
    let base = |r: f64| 0.5 * (-0.6 * r).exp();
    let dips = [(6.0, 0.004), (9.0, 0.0004), (12.0, 0.0002)];
    let shape = |i: usize, r: f64| {
        let mut v = e[i] + base(r);
        // state i is pushed up at its lower crossing and down at its upper one
        if i > 0 {
            let (c, d) = dips[i - 1];
            v -= d * gauss(r, c, 1.5);
        }
        if i < 3 {
            let (c, d) = dips[i];
            v += d * gauss(r, c, 1.5);
        }
        v
    };
    let channels = vec![
        channel(3, 0, e[0], Arrangement::HeliumExcited, "He(1s2s 1S)+H+", 2, 0),
        channel(4, 0, e[1], Arrangement::HydrogenExcited, "He+(1s)+H(2p)", 2, 1),
        channel(5, 0, e[2], Arrangement::HydrogenExcited, "He+(1s)+H(2s)", 2, 0),
        channel(6, 0, e[3], Arrangement::HeliumExcited, "He(1s2p 1P)+H+", 2, 1),
    ];
    let energies = (0..4)
        .map(|i| mesh.points().iter().map(|&r| shape(i, r)).collect())
        .collect();
    let curves = CurveSet::new(channels.clone(), mesh.clone(), energies)?;
    let lobe = |a: usize, b: usize, centre: f64, angle: f64| {
        let width = 1.0;
        let amp = angle / (width * std::f64::consts::PI.sqrt());
        let values = mesh.points().iter().map(|&r| amp * gauss(r, centre, width)).collect();
        CouplingFunction::new(
            CouplingKind::Radial,
            channels[a].key(),
            channels[b].key(),
            &mesh,
            values,
            TailPolicy::Zero,
        )
    };
    let couplings = CouplingSet::new(
        mesh.clone(),
        vec![
            lobe(0, 1, 6.0, 0.3)?,
            lobe(1, 2, 9.0, 0.5)?,
            lobe(2, 3, 12.0, 0.6)?,
            lobe(0, 2, 7.5, 0.05)?,
        ],
    )?;
    Ok((curves, couplings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn models_build() {
        assert_eq!(single_well().potential.dim(), 1);
        let two = two_state();
        let v = two.potential.matrix_at(30.0);
        assert!(v[(0, 1)].abs() < 1e-10);
        assert_eq!(v, v.transpose());
        for mode in [CouplingMode::TwoByTwo, CouplingMode::Full] {
            let m = three_state(mode).unwrap();
            assert_eq!(m.potential.dim(), 3);
            let v = m.potential.matrix_at(5.0);
            assert!(v[(1, 2)].abs() > 1e-3, "{v}");
        }
        let sp = sigma_pi().unwrap();
        assert!(sp.couplings.ladder(sp.potential.channels()[0].key(), sp.potential.channels()[2].key(), 4.0).unwrap() > 0.14);
        let (curves, couplings) = sigma_pi_adiabatic().unwrap();
        assert_eq!(curves.lambda_block(1), vec![2]);
        assert_eq!(couplings.rotational_functions().len(), 2);
        let (curves, couplings) = n2_like_adiabatic().unwrap();
        assert_eq!(curves.len(), 4);
        assert_eq!(couplings.radial_functions().len(), 4);
    }

    #[test]
    fn three_state_ud_reproduces_adiabatic_curves() {
        let (curves, _) = three_state_adiabatic().unwrap();
        let m = three_state(CouplingMode::Full).unwrap();
        for &r in &[1.0, 4.5, 5.0, 6.3, 7.0, 12.0] {
            let mut ev: Vec<f64> = m.potential.matrix_at(r).symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            for (i, e) in ev.iter().enumerate() {
                let want = curves.potential(i, r);
                assert!((e - want).abs() < 1e-9, "R={r} state {i}: {e} vs {want}");
            }
        }
    }
}
