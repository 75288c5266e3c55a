//! Parity-adapted rotational basis and the nuclear Hamiltonian blocks.
//!
//! For fixed total angular momentum K the states `|K M Λ ε⟩` with `ε = ±1`
//! never mix. Σ⁺ electronic states live in the e block only, Λ > 0 states
//! appear once in each block.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::diabatization::DiabaticPotential;
use crate::error::{Error, Result};
use crate::molecular_data::{CouplingSet, ElectronicChannel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    /// ε = +1
    E,
    /// ε = −1
    F,
}

impl Parity {
    pub fn epsilon(self) -> i32 {
        match self {
            Parity::E => 1,
            Parity::F => -1,
        }
    }

    pub fn from_epsilon(eps: i32) -> Result<Self> {
        match eps {
            1 => Ok(Parity::E),
            -1 => Ok(Parity::F),
            _ => Err(Error::Domain(format!("parity must be +1 or -1, got {eps}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityState {
    /// Position of the electronic channel in the potential's channel list.
    pub index: usize,
    pub channel: ElectronicChannel,
    pub k: u32,
    pub parity: Parity,
}

/// States of one (K, ε) block. Only [`build_basis`] makes these, so a block
/// cannot hold mixed parities.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityBasis {
    k: u32,
    parity: Parity,
    states: Vec<ParityState>,
}

impl ParityBasis {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn states(&self) -> &[ParityState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Position in the block of a given electronic channel index.
    pub fn position(&self, channel_index: usize) -> Option<usize> {
        self.states.iter().position(|s| s.index == channel_index)
    }
}

/// Admits every channel with Λ ≤ K that has a component of parity ε.
/// With rotation off only channels of `initial_lambda` are kept.
pub fn build_basis(
    channels: &[ElectronicChannel],
    k: u32,
    parity: Parity,
    include_rotational: bool,
    initial_lambda: u32,
) -> ParityBasis {
    let states = channels
        .iter()
        .enumerate()
        .filter(|(_, c)| c.lambda <= k)
        .filter(|(_, c)| c.lambda > 0 || parity == Parity::E)
        .filter(|(_, c)| include_rotational || c.lambda == initial_lambda)
        .map(|(index, c)| ParityState {
            index,
            channel: c.clone(),
            k,
            parity,
        })
        .collect();
    ParityBasis { k, parity, states }
}

fn kk(k: u32) -> f64 {
    let k = k as f64;
    k * (k + 1.0)
}

/// (K(K+1) − Λ²)/(2μR²)
pub fn centrifugal_term(k: u32, lambda: u32, mu: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("centrifugal term needs R > 0, got {r}")));
    }
    if lambda > k {
        return Err(Error::Domain(format!("K = {k} < Λ = {lambda}")));
    }
    let l = lambda as f64;
    Ok((kk(k) - l * l) / (2.0 * mu * r * r))
}

/// Coriolis element `−L·√(K(K+1) − ΛΛ')/(2μR²)` between Λ and Λ' = Λ ± 1.
///
/// With `parity_basis` the Σ–Π element picks up the √2 of the Λ = 0
/// normalization.
pub fn rotational_coupling_element(
    k: u32,
    lambda: u32,
    lambda_prime: u32,
    l_value: f64,
    mu: f64,
    r: f64,
    parity_basis: bool,
) -> Result<f64> {
    if lambda.abs_diff(lambda_prime) != 1 {
        return Err(Error::Domain(format!(
            "rotational coupling needs |Λ−Λ'| = 1, got {lambda} and {lambda_prime}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("rotational coupling needs R > 0, got {r}")));
    }
    let prod = (lambda * lambda_prime) as f64;
    if lambda.max(lambda_prime) > k + 1 || kk(k) < prod {
        return Err(Error::Domain(format!(
            "K = {k} too small for the Λ = {lambda} -> {lambda_prime} ladder"
        )));
    }
    let mut ladder = (kk(k) - prod).sqrt();
    if parity_basis && lambda.min(lambda_prime) == 0 {
        ladder *= std::f64::consts::SQRT_2;
    }
    Ok(-l_value * ladder / (2.0 * mu * r * r))
}

#[derive(Debug, Clone, Copy)]
struct RotPair {
    a: usize,
    b: usize,
    ladder: f64,
}

/// V(R) = U^d(R) + centrifugal diagonal + Coriolis couplings for one (K, ε).
#[derive(Clone)]
pub struct HamiltonianBlock {
    basis: ParityBasis,
    mu: f64,
    potential: Arc<dyn DiabaticPotential>,
    couplings: CouplingSet,
    pairs: Vec<RotPair>,
}

impl std::fmt::Debug for HamiltonianBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianBlock")
            .field("basis", &self.basis)
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

pub fn assemble_block(
    potential: Arc<dyn DiabaticPotential>,
    couplings: &CouplingSet,
    basis: ParityBasis,
    mu: f64,
    include_rotational: bool,
) -> Result<HamiltonianBlock> {
    if basis.is_empty() {
        return Err(Error::Validation(format!("empty basis for K = {}", basis.k)));
    }
    for s in &basis.states {
        let c = potential.channels().get(s.index).ok_or_else(|| {
            Error::Validation(format!("basis refers to channel {} outside the potential", s.index))
        })?;
        if c.key() != s.channel.key() {
            return Err(Error::Validation(format!("channel list mismatch at {}", s.index)));
        }
    }
    let mut pairs = Vec::new();
    if include_rotational {
        let k = basis.k;
        for (a, sa) in basis.states.iter().enumerate() {
            for (b, sb) in basis.states.iter().enumerate() {
                if sb.channel.lambda != sa.channel.lambda + 1 {
                    continue;
                }
                if couplings.ladder(sa.channel.key(), sb.channel.key(), 1.0).is_none() {
                    continue;
                }
                // the L value is applied per R, so this is the bare prefactor times 2μR²
                let ladder = rotational_coupling_element(k, sa.channel.lambda, sb.channel.lambda, 1.0, 0.5, 1.0, true)?;
                pairs.push(RotPair { a, b, ladder });
            }
        }
    }
    Ok(HamiltonianBlock {
        basis,
        mu,
        potential,
        couplings: couplings.clone(),
        pairs,
    })
}

impl HamiltonianBlock {
    pub fn basis(&self) -> &ParityBasis {
        &self.basis
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn has_rotational_terms(&self) -> bool {
        !self.pairs.is_empty()
    }

    /// Asymptotic electronic energies of the block states.
    pub fn thresholds(&self) -> Vec<f64> {
        self.basis.states.iter().map(|s| s.channel.asymptotic_energy).collect()
    }

    /// Full potential matrix at R > 0.
    pub fn matrix_at(&self, r: f64) -> DMatrix<f64> {
        let ud = self.potential.matrix_at(r);
        let n = self.dim();
        let idx: Vec<usize> = self.basis.states.iter().map(|s| s.index).collect();
        let mut v = DMatrix::from_fn(n, n, |i, j| ud[(idx[i], idx[j])]);
        let inv = 1.0 / (2.0 * self.mu * r * r);
        for (i, s) in self.basis.states.iter().enumerate() {
            let l = s.channel.lambda as f64;
            v[(i, i)] += (kk(self.basis.k) - l * l) * inv;
        }
        for p in &self.pairs {
            let lower = self.basis.states[p.a].channel.key();
            let upper = self.basis.states[p.b].channel.key();
            let l = self.couplings.ladder(lower, upper, r).unwrap_or(0.0);
            let e = p.ladder * l * inv;
            v[(p.a, p.b)] += e;
            v[(p.b, p.a)] += e;
        }
        v
    }

    /// Largest |V_ij| between different Λ at R.
    pub fn rotational_offdiagonal(&self, r: f64) -> f64 {
        let v = self.matrix_at(r);
        let mut worst: f64 = 0.0;
        for p in &self.pairs {
            worst = worst.max(v[(p.a, p.b)].abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diabatization::AnalyticDiabatic;
    use crate::molecular_data::{Arrangement, CouplingFunction, CouplingKind, RadialMesh, TailPolicy};

    fn chan(m: u32, lambda: u32, e: f64) -> ElectronicChannel {
        ElectronicChannel {
            m,
            lambda,
            multiplicity: 1,
            asymptotic_energy: e,
            arrangement: Arrangement::HydrogenExcited,
            label: format!("c{m}{lambda}"),
            n: 2,
            l: 1,
        }
    }

    fn toy_channels() -> Vec<ElectronicChannel> {
        vec![chan(1, 0, -2.1), chan(2, 0, -2.0), chan(1, 1, -2.05), chan(2, 1, -1.95), chan(1, 2, -1.9)]
    }

    #[test]
    fn basis_filters() {
        let c = toy_channels();
        let b0 = build_basis(&c, 0, Parity::E, true, 0);
        assert!(b0.states().iter().all(|s| s.channel.lambda == 0));
        assert_eq!(b0.len(), 2);

        let b2 = build_basis(&c, 2, Parity::E, true, 0);
        assert_eq!(b2.len(), 5);
        let f2 = build_basis(&c, 2, Parity::F, true, 0);
        assert_eq!(f2.len(), 3);
        assert!(f2.states().iter().all(|s| s.channel.lambda > 0 && s.parity == Parity::F));

        let off = build_basis(&c, 7, Parity::E, false, 0);
        assert!(off.states().iter().all(|s| s.channel.lambda == 0));
    }

    #[test]
    fn centrifugal_examples() {
        assert_eq!(centrifugal_term(1, 0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(centrifugal_term(0, 0, 1.0, 3.7).unwrap(), 0.0);
        let big = centrifugal_term(2500, 1, 1468.0, 100.0).unwrap();
        assert!((big - (2500.0 * 2501.0 - 1.0) / (2.0 * 1468.0 * 1e4)).abs() < 1e-15);
        assert!((big - 0.21295).abs() < 1e-5);
        assert!(matches!(centrifugal_term(1, 0, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn coupling_examples() {
        let e = rotational_coupling_element(1, 0, 1, 1.0, 1.0, 1.0, false).unwrap();
        assert!((e + 2f64.sqrt() / 2.0).abs() < 1e-15);
        let p = rotational_coupling_element(1, 0, 1, 1.0, 1.0, 1.0, true).unwrap();
        assert!((p + 1.0).abs() < 1e-15);
        // Π–Δ has no parity factor
        let a = rotational_coupling_element(4, 1, 2, 0.7, 2.0, 1.5, false).unwrap();
        let b = rotational_coupling_element(4, 2, 1, 0.7, 2.0, 1.5, true).unwrap();
        assert_eq!(a, b);
        assert!(matches!(rotational_coupling_element(3, 0, 2, 1.0, 1.0, 1.0, false), Err(Error::Domain(_))));
    }

    #[test]
    fn ladder_vanishes_at_top() {
        for k in 1..6u32 {
            let e = rotational_coupling_element(k, k, k + 1, 1.0, 1.0, 1.0, false).unwrap();
            assert_eq!(e, 0.0);
        }
    }

    fn sigma_pi_block(k: u32, parity: Parity, rotational: bool) -> HamiltonianBlock {
        let channels = vec![chan(1, 0, 0.0), chan(1, 1, 0.02)];
        let ch = channels.clone();
        let pot: Arc<dyn DiabaticPotential> = Arc::new(AnalyticDiabatic::new(ch, |r: f64| {
            DMatrix::from_row_slice(2, 2, &[0.1 / r, 0.0, 0.0, 0.02 + 0.05 / r])
        }));
        let mesh = RadialMesh::uniform(0.5, 20.0, 40).unwrap();
        let l = CouplingFunction::new(
            CouplingKind::LPlus,
            channels[1].key(),
            channels[0].key(),
            &mesh,
            vec![1.0; 40],
            TailPolicy::Hold,
        )
        .unwrap();
        let set = CouplingSet::new(mesh, vec![l]).unwrap();
        let basis = build_basis(&channels, k, parity, rotational, 0);
        assemble_block(pot, &set, basis, 2.0, rotational).unwrap()
    }

    #[test]
    fn scalar_block_composition() {
        let h = sigma_pi_block(3, Parity::E, false);
        assert_eq!(h.dim(), 1);
        let r = 2.5;
        let v = h.matrix_at(r);
        assert!((v[(0, 0)] - (0.1 / r + 12.0 / (4.0 * r * r))).abs() < 1e-15);
    }

    #[test]
    fn signed_lambda_spectrum_matches_parity_blocks() {
        // signed-Λ basis {Σ, Π(+1), Π(−1)} with ⟨Π±|H|Σ⟩ = −L√(K(K+1))/(2μR²)
        let (k, mu, r) = (3u32, 2.0, 1.7);
        let kk = (k * (k + 1)) as f64;
        let (us, up) = (0.1 / r, 0.02 + 0.05 / r);
        let inv = 1.0 / (2.0 * mu * r * r);
        let c = -kk.sqrt() * inv;
        let full = DMatrix::from_row_slice(
            3,
            3,
            &[us + kk * inv, c, c, c, up + (kk - 1.0) * inv, 0.0, c, 0.0, up + (kk - 1.0) * inv],
        );
        let mut want: Vec<f64> = full.symmetric_eigen().eigenvalues.iter().copied().collect();
        want.sort_by(f64::total_cmp);

        let e = sigma_pi_block(k, Parity::E, true);
        let f = sigma_pi_block(k, Parity::F, true);
        assert_eq!(f.dim(), 1);
        let mut got: Vec<f64> = e.matrix_at(r).symmetric_eigen().eigenvalues.iter().copied().collect();
        got.push(f.matrix_at(r)[(0, 0)]);
        got.sort_by(f64::total_cmp);
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn blocks_are_symmetric() {
        let h = sigma_pi_block(5, Parity::E, true);
        for i in 0..100 {
            let r = 0.3 + 0.2 * i as f64;
            let v = h.matrix_at(r);
            assert_eq!(&v, &v.transpose());
        }
    }
}
