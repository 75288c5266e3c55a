//! Time-independent coupled-channel reference solver (renormalized Numerov).
//!
//! Propagates the ratio matrix `R_i = F_{i+1} F_i^{-1}`, `F = (I − T)ψ`,
//! `T = h² 2μ(V − E)/12`, outward from a wall where ψ = 0, then matches to
//! free solutions. Shares no code with the wave-packet path beyond the
//! Hamiltonian and the Riccati functions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rotational_basis::HamiltonianBlock;
use crate::smatrix::special::riccati_hankel;

/// Diagonal and off-diagonal residual allowed at the matching radius (hartree).
pub const MATCH_TOLERANCE: f64 = 1e-10;
/// Largest `|k|·h` of the default step.
pub const DEFAULT_PHASE_PER_STEP: f64 = 0.01;
/// `T = h²M/12` at the starting point is kept below this.
const START_T_LIMIT: f64 = 0.5;
const MATCH_SCAN_STEP: f64 = 0.25;
const MATCH_SCAN_LIMIT: f64 = 5000.0;

#[derive(Debug, Clone)]
pub struct CcProblem<'a> {
    pub block: &'a HamiltonianBlock,
    /// Total energy, hartree.
    pub energy: f64,
    /// Inner starting radius; moved outward while the wall is too steep for the step.
    pub r_min: f64,
    pub step: Option<f64>,
    pub r_match: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcSolution {
    /// Block positions of the open channels.
    pub open: Vec<usize>,
    /// S over open × open, indexed as `open`, for `Ψ ~ ĥ⁻ − ĥ⁺ S` with
    /// flux-normalized ĥ±.
    pub s: DMatrix<Complex64>,
    /// `|S_fi|²` over open × open.
    pub s2: DMatrix<f64>,
    pub r_start: f64,
    pub r_match: f64,
    pub step: f64,
}

impl CcSolution {
    /// |S_fi|² for entrance block position `i` over all block positions; closed
    /// channels report 0.
    pub fn column(&self, i: usize, dim: usize) -> Option<Vec<f64>> {
        let col = self.open.iter().position(|&o| o == i)?;
        let mut out = vec![0.0; dim];
        for (row, &f) in self.open.iter().enumerate() {
            out[f] = self.s2[(row, col)];
        }
        Some(out)
    }
}

/// K(K+1)/(2μR²). The free solutions have integer order K, so the −Λ²/(2μR²)
/// part of a Λ > 0 diagonal counts as residual and moves the match outward.
fn centrifugal(block: &HamiltonianBlock, r: f64) -> f64 {
    let k = block.basis().k() as f64;
    k * (k + 1.0) / (2.0 * block.mu() * r * r)
}

fn is_asymptotic(block: &HamiltonianBlock, thresholds: &[f64], r: f64) -> bool {
    let v = block.matrix_at(r);
    let n = v.nrows();
    (0..n).all(|i| {
        (0..n).all(|j| {
            if i == j {
                (v[(i, i)] - thresholds[i] - centrifugal(block, r)).abs() < MATCH_TOLERANCE
            } else {
                v[(i, j)].abs() < MATCH_TOLERANCE
            }
        })
    })
}

/// Smallest R (on a 0.25 bohr scan) beyond which V is diagonal and free.
pub fn find_match_radius(block: &HamiltonianBlock, r_from: f64) -> Result<f64> {
    let thresholds = block.thresholds();
    let mut r = r_from.max(MATCH_SCAN_STEP);
    while r < MATCH_SCAN_LIMIT {
        if is_asymptotic(block, &thresholds, r) && is_asymptotic(block, &thresholds, 1.5 * r) {
            return Ok(r);
        }
        r += MATCH_SCAN_STEP;
    }
    Err(Error::Matching(format!("potential never becomes asymptotic below {MATCH_SCAN_LIMIT} bohr")))
}

/// Free radial solutions `(out, in)` and their values at two radii.
struct Asymptote {
    plus: [Complex64; 2],
    minus: [Complex64; 2],
}

fn free_solutions(order: u32, energy: f64, threshold: f64, mu: f64, ra: f64, rb: f64) -> Result<Asymptote> {
    if energy > threshold {
        let k = (2.0 * mu * (energy - threshold)).sqrt();
        let s = 1.0 / k.sqrt();
        let (pa, ma) = riccati_hankel(order, k * ra)?;
        let (pb, mb) = riccati_hankel(order, k * rb)?;
        return Ok(Asymptote {
            plus: [pa * s, pb * s],
            minus: [ma * s, mb * s],
        });
    }
    // closed: decaying k̂ and a growing partner, both scaled by e^{∓κ rb}
    let kappa = (2.0 * mu * (threshold - energy)).sqrt();
    let l = order as usize;
    let scaled = |z: f64| {
        let e2 = (-2.0 * z).exp();
        let mut kd = vec![1.0, 1.0 + 1.0 / z];
        let mut gi = vec![0.5 * (1.0 - e2), 0.5 * (1.0 + e2) - 0.5 * (1.0 - e2) / z];
        for m in 1..l.max(1) {
            let next_k = (2 * m + 1) as f64 / z * kd[m] + kd[m - 1];
            let next_i = -((2 * m + 1) as f64) / z * gi[m] + gi[m - 1];
            kd.push(next_k);
            gi.push(next_i);
        }
        (kd[l], gi[l])
    };
    let (ka, ia) = scaled(kappa * ra);
    let (kb, ib) = scaled(kappa * rb);
    let shift = (kappa * (rb - ra)).exp();
    Ok(Asymptote {
        plus: [Complex64::new(ka * shift, 0.0), Complex64::new(kb, 0.0)],
        minus: [Complex64::new(ia / shift, 0.0), Complex64::new(ib, 0.0)],
    })
}

fn invert(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.try_inverse()
        .ok_or_else(|| Error::Matching(format!("singular {what} matrix")))
}

pub fn solve_cc(problem: &CcProblem<'_>) -> Result<CcSolution> {
    let block = problem.block;
    let n = block.dim();
    let mu = block.mu();
    let e = problem.energy;
    let thresholds = block.thresholds();
    let open: Vec<usize> = (0..n).filter(|&c| e > thresholds[c]).collect();
    if open.is_empty() {
        return Err(Error::Domain(format!("no open channel at E = {e}")));
    }
    let r_match = match problem.r_match {
        Some(r) => r,
        None => find_match_radius(block, problem.r_min)?,
    };

    // default step from the largest local wavenumber between wall and match
    let step = match problem.step {
        Some(h) => h,
        None => {
            let mut kmax: f64 = 0.0;
            let samples = 2000;
            for s in 0..=samples {
                let r = problem.r_min + (r_match - problem.r_min) * s as f64 / samples as f64;
                let v = block.matrix_at(r);
                let lowest = v.symmetric_eigen().eigenvalues.min();
                kmax = kmax.max((2.0 * mu * (e - lowest)).max(0.0).sqrt());
            }
            DEFAULT_PHASE_PER_STEP / kmax.max(1.0)
        }
    };

    let t_at = |r: f64| {
        let mut m = block.matrix_at(r);
        for c in 0..n {
            m[(c, c)] -= e;
        }
        m * (step * step * 2.0 * mu / 12.0)
    };
    let mut r_start = problem.r_min;
    while t_at(r_start).diagonal().max() > START_T_LIMIT {
        r_start += step;
        if r_start >= r_match {
            return Err(Error::Matching("wall too steep for the chosen step".into()));
        }
    }
    let steps = ((r_match - r_start) / step).ceil() as usize;
    if steps < 4 {
        return Err(Error::Matching("matching radius too close to the wall".into()));
    }
    let h = (r_match - r_start) / steps as f64;
    let scale = h * h * 2.0 * mu / 12.0;
    let eye = DMatrix::<f64>::identity(n, n);
    let t_of = |r: f64| {
        let mut m = block.matrix_at(r);
        for c in 0..n {
            m[(c, c)] -= e;
        }
        m * scale
    };

    // R_i = I + P_i keeps the O(h²) content of the ratio out of rounding:
    // P_i = u_i + P_{i−1}(I + P_{i−1})^{-1}, u = 12T(I − T)^{-1}, and P_1 = I + u_1
    // because F_0 = 0 at the wall.
    let mut dev = DMatrix::<f64>::zeros(n, n);
    let mut t_prev = t_of(r_start + h);
    for i in 1..steps {
        let r = r_start + i as f64 * h;
        let t = if i == 1 { t_prev.clone() } else { t_of(r) };
        let u = &t * invert(&eye - &t, "Numerov")? * 12.0;
        dev = if i == 1 { u + &eye } else { u + &dev * invert(&eye + &dev, "ratio")? };
        t_prev = t;
    }
    let ratio = &eye + dev;
    // ψ_N = (I − T_N)^{-1} R_{N−1} (I − T_{N−1}) ψ_{N−1}
    let ra = r_start + (steps - 1) as f64 * h;
    let rb = r_match;
    let t_b = t_of(rb);
    let link = invert(&eye - &t_b, "Numerov")? * ratio * (&eye - &t_prev);

    let order = block.basis().k();
    let mut hpa = DMatrix::<Complex64>::zeros(n, n);
    let mut hpb = DMatrix::<Complex64>::zeros(n, n);
    let mut hma = DMatrix::<Complex64>::zeros(n, n);
    let mut hmb = DMatrix::<Complex64>::zeros(n, n);
    for c in 0..n {
        let a = free_solutions(order, e, thresholds[c], mu, ra, rb)?;
        hpa[(c, c)] = a.plus[0];
        hpb[(c, c)] = a.plus[1];
        hma[(c, c)] = a.minus[0];
        hmb[(c, c)] = a.minus[1];
    }
    let link_c = link.map(|v| Complex64::new(v, 0.0));
    let lhs = &hpb - &link_c * &hpa;
    let rhs = &hmb - &link_c * &hma;
    let s = lhs
        .try_inverse()
        .ok_or_else(|| Error::Matching(format!("singular matching matrix at R = {rb}; raise R_match")))?
        * rhs;
    let m = open.len();
    let s_open = DMatrix::from_fn(m, m, |a, b| s[(open[a], open[b])]);
    let s2 = s_open.map(|v| v.norm_sqr());
    if s2.iter().any(|v| !v.is_finite()) {
        return Err(Error::Matching("non-finite S matrix".into()));
    }
    Ok(CcSolution {
        open,
        s: s_open,
        s2,
        r_start,
        r_match,
        step: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diabatization::{AnalyticDiabatic, DiabaticPotential};
    use crate::molecular_data::{Arrangement, CouplingSet, ElectronicChannel, RadialMesh};
    use crate::rotational_basis::{assemble_block, build_basis, Parity};
    use std::sync::Arc;

    fn chan(m: u32, e: f64) -> ElectronicChannel {
        ElectronicChannel {
            m,
            lambda: 0,
            multiplicity: 1,
            asymptotic_energy: e,
            arrangement: Arrangement::HydrogenExcited,
            label: format!("s{m}"),
            n: 1,
            l: 0,
        }
    }

    fn block_of<F>(channels: Vec<ElectronicChannel>, k: u32, mu: f64, f: F) -> HamiltonianBlock
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let pot: Arc<dyn DiabaticPotential> = Arc::new(AnalyticDiabatic::new(channels.clone(), f));
        let basis = build_basis(&channels, k, Parity::E, false, 0);
        let set = CouplingSet::empty(RadialMesh::uniform(0.0, 1.0, 4).unwrap());
        assemble_block(pot, &set, basis, mu, false).unwrap()
    }

    /// δ from `S = −e^{2iδ}` (the ĥ± carry ∓i), reduced to [0, π).
    fn phase_shift(block: &HamiltonianBlock, e: f64, r_min: f64, r_match: f64, step: f64) -> f64 {
        let sol = solve_cc(&CcProblem { block, energy: e, r_min, step: Some(step), r_match: Some(r_match) }).unwrap();
        (0.5 * (-sol.s[(0, 0)]).arg()).rem_euclid(std::f64::consts::PI)
    }

    #[test]
    fn centrifugal_only_is_unitary() {
        let block = block_of(vec![chan(1, 0.0)], 3, 1.0, |_| DMatrix::zeros(1, 1));
        let sol = solve_cc(&CcProblem { block: &block, energy: 0.5, r_min: 0.01, step: None, r_match: Some(30.0) }).unwrap();
        assert!((sol.s2[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn square_well_phase_shift() {
        // V = −V0 for R < a: tan(ka + δ) = (k/q) tan(qa), q = √(k² + 2μV0)
        let (mu, v0, a, e) = (1.0, 0.8, 2.0, 0.3);
        let block = block_of(vec![chan(1, 0.0)], 0, mu, move |r| {
            // the jump point itself carries the mean value
            let v = if (r - a).abs() < 1e-9 {
                -0.5 * v0
            } else if r < a {
                -v0
            } else {
                0.0
            };
            DMatrix::from_element(1, 1, v)
        });
        let k = (2.0 * mu * e).sqrt();
        let q = (k * k + 2.0 * mu * v0).sqrt();
        let want = ((k / q * (q * a).tan()).atan() - k * a).rem_euclid(std::f64::consts::PI);
        // grid aligned with the discontinuity
        let got = phase_shift(&block, e, 0.0, 10.0, 2.5e-4);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn smooth_well_phase_converges() {
        let (mu, e) = (1.0, 0.3);
        let block = block_of(vec![chan(1, 0.0)], 2, mu, |r| DMatrix::from_element(1, 1, -0.8 * (-r * r).exp()));
        let a = phase_shift(&block, e, 1e-3, 12.0, 2e-3);
        let b = phase_shift(&block, e, 1e-3, 12.0, 1e-3);
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn two_channel_unitary_and_symmetric() {
        let mu = 1000.0;
        let block = block_of(vec![chan(1, 0.0), chan(2, 0.01)], 5, mu, |r| {
            let c = 0.004 * (-(r - 3.0f64).powi(2)).exp();
            DMatrix::from_row_slice(2, 2, &[2.0 * (-2.0 * r).exp(), c, c, 0.01 + 1.5 * (-1.8 * r).exp()])
        });
        let sol = solve_cc(&CcProblem { block: &block, energy: 0.03, r_min: 0.3, step: None, r_match: None }).unwrap();
        assert_eq!(sol.open, vec![0, 1]);
        for i in 0..2 {
            let sum: f64 = (0..2).map(|f| sol.s2[(f, i)]).sum();
            assert!((sum - 1.0).abs() < 1e-8, "{sum}");
        }
        assert!((sol.s2[(0, 1)] - sol.s2[(1, 0)]).abs() < 1e-8);
        assert!(sol.s2[(1, 0)] > 1e-4);

        let half = solve_cc(&CcProblem { block: &block, energy: 0.03, r_min: 0.3, step: Some(sol.step / 2.0), r_match: Some(sol.r_match) }).unwrap();
        assert!((half.s2[(1, 0)] - sol.s2[(1, 0)]).abs() < 1e-8);
    }

    #[test]
    fn closed_channel_keeps_open_block_unitary() {
        let mu = 1000.0;
        let block = block_of(vec![chan(1, 0.0), chan(2, 0.05)], 1, mu, |r| {
            let c = 0.01 * (-(r - 2.5f64).powi(2)).exp();
            DMatrix::from_row_slice(2, 2, &[2.0 * (-2.0 * r).exp(), c, c, 0.05 - 0.04 * (-0.5 * (r - 2.0f64).powi(2)).exp()])
        });
        let sol = solve_cc(&CcProblem { block: &block, energy: 0.02, r_min: 0.3, step: None, r_match: None }).unwrap();
        assert_eq!(sol.open, vec![0]);
        assert!((sol.s2[(0, 0)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn no_open_channel_is_domain_error() {
        let block = block_of(vec![chan(1, 0.1)], 0, 1.0, |_| DMatrix::from_element(1, 1, 0.1));
        let r = solve_cc(&CcProblem { block: &block, energy: 0.05, r_min: 0.1, step: None, r_match: Some(10.0) });
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
