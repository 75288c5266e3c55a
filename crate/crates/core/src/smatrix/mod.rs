//! |S|² from absorbed flux, and the cross sections built on it.
//!
//! The time transform of the CAP-region amplitude gives
//! `|S_fi|² = Σ_j W_j |φ̃_f(R_j, E)|² dR / (π |Γ_i(E)|²)`.

mod cross_section;
pub mod special;
mod sweep;

pub use cross_section::{
    partial_cross_section, total_from_initial, total_to_final, CrossSectionRow, CrossSectionTable, StateId,
};
pub use special::riccati_hankel;
pub use sweep::{
    run_block, sweep, BlockResult, GridSchedule, GridSetup, KSumPolicy, NoStore, SMatrixTable, SweepResult,
    SweepSpec, TaskKey, TaskStore,
};

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::propagation::{PacketSpec, SpectralAmplitudes, UniformGrid};

/// |Γ|² below this fraction of its peak: no value is emitted.
pub const BAND_FRACTION: f64 = 1e-4;
/// |Γ|² below this fraction of its peak is an error.
pub const OUT_OF_BAND_FRACTION: f64 = 1e-12;
pub const DEFAULT_ENERGY_POINTS: usize = 200;
pub const DEFAULT_UNITARITY_TOLERANCE: f64 = 0.02;
/// Largest acceptable |S|² into a closed channel.
pub const CLOSED_FLUX_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelKinematics {
    pub energy: f64,
    pub threshold: f64,
    /// √(2μ(E − U_∞)), zero when closed.
    pub k: f64,
    pub open: bool,
}

impl ChannelKinematics {
    pub fn new(energy: f64, threshold: f64, mu: f64) -> Self {
        let open = energy > threshold;
        let k = if open { (2.0 * mu * (energy - threshold)).sqrt() } else { 0.0 };
        Self {
            energy,
            threshold,
            k,
            open,
        }
    }
}

/// Half-width of the quadrature window around R0, in units of σ.
const GAMMA_WINDOW: f64 = 10.0;

/// `Γ_K(E) = √(μ/2πk) ∫ ĥ⁺_K(kR) g(R) dR` on the propagation grid.
pub fn gamma_amplitude(packet: &PacketSpec, grid: &UniformGrid, k: f64, big_k: u32, mu: f64) -> Result<Complex64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("Γ needs an open channel, k = {k}")));
    }
    let dr = grid.dr();
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..grid.len() {
        let r = grid.point(j);
        if (r - packet.r0).abs() > GAMMA_WINDOW * packet.sigma {
            continue;
        }
        let (hp, _) = riccati_hankel(big_k, k * r)?;
        sum += hp * packet.value(r);
    }
    Ok(sum * dr * (mu / (2.0 * PI * k)).sqrt())
}

/// Energy interval (relative to the entrance threshold) where |Γ|² ≥ 1e−4 of its peak.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyBand {
    pub e_lo: f64,
    pub e_hi: f64,
    pub peak_energy: f64,
    pub peak_gamma2: f64,
}

impl EnergyBand {
    /// `n` uniformly spaced energies across the band.
    pub fn energies(&self, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (self.e_lo + self.e_hi)];
        }
        (0..n)
            .map(|i| self.e_lo + (self.e_hi - self.e_lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.e_lo && e <= self.e_hi
    }
}

/// Scans |Γ_K|² on a fine k grid and locates the band around its peak.
/// Wavenumbers whose centrifugal turning point lies beyond the inner edge of
/// the packet are not scanned: there ĥ⁺ grows without bound and Γ means nothing.
pub fn find_band(packet: &PacketSpec, grid: &UniformGrid, big_k: u32, mu: f64) -> Result<EnergyBand> {
    const SCAN: usize = 400;
    let kk = big_k as f64 * (big_k as f64 + 1.0);
    let k0 = (packet.k0 * packet.k0 + kk / (packet.r0 * packet.r0)).sqrt();
    let half = 8.0 / packet.sigma;
    let barrier = kk.sqrt() / (packet.r0 - 4.0 * packet.sigma).max(grid.dr());
    let k_lo = (k0 - half).max(1e-3 * k0.max(1e-3)).max(barrier);
    let k_hi = k0 + half;
    let ks: Vec<f64> = (0..SCAN).map(|i| k_lo + (k_hi - k_lo) * i as f64 / (SCAN - 1) as f64).collect();
    let g2: Vec<f64> = ks
        .iter()
        .map(|&k| gamma_amplitude(packet, grid, k, big_k, mu).map(|g| g.norm_sqr()))
        .collect::<Result<_>>()?;
    let (ip, &peak) = g2
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan is not empty");
    if !(peak > 0.0) {
        return Err(Error::EnergyOutOfBand { energy: k0 * k0 / (2.0 * mu) });
    }
    let floor = BAND_FRACTION * peak;
    let edge = |inside: usize, outside: usize| {
        // linear interpolation of the crossing in k
        let (a, b) = (g2[inside] - floor, g2[outside] - floor);
        ks[inside] + (ks[outside] - ks[inside]) * a / (a - b)
    };
    let mut lo = ip;
    while lo > 0 && g2[lo - 1] >= floor {
        lo -= 1;
    }
    let mut hi = ip;
    while hi + 1 < SCAN && g2[hi + 1] >= floor {
        hi += 1;
    }
    let kb_lo = if lo > 0 { edge(lo, lo - 1) } else { ks[0] };
    let kb_hi = if hi + 1 < SCAN { edge(hi, hi + 1) } else { ks[SCAN - 1] };
    let e = |k: f64| k * k / (2.0 * mu);
    Ok(EnergyBand {
        e_lo: e(kb_lo),
        e_hi: e(kb_hi),
        peak_energy: e(ks[ip]),
        peak_gamma2: peak,
    })
}

/// Band classification of a single |Γ|² value.
pub fn check_band(gamma2: f64, peak: f64, energy: f64) -> Result<bool> {
    if gamma2 < OUT_OF_BAND_FRACTION * peak {
        return Err(Error::EnergyOutOfBand { energy });
    }
    Ok(gamma2 >= BAND_FRACTION * peak)
}

/// |S_fi|² over the recorded energies.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct S2Spectrum {
    /// Relative to the entrance threshold.
    pub energies: Vec<f64>,
    /// `[energy][final channel]`
    pub values: Vec<Vec<f64>>,
    /// `[energy][final channel]`, true where the final channel is closed.
    pub closed: Vec<Vec<bool>>,
    /// Largest raw |S|² seen in a closed channel.
    pub closed_flux_max: f64,
}

/// `thresholds` are final-channel asymptotes relative to the same reference
/// as the recorded energies. `gamma2` holds |Γ_i(E)|² per energy.
pub fn extract_s2(amps: &SpectralAmplitudes, thresholds: &[f64], gamma2: &[f64]) -> Result<S2Spectrum> {
    if thresholds.len() != amps.n_channels || gamma2.len() != amps.energies.len() {
        return Err(Error::Validation("extract_s2 inputs do not match the recorded data".into()));
    }
    let mut values = Vec::with_capacity(amps.energies.len());
    let mut closed = Vec::with_capacity(amps.energies.len());
    let mut closed_flux_max: f64 = 0.0;
    for (e, (&energy, &g2)) in amps.energies.iter().zip(gamma2).enumerate() {
        if !(g2 > 0.0) {
            return Err(Error::EnergyOutOfBand { energy });
        }
        let mut row = Vec::with_capacity(thresholds.len());
        let mut shut = Vec::with_capacity(thresholds.len());
        for (c, &th) in thresholds.iter().enumerate() {
            let s2 = amps.absorbed_flux(e, c) / (PI * g2);
            if energy > th {
                row.push(s2);
                shut.push(false);
            } else {
                closed_flux_max = closed_flux_max.max(s2);
                row.push(0.0);
                shut.push(true);
            }
        }
        values.push(row);
        closed.push(shut);
    }
    Ok(S2Spectrum {
        energies: amps.energies.clone(),
        values,
        closed,
        closed_flux_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> UniformGrid {
        UniformGrid::new(0.0, 60.0, 4096).unwrap()
    }

    #[test]
    fn kinematics() {
        let k = ChannelKinematics::new(0.5, 0.0, 1.0);
        assert!(k.open && (k.k - 1.0).abs() < 1e-15);
        let c = ChannelKinematics::new(-0.1, 0.0, 1.0);
        assert!(!c.open && c.k == 0.0);
    }

    #[test]
    fn gamma_k0_closed_form() {
        let (mu, sigma, k0) = (1467.6, 0.5, -8.0);
        let packet = PacketSpec { r0: 30.0, sigma, k0 };
        for &k in &[6.0, 8.0, 9.5] {
            let g = gamma_amplitude(&packet, &grid(), k, 0, mu).unwrap();
            let want = mu / (2.0 * PI * k) * (2.0 / PI).sqrt() / sigma * sigma * sigma * PI
                * (-(k + k0) * (k + k0) * sigma * sigma / 2.0).exp();
            assert!((g.norm_sqr() / want - 1.0).abs() < 1e-9, "{k}");
        }
    }

    #[test]
    fn band_peaks_near_packet_energy() {
        let mu = 1467.6;
        let packet = PacketSpec { r0: 30.0, sigma: 1.5, k0: -10.0 };
        let band = find_band(&packet, &grid(), 0, mu).unwrap();
        let e0 = 100.0 / (2.0 * mu);
        // the √(1/k) prefactor pulls the peak slightly below E0
        assert!((band.peak_energy - e0).abs() < 0.05 * e0);
        assert!(band.e_lo < e0 && band.e_hi > e0);
        assert!(band.energies(200).iter().all(|&e| band.contains(e)));
    }

    #[test]
    fn spectral_width_scales_inversely_with_sigma() {
        let mu = 1467.6;
        let fwhm_k = |sigma: f64| {
            let p = PacketSpec { r0: 30.0, sigma, k0: -40.0 };
            let ks: Vec<f64> = (0..4001).map(|i| 20.0 + 40.0 * i as f64 / 4000.0).collect();
            let g: Vec<f64> = ks
                .iter()
                .map(|&k| gamma_amplitude(&p, &grid(), k, 0, mu).unwrap().norm_sqr() * k)
                .collect();
            let peak = g.iter().cloned().fold(0.0, f64::max);
            let above: Vec<f64> = ks.iter().zip(&g).filter(|(_, &v)| v >= 0.5 * peak).map(|(k, _)| *k).collect();
            above.last().unwrap() - above[0]
        };
        let ratio = fwhm_k(1.5) / fwhm_k(0.2);
        assert!((ratio - 0.2 / 1.5).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn displacement_only_shifts_phase() {
        let mu = 1467.6;
        let a = PacketSpec { r0: 30.0, sigma: 0.5, k0: -8.0 };
        let b = PacketSpec { r0: 33.0, ..a };
        let k = 8.3;
        let ga = gamma_amplitude(&a, &grid(), k, 3, mu).unwrap();
        let gb = gamma_amplitude(&b, &grid(), k, 3, mu).unwrap();
        assert!((ga.norm_sqr() / gb.norm_sqr() - 1.0).abs() < 1e-3);
        let shift = (gb / ga).arg();
        let want = ((k + a.k0) * 3.0 + PI).rem_euclid(2.0 * PI) - PI;
        assert!((shift - want).abs() < 1e-2, "{shift} vs {want}");
    }

    #[test]
    fn band_check_levels() {
        assert!(check_band(1.0, 1.0, 0.1).unwrap());
        assert!(!check_band(1e-6, 1.0, 0.1).unwrap());
        assert!(matches!(check_band(1e-13, 1.0, 0.1), Err(Error::EnergyOutOfBand { .. })));
    }
}
