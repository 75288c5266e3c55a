//! One propagation per (K, ε) block and the adaptive sum over K.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_band, extract_s2, find_band, gamma_amplitude, ChannelKinematics};
use crate::diabatization::DiabaticPotential;
use crate::error::{Error, Result};
use crate::molecular_data::CouplingSet;
use crate::propagation::{
    cap_values, gaussian_packet, propagate_and_record, CapSpec, PacketSpec, PropagationReport, Propagator,
    SpectralRecorder, UniformGrid,
};
use crate::rotational_basis::{assemble_block, build_basis, Parity};

/// Grid, packet and CAP for one propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSetup {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
    pub r0: f64,
    pub sigma: f64,
    pub r_c: f64,
    pub eta: f64,
}

impl GridSetup {
    pub fn grid(&self) -> Result<UniformGrid> {
        UniformGrid::new(self.r_min, self.r_max, self.n)
    }

    pub fn cap(&self) -> Result<CapSpec> {
        CapSpec::new(self.eta, self.r_c)
    }
}

/// Piecewise map from K to a grid setup. With `auto_k_min` set, the packet,
/// CAP and grid end are pushed outward so the centrifugal turning point for
/// wavenumber `auto_k_min` stays at least `4σ + auto_margin` inside R0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSchedule {
    /// `(first K, setup)` sorted by K; the first entry must start at K = 0.
    pub entries: Vec<(u32, GridSetup)>,
    pub auto_k_min: Option<f64>,
    pub auto_margin: f64,
}

const AUTO_SHIFT_QUANTUM: f64 = 5.0;

impl GridSchedule {
    pub fn fixed(setup: GridSetup) -> Self {
        Self {
            entries: vec![(0, setup)],
            auto_k_min: None,
            auto_margin: 0.0,
        }
    }

    pub fn automatic(setup: GridSetup, k_min: f64, margin: f64) -> Self {
        Self {
            entries: vec![(0, setup)],
            auto_k_min: Some(k_min),
            auto_margin: margin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.first().map(|e| e.0) != Some(0) {
            return Err(Error::Config("grid schedule must start at K = 0".into()));
        }
        if self.entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("grid schedule K ranges must increase".into()));
        }
        Ok(())
    }

    pub fn for_k(&self, k: u32) -> GridSetup {
        let mut s = self
            .entries
            .iter()
            .take_while(|(from, _)| *from <= k)
            .last()
            .map(|e| e.1)
            .unwrap_or(self.entries[0].1);
        if let Some(k_min) = self.auto_k_min {
            let kf = k as f64;
            let turning = (kf * (kf + 1.0)).sqrt() / k_min;
            let need = turning + 4.0 * s.sigma + self.auto_margin;
            if need > s.r0 {
                let shift = ((need - s.r0) / AUTO_SHIFT_QUANTUM).ceil() * AUTO_SHIFT_QUANTUM;
                let dr = (s.r_max - s.r_min) / s.n as f64;
                s.r0 += shift;
                s.r_c += shift;
                s.r_max += shift;
                s.n = (((s.r_max - s.r_min) / dr).ceil() as usize).next_power_of_two();
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSumPolicy {
    /// Consecutive K that must each stay below `tolerance`.
    pub window: u32,
    pub tolerance: f64,
    pub k_cap: u32,
    /// Sum exactly K = 0..=fixed instead of stopping adaptively.
    pub fixed: Option<u32>,
}

impl Default for KSumPolicy {
    fn default() -> Self {
        Self {
            window: 200,
            tolerance: 1e-4,
            k_cap: 5000,
            fixed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mu: f64,
    /// Entrance channel index in the potential.
    pub initial: usize,
    pub include_rotational: bool,
    pub schedule: GridSchedule,
    /// Mean packet wavenumber (negative, inward).
    pub k0: f64,
    pub dt: f64,
    pub t_max: f64,
    pub norm_floor: f64,
    pub decimation: usize,
    /// Energies above the entrance threshold (hartree).
    pub energies: Vec<f64>,
    pub ksum: KSumPolicy,
    /// Packet number within a plan, used only to key stored tasks.
    pub packet_id: usize,
}

impl SweepSpec {
    /// Packet for block K. The mean wavenumber is reduced by the centrifugal
    /// energy at R0 so every block covers the same asymptotic energies.
    pub fn packet_for(&self, k: u32) -> Result<(GridSetup, PacketSpec)> {
        let setup = self.schedule.for_k(k);
        let kk = k as f64 * (k as f64 + 1.0);
        let local = self.k0 * self.k0 - kk / (setup.r0 * setup.r0);
        if !(local > 0.0) {
            return Err(Error::Placement(format!(
                "packet at R0 = {} lies under the K = {k} centrifugal barrier",
                setup.r0
            )));
        }
        let packet = PacketSpec {
            r0: setup.r0,
            sigma: setup.sigma,
            k0: -local.sqrt(),
        };
        Ok((setup, packet))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskKey {
    pub packet: usize,
    pub initial: usize,
    pub k: u32,
    pub parity: Parity,
}

impl TaskKey {
    pub fn file_stem(&self) -> String {
        let p = match self.parity {
            Parity::E => 'e',
            Parity::F => 'f',
        };
        format!("p{}_i{}_K{}_{p}", self.packet, self.initial, self.k)
    }
}

/// Persistence of finished blocks so a sweep can resume.
pub trait TaskStore: Sync {
    fn load(&self, key: &TaskKey) -> Option<BlockResult>;
    fn save(&self, key: &TaskKey, result: &BlockResult) -> Result<()>;
}

pub struct NoStore;

impl TaskStore for NoStore {
    fn load(&self, _: &TaskKey) -> Option<BlockResult> {
        None
    }
    fn save(&self, _: &TaskKey, _: &BlockResult) -> Result<()> {
        Ok(())
    }
}

/// |S^K_{fi}|² for one (K, ε) block over the sweep energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResult {
    pub k: u32,
    pub parity: Parity,
    pub energies: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub in_band: Vec<bool>,
    /// `[energy][channel]` over all channels of the potential; channels
    /// outside the block are zero.
    pub s2: Vec<Vec<f64>>,
    /// Σ_f |S_fi|² per energy.
    pub unitarity: Vec<f64>,
    pub closed_flux_max: f64,
    pub setup: GridSetup,
    pub report: PropagationReport,
}

/// Propagates the entrance channel of the (K, ε) block and extracts |S|².
/// Returns `None` when the entrance state does not exist for this K or ε.
pub fn run_block(
    potential: &Arc<dyn DiabaticPotential>,
    couplings: &CouplingSet,
    spec: &SweepSpec,
    k: u32,
    parity: Parity,
) -> Result<Option<BlockResult>> {
    let channels = potential.channels();
    let entrance = channels
        .get(spec.initial)
        .ok_or_else(|| Error::Config(format!("initial channel {} does not exist", spec.initial)))?;
    let basis = build_basis(channels, k, parity, spec.include_rotational, entrance.lambda);
    let Some(pos) = basis.position(spec.initial) else {
        return Ok(None);
    };
    let state_index: Vec<usize> = basis.states().iter().map(|s| s.index).collect();
    let block = assemble_block(potential.clone(), couplings, basis, spec.mu, spec.include_rotational)?;

    let (setup, packet) = spec.packet_for(k)?;
    let grid = setup.grid()?;
    let cap = setup.cap()?;
    let w = cap_values(&grid, &cap)?;
    let e_ref = entrance.asymptotic_energy;
    let mut propagator = Propagator::new(&block, &grid, &cap, spec.dt, e_ref)?;
    let mut psi = gaussian_packet(&grid, block.dim(), pos, &packet, cap.r_c)?;
    let mut recorder = SpectralRecorder::new(
        &grid,
        &w,
        spec.dt,
        e_ref,
        block.dim(),
        spec.energies.clone(),
        spec.decimation,
    )?;
    let report = propagate_and_record(&mut psi, &mut propagator, spec.t_max, spec.norm_floor, &mut recorder)?;
    let amps = recorder.into_amplitudes();

    let gamma2: Vec<f64> = spec
        .energies
        .iter()
        .map(|&e| {
            let kin = ChannelKinematics::new(e, 0.0, spec.mu);
            gamma_amplitude(&packet, &grid, kin.k, k, spec.mu).map(|g| g.norm_sqr())
        })
        .collect::<Result<_>>()?;
    let scan_peak = find_band(&packet, &grid, k, spec.mu)?.peak_gamma2;
    let peak = gamma2.iter().copied().fold(scan_peak, f64::max);
    let in_band = spec
        .energies
        .iter()
        .zip(&gamma2)
        .map(|(&e, &g)| check_band(g, peak, e + e_ref))
        .collect::<Result<Vec<bool>>>()?;

    let thresholds: Vec<f64> = block.thresholds().iter().map(|t| t - e_ref).collect();
    let spectrum = extract_s2(&amps, &thresholds, &gamma2)?;
    let mut s2 = vec![vec![0.0; channels.len()]; spec.energies.len()];
    let mut unitarity = Vec::with_capacity(spec.energies.len());
    for (row, vals) in s2.iter_mut().zip(&spectrum.values) {
        for (&idx, &v) in state_index.iter().zip(vals) {
            row[idx] = v;
        }
        unitarity.push(vals.iter().sum());
    }
    Ok(Some(BlockResult {
        k,
        parity,
        energies: spec.energies.clone(),
        gamma2,
        in_band,
        s2,
        unitarity,
        closed_flux_max: spectrum.closed_flux_max,
        setup,
        report,
    }))
}

/// Every block of a sweep, in K order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SMatrixTable {
    pub blocks: Vec<BlockResult>,
}

impl SMatrixTable {
    pub fn get(&self, k: u32, parity: Parity) -> Option<&BlockResult> {
        self.blocks.iter().find(|b| b.k == k && b.parity == parity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub energies: Vec<f64>,
    /// `[energy][final channel]` in bohr²; the entrance channel entry is NaN.
    pub sigma: Vec<Vec<f64>>,
    pub k_max_used: u32,
    pub converged: bool,
    /// Largest (sum over the last window)/(total) over emitted energies and finals.
    pub truncation_estimate: f64,
    /// Largest |1 − Σ_f|S|²| over K per energy.
    pub unitarity_defect: Vec<f64>,
    /// Energy in band at every K.
    pub in_band: Vec<bool>,
    /// Largest relative contribution of each K.
    pub relative_contribution: Vec<f64>,
    pub table: SMatrixTable,
}

fn parities(spec: &SweepSpec, lambda: u32) -> Vec<Parity> {
    if lambda > 0 && spec.include_rotational {
        vec![Parity::E, Parity::F]
    } else {
        vec![Parity::E]
    }
}

/// Sums `(π/k²)(2K+1)|S^K_fi|²` over K. Blocks run in parallel batches of
/// `batch` K values but are reduced strictly in K order, and everything past
/// the stopping K is dropped, so the result does not depend on the batch size.
pub fn sweep(
    potential: &Arc<dyn DiabaticPotential>,
    couplings: &CouplingSet,
    spec: &SweepSpec,
    store: &dyn TaskStore,
    batch: usize,
) -> Result<SweepResult> {
    spec.schedule.validate()?;
    if spec.energies.is_empty() || spec.energies.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Config("sweep energies must be positive and non-empty".into()));
    }
    let n_ch = potential.dim();
    let n_e = spec.energies.len();
    let lambda = potential
        .channels()
        .get(spec.initial)
        .ok_or_else(|| Error::Config(format!("initial channel {} does not exist", spec.initial)))?
        .lambda;
    let pars = parities(spec, lambda);
    let weight = 1.0 / pars.len() as f64;
    let k_last = spec.ksum.fixed.unwrap_or(spec.ksum.k_cap);

    let mut acc = vec![vec![0.0; n_ch]; n_e];
    let mut history: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut relative_contribution = Vec::new();
    let mut unitarity_defect = vec![0.0f64; n_e];
    let mut in_band = vec![true; n_e];
    let mut table = SMatrixTable::default();
    let mut quiet = 0u32;
    let mut stopped_at = None;
    let mut k_next = 0u32;

    'outer: while k_next <= k_last {
        let ks: Vec<u32> = (k_next..=k_last.min(k_next + batch.max(1) as u32 - 1)).collect();
        k_next = ks.last().unwrap() + 1;
        let tasks: Vec<(u32, Parity)> = ks.iter().flat_map(|&k| pars.iter().map(move |&p| (k, p))).collect();
        let results: Vec<Result<Option<BlockResult>>> = tasks
            .par_iter()
            .map(|&(k, parity)| {
                let key = TaskKey {
                    packet: spec.packet_id,
                    initial: spec.initial,
                    k,
                    parity,
                };
                if let Some(done) = store.load(&key) {
                    return Ok(Some(done));
                }
                let out = run_block(potential, couplings, spec, k, parity)?;
                if let Some(r) = &out {
                    store.save(&key, r)?;
                }
                Ok(out)
            })
            .collect();
        let mut results = results.into_iter();
        for &k in &ks {
            let mut contrib = vec![vec![0.0; n_ch]; n_e];
            for _ in &pars {
                let Some(block) = results.next().expect("one result per task")? else {
                    continue;
                };
                for e in 0..n_e {
                    in_band[e] &= block.in_band[e];
                    unitarity_defect[e] = unitarity_defect[e].max((1.0 - block.unitarity[e]).abs());
                    for f in 0..n_ch {
                        contrib[e][f] += weight * (2 * k + 1) as f64 * block.s2[e][f];
                    }
                }
                table.blocks.push(block);
            }
            let mut rel: f64 = 0.0;
            for e in 0..n_e {
                for f in 0..n_ch {
                    acc[e][f] += contrib[e][f];
                    if f != spec.initial && acc[e][f] > 0.0 {
                        rel = rel.max(contrib[e][f] / acc[e][f]);
                    }
                }
            }
            relative_contribution.push(rel);
            history.push(contrib);
            if spec.ksum.fixed.is_none() {
                quiet = if rel < spec.ksum.tolerance { quiet + 1 } else { 0 };
                if quiet >= spec.ksum.window {
                    stopped_at = Some(k);
                    break 'outer;
                }
            } else if k == k_last {
                stopped_at = Some(k);
                break 'outer;
            }
        }
    }

    let converged = stopped_at.is_some();
    let k_max_used = stopped_at.unwrap_or(k_last);
    let window = spec.ksum.window.max(1) as usize;
    let tail_start = history.len().saturating_sub(window);
    let mut truncation_estimate: f64 = 0.0;
    for e in 0..n_e {
        for f in 0..n_ch {
            if f == spec.initial || acc[e][f] <= 0.0 || !in_band[e] {
                continue;
            }
            let tail: f64 = history[tail_start..].iter().map(|h| h[e][f]).sum();
            truncation_estimate = truncation_estimate.max(tail / acc[e][f]);
        }
    }
    let sigma = acc
        .iter()
        .zip(&spec.energies)
        .map(|(row, &e)| {
            let k2 = 2.0 * spec.mu * e;
            row.iter()
                .enumerate()
                .map(|(f, &v)| if f == spec.initial { f64::NAN } else { std::f64::consts::PI / k2 * v })
                .collect()
        })
        .collect();
    Ok(SweepResult {
        energies: spec.energies.clone(),
        sigma,
        k_max_used,
        converged,
        truncation_estimate,
        unitarity_defect,
        in_band,
        relative_contribution,
        table,
    })
}
