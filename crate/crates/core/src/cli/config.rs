//! TOML run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diabatization::CouplingMode;
use crate::error::{Error, Result};
use crate::molecular_data::{reduced_mass, Arrangement, ElectronicChannel};
use crate::smatrix::{GridSchedule, GridSetup, KSumPolicy};
use crate::units::{MASS_H, MASS_HE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub initial: InitialSelector,
    pub energy: EnergySection,
    #[serde(rename = "packet")]
    pub packets: Vec<PacketSection>,
    pub grid: GridSection,
    pub cap: CapSection,
    pub propagation: PropagationSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub ksum: KSumSection,
    pub output: OutputSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub curves: PathBuf,
    #[serde(default)]
    pub couplings: Option<PathBuf>,
    #[serde(default = "default_mode")]
    pub coupling_mode: CouplingMode,
}

fn default_mode() -> CouplingMode {
    CouplingMode::TwoByTwo
}

/// Either a channel index in file order or the atomic state (n, l, Λ) in an arrangement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSelector {
    #[serde(default)]
    pub channel: Option<usize>,
    #[serde(default)]
    pub arrangement: Option<Arrangement>,
    #[serde(default)]
    pub n: Option<u32>,
    #[serde(default)]
    pub l: Option<u32>,
    #[serde(default)]
    pub lambda: Option<u32>,
    /// Picks the m-th matching channel when several share (n, l, Λ).
    #[serde(default)]
    pub m: Option<u32>,
}

impl InitialSelector {
    pub fn resolve(&self, channels: &[ElectronicChannel]) -> Result<usize> {
        if let Some(i) = self.channel {
            if i >= channels.len() {
                return Err(Error::Config(format!("initial channel {i} but only {} channels", channels.len())));
            }
            return Ok(i);
        }
        let hits: Vec<usize> = channels
            .iter()
            .enumerate()
            .filter(|(_, c)| self.arrangement.is_none_or(|a| a == c.arrangement))
            .filter(|(_, c)| self.n.is_none_or(|n| n == c.n))
            .filter(|(_, c)| self.l.is_none_or(|l| l == c.l))
            .filter(|(_, c)| self.lambda.is_none_or(|l| l == c.lambda))
            .filter(|(_, c)| self.m.is_none_or(|m| m == c.m))
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [i] => Ok(*i),
            [] => Err(Error::Config("initial state selector matches no channel".into())),
            _ => Err(Error::Config(format!(
                "initial state selector matches {} channels; add m or channel",
                hits.len()
            ))),
        }
    }
}

/// Collision energies in eV/amu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// Logarithmic spacing between min and max.
    #[serde(default)]
    pub log: bool,
}

impl EnergySection {
    pub fn values(&self) -> Result<Vec<f64>> {
        let out = match (&self.values, self.min, self.max) {
            (Some(v), None, None) => v.clone(),
            (None, Some(lo), Some(hi)) => {
                let n = self.points.unwrap_or(10);
                if n == 0 || !(hi >= lo) {
                    return Err(Error::Config(format!("energy range [{lo}, {hi}] with {n} points")));
                }
                if n == 1 {
                    vec![lo]
                } else if self.log {
                    if !(lo > 0.0) {
                        return Err(Error::Config("logarithmic energy grid needs min > 0".into()));
                    }
                    let r = (hi / lo).ln();
                    (0..n).map(|i| lo * (r * i as f64 / (n - 1) as f64).exp()).collect()
                } else {
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
                }
            }
            _ => return Err(Error::Config("give either energy.values or energy.min/max".into())),
        };
        if out.is_empty() || out.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config("collision energies must be positive".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    /// Mean inward wavenumber; the sign is ignored.
    pub k0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
    pub r0: f64,
    pub sigma: f64,
    /// Push packet, CAP and grid end outward with K so the centrifugal
    /// turning point stays inside the packet start.
    #[serde(default)]
    pub auto_shift: bool,
    #[serde(default = "default_margin")]
    pub auto_margin: f64,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
}

fn default_margin() -> f64 {
    2.0
}

/// Overrides for K ≥ `from_k`; absent fields inherit the base grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub from_k: u32,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub r_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapSection {
    pub r_c: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSection {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_floor")]
    pub norm_floor: f64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

fn default_floor() -> f64 {
    crate::propagation::DEFAULT_NORM_FLOOR
}

fn default_decimation() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(default)]
    pub rotational: bool,
    /// Reduced mass in electron masses; H–He by default.
    #[serde(default)]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KSumSection {
    #[serde(default = "default_window")]
    pub window: u32,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_k_cap")]
    pub k_cap: u32,
    #[serde(default)]
    pub fixed: Option<u32>,
}

fn default_window() -> u32 {
    KSumPolicy::default().window
}

fn default_tolerance() -> f64 {
    KSumPolicy::default().tolerance
}

fn default_k_cap() -> u32 {
    KSumPolicy::default().k_cap
}

impl Default for KSumSection {
    fn default() -> Self {
        let d = KSumPolicy::default();
        Self {
            window: d.window,
            tolerance: d.tolerance,
            k_cap: d.k_cap,
            fixed: d.fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_oracle_k")]
    pub k: Vec<u32>,
    /// Also propagate the same blocks and report |S|² differences.
    #[serde(default = "yes")]
    pub compare: bool,
    #[serde(default)]
    pub step: Option<f64>,
}

fn default_oracle_k() -> Vec<u32> {
    vec![0]
}

fn yes() -> bool {
    true
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            k: default_oracle_k(),
            compare: true,
            step: None,
        }
    }
}

pub const WORKERS_ENV: &str = "CTSCATTER_WORKERS";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads the file and makes data and output paths relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.data.curves);
        if let Some(c) = cfg.data.couplings.as_mut() {
            fix(c);
        }
        fix(&mut cfg.output.dir);
        Ok(cfg)
    }

    pub fn mu(&self) -> Result<f64> {
        match self.physics.mu {
            Some(mu) if mu > 0.0 => Ok(mu),
            Some(mu) => Err(Error::Config(format!("reduced mass must be positive, got {mu}"))),
            None => reduced_mass(MASS_H, MASS_HE),
        }
    }

    /// `CTSCATTER_WORKERS` wins over the file; at least one.
    pub fn workers(&self) -> Result<usize> {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            return v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer")));
        }
        Ok(self.output.workers.unwrap_or(1).max(1))
    }

    pub fn base_setup(&self) -> GridSetup {
        GridSetup {
            r_min: self.grid.r_min,
            r_max: self.grid.r_max,
            n: self.grid.n,
            r0: self.grid.r0,
            sigma: self.grid.sigma,
            r_c: self.cap.r_c,
            eta: self.cap.eta,
        }
    }

    /// `k_min` is the smallest asymptotic wavenumber that must stay resolvable.
    pub fn schedule(&self, k_min: f64) -> Result<GridSchedule> {
        let base = self.base_setup();
        let mut entries = vec![(0, base)];
        let mut last = base;
        for e in &self.grid.schedule {
            let s = GridSetup {
                r_max: e.r_max.unwrap_or(last.r_max),
                n: e.n.unwrap_or(last.n),
                r0: e.r0.unwrap_or(last.r0),
                sigma: e.sigma.unwrap_or(last.sigma),
                r_c: e.r_c.unwrap_or(last.r_c),
                ..last
            };
            entries.push((e.from_k, s));
            last = s;
        }
        let schedule = GridSchedule {
            entries,
            auto_k_min: self.grid.auto_shift.then_some(k_min),
            auto_margin: self.grid.auto_margin,
        };
        schedule.validate()?;
        for (_, s) in &schedule.entries {
            s.grid()?;
            s.cap()?;
        }
        Ok(schedule)
    }

    pub fn ksum(&self) -> KSumPolicy {
        KSumPolicy {
            window: self.ksum.window,
            tolerance: self.ksum.tolerance,
            k_cap: self.ksum.k_cap,
            fixed: self.ksum.fixed,
        }
    }
}
