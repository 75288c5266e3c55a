//! Batch driver behind the `ctscatter` binary: `run`, `validate`, `oracle`
//! and `diabatize` on a TOML configuration.

mod config;
mod store;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{
    CapSection, DataSection, EnergySection, GridSection, InitialSelector, KSumSection, OracleSection, OutputSection,
    PacketSection, PhysicsSection, PropagationSection, RunConfig, ScheduleEntry, WORKERS_ENV,
};
pub use store::DirStore;

use crate::cc_oracle::{solve_cc, CcProblem};
use crate::diabatization::{diabatize_blocks, DiabaticModel, DiabaticPotential};
use crate::error::{Error, Result};
use crate::molecular_data::{load_coupling_set, load_curve_set, CouplingSet, CurveSet};
use crate::propagation::{Warning, UNABSORBED_NORM};
use crate::rotational_basis::{assemble_block, build_basis, Parity};
use crate::smatrix::{
    find_band, gamma_amplitude, run_block, sweep, CrossSectionRow, CrossSectionTable, GridSchedule, StateId,
    SweepResult, SweepSpec, BAND_FRACTION, DEFAULT_UNITARITY_TOLERANCE,
};
use crate::units::collision_to_cm;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INCOMPLETE: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::Mesh(_)
        | Error::Validation(_)
        | Error::Placement(_)
        | Error::Config(_)
        | Error::Io { .. } => EXIT_CONFIG,
        Error::Domain(_)
        | Error::Integration(_)
        | Error::Blowup { .. }
        | Error::EnergyOutOfBand { .. }
        | Error::Matching(_) => EXIT_NUMERICAL,
        Error::IncompleteData { .. } => EXIT_INCOMPLETE,
    }
}

fn err_kind(err: &Error) -> &'static str {
    match err {
        Error::Parse { .. } => "ParseError",
        Error::Mesh(_) => "MeshError",
        Error::Validation(_) => "ValidationError",
        Error::Domain(_) => "DomainError",
        Error::Integration(_) => "IntegrationError",
        Error::Placement(_) => "PlacementError",
        Error::Blowup { .. } => "BlowupError",
        Error::EnergyOutOfBand { .. } => "EnergyOutOfBandError",
        Error::Matching(_) => "MatchingError",
        Error::IncompleteData { .. } => "IncompleteDataError",
        Error::Config(_) => "ConfigError",
        Error::Io { .. } => "IoError",
    }
}

/// One-line JSON error record for stderr.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({ "error": err_kind(err), "message": err.to_string(), "exit_code": exit_code(err) }).to_string()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Molecular data, diabatic model and energies shared by every command.
pub struct Problem {
    pub config: RunConfig,
    pub curves: CurveSet,
    pub couplings: CouplingSet,
    pub model: Arc<DiabaticModel>,
    pub potential: Arc<dyn DiabaticPotential>,
    pub mu: f64,
    pub initial: usize,
    /// Collision energies, eV/amu.
    pub energies_ev: Vec<f64>,
    /// Centre-of-mass energies above the entrance threshold, hartree.
    pub energies: Vec<f64>,
    pub inputs: Vec<(PathBuf, String)>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("channels", &self.curves.channels().len())
            .field("initial", &self.initial)
            .field("energies_ev", &self.energies_ev)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn load(config: &RunConfig) -> Result<Self> {
        let curves = load_curve_set(&config.data.curves)?;
        let mut inputs = vec![(config.data.curves.clone(), hash_file(&config.data.curves)?)];
        let couplings = match &config.data.couplings {
            Some(p) => {
                let c = load_coupling_set(p)?;
                inputs.push((p.clone(), hash_file(p)?));
                c
            }
            None => CouplingSet::empty(curves.mesh().clone()),
        };
        let model = Arc::new(diabatize_blocks(&curves, &couplings, config.data.coupling_mode, curves.mesh())?);
        let mu = config.mu()?;
        let initial = config.initial.resolve(curves.channels())?;
        let energies_ev = config.energy.values()?;
        let energies = energies_ev.iter().map(|&e| collision_to_cm(e, mu)).collect();
        Ok(Self {
            config: config.clone(),
            potential: model.clone(),
            curves,
            couplings,
            model,
            mu,
            initial,
            energies_ev,
            energies,
            inputs,
        })
    }

    pub fn entrance_threshold(&self) -> f64 {
        self.curves.channels()[self.initial].asymptotic_energy
    }

    pub fn schedule(&self) -> Result<GridSchedule> {
        let e_min = self.energies.iter().copied().fold(f64::INFINITY, f64::min);
        self.config.schedule((2.0 * self.mu * e_min).sqrt())
    }

    fn spec(&self, packet: usize, energies: Vec<f64>, schedule: &GridSchedule) -> SweepSpec {
        let p = &self.config.propagation;
        SweepSpec {
            mu: self.mu,
            initial: self.initial,
            include_rotational: self.config.physics.rotational,
            schedule: schedule.clone(),
            k0: -self.config.packets[packet].k0.abs(),
            dt: p.dt,
            t_max: p.t_max,
            norm_floor: p.norm_floor,
            decimation: p.decimation,
            energies,
            ksum: self.config.ksum(),
            packet_id: packet,
        }
    }

    /// Energy indices handled by each packet: every energy goes to the packet
    /// in whose K = 0 band it sits highest relative to the band peak.
    pub fn assign_packets(&self) -> Result<Vec<Vec<usize>>> {
        if self.config.packets.is_empty() {
            return Err(Error::Config("no [[packet]] entries".into()));
        }
        let schedule = self.schedule()?;
        let mut levels = Vec::new();
        for i in 0..self.config.packets.len() {
            let spec = self.spec(i, Vec::new(), &schedule);
            let (setup, packet) = spec.packet_for(0)?;
            let grid = setup.grid()?;
            let peak = find_band(&packet, &grid, 0, self.mu)?.peak_gamma2;
            let row = self
                .energies
                .iter()
                .map(|&e| {
                    let k = (2.0 * self.mu * e).sqrt();
                    gamma_amplitude(&packet, &grid, k, 0, self.mu).map(|g| g.norm_sqr() / peak)
                })
                .collect::<Result<Vec<f64>>>()?;
            levels.push(row);
        }
        let mut out = vec![Vec::new(); self.config.packets.len()];
        for (e, &ev) in self.energies_ev.iter().enumerate() {
            let (best, level) = levels
                .iter()
                .enumerate()
                .map(|(p, row)| (p, row[e]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one packet");
            if level < BAND_FRACTION {
                return Err(Error::Config(format!(
                    "{ev} eV/amu lies outside every packet band (best packet {best} reaches {level:.1e} of its peak)"
                )));
            }
            out[best].push(e);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    #[serde(rename = "complete")]
    Complete,
    #[serde(rename = "INCOMPLETE")]
    Incomplete,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Complete => EXIT_OK,
            RunStatus::Incomplete => EXIT_INCOMPLETE,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PacketReport {
    pub packet: usize,
    pub k0: f64,
    pub energies_ev: Vec<f64>,
    pub k_max_used: u32,
    pub converged: bool,
    pub truncation_estimate: f64,
    pub unitarity_defect: Vec<f64>,
    pub in_band: Vec<bool>,
    pub relative_contribution: Vec<f64>,
    /// Blocks whose packet was not fully absorbed or touched the grid end.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub unitarity_tolerance: f64,
    pub packets: Vec<PacketReport>,
    /// Energies (eV/amu) whose worst unitarity defect exceeds the tolerance.
    pub unitarity_violations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub table: CrossSectionTable,
    pub report: ConvergenceReport,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    status: RunStatus,
    config_sha256: String,
    inputs: Vec<Input>,
    workers: usize,
    artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Input {
    path: String,
    sha256: String,
}

fn config_hash(cfg: &RunConfig) -> Result<String> {
    // hash of the parsed config, so comments and formatting do not matter
    let text = serde_json::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    Ok(sha256_hex(text.as_bytes()))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn block_warnings(sweep: &SweepResult) -> Vec<String> {
    let mut out = Vec::new();
    for b in &sweep.table.blocks {
        for w in &b.report.warnings {
            let text = match w {
                Warning::NotAbsorbed { norm } if *norm > UNABSORBED_NORM => format!("norm {norm:.2e} left at T_max"),
                Warning::NotAbsorbed { .. } => continue,
                Warning::EdgeAmplitude { time, amplitude } => format!("edge amplitude {amplitude:.1e} at t = {time}"),
                Warning::NormIncrease { time, increase } => format!("norm grew by {increase:.1e} at t = {time}"),
            };
            out.push(format!("K={} {:?}: {text}", b.k, b.parity));
        }
        if b.closed_flux_max > crate::smatrix::CLOSED_FLUX_LIMIT {
            out.push(format!(
                "K={} {:?}: closed-channel flux {:.1e}; CAP sits in a classically allowed region",
                b.k, b.parity, b.closed_flux_max
            ));
        }
    }
    out
}

/// Full sweep: cross-section CSV, S-matrix dump, convergence report and manifest.
/// Finished blocks are kept under `tasks/` and reused by a rerun of the same config.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let problem = Problem::load(config)?;
    let groups = problem.assign_packets()?;
    let schedule = problem.schedule()?;
    let workers = config.workers()?;
    let out_dir = config.output.dir.clone();
    let chash = config_hash(config)?;
    let task_dir = out_dir.join("tasks").join(&chash[..16]);
    fs::create_dir_all(&task_dir).map_err(|e| Error::io(&task_dir, e))?;
    let store = DirStore::new(&task_dir);
    let manifest_path = out_dir.join("manifest.json");
    let inputs: Vec<Input> = problem
        .inputs
        .iter()
        .map(|(p, h)| Input {
            path: p.display().to_string(),
            sha256: h.clone(),
        })
        .collect();
    let mut manifest = Manifest {
        tool: "ctscatter",
        version: env!("CARGO_PKG_VERSION"),
        command: "run",
        status: RunStatus::Incomplete,
        config_sha256: chash.clone(),
        inputs,
        workers,
        artifacts: Vec::new(),
        error: None,
    };
    write_json(&manifest_path, &manifest)?;

    let pool = pool(workers)?;
    let mut sweeps = Vec::new();
    for (p, idx) in groups.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let spec = problem.spec(p, idx.iter().map(|&i| problem.energies[i]).collect(), &schedule);
        let result = pool.install(|| sweep(&problem.potential, &problem.couplings, &spec, &store, workers));
        match result {
            Ok(r) => sweeps.push((p, idx.clone(), r)),
            Err(e) => {
                manifest.error = Some(error_json(&e));
                write_json(&manifest_path, &manifest)?;
                return Err(e);
            }
        }
    }

    let channels = problem.curves.channels();
    let initial = StateId::from(&channels[problem.initial]);
    let mut rows: Vec<(usize, CrossSectionRow)> = Vec::new();
    let mut packets = Vec::new();
    let mut violations = Vec::new();
    for (p, idx, r) in &sweeps {
        for (local, &e) in idx.iter().enumerate() {
            for (f, ch) in channels.iter().enumerate() {
                if f == problem.initial {
                    continue;
                }
                rows.push((
                    e,
                    CrossSectionRow {
                        energy: problem.energies_ev[e],
                        initial: initial.clone(),
                        final_state: StateId::from(ch),
                        k_max_used: r.k_max_used,
                        sigma_bohr2: r.sigma[local][f],
                        unitarity_defect: r.unitarity_defect[local],
                    },
                ));
            }
            if r.unitarity_defect[local] > DEFAULT_UNITARITY_TOLERANCE {
                violations.push(problem.energies_ev[e]);
            }
        }
        packets.push(PacketReport {
            packet: *p,
            k0: config.packets[*p].k0,
            energies_ev: idx.iter().map(|&i| problem.energies_ev[i]).collect(),
            k_max_used: r.k_max_used,
            converged: r.converged,
            truncation_estimate: r.truncation_estimate,
            unitarity_defect: r.unitarity_defect.clone(),
            in_band: r.in_band.clone(),
            relative_contribution: r.relative_contribution.clone(),
            warnings: block_warnings(r),
        });
    }
    // energy order of the config, then channel order
    rows.sort_by_key(|(e, _)| *e);
    let table = CrossSectionTable {
        rotational: config.physics.rotational,
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    };
    violations.sort_by(f64::total_cmp);
    let report = ConvergenceReport {
        unitarity_tolerance: DEFAULT_UNITARITY_TOLERANCE,
        packets,
        unitarity_violations: violations,
    };

    table.write_csv(out_dir.join("cross_sections.csv"))?;
    let smatrix: Vec<_> = sweeps.iter().map(|(p, _, r)| serde_json::json!({ "packet": p, "blocks": r.table.blocks })).collect();
    write_json(&out_dir.join("smatrix.json"), &smatrix)?;
    write_json(&out_dir.join("convergence.json"), &report)?;
    let status = if sweeps.iter().all(|(_, _, r)| r.converged) {
        RunStatus::Complete
    } else {
        RunStatus::Incomplete
    };
    manifest.status = status;
    manifest.artifacts = ["cross_sections.csv", "smatrix.json", "convergence.json"].map(String::from).to_vec();
    write_json(&manifest_path, &manifest)?;
    Ok(RunOutcome {
        status,
        table,
        report,
        out_dir,
    })
}

/// One dry-run observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub check: &'static str,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.check, self.message)
    }
}

fn finding(check: &'static str, message: impl Into<String>) -> Finding {
    Finding {
        check,
        message: message.into(),
    }
}

/// Checks files, grid resolution, packet and CAP placement, time step and
/// packet bands without propagating. An empty list means the config is clean.
pub fn validate(config: &RunConfig) -> Vec<Finding> {
    let problem = match Problem::load(config) {
        Ok(p) => p,
        Err(e) => return vec![finding("input", e.to_string())],
    };
    let mut out = Vec::new();
    let schedule = match problem.schedule() {
        Ok(s) => s,
        Err(e) => return vec![finding("grid", e.to_string())],
    };
    let channels = problem.curves.channels();
    let e_ref = problem.entrance_threshold();
    let e_max = problem.energies.iter().copied().fold(0.0, f64::max);
    let e_min = problem.energies.iter().copied().fold(f64::INFINITY, f64::min);
    let lowest = channels.iter().map(|c| c.asymptotic_energy).fold(f64::INFINITY, f64::min);
    let kinetic_max = e_max + e_ref - lowest;
    let k_phys = (2.0 * problem.mu * kinetic_max).sqrt();

    let mut setups: Vec<(String, crate::smatrix::GridSetup)> =
        schedule.entries.iter().map(|(k, s)| (format!("K ≥ {k}"), *s)).collect();
    if let Some(k_cap) = config.ksum.fixed.or(Some(config.ksum.k_cap)).filter(|_| config.grid.auto_shift) {
        setups.push((format!("K = {k_cap} (shifted)"), schedule.for_k(k_cap)));
    }
    for (label, s) in &setups {
        let grid = match s.grid() {
            Ok(g) => g,
            Err(e) => {
                out.push(finding("grid", format!("{label}: {e}")));
                continue;
            }
        };
        if !grid.resolves(k_phys) {
            out.push(finding(
                "nyquist",
                format!(
                    "{label}: dR = {:.4} resolves k up to {:.2} but E_max needs 1.5 × {k_phys:.2}; use N = {}",
                    grid.dr(),
                    grid.k_max(),
                    grid.suggested_size(k_phys)
                ),
            ));
        }
        let packet = crate::propagation::PacketSpec {
            r0: s.r0,
            sigma: s.sigma,
            k0: 1.0,
        };
        if let Err(e) = packet.check_placement(&grid, s.r_c) {
            out.push(finding("placement", format!("{label}: {e}")));
        }
        if !(s.r_c < grid.r_max()) {
            out.push(finding("cap", format!("{label}: R_c = {} is not inside the grid", s.r_c)));
            continue;
        }
        for c in channels {
            let v = problem.model.matrix_at(s.r_c);
            let i = channels.iter().position(|x| x == c).expect("own channel");
            let vc = v[(i, i)];
            let open = c.asymptotic_energy < e_ref + e_min;
            if !open && vc < e_ref + e_max {
                out.push(finding(
                    "cap",
                    format!("{label}: R_c = {} lies in the classically allowed region of closed channel {}", s.r_c, c.label),
                ));
            }
            if open && vc > e_ref + e_min {
                out.push(finding(
                    "cap",
                    format!("{label}: R_c = {} lies under the {} potential at E_min", s.r_c, c.label),
                ));
            }
        }
    }

    let p = &config.propagation;
    if kinetic_max * p.dt >= 0.5 {
        out.push(finding(
            "time-step",
            format!(
                "dt = {} turns {:.2} rad per step at E_max; keep it below {:.3}",
                p.dt,
                kinetic_max * p.dt,
                0.5 / kinetic_max
            ),
        ));
    }
    if e_max * p.dt * p.decimation as f64 >= std::f64::consts::PI {
        out.push(finding("time-step", "recording interval aliases E_max".to_string()));
    }
    let base = schedule.for_k(0);
    let v_min = (2.0 * e_min / problem.mu).sqrt();
    let return_time = (base.r0 - base.r_min + base.r_c - base.r_min) / v_min;
    if p.t_max < return_time {
        out.push(finding(
            "t-max",
            format!("T_max = {} is shorter than the return time {:.0} at E_min", p.t_max, return_time),
        ));
    }
    if let Err(e) = problem.assign_packets() {
        out.push(finding("band", e.to_string()));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub k: u32,
    pub parity: Parity,
    pub energy_ev: f64,
    pub final_label: String,
    pub s2_oracle: f64,
    pub s2_wavepacket: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub rows: Vec<OracleRow>,
    /// Largest |S²_wp − S²_cc| when the comparison ran.
    pub max_difference: Option<f64>,
    pub path: PathBuf,
}

/// Solves the close-coupling equations for the configured K values and
/// energies and, unless disabled, propagates the same blocks for comparison.
pub fn oracle(config: &RunConfig) -> Result<OracleOutcome> {
    let problem = Problem::load(config)?;
    let groups = problem.assign_packets()?;
    let schedule = problem.schedule()?;
    let workers = config.workers()?;
    let pool = pool(workers)?;
    let channels = problem.curves.channels();
    let lambda = channels[problem.initial].lambda;
    let parities = if lambda > 0 && config.physics.rotational {
        vec![Parity::E, Parity::F]
    } else {
        vec![Parity::E]
    };
    let e_ref = problem.entrance_threshold();
    let mut rows = Vec::new();
    let mut max_diff: Option<f64> = None;
    for &k in &config.oracle.k {
        for &parity in &parities {
            let basis = build_basis(channels, k, parity, config.physics.rotational, lambda);
            let Some(pos) = basis.position(problem.initial) else {
                continue;
            };
            let state_index: Vec<usize> = basis.states().iter().map(|s| s.index).collect();
            let block = assemble_block(problem.potential.clone(), &problem.couplings, basis, problem.mu, config.physics.rotational)?;
            let mut wp = vec![None; problem.energies.len()];
            if config.oracle.compare {
                for (p, idx) in groups.iter().enumerate() {
                    if idx.is_empty() {
                        continue;
                    }
                    let spec = problem.spec(p, idx.iter().map(|&i| problem.energies[i]).collect(), &schedule);
                    let b = pool
                        .install(|| run_block(&problem.potential, &problem.couplings, &spec, k, parity))?
                        .expect("entrance present in the block");
                    for (local, &e) in idx.iter().enumerate() {
                        wp[e] = Some(b.s2[local].clone());
                    }
                }
            }
            let solve = |e: usize| {
                solve_cc(&CcProblem {
                    block: &block,
                    energy: problem.energies[e] + e_ref,
                    r_min: config.grid.r_min,
                    step: config.oracle.step,
                    r_match: None,
                })
            };
            let solutions: Vec<_> = pool.install(|| {
                use rayon::prelude::*;
                (0..problem.energies.len()).into_par_iter().map(solve).collect::<Vec<_>>()
            });
            for (e, sol) in solutions.into_iter().enumerate() {
                let sol = sol?;
                let col = sol.column(pos, block.dim()).ok_or_else(|| Error::Domain("entrance channel closed".into()))?;
                for (b, &f) in state_index.iter().enumerate() {
                    if f == problem.initial {
                        continue;
                    }
                    let s2_wp = wp[e].as_ref().map(|row| row[f]);
                    if let Some(w) = s2_wp {
                        let d = (w - col[b]).abs();
                        max_diff = Some(max_diff.map_or(d, |m| m.max(d)));
                    }
                    rows.push(OracleRow {
                        k,
                        parity,
                        energy_ev: problem.energies_ev[e],
                        final_label: channels[f].label.clone(),
                        s2_oracle: col[b],
                        s2_wavepacket: s2_wp,
                    });
                }
            }
        }
    }
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("oracle.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
    let err = |e: csv::Error| Error::io(&path, e.into());
    w.write_record(["K", "parity", "E_eV_per_amu", "final_label", "s2_oracle", "s2_wavepacket", "abs_difference"])
        .map_err(err)?;
    for r in &rows {
        let (wp, diff) = match r.s2_wavepacket {
            Some(v) => (format!("{v:e}"), format!("{:e}", (v - r.s2_oracle).abs())),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.k.to_string(),
            format!("{:?}", r.parity).to_lowercase(),
            format!("{}", r.energy_ev),
            r.final_label.clone(),
            format!("{:e}", r.s2_oracle),
            wp,
            diff,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(OracleOutcome {
        rows,
        max_difference: max_diff,
        path,
    })
}

#[derive(Debug, Clone)]
pub struct DiabatizeOutcome {
    pub curves_path: PathBuf,
    pub matrix_path: PathBuf,
    pub orthogonality_defect: f64,
}

/// Writes the diabatic curves and the per-point U^d and D matrices.
pub fn diabatize(config: &RunConfig) -> Result<DiabatizeOutcome> {
    let curves = load_curve_set(&config.data.curves)?;
    let couplings = match &config.data.couplings {
        Some(p) => load_coupling_set(p)?,
        None => CouplingSet::empty(curves.mesh().clone()),
    };
    let model = diabatize_blocks(&curves, &couplings, config.data.coupling_mode, curves.mesh())?;
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let curves_path = dir.join("diabatic.curves");
    let matrix_path = dir.join("diabatic_matrices.txt");
    model.write(&curves_path, &matrix_path)?;
    Ok(DiabatizeOutcome {
        curves_path,
        matrix_path,
        orthogonality_defect: model.adt().orthogonality_defect(),
    })
}
