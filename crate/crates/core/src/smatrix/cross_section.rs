use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molecular_data::{Arrangement, ElectronicChannel};
use crate::units::BOHR2_TO_CM2;

/// `(π/k²)(2K+1)|S_fi|²` per final channel. The entrance entry is NaN: only
/// |S|² is known, so the elastic |S − 1|² cannot be formed.
pub fn partial_cross_section(s2: &[f64], initial: usize, k: u32, wavenumber: f64) -> Result<Vec<f64>> {
    if !(wavenumber > 0.0) {
        return Err(Error::Domain(format!("entrance channel closed (k = {wavenumber})")));
    }
    let pre = std::f64::consts::PI / (wavenumber * wavenumber) * (2 * k + 1) as f64;
    Ok(s2
        .iter()
        .enumerate()
        .map(|(f, &v)| if f == initial { f64::NAN } else { pre * v })
        .collect())
}

/// Atomic identity of a channel as it appears in tables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId {
    pub label: String,
    pub arrangement: Arrangement,
    pub n: u32,
    pub l: u32,
    pub lambda: u32,
}

impl From<&ElectronicChannel> for StateId {
    fn from(c: &ElectronicChannel) -> Self {
        Self {
            label: c.label.clone(),
            arrangement: c.arrangement,
            n: c.n,
            l: c.l,
            lambda: c.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionRow {
    /// Collision energy, eV/amu.
    pub energy: f64,
    pub initial: StateId,
    pub final_state: StateId,
    pub k_max_used: u32,
    pub sigma_bohr2: f64,
    pub unitarity_defect: f64,
}

/// State-to-state charge-transfer cross sections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionTable {
    pub rotational: bool,
    pub rows: Vec<CrossSectionRow>,
}

fn lambda_name(lambda: u32) -> &'static str {
    match lambda {
        0 => "Sigma",
        1 => "Pi",
        2 => "Delta",
        3 => "Phi",
        _ => "Lambda>3",
    }
}

impl CrossSectionTable {
    pub fn energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.rows.iter().map(|r| r.energy).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    /// σ(i → f, E) or `None` if no such row.
    pub fn get(&self, initial: &str, final_label: &str, energy: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.initial.label == initial && r.final_state.label == final_label && r.energy == energy)
            .map(|r| r.sigma_bohr2)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let err = |e: csv::Error| Error::io(path, e.into());
        w.write_record([
            "E_eV_per_amu",
            "initial_label",
            "final_label",
            "K_max_used",
            "sigma_bohr2",
            "sigma_cm2",
            "rotational_flag",
            "unitarity_defect",
        ])
        .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                format!("{}", r.energy),
                r.initial.label.clone(),
                r.final_state.label.clone(),
                r.k_max_used.to_string(),
                format!("{:e}", r.sigma_bohr2),
                format!("{:e}", r.sigma_bohr2 * BOHR2_TO_CM2),
                (self.rotational as u8).to_string(),
                format!("{:e}", r.unitarity_defect),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Charge-transfer σ(nlΛ) per energy: the sum over every final state in the
/// other arrangement.
fn sigma_lambda(xs: &CrossSectionTable, arrangement: Arrangement, n: u32, l: u32, lambda: u32, energies: &[f64]) -> Option<Vec<f64>> {
    let rows: Vec<&CrossSectionRow> = xs
        .rows
        .iter()
        .filter(|r| {
            r.initial.arrangement == arrangement
                && r.initial.n == n
                && r.initial.l == l
                && r.initial.lambda == lambda
                && r.final_state.arrangement != arrangement
        })
        .collect();
    if rows.is_empty() {
        return None;
    }
    Some(
        energies
            .iter()
            .map(|&e| rows.iter().filter(|r| r.energy == e).map(|r| r.sigma_bohr2).sum())
            .collect(),
    )
}

/// `σ(nl) = [σ(nlΣ) + 2 Σ_{Λ≥1} σ(nlΛ)]/(2l+1)` for the entrance atom in `arrangement`.
pub fn total_from_initial(xs: &CrossSectionTable, arrangement: Arrangement, n: u32, l: u32) -> Result<Vec<(f64, f64)>> {
    let energies = xs.energies();
    let mut total = vec![0.0; energies.len()];
    let mut missing = Vec::new();
    for lambda in 0..=l {
        match sigma_lambda(xs, arrangement, n, l, lambda, &energies) {
            Some(s) => {
                let w = if lambda == 0 { 1.0 } else { 2.0 };
                for (t, v) in total.iter_mut().zip(s) {
                    *t += w * v;
                }
            }
            None => missing.push(format!("n={n} l={l} {}", lambda_name(lambda))),
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteData { missing });
    }
    let norm = (2 * l + 1) as f64;
    Ok(energies.into_iter().zip(total).map(|(e, t)| (e, t / norm)).collect())
}

/// Total σ into the atomic state (arrangement, n, l), summed over final Λ and
/// over every entrance (n, l) group with the statistical Λ weights.
pub fn total_to_final(xs: &CrossSectionTable, arrangement: Arrangement, n: u32, l: u32) -> Result<Vec<(f64, f64)>> {
    let energies = xs.energies();
    let into_final: Vec<&CrossSectionRow> = xs
        .rows
        .iter()
        .filter(|r| r.final_state.arrangement == arrangement && r.final_state.n == n && r.final_state.l == l)
        .collect();
    let groups: BTreeSet<(Arrangement, u32, u32)> = into_final
        .iter()
        .map(|r| (r.initial.arrangement, r.initial.n, r.initial.l))
        .collect();
    let mut total = vec![0.0; energies.len()];
    let mut missing = Vec::new();
    for (arr, ni, li) in groups {
        for lambda in 0..=li {
            let rows: Vec<&&CrossSectionRow> = into_final
                .iter()
                .filter(|r| r.initial.arrangement == arr && r.initial.n == ni && r.initial.l == li && r.initial.lambda == lambda)
                .collect();
            let present = xs.rows.iter().any(|r| {
                r.initial.arrangement == arr && r.initial.n == ni && r.initial.l == li && r.initial.lambda == lambda
            });
            if !present {
                missing.push(format!("initial n={ni} l={li} {}", lambda_name(lambda)));
                continue;
            }
            let w = if lambda == 0 { 1.0 } else { 2.0 } / (2 * li + 1) as f64;
            for (t, &e) in total.iter_mut().zip(&energies) {
                *t += w * rows.iter().filter(|r| r.energy == e).map(|r| r.sigma_bohr2).sum::<f64>();
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteData { missing });
    }
    Ok(energies.into_iter().zip(total).collect())
}
