//! Hartree atomic-unit constants and the conversions used at the I/O boundary.

/// Electron masses per unified atomic mass unit.
pub const AMU_TO_ME: f64 = 1822.888486;

/// Electron-volts per hartree.
pub const HARTREE_TO_EV: f64 = 27.211386245988;

/// Square centimetres per square bohr.
pub const BOHR2_TO_CM2: f64 = 2.800285205e-17;

/// Atomic masses (amu) of the collision partners.
pub const MASS_H: f64 = 1.00782503;
pub const MASS_HE: f64 = 4.00260325;

/// Centre-of-mass energy (hartree) for a collision energy given per amu of
/// projectile mass. Both partners move with the same relative velocity, so
/// E_cm = mu[amu] * E[eV/amu].
pub fn collision_to_cm(energy_ev_per_amu: f64, mu: f64) -> f64 {
    energy_ev_per_amu * (mu / AMU_TO_ME) / HARTREE_TO_EV
}

pub fn cm_to_collision(energy_hartree: f64, mu: f64) -> f64 {
    energy_hartree * HARTREE_TO_EV / (mu / AMU_TO_ME)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_energy_round_trips() {
        let mu = 1467.8;
        let e = collision_to_cm(12.5, mu);
        assert!((cm_to_collision(e, mu) - 12.5).abs() < 1e-12);
    }
}
