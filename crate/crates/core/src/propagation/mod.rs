//! Split-operator propagation of a multichannel wave packet on a uniform grid.

mod recorder;

pub use recorder::{
    read_series, write_series, Recorder, SeriesRecorder, SpectralAmplitudes, SpectralRecorder, TimeSeries,
};

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::rotational_basis::HamiltonianBlock;

pub const DEFAULT_NORM_FLOOR: f64 = 1e-6;
/// Surviving norm at T_max above which the run is flagged as not absorbed.
pub const UNABSORBED_NORM: f64 = 0.05;
pub const EDGE_AMPLITUDE_LIMIT: f64 = 1e-8;

/// `R_j = R_min + (j+1)·dR`, `j = 0..N`, so the last point is `R_max`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UniformGrid {
    r_min: f64,
    r_max: f64,
    n: usize,
}

impl UniformGrid {
    pub fn new(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::Config(format!("grid size {n} is not a power of two ≥ 4")));
        }
        if !(r_min >= 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(Error::Config(format!("bad grid range [{r_min}, {r_max}]")));
        }
        Ok(Self { r_min, r_max, n })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.r_min + (j + 1) as f64 * self.dr()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// FFT-ordered conjugate momenta.
    pub fn momenta(&self) -> Vec<f64> {
        let dk = 2.0 * PI / (self.n as f64 * self.dr());
        (0..self.n)
            .map(|j| {
                let m = if j < self.n / 2 { j as f64 } else { j as f64 - self.n as f64 };
                m * dk
            })
            .collect()
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dr()
    }

    /// Grid wavenumber limit exceeds 1.5 times the physical one.
    pub fn resolves(&self, k_phys: f64) -> bool {
        self.k_max() > 1.5 * k_phys
    }

    /// Smallest power-of-two size that resolves `k_phys` on the same range.
    pub fn suggested_size(&self, k_phys: f64) -> usize {
        let need = 1.5 * k_phys * (self.r_max - self.r_min) / PI;
        (need.ceil() as usize + 1).next_power_of_two().max(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CapSpec {
    pub eta: f64,
    pub r_c: f64,
}

impl CapSpec {
    pub fn new(eta: f64, r_c: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("CAP strength must be positive, got {eta}")));
        }
        Ok(Self { eta, r_c })
    }

    /// W(R) = η (R − R_c)²/(R_∞ − R_c) beyond the onset.
    pub fn value(&self, r: f64, r_inf: f64) -> f64 {
        if r <= self.r_c {
            0.0
        } else {
            self.eta * (r - self.r_c).powi(2) / (r_inf - self.r_c)
        }
    }
}

pub fn cap_values(grid: &UniformGrid, cap: &CapSpec) -> Result<Vec<f64>> {
    if !(cap.r_c < grid.r_max() && cap.r_c > grid.r_min()) {
        return Err(Error::Config(format!(
            "CAP onset {} outside the grid ({}, {})",
            cap.r_c,
            grid.r_min(),
            grid.r_max()
        )));
    }
    Ok(grid.points().iter().map(|&r| cap.value(r, grid.r_max())).collect())
}

/// Initial Gaussian: centre, width and (negative, inward) mean wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PacketSpec {
    pub r0: f64,
    pub sigma: f64,
    pub k0: f64,
}

impl PacketSpec {
    /// `g(R) ∝ exp(i k0 R − (R−R0)²/σ²)`, normalized to one.
    pub fn value(&self, r: f64) -> Complex64 {
        let norm = (2.0 / (PI * self.sigma * self.sigma)).powf(0.25);
        let x = (r - self.r0) / self.sigma;
        Complex64::from_polar(norm * (-x * x).exp(), self.k0 * r)
    }

    /// Packet placement window `[R_min + 4σ, R_c − 4σ]`.
    pub fn check_placement(&self, grid: &UniformGrid, r_c: f64) -> Result<()> {
        let lo = grid.r_min() + 4.0 * self.sigma;
        let hi = r_c - 4.0 * self.sigma;
        if !(self.sigma > 0.0) || self.r0 < lo || self.r0 > hi {
            return Err(Error::Placement(format!(
                "R0 = {} with σ = {} must lie in [{lo}, {hi}]",
                self.r0, self.sigma
            )));
        }
        Ok(())
    }
}

/// Amplitudes `[channel][grid point]` at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    grid: UniformGrid,
    n_channels: usize,
    amps: Vec<Complex64>,
    time: f64,
}

pub fn gaussian_packet(
    grid: &UniformGrid,
    n_channels: usize,
    channel: usize,
    packet: &PacketSpec,
    r_c: f64,
) -> Result<WavePacket> {
    packet.check_placement(grid, r_c)?;
    if channel >= n_channels {
        return Err(Error::Placement(format!("initial channel {channel} of {n_channels}")));
    }
    let n = grid.len();
    let mut amps = vec![Complex64::new(0.0, 0.0); n_channels * n];
    for j in 0..n {
        amps[channel * n + j] = packet.value(grid.point(j));
    }
    Ok(WavePacket {
        grid: *grid,
        n_channels,
        amps,
        time: 0.0,
    })
}

impl WavePacket {
    pub fn from_amplitudes(grid: UniformGrid, n_channels: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != n_channels * grid.len() {
            return Err(Error::Validation("amplitude array does not match grid × channels".into()));
        }
        Ok(Self {
            grid,
            n_channels,
            amps,
            time: 0.0,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.amps[c * n..(c + 1) * n]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dr()
    }

    pub fn channel_norm(&self, c: usize) -> f64 {
        self.channel(c).iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dr()
    }

    /// Mean and standard deviation of R under |ψ_c|².
    pub fn position_moments(&self, c: usize) -> (f64, f64) {
        let ch = self.channel(c);
        let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (j, a) in ch.iter().enumerate() {
            let p = a.norm_sqr();
            let r = self.grid.point(j);
            w += p;
            m1 += p * r;
            m2 += p * r * r;
        }
        let mean = m1 / w;
        (mean, (m2 / w - mean * mean).max(0.0).sqrt())
    }

    /// ⟨k⟩ of channel `c` from its discrete Fourier transform.
    pub fn momentum_expectation(&self, c: usize) -> f64 {
        let n = self.grid.len();
        let mut buf = self.channel(c).to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let k = self.grid.momenta();
        let (mut w, mut m) = (0.0, 0.0);
        for (a, kj) in buf.iter().zip(&k) {
            w += a.norm_sqr();
            m += a.norm_sqr() * kj;
        }
        m / w
    }

    /// Largest |ψ| on the first and last grid point.
    pub fn edge_amplitude(&self) -> f64 {
        let n = self.grid.len();
        (0..self.n_channels)
            .flat_map(|c| [self.amps[c * n], self.amps[c * n + n - 1]])
            .map(|a| a.norm())
            .fold(0.0, f64::max)
    }
}

/// Largest step with `max(ΔV, k²/2μ)·dt < 0.5`.
pub fn suggest_dt(potential_range: f64, k_max: f64, mu: f64) -> f64 {
    0.5 / potential_range.abs().max(k_max * k_max / (2.0 * mu))
}

/// Precomputed split-operator factors for one Hamiltonian block.
pub struct Propagator {
    grid: UniformGrid,
    n_channels: usize,
    dt: f64,
    e_ref: f64,
    cap: Vec<f64>,
    /// `n×n` row-major half-step factor per grid point
    half: Vec<Complex64>,
    diagonal: Vec<bool>,
    kinetic: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    local: Vec<Complex64>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("grid", &self.grid)
            .field("n_channels", &self.n_channels)
            .field("dt", &self.dt)
            .field("e_ref", &self.e_ref)
            .finish_non_exhaustive()
    }
}

impl Propagator {
    pub fn new(block: &HamiltonianBlock, grid: &UniformGrid, cap: &CapSpec, dt: f64, e_ref: f64) -> Result<Self> {
        let w = cap_values(grid, cap)?;
        Self::from_potential(grid, block.mu(), block.dim(), |r| block.matrix_at(r), &w, dt, e_ref)
    }

    /// `potential(R)` must return a real symmetric `n×n` matrix. Energies are
    /// measured from `e_ref` during the propagation.
    pub fn from_potential(
        grid: &UniformGrid,
        mu: f64,
        n_channels: usize,
        potential: impl Fn(f64) -> DMatrix<f64>,
        cap: &[f64],
        dt: f64,
        e_ref: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if cap.len() != grid.len() {
            return Err(Error::Config("CAP array does not match the grid".into()));
        }
        let n = grid.len();
        let nc = n_channels;
        let mut half = vec![Complex64::new(0.0, 0.0); n * nc * nc];
        let mut diagonal = vec![true; n];
        for j in 0..n {
            let mut v = potential(grid.point(j));
            if v.nrows() != nc || v.ncols() != nc {
                return Err(Error::Validation(format!(
                    "potential is {}x{} but {nc} channels were declared",
                    v.nrows(),
                    v.ncols()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("non-finite potential at R = {}", grid.point(j))));
            }
            for c in 0..nc {
                v[(c, c)] -= e_ref;
            }
            let damp = (-0.5 * cap[j] * dt).exp();
            let block = &mut half[j * nc * nc..(j + 1) * nc * nc];
            let off_zero = (0..nc).all(|a| (0..nc).all(|b| a == b || v[(a, b)] == 0.0));
            if off_zero {
                for c in 0..nc {
                    block[c * nc + c] = Complex64::from_polar(damp, -0.5 * v[(c, c)] * dt);
                }
                continue;
            }
            diagonal[j] = false;
            let eig = v.symmetric_eigen();
            let q = &eig.eigenvectors;
            let phases: Vec<Complex64> = eig
                .eigenvalues
                .iter()
                .map(|&l| Complex64::from_polar(damp, -0.5 * l * dt))
                .collect();
            for a in 0..nc {
                for b in 0..nc {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (m, p) in phases.iter().enumerate() {
                        s += p * (q[(a, m)] * q[(b, m)]);
                    }
                    block[a * nc + b] = s;
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        let kinetic = grid
            .momenta()
            .iter()
            .map(|k| Complex64::from_polar(inv_n, -k * k * dt / (2.0 * mu)))
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Ok(Self {
            grid: *grid,
            n_channels: nc,
            dt,
            e_ref,
            cap: cap.to_vec(),
            half,
            diagonal,
            kinetic,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            local: vec![Complex64::new(0.0, 0.0); nc],
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn e_ref(&self) -> f64 {
        self.e_ref
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn cap(&self) -> &[f64] {
        &self.cap
    }

    fn apply_half_potential(&mut self, psi: &mut [Complex64]) {
        let n = self.grid.len();
        let nc = self.n_channels;
        for j in 0..n {
            let m = &self.half[j * nc * nc..(j + 1) * nc * nc];
            if self.diagonal[j] {
                for c in 0..nc {
                    psi[c * n + j] *= m[c * nc + c];
                }
                continue;
            }
            for a in 0..nc {
                let mut s = Complex64::new(0.0, 0.0);
                for b in 0..nc {
                    s += m[a * nc + b] * psi[b * n + j];
                }
                self.local[a] = s;
            }
            for a in 0..nc {
                psi[a * n + j] = self.local[a];
            }
        }
    }

    fn apply_kinetic(&mut self, psi: &mut [Complex64]) {
        let n = self.grid.len();
        for c in 0..self.n_channels {
            let ch = &mut psi[c * n..(c + 1) * n];
            self.forward.process_with_scratch(ch, &mut self.scratch);
            for (a, k) in ch.iter_mut().zip(&self.kinetic) {
                *a *= k;
            }
            self.inverse.process_with_scratch(ch, &mut self.scratch);
        }
    }

    /// One symmetric split step `e^{−iV dt/2} e^{−iT dt} e^{−iV dt/2}`.
    pub fn step(&mut self, psi: &mut WavePacket) -> Result<()> {
        let mut amps = std::mem::take(&mut psi.amps);
        self.apply_half_potential(&mut amps);
        self.apply_kinetic(&mut amps);
        self.apply_half_potential(&mut amps);
        psi.amps = amps;
        psi.time += self.dt;
        Ok(())
    }
}

/// Non-fatal conditions seen during a propagation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Warning {
    /// T_max reached with this much norm left on the grid.
    NotAbsorbed { norm: f64 },
    /// |ψ| at a grid end exceeded the wrap-around limit.
    EdgeAmplitude { time: f64, amplitude: f64 },
    /// Norm grew although only absorption acts.
    NormIncrease { time: f64, increase: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PropagationReport {
    pub steps: usize,
    pub final_time: f64,
    pub final_norm: f64,
    pub max_edge_amplitude: f64,
    pub warnings: Vec<Warning>,
}

/// Steps until `t_max` or until the norm drops below `norm_floor`, handing
/// every step (including t = 0) to the recorder.
pub fn propagate_and_record(
    psi: &mut WavePacket,
    propagator: &mut Propagator,
    t_max: f64,
    norm_floor: f64,
    recorder: &mut dyn Recorder,
) -> Result<PropagationReport> {
    let max_steps = (t_max / propagator.dt()).round() as usize;
    let mut norm = psi.norm();
    recorder.record(0, psi, norm);
    let mut report = PropagationReport {
        steps: 0,
        final_time: psi.time(),
        final_norm: norm,
        max_edge_amplitude: psi.edge_amplitude(),
        warnings: Vec::new(),
    };
    let mut edge_warned = false;
    let mut growth_warned = false;
    for step in 1..=max_steps {
        propagator.step(psi)?;
        let next = psi.norm();
        if !next.is_finite() {
            return Err(Error::Blowup { time: psi.time() });
        }
        if next > norm + 1e-12 && !growth_warned {
            growth_warned = true;
            report.warnings.push(Warning::NormIncrease {
                time: psi.time(),
                increase: next - norm,
            });
        }
        norm = next;
        let edge = psi.edge_amplitude();
        report.max_edge_amplitude = report.max_edge_amplitude.max(edge);
        if edge > EDGE_AMPLITUDE_LIMIT && !edge_warned {
            edge_warned = true;
            report.warnings.push(Warning::EdgeAmplitude {
                time: psi.time(),
                amplitude: edge,
            });
        }
        recorder.record(step, psi, norm);
        report.steps = step;
        if norm < norm_floor {
            break;
        }
    }
    recorder.finish();
    report.final_time = psi.time();
    report.final_norm = norm;
    if norm >= norm_floor && norm > UNABSORBED_NORM {
        report.warnings.push(Warning::NotAbsorbed { norm });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(grid: &UniformGrid, mu: f64, dt: f64) -> Propagator {
        let w = vec![0.0; grid.len()];
        Propagator::from_potential(grid, mu, 1, |_| DMatrix::zeros(1, 1), &w, dt, 0.0).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = UniformGrid::new(0.0, 60.0, 4096).unwrap();
        assert_eq!(g.point(4095), 60.0);
        assert!((g.dr() - 60.0 / 4096.0).abs() < 1e-15);
        assert!(UniformGrid::new(0.0, 60.0, 3000).is_err());
        let k = g.momenta();
        assert_eq!(k[0], 0.0);
        assert!(k[2048] < 0.0);
        assert!(g.resolves(100.0) && !g.resolves(200.0));
        assert!(UniformGrid::new(0.0, 60.0, g.suggested_size(200.0)).unwrap().resolves(200.0));
    }

    #[test]
    fn cap_examples() {
        let g = UniformGrid::new(0.0, 60.0, 4096).unwrap();
        let cap = CapSpec::new(0.01, 45.0).unwrap();
        assert_eq!(cap.value(45.0, 60.0), 0.0);
        assert!((cap.value(60.0, 60.0) - 0.15).abs() < 1e-15);
        assert!((cap.value(52.5, 60.0) - 0.01 * 15.0 / 4.0).abs() < 1e-15);
        let w = cap_values(&g, &cap).unwrap();
        assert!((w[4095] - 0.15).abs() < 1e-15);
        assert!(g.points().iter().zip(&w).all(|(&r, &v)| r > 45.0 || v == 0.0));
    }

    #[test]
    fn packet_norm_and_moments() {
        let g = UniformGrid::new(0.0, 60.0, 4096).unwrap();
        let spec = PacketSpec { r0: 40.0, sigma: 0.2, k0: -8.0 };
        let psi = gaussian_packet(&g, 2, 0, &spec, 45.0).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10);
        assert_eq!(psi.channel_norm(1), 0.0);
        let (mean, _) = psi.position_moments(0);
        assert!((mean - 40.0).abs() < 1e-8);
        assert!((psi.momentum_expectation(0) + 8.0).abs() < 1e-8);

        let bad = PacketSpec { r0: 44.5, ..spec };
        assert!(matches!(gaussian_packet(&g, 1, 0, &bad, 45.0), Err(Error::Placement(_))));
    }

    #[test]
    fn constant_shift_is_a_global_phase() {
        let g = UniformGrid::new(0.0, 40.0, 512).unwrap();
        let spec = PacketSpec { r0: 20.0, sigma: 1.0, k0: -3.0 };
        let w = vec![0.0; g.len()];
        let mut a = gaussian_packet(&g, 1, 0, &spec, 30.0).unwrap();
        let mut b = a.clone();
        let v = |r: f64| DMatrix::from_element(1, 1, 0.01 * (-(r - 15.0f64).powi(2)).exp());
        let c = 0.037;
        let mut pa = Propagator::from_potential(&g, 100.0, 1, v, &w, 0.5, 0.0).unwrap();
        let mut pb = Propagator::from_potential(&g, 100.0, 1, |r| v(r).add_scalar(c), &w, 0.5, 0.0).unwrap();
        for _ in 0..200 {
            pa.step(&mut a).unwrap();
            pb.step(&mut b).unwrap();
        }
        let phase = Complex64::from_polar(1.0, -c * a.time());
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x * phase - y).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_conserved_without_cap() {
        let g = UniformGrid::new(0.0, 40.0, 256).unwrap();
        let spec = PacketSpec { r0: 20.0, sigma: 1.0, k0: -2.0 };
        let mut psi = gaussian_packet(&g, 2, 0, &spec, 30.0).unwrap();
        let w = vec![0.0; g.len()];
        let v = |r: f64| {
            let c = 0.02 * (-(r - 18.0f64).powi(2)).exp();
            DMatrix::from_row_slice(2, 2, &[0.0, c, c, 0.01])
        };
        let mut p = Propagator::from_potential(&g, 50.0, 2, v, &w, 1.0, 0.0).unwrap();
        for _ in 0..10_000 {
            p.step(&mut psi).unwrap();
        }
        assert!((psi.norm() - 1.0).abs() < 1e-10);
        assert!(psi.channel_norm(1) > 1e-6);
    }

    #[test]
    fn free_dispersion() {
        let mu = 100.0;
        let sigma = 1.0;
        let g = UniformGrid::new(0.0, 200.0, 2048).unwrap();
        let spec = PacketSpec { r0: 100.0, sigma, k0: 0.0 };
        let mut psi = gaussian_packet(&g, 1, 0, &spec, 190.0).unwrap();
        let mut p = free(&g, mu, 2.0);
        for _ in 0..500 {
            p.step(&mut psi).unwrap();
        }
        let t = psi.time();
        let (_, std) = psi.position_moments(0);
        let want = sigma * (1.0 + (2.0 * t / (mu * sigma * sigma)).powi(2)).sqrt();
        assert!((2.0 * std / want - 1.0).abs() < 1e-6, "{} vs {want}", 2.0 * std);
    }
}

#[cfg(test)]
mod recorder_tests {
    use super::*;

    struct Both<'a>(&'a mut SpectralRecorder, &'a mut SeriesRecorder);

    impl Recorder for Both<'_> {
        fn record(&mut self, step: usize, psi: &WavePacket, norm: f64) {
            self.0.record(step, psi, norm);
            self.1.record(step, psi, norm);
        }
        fn finish(&mut self) {
            self.0.finish();
            self.1.finish();
        }
    }

    fn setup() -> (UniformGrid, Vec<f64>, WavePacket, Propagator) {
        let g = UniformGrid::new(0.0, 30.0, 256).unwrap();
        let cap = cap_values(&g, &CapSpec::new(0.005, 15.0).unwrap()).unwrap();
        let spec = PacketSpec { r0: 8.0, sigma: 1.5, k0: 5.0 };
        let psi = gaussian_packet(&g, 2, 0, &spec, 15.0).unwrap();
        let v = |r: f64| {
            let c = 0.01 * (-(r - 6.0f64).powi(2)).exp();
            DMatrix::from_row_slice(2, 2, &[0.0, c, c, -0.002])
        };
        let p = Propagator::from_potential(&g, 20.0, 2, v, &cap, 0.5, 0.0).unwrap();
        (g, cap, psi, p)
    }

    #[test]
    fn outgoing_packet_is_absorbed_monotonically() {
        let (_, _, mut psi, mut p) = setup();
        let mut norms = Vec::new();
        struct Norms<'a>(&'a mut Vec<f64>);
        impl Recorder for Norms<'_> {
            fn record(&mut self, _: usize, _: &WavePacket, norm: f64) {
                self.0.push(norm);
            }
        }
        let report = propagate_and_record(&mut psi, &mut p, 5000.0, 1e-6, &mut Norms(&mut norms)).unwrap();
        assert!(report.final_norm < 1e-6, "{report:?}");
        assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(!report.warnings.iter().any(|w| matches!(w, Warning::NotAbsorbed { .. })));
    }

    #[test]
    fn spectral_and_series_paths_agree() {
        let (g, cap, mut psi, mut p) = setup();
        let energies: Vec<f64> = (0..20).map(|i| 0.1 + 0.02 * i as f64).collect();
        let mut spec = SpectralRecorder::new(&g, &cap, 0.5, 0.0, 2, energies.clone(), 1).unwrap();
        let mut ser = SeriesRecorder::new(&g, &cap, 0.5, 0.0, 2, 1).unwrap();
        propagate_and_record(&mut psi, &mut p, 5000.0, 1e-6, &mut Both(&mut spec, &mut ser)).unwrap();
        let a = spec.into_amplitudes();
        let series = ser.into_series();
        let b = series.spectral(energies).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()));
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.bin");
        write_series(&series, &path).unwrap();
        assert_eq!(read_series(&path).unwrap(), series);
    }

    #[test]
    fn uncoupled_channel_stays_empty() {
        let g = UniformGrid::new(0.0, 30.0, 256).unwrap();
        let cap = cap_values(&g, &CapSpec::new(0.05, 20.0).unwrap()).unwrap();
        let spec = PacketSpec { r0: 12.0, sigma: 1.0, k0: -3.0 };
        let mut psi = gaussian_packet(&g, 2, 0, &spec, 20.0).unwrap();
        let v = |r: f64| DMatrix::from_row_slice(2, 2, &[1.0 / r, 0.0, 0.0, 0.3 / r]);
        let mut p = Propagator::from_potential(&g, 20.0, 2, v, &cap, 0.5, 0.0).unwrap();
        propagate_and_record(&mut psi, &mut p, 500.0, 1e-6, &mut ()).unwrap();
        assert!(psi.channel(1).iter().all(|a| *a == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn nyquist_is_enforced() {
        let g = UniformGrid::new(0.0, 30.0, 256).unwrap();
        let cap = vec![0.0; 256];
        assert!(SpectralRecorder::new(&g, &cap, 1.0, 0.0, 1, vec![3.2], 1).is_err());
        assert!(SpectralRecorder::new(&g, &cap, 1.0, 0.0, 1, vec![1.0], 4).is_err());
        assert!(SpectralRecorder::new(&g, &cap, 1.0, 0.0, 1, vec![1.0], 3).is_ok());
    }
}
