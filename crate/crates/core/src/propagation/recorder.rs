use std::f64::consts::PI;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{UniformGrid, WavePacket};
use crate::error::{Error, Result};

/// Receives the packet after every step.
pub trait Recorder {
    fn record(&mut self, step: usize, psi: &WavePacket, norm: f64);
    fn finish(&mut self) {}
}

/// Ignores everything; handy for timing and tests.
impl Recorder for () {
    fn record(&mut self, _: usize, _: &WavePacket, _: f64) {}
}

fn support(cap: &[f64]) -> (Vec<usize>, Vec<f64>) {
    cap.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(j, &w)| (j, w)).unzip()
}

fn check_nyquist(energies: &[f64], dt: f64, decimation: usize) -> Result<()> {
    if decimation == 0 {
        return Err(Error::Config("decimation factor must be at least 1".into()));
    }
    let e_max = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if e_max * dt * decimation as f64 >= PI {
        return Err(Error::Config(format!(
            "sampling every {} a.u. aliases energies up to {e_max} hartree",
            dt * decimation as f64
        )));
    }
    Ok(())
}

/// Time Fourier transforms `φ̃_c(R_s, E) = ∫ dt e^{iEt} φ_c(R_s, t)` on the CAP support.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitudes {
    /// Energies relative to `e_ref`.
    pub energies: Vec<f64>,
    pub e_ref: f64,
    pub n_channels: usize,
    pub cap: Vec<f64>,
    pub dr: f64,
    /// `[energy][channel][support point]`
    pub values: Vec<Complex64>,
}

impl SpectralAmplitudes {
    fn zeroed(energies: Vec<f64>, e_ref: f64, n_channels: usize, cap: Vec<f64>, dr: f64) -> Self {
        let len = energies.len() * n_channels * cap.len();
        Self {
            energies,
            e_ref,
            n_channels,
            cap,
            dr,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn accumulate(&mut self, t: f64, weight: f64, support_values: &[Complex64]) {
        let stride = support_values.len();
        for (e, &energy) in self.energies.iter().enumerate() {
            let phasor = Complex64::from_polar(weight, energy * t);
            let acc = &mut self.values[e * stride..(e + 1) * stride];
            for (a, v) in acc.iter_mut().zip(support_values) {
                *a += phasor * v;
            }
        }
    }

    /// Σ_s W_s |φ̃_c(R_s, E)|² dR
    pub fn absorbed_flux(&self, e: usize, c: usize) -> f64 {
        let ns = self.cap.len();
        let base = (e * self.n_channels + c) * ns;
        self.values[base..base + ns]
            .iter()
            .zip(&self.cap)
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>()
            * self.dr
    }
}

/// Accumulates the transform while the packet runs, so nothing per step is kept.
#[derive(Debug, Clone)]
pub struct SpectralRecorder {
    support: Vec<usize>,
    dt: f64,
    decimation: usize,
    n_grid: usize,
    out: SpectralAmplitudes,
    current: Vec<Complex64>,
    last_step: Option<usize>,
}

impl SpectralRecorder {
    /// `energies` are relative to `e_ref`, the reference the propagator subtracts.
    pub fn new(
        grid: &UniformGrid,
        cap: &[f64],
        dt: f64,
        e_ref: f64,
        n_channels: usize,
        energies: Vec<f64>,
        decimation: usize,
    ) -> Result<Self> {
        check_nyquist(&energies, dt, decimation)?;
        let (support, w) = support(cap);
        let ns = support.len();
        Ok(Self {
            support,
            dt,
            decimation,
            n_grid: grid.len(),
            out: SpectralAmplitudes::zeroed(energies, e_ref, n_channels, w, grid.dr()),
            current: vec![Complex64::new(0.0, 0.0); n_channels * ns],
            last_step: None,
        })
    }

    fn gather(&mut self, psi: &WavePacket) {
        let ns = self.support.len();
        let amps = psi.amplitudes();
        for c in 0..self.out.n_channels {
            for (s, &j) in self.support.iter().enumerate() {
                self.current[c * ns + s] = amps[c * self.n_grid + j];
            }
        }
    }

    pub fn into_amplitudes(self) -> SpectralAmplitudes {
        self.out
    }
}

impl Recorder for SpectralRecorder {
    fn record(&mut self, step: usize, psi: &WavePacket, _norm: f64) {
        if !step.is_multiple_of(self.decimation) {
            return;
        }
        self.gather(psi);
        let h = self.dt * self.decimation as f64;
        let weight = if self.last_step.is_none() { 0.5 * h } else { h };
        self.out.accumulate(step as f64 * self.dt, weight, &self.current);
        self.last_step = Some(step);
    }

    fn finish(&mut self) {
        // trapezoid: the last sample carries half weight
        if let Some(step) = self.last_step.filter(|&s| s > 0) {
            let h = self.dt * self.decimation as f64;
            let current = std::mem::take(&mut self.current);
            self.out.accumulate(step as f64 * self.dt, -0.5 * h, &current);
            self.current = current;
        }
    }
}

/// Recorded CAP-region amplitudes for every sampled step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub grid: UniformGrid,
    pub dt: f64,
    pub e_ref: f64,
    pub n_channels: usize,
    pub decimation: usize,
    pub support: Vec<usize>,
    pub cap: Vec<f64>,
    pub steps: Vec<usize>,
    pub norms: Vec<f64>,
    /// `[record][channel][support point]`
    pub amplitudes: Vec<Complex64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn record(&self, i: usize) -> &[Complex64] {
        let stride = self.n_channels * self.support.len();
        &self.amplitudes[i * stride..(i + 1) * stride]
    }

    /// Trapezoidal time transform at energies relative to `e_ref`.
    pub fn spectral(&self, energies: Vec<f64>) -> Result<SpectralAmplitudes> {
        check_nyquist(&energies, self.dt, self.decimation)?;
        let mut out = SpectralAmplitudes::zeroed(energies, self.e_ref, self.n_channels, self.cap.clone(), self.grid.dr());
        let h = self.dt * self.decimation as f64;
        let last = self.len().saturating_sub(1);
        for (i, &step) in self.steps.iter().enumerate() {
            let weight = if i == 0 || i == last { 0.5 * h } else { h };
            out.accumulate(step as f64 * self.dt, weight, self.record(i));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SeriesRecorder {
    series: TimeSeries,
}

impl SeriesRecorder {
    pub fn new(grid: &UniformGrid, cap: &[f64], dt: f64, e_ref: f64, n_channels: usize, decimation: usize) -> Result<Self> {
        if decimation == 0 {
            return Err(Error::Config("decimation factor must be at least 1".into()));
        }
        let (support, w) = support(cap);
        Ok(Self {
            series: TimeSeries {
                grid: *grid,
                dt,
                e_ref,
                n_channels,
                decimation,
                support,
                cap: w,
                steps: Vec::new(),
                norms: Vec::new(),
                amplitudes: Vec::new(),
            },
        })
    }

    pub fn into_series(self) -> TimeSeries {
        self.series
    }
}

impl Recorder for SeriesRecorder {
    fn record(&mut self, step: usize, psi: &WavePacket, norm: f64) {
        let s = &mut self.series;
        if !step.is_multiple_of(s.decimation) {
            return;
        }
        let n = s.grid.len();
        let amps = psi.amplitudes();
        for c in 0..s.n_channels {
            s.amplitudes.extend(s.support.iter().map(|&j| amps[c * n + j]));
        }
        s.steps.push(step);
        s.norms.push(norm);
    }
}

const MAGIC: &[u8; 8] = b"CTSWPTS\0";
const VERSION: u32 = 1;

/// Little-endian dump: magic, version, channel/support/decimation counts,
/// grid (N, R_min, R_max), dt, E_ref, record count, support indices, W values,
/// then for every record the step, the norm and the (re, im) amplitudes.
pub fn write_series(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(64 + series.amplitudes.len() * 16);
    buf.extend_from_slice(MAGIC);
    for v in [VERSION, series.n_channels as u32, series.support.len() as u32, series.decimation as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(series.grid.len() as u64).to_le_bytes());
    for v in [series.grid.r_min(), series.grid.r_max(), series.dt, series.e_ref] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(series.len() as u64).to_le_bytes());
    for &j in &series.support {
        buf.extend_from_slice(&(j as u32).to_le_bytes());
    }
    for w in &series.cap {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    for i in 0..series.len() {
        buf.extend_from_slice(&(series.steps[i] as u64).to_le_bytes());
        buf.extend_from_slice(&series.norms[i].to_le_bytes());
        for a in series.record(i) {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        if self.0.len() < N {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated series file"));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().unwrap())
    }
    fn u32(&mut self) -> io::Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> io::Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> io::Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

pub fn read_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let parse = || -> io::Result<TimeSeries> {
        let mut c = Cursor(&bytes);
        if &c.take::<8>()? != MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a ctscatter series file"));
        }
        if c.u32()? != VERSION {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "unsupported series version"));
        }
        let n_channels = c.u32()? as usize;
        let ns = c.u32()? as usize;
        let decimation = c.u32()? as usize;
        let n = c.u64()? as usize;
        let (r_min, r_max, dt, e_ref) = (c.f64()?, c.f64()?, c.f64()?, c.f64()?);
        let records = c.u64()? as usize;
        let grid = UniformGrid::new(r_min, r_max, n)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        let support = (0..ns).map(|_| c.u32().map(|v| v as usize)).collect::<io::Result<_>>()?;
        let cap = (0..ns).map(|_| c.f64()).collect::<io::Result<_>>()?;
        let mut steps = Vec::with_capacity(records);
        let mut norms = Vec::with_capacity(records);
        let mut amplitudes = Vec::with_capacity(records * n_channels * ns);
        for _ in 0..records {
            steps.push(c.u64()? as usize);
            norms.push(c.f64()?);
            for _ in 0..n_channels * ns {
                amplitudes.push(Complex64::new(c.f64()?, c.f64()?));
            }
        }
        Ok(TimeSeries {
            grid,
            dt,
            e_ref,
            n_channels,
            decimation,
            support,
            cap,
            steps,
            norms,
            amplitudes,
        })
    };
    parse().map_err(|e| Error::io(path, e))
}
