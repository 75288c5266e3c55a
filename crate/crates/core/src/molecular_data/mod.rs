//! Tabulated molecular input: adiabatic potential curves, radial derivative
//! couplings and rotational (L±) couplings, all on a radial mesh in bohr.

mod io;
pub mod spline;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use self::io::{load_coupling_set, load_curve_set, write_coupling_set, write_curve_set};
use self::spline::CubicSpline;
use crate::error::{Error, Result};
use crate::units::AMU_TO_ME;

/// Largest allowed gap between a channel's declared asymptote and its
/// tabulated value at the outermost mesh point (hartree).
pub const ASYMPTOTE_TOLERANCE: f64 = 1e-6;

/// Radial couplings must have decayed below this at the outer mesh boundary (bohr⁻¹).
pub const RADIAL_TAIL_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arrangement {
    /// He⁺(1s) + H(nl)
    #[serde(rename = "H")]
    HydrogenExcited,
    /// He(1snl) + H⁺
    #[serde(rename = "He")]
    HeliumExcited,
}

impl Arrangement {
    pub fn tag(self) -> &'static str {
        match self {
            Arrangement::HydrogenExcited => "H",
            Arrangement::HeliumExcited => "He",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "H" => Some(Arrangement::HydrogenExcited),
            "He" => Some(Arrangement::HeliumExcited),
            _ => None,
        }
    }
}

/// One molecular electronic state, i.e. one scattering channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectronicChannel {
    /// 1-based index within the Λ block.
    pub m: u32,
    pub lambda: u32,
    pub multiplicity: u32,
    pub asymptotic_energy: f64,
    pub arrangement: Arrangement,
    pub label: String,
    pub n: u32,
    pub l: u32,
}

impl ElectronicChannel {
    pub fn key(&self) -> ChannelRef {
        ChannelRef {
            m: self.m,
            lambda: self.lambda,
        }
    }

    pub fn symmetry_label(&self) -> String {
        let sym = match self.lambda {
            0 => "Sigma",
            1 => "Pi",
            2 => "Delta",
            _ => "Phi",
        };
        format!("{}{}", self.multiplicity, sym)
    }
}

impl fmt::Display for ElectronicChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{} m={}]", self.label, self.symmetry_label(), self.m)
    }
}

/// Identifies a channel inside a coupling file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelRef {
    pub m: u32,
    pub lambda: u32,
}

/// Strictly increasing radial points.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMesh {
    points: Vec<f64>,
}

impl RadialMesh {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::Mesh(format!(
                "mesh has {} points, at least 4 are required",
                points.len()
            )));
        }
        if let Some(bad) = points.iter().find(|r| !r.is_finite()) {
            return Err(Error::Mesh(format!("non-finite mesh point {bad}")));
        }
        if let Some(i) = points.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Mesh(format!(
                "mesh not strictly increasing at index {}: {} then {}",
                i + 1,
                points[i],
                points[i + 1]
            )));
        }
        Ok(Self { points })
    }

    /// `n` points `r_min + (j+1)·dR`, `dR = (r_max - r_min)/n`, so the last point is `r_max`.
    pub fn uniform(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        let dr = (r_max - r_min) / n as f64;
        Self::new((0..n).map(|j| r_min + (j + 1) as f64 * dr).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Repulsive continuation `U0 + A (exp(-β (R - R0)) - 1)` below the mesh.
#[derive(Debug, Clone, Copy)]
struct InnerWall {
    r0: f64,
    u0: f64,
    amplitude: f64,
    beta: f64,
}

impl InnerWall {
    /// Fits A, β so the wall passes through the two innermost points and
    /// leaves R0 with the spline's slope. Falls back to a flat hold when
    /// the inner data is not repulsive.
    fn fit(spline: &CubicSpline, r: &[f64], u: &[f64]) -> Self {
        let (r0, u0) = (r[0], u[0]);
        let h = r[1] - r[0];
        let rise = u[1] - u[0];
        let slope = spline.derivative(r0);
        let flat = Self {
            r0,
            u0,
            amplitude: 0.0,
            beta: 0.0,
        };
        if !(slope < 0.0 && rise < 0.0) {
            return flat;
        }
        // (1 - exp(-x)) / x = q, monotonically decreasing in x.
        let q = rise / (slope * h);
        let phi = |x: f64| {
            if x.abs() < 1e-8 {
                1.0 - 0.5 * x
            } else {
                -(-x).exp_m1() / x
            }
        };
        let (mut lo, mut hi) = (-60.0, 60.0);
        if !(phi(hi) < q && q < phi(lo)) {
            return flat;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        if x.abs() < 1e-10 {
            return flat;
        }
        let beta = x / h;
        Self {
            r0,
            u0,
            amplitude: -slope / beta,
            beta,
        }
    }

    fn eval(&self, r: f64) -> f64 {
        self.u0 + self.amplitude * ((-self.beta * (r - self.r0)).exp() - 1.0)
    }
}

#[derive(Debug, Clone)]
struct Curve {
    spline: CubicSpline,
    wall: InnerWall,
    asymptote: f64,
}

impl Curve {
    fn new(r: &[f64], u: &[f64], asymptote: f64) -> Result<Self> {
        let spline = CubicSpline::natural(r, u)?;
        let wall = InnerWall::fit(&spline, r, u);
        Ok(Self {
            spline,
            wall,
            asymptote,
        })
    }

    fn eval(&self, r: f64) -> f64 {
        if r > self.spline.x_max() {
            self.asymptote
        } else if r < self.spline.x_min() {
            self.wall.eval(r)
        } else {
            self.spline.eval(r)
        }
    }
}

/// Adiabatic potential curves for a set of channels.
#[derive(Debug, Clone)]
pub struct CurveSet {
    channels: Vec<ElectronicChannel>,
    mesh: RadialMesh,
    energies: Vec<Vec<f64>>,
    curves: Vec<Curve>,
}

impl CurveSet {
    /// Validates the data and sorts channels by (multiplicity, Λ, outer energy).
    pub fn new(
        channels: Vec<ElectronicChannel>,
        mesh: RadialMesh,
        energies: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if channels.len() != energies.len() {
            return Err(Error::Validation(format!(
                "{} channels but {} energy columns",
                channels.len(),
                energies.len()
            )));
        }
        let mut seen = HashSet::new();
        for (ch, u) in channels.iter().zip(&energies) {
            if u.len() != mesh.len() {
                return Err(Error::Validation(format!(
                    "channel {ch} has {} values on a {}-point mesh",
                    u.len(),
                    mesh.len()
                )));
            }
            if let Some(i) = u.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "channel {ch} is not finite at R = {}",
                    mesh.points()[i]
                )));
            }
            let outer = u[u.len() - 1];
            if (outer - ch.asymptotic_energy).abs() > ASYMPTOTE_TOLERANCE {
                return Err(Error::Validation(format!(
                    "channel {ch}: declared asymptote {} but U(R_max) = {}",
                    ch.asymptotic_energy, outer
                )));
            }
            if !seen.insert((ch.m, ch.lambda, ch.multiplicity)) {
                return Err(Error::Validation(format!(
                    "duplicate channel (m = {}, Λ = {}, 2S+1 = {})",
                    ch.m, ch.lambda, ch.multiplicity
                )));
            }
        }

        let mut order: Vec<usize> = (0..channels.len()).collect();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&channels[a], &channels[b]);
            (ca.multiplicity, ca.lambda)
                .cmp(&(cb.multiplicity, cb.lambda))
                .then(energies[a][mesh.len() - 1].total_cmp(&energies[b][mesh.len() - 1]))
        });
        let channels: Vec<_> = order.iter().map(|&i| channels[i].clone()).collect();
        let energies: Vec<_> = order.iter().map(|&i| energies[i].clone()).collect();

        for pair in (0..channels.len()).collect::<Vec<_>>().windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if (channels[a].multiplicity, channels[a].lambda)
                != (channels[b].multiplicity, channels[b].lambda)
            {
                continue;
            }
            if let Some(i) = (0..mesh.len()).find(|&i| energies[a][i] > energies[b][i]) {
                return Err(Error::Validation(format!(
                    "same-symmetry curves {} and {} cross near R = {}",
                    channels[a],
                    channels[b],
                    mesh.points()[i]
                )));
            }
        }

        let curves = channels
            .iter()
            .zip(&energies)
            .map(|(ch, u)| Curve::new(mesh.points(), u, ch.asymptotic_energy))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            channels,
            mesh,
            energies,
            curves,
        })
    }

    pub fn channels(&self) -> &[ElectronicChannel] {
        &self.channels
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.mesh
    }

    /// Tabulated values for channel `index`.
    pub fn tabulated(&self, index: usize) -> &[f64] {
        &self.energies[index]
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Adiabatic potential of channel `index` at any R > 0.
    pub fn potential(&self, index: usize, r: f64) -> f64 {
        self.curves[index].eval(r)
    }

    pub fn index_of(&self, key: ChannelRef) -> Option<usize> {
        self.channels.iter().position(|c| c.key() == key)
    }

    /// Indices of the channels with angular projection `lambda`, in energy order.
    pub fn lambda_block(&self, lambda: u32) -> Vec<usize> {
        (0..self.channels.len())
            .filter(|&i| self.channels[i].lambda == lambda)
            .collect()
    }

    /// Restricts the set to the listed channel indices.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.channels[i].clone()).collect(),
            self.mesh.clone(),
            indices.iter().map(|&i| self.energies[i].clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CouplingKind {
    Radial,
    LPlus,
    LMinus,
}

impl CouplingKind {
    pub fn tag(self) -> &'static str {
        match self {
            CouplingKind::Radial => "radial",
            CouplingKind::LPlus => "L+",
            CouplingKind::LMinus => "L-",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "radial" => Some(CouplingKind::Radial),
            "L+" => Some(CouplingKind::LPlus),
            "L-" => Some(CouplingKind::LMinus),
            _ => None,
        }
    }
}

/// What a coupling does outside its tabulated mesh (and, for `Switch`, how it
/// is blended into its atomic limit everywhere).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailPolicy {
    Zero,
    Hold,
    Switch {
        r_s: f64,
        width: f64,
        atomic_value: f64,
    },
}

/// Logistic switch `s(R) = 1/(1 + exp((R - R_s)/w))`.
pub fn switch_weight(r: f64, r_s: f64, width: f64) -> f64 {
    1.0 / (1.0 + ((r - r_s) / width).exp())
}

/// Blends a raw coupling into its atomic value beyond `r_s`:
/// `g(R) = s(R)·raw(R) + (1 - s(R))·atomic_value`.
pub fn apply_tail_switch<F>(raw: F, r_s: f64, width: f64, atomic_value: f64) -> impl Fn(f64) -> f64
where
    F: Fn(f64) -> f64,
{
    move |r| {
        let s = switch_weight(r, r_s, width);
        if s == 0.0 {
            atomic_value
        } else {
            s * raw(r) + (1.0 - s) * atomic_value
        }
    }
}

/// One tabulated coupling function between two channels.
#[derive(Debug, Clone)]
pub struct CouplingFunction {
    pub kind: CouplingKind,
    pub from: ChannelRef,
    pub to: ChannelRef,
    pub tail: TailPolicy,
    values: Vec<f64>,
    spline: CubicSpline,
}

impl CouplingFunction {
    pub fn new(
        kind: CouplingKind,
        from: ChannelRef,
        to: ChannelRef,
        mesh: &RadialMesh,
        values: Vec<f64>,
        tail: TailPolicy,
    ) -> Result<Self> {
        match kind {
            CouplingKind::Radial if from.lambda != to.lambda => {
                return Err(Error::Validation(format!(
                    "radial coupling between different Λ ({} and {})",
                    from.lambda, to.lambda
                )))
            }
            CouplingKind::LPlus if from.lambda != to.lambda + 1 => {
                return Err(Error::Validation(format!(
                    "L+ element <Λ={}|L+|Λ'={}> violates Λ = Λ' + 1",
                    from.lambda, to.lambda
                )))
            }
            CouplingKind::LMinus if from.lambda + 1 != to.lambda => {
                return Err(Error::Validation(format!(
                    "L- element <Λ={}|L-|Λ'={}> violates Λ = Λ' - 1",
                    from.lambda, to.lambda
                )))
            }
            _ => {}
        }
        if let TailPolicy::Switch { width, .. } = tail {
            if !(width > 0.0) {
                return Err(Error::Validation("switch width must be positive".into()));
            }
        }
        let spline = CubicSpline::natural(mesh.points(), &values)?;
        Ok(Self {
            kind,
            from,
            to,
            tail,
            values,
            spline,
        })
    }

    pub fn tabulated(&self) -> &[f64] {
        &self.values
    }

    fn raw(&self, r: f64) -> f64 {
        if r < self.spline.x_min() {
            self.values[0]
        } else if r > self.spline.x_max() {
            match self.tail {
                TailPolicy::Zero => 0.0,
                TailPolicy::Hold => self.values[self.values.len() - 1],
                TailPolicy::Switch { atomic_value, .. } => atomic_value,
            }
        } else {
            self.spline.eval(r)
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self.tail {
            TailPolicy::Switch {
                r_s,
                width,
                atomic_value,
            } => apply_tail_switch(|x| self.raw(x), r_s, width, atomic_value)(r),
            _ => self.raw(r),
        }
    }
}

/// Radial couplings F (bohr⁻¹) and rotational couplings <L±> (dimensionless).
#[derive(Debug, Clone)]
pub struct CouplingSet {
    mesh: RadialMesh,
    radial: Vec<CouplingFunction>,
    rotational: Vec<CouplingFunction>,
}

impl CouplingSet {
    pub fn new(mesh: RadialMesh, functions: Vec<CouplingFunction>) -> Result<Self> {
        let (radial, rotational): (Vec<_>, Vec<_>) = functions
            .into_iter()
            .partition(|f| f.kind == CouplingKind::Radial);
        let set = Self {
            mesh,
            radial,
            rotational,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn empty(mesh: RadialMesh) -> Self {
        Self {
            mesh,
            radial: Vec::new(),
            rotational: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        for f in &self.radial {
            let outer = f.values[f.values.len() - 1];
            if outer.abs() > RADIAL_TAIL_THRESHOLD {
                return Err(Error::Validation(format!(
                    "radial coupling ({},{})-({},{}) is {} at the outer boundary",
                    f.from.m, f.from.lambda, f.to.m, f.to.lambda, outer
                )));
            }
            if let Some(g) = self
                .radial
                .iter()
                .find(|g| g.from == f.to && g.to == f.from)
            {
                if let Some(i) = (0..f.values.len()).find(|&i| f.values[i] != -g.values[i]) {
                    return Err(Error::Validation(format!(
                        "radial coupling ({},{})-({},{}) not antisymmetric at R = {}",
                        f.from.m,
                        f.from.lambda,
                        f.to.m,
                        f.to.lambda,
                        self.mesh.points()[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.mesh
    }

    pub fn radial_functions(&self) -> &[CouplingFunction] {
        &self.radial
    }

    pub fn rotational_functions(&self) -> &[CouplingFunction] {
        &self.rotational
    }

    pub fn all(&self) -> impl Iterator<Item = &CouplingFunction> {
        self.radial.iter().chain(self.rotational.iter())
    }

    /// F_{ab}(R) = <ζ_a|∂_R|ζ_b>, using antisymmetry when only F_{ba} is stored.
    pub fn radial(&self, a: ChannelRef, b: ChannelRef, r: f64) -> f64 {
        if let Some(f) = self.radial.iter().find(|f| f.from == a && f.to == b) {
            f.eval(r)
        } else if let Some(f) = self.radial.iter().find(|f| f.from == b && f.to == a) {
            -f.eval(r)
        } else {
            0.0
        }
    }

    pub fn has_radial(&self, a: ChannelRef, b: ChannelRef) -> bool {
        self.radial
            .iter()
            .any(|f| (f.from == a && f.to == b) || (f.from == b && f.to == a))
    }

    /// Ladder element <ζ_lower|L₋|ζ_upper> = <ζ_upper|L₊|ζ_lower> between a
    /// state of projection Λ and one of Λ+1.
    pub fn ladder(&self, lower: ChannelRef, upper: ChannelRef, r: f64) -> Option<f64> {
        self.rotational
            .iter()
            .find(|f| match f.kind {
                CouplingKind::LMinus => f.from == lower && f.to == upper,
                CouplingKind::LPlus => f.from == upper && f.to == lower,
                CouplingKind::Radial => false,
            })
            .map(|f| f.eval(r))
    }

    /// Replaces the tail policy of every rotational coupling.
    pub fn with_rotational_tail(mut self, tail: TailPolicy) -> Self {
        for f in &mut self.rotational {
            f.tail = tail;
        }
        self
    }
}

/// Reduced mass in electron masses from two masses in amu.
pub fn reduced_mass(mass_a: f64, mass_b: f64) -> Result<f64> {
    if !(mass_a > 0.0 && mass_b > 0.0) {
        return Err(Error::Domain(format!(
            "masses must be positive, got {mass_a} and {mass_b}"
        )));
    }
    Ok(mass_a * mass_b / (mass_a + mass_b) * AMU_TO_ME)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(m: u32, lambda: u32, e: f64) -> ElectronicChannel {
        ElectronicChannel {
            m,
            lambda,
            multiplicity: 1,
            asymptotic_energy: e,
            arrangement: Arrangement::HydrogenExcited,
            label: format!("ch{m}"),
            n: 2,
            l: 0,
        }
    }

    fn mesh() -> RadialMesh {
        RadialMesh::new((0..20).map(|i| 1.0 + 0.5 * i as f64).collect()).unwrap()
    }

    #[test]
    fn duplicate_mesh_point_rejected() {
        let err = RadialMesh::new(vec![1.0, 1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::Mesh(_)));
        assert!(matches!(RadialMesh::new(vec![1.0, 2.0, 3.0]), Err(Error::Mesh(_))));
    }

    #[test]
    fn crossing_curves_rejected() {
        let m = mesh();
        let a: Vec<f64> = m.points().iter().map(|r| 0.1 - 0.01 * r).collect();
        let mut b = vec![0.0; m.len()];
        b[19] = a[19] + 0.01;
        b[..19].fill(0.0);
        let ch = vec![channel(1, 0, a[19]), channel(2, 0, b[19])];
        let err = CurveSet::new(ch, m, vec![a, b]).unwrap_err();
        assert!(matches!(err, Error::Validation(msg) if msg.contains("cross")));
    }

    #[test]
    fn potential_asymptote_and_wall() {
        let m = mesh();
        let u: Vec<f64> = m.points().iter().map(|r| (-(r - 1.0)).exp()).collect();
        let asym = u[u.len() - 1];
        let set = CurveSet::new(vec![channel(1, 0, asym)], m.clone(), vec![u.clone()]).unwrap();
        assert_eq!(set.potential(0, m.max() + 50.0), asym);
        // repulsive below the mesh, passing through the tabulated inner point
        assert_eq!(set.potential(0, m.min()), u[0]);
        assert!(set.potential(0, 0.8) > u[0]);
        assert!(set.potential(0, 0.5) > set.potential(0, 0.8));
    }

    #[test]
    fn tail_switch_properties() {
        let g = apply_tail_switch(|r| r, 30.0, 1.0, 0.0);
        let expected = 60.0 / (1.0 + 30f64.exp());
        assert!((g(60.0) - expected).abs() < 1e-24);
        assert!(g(60.0).abs() < 1e-11);
        assert!((g(30.0) - 15.0).abs() < 1e-14);
        assert!((g(5.0) - 5.0).abs() < 1e-9);

        let fixed = apply_tail_switch(|_| 0.7, 12.0, 2.0, 0.7);
        for r in [0.1, 5.0, 12.0, 40.0, 1e4] {
            assert_eq!(fixed(r), 0.7);
        }
    }

    #[test]
    fn tail_switched_coupling_is_bounded() {
        let g = apply_tail_switch(|r| r, 30.0, 1.0, 0.0);
        let mut r = 1e-3;
        let mut sup: f64 = 0.0;
        while r < 1e4 {
            sup = sup.max(g(r).abs());
            r *= 1.1;
        }
        assert!(sup.is_finite() && sup < 31.0);
    }

    #[test]
    fn reduced_mass_values() {
        let mu = reduced_mass(1.00782503, 4.00260325).unwrap();
        // independent arithmetic: 1.00782503 * 4.00260325 / 5.01042828
        assert!((mu / AMU_TO_ME - 0.805_105_574_829).abs() < 1e-11);
        assert!((mu - 1_467.617_682_37).abs() < 1e-6);
        assert!((reduced_mass(2.0, 2.0).unwrap() - 1.0 * AMU_TO_ME).abs() < 1e-9);
        assert!((reduced_mass(1.0, 1e12).unwrap() / AMU_TO_ME - 1.0).abs() < 1e-11);
        assert!(matches!(reduced_mass(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ladder_lookup_handles_both_kinds() {
        let m = mesh();
        let sigma = ChannelRef { m: 1, lambda: 0 };
        let pi = ChannelRef { m: 1, lambda: 1 };
        let f = CouplingFunction::new(
            CouplingKind::LPlus,
            pi,
            sigma,
            &m,
            vec![0.5; m.len()],
            TailPolicy::Hold,
        )
        .unwrap();
        let set = CouplingSet::new(m.clone(), vec![f]).unwrap();
        assert_eq!(set.ladder(sigma, pi, 3.0), Some(0.5));
        assert_eq!(set.ladder(pi, sigma, 3.0), None);
        assert!(CouplingFunction::new(
            CouplingKind::LPlus,
            sigma,
            pi,
            &m,
            vec![0.5; m.len()],
            TailPolicy::Hold
        )
        .is_err());
    }
}
