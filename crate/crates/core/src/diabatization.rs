//! Adiabatic-to-diabatic transformation.
//!
//! The ADT matrix solves `∂_R D + F·D = 0` with `D(R_max) = I`, and the
//! diabatic potential matrix is `U^d = Dᵀ·diag(U)·D`.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::molecular_data::spline::CubicSpline;
use crate::molecular_data::{ChannelRef, CouplingSet, CurveSet, ElectronicChannel, RadialMesh};

const REORTHO_TRIGGER: f64 = 1e-12;
const REORTHO_FAILURE: f64 = 1e-8;
// largest |F|·h allowed inside one RK4 sub-step
const MAX_ROTATION_PER_STEP: f64 = 0.005;

/// Anything that can produce a real symmetric diabatic potential matrix at R.
pub trait DiabaticPotential: Send + Sync {
    fn channels(&self) -> &[ElectronicChannel];
    fn matrix_at(&self, r: f64) -> DMatrix<f64>;

    fn dim(&self) -> usize {
        self.channels().len()
    }
}

/// Diabatic potential given in closed form.
pub struct AnalyticDiabatic {
    channels: Vec<ElectronicChannel>,
    func: Box<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>,
}

impl AnalyticDiabatic {
    pub fn new<F>(channels: Vec<ElectronicChannel>, func: F) -> Self
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            channels,
            func: Box::new(func),
        }
    }
}

impl fmt::Debug for AnalyticDiabatic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticDiabatic")
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl DiabaticPotential for AnalyticDiabatic {
    fn channels(&self) -> &[ElectronicChannel] {
        &self.channels
    }

    fn matrix_at(&self, r: f64) -> DMatrix<f64> {
        (self.func)(r)
    }
}

/// Antisymmetric matrix-valued radial coupling F(R).
#[derive(Clone)]
pub struct CouplingMatrix {
    dim: usize,
    func: Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>,
}

impl CouplingMatrix {
    pub fn from_fn<F>(dim: usize, func: F) -> Self
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            func: Arc::new(func),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_fn(dim, move |_| DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, r: f64) -> DMatrix<f64> {
        (self.func)(r)
    }
}

/// Which radial couplings feed the ADT equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Only F_{m,m+1} between energy-adjacent states.
    TwoByTwo,
    Full,
}

fn coupling_matrix(couplings: &CouplingSet, block: &[ChannelRef], banded: bool) -> CouplingMatrix {
    let n = block.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if (!banded || j == i + 1) && couplings.has_radial(block[i], block[j]) {
                pairs.push((i, j));
            }
        }
    }
    let couplings = couplings.clone();
    let block = block.to_vec();
    CouplingMatrix::from_fn(n, move |r| {
        let mut f = DMatrix::zeros(n, n);
        for &(i, j) in &pairs {
            let v = couplings.radial(block[i], block[j], r);
            f[(i, j)] = v;
            f[(j, i)] = -v;
        }
        f
    })
}

/// Keeps only the couplings between adjacent states of an energy-ordered block.
pub fn band_reduce(couplings: &CouplingSet, block: &[ChannelRef]) -> CouplingMatrix {
    coupling_matrix(couplings, block, true)
}

/// Every stored coupling of the block.
pub fn full_coupling(couplings: &CouplingSet, block: &[ChannelRef]) -> CouplingMatrix {
    coupling_matrix(couplings, block, false)
}

/// D(R) on a uniform mesh.
#[derive(Debug, Clone)]
pub struct AdtMatrix {
    mesh: RadialMesh,
    d: Vec<DMatrix<f64>>,
}

impl AdtMatrix {
    pub fn identity(mesh: RadialMesh, dim: usize) -> Self {
        let d = vec![DMatrix::identity(dim, dim); mesh.len()];
        Self { mesh, d }
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.mesh
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.d
    }

    pub fn dim(&self) -> usize {
        self.d[0].nrows()
    }

    /// max_R ‖D Dᵀ − I‖_∞
    pub fn orthogonality_defect(&self) -> f64 {
        self.d.iter().map(orthogonality_defect).fold(0.0, f64::max)
    }
}

fn orthogonality_defect(d: &DMatrix<f64>) -> f64 {
    let n = d.nrows();
    let e = d * d.transpose() - DMatrix::<f64>::identity(n, n);
    e.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Symmetric orthogonalization D ← D (DᵀD)^{-1/2}.
fn polar_orthonormalize(d: &DMatrix<f64>) -> DMatrix<f64> {
    let s = d.transpose() * d;
    let eig = s.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    d * (&eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose())
}

fn is_uniform(mesh: &RadialMesh) -> bool {
    let p = mesh.points();
    let h = (mesh.max() - mesh.min()) / (p.len() - 1) as f64;
    p.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0))
}

/// Integrates the ADT equation inward from `mesh.max()`, where D = I.
pub fn solve_adt(f: &CouplingMatrix, mesh: &RadialMesh) -> Result<AdtMatrix> {
    if !is_uniform(mesh) {
        return Err(Error::Integration("ADT mesh must be uniform".into()));
    }
    let n = f.dim();
    let pts = mesh.points();
    let len = pts.len();
    let mut d = vec![DMatrix::<f64>::identity(n, n); len];
    let rhs = |r: f64, dm: &DMatrix<f64>| -(f.at(r) * dm);

    let mut current = DMatrix::<f64>::identity(n, n);
    for i in (1..len).rev() {
        let (r_hi, r_lo) = (pts[i], pts[i - 1]);
        let span = r_lo - r_hi;
        let scale = f.at(r_hi).norm().max(f.at(0.5 * (r_hi + r_lo)).norm()).max(f.at(r_lo).norm());
        let sub = ((scale * span.abs() / MAX_ROTATION_PER_STEP).ceil() as usize).max(1);
        let h = span / sub as f64;
        for s in 0..sub {
            let r = r_hi + s as f64 * h;
            let k1 = rhs(r, &current);
            let k2 = rhs(r + 0.5 * h, &(&current + &k1 * (0.5 * h)));
            let k3 = rhs(r + 0.5 * h, &(&current + &k2 * (0.5 * h)));
            let k4 = rhs(r + h, &(&current + &k3 * h));
            current += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        if orthogonality_defect(&current) > REORTHO_TRIGGER {
            current = polar_orthonormalize(&current);
            let drift = orthogonality_defect(&current);
            if drift > REORTHO_FAILURE {
                return Err(Error::Integration(format!(
                    "orthogonality drift {drift:e} at R = {r_lo} after correction"
                )));
            }
        }
        if current.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration(format!("non-finite D at R = {r_lo}")));
        }
        d[i - 1] = current.clone();
    }
    Ok(AdtMatrix {
        mesh: mesh.clone(),
        d,
    })
}

/// Diabatic potential matrix on the ADT mesh, interpolated elementwise off the mesh.
#[derive(Debug, Clone)]
pub struct DiabaticModel {
    channels: Vec<ElectronicChannel>,
    curves: CurveSet,
    adt: AdtMatrix,
    ud: Vec<DMatrix<f64>>,
    splines: Vec<CubicSpline>,
}

/// Builds `U^d(R) = Dᵀ(R)·diag(U(R))·D(R)` at every ADT mesh point.
pub fn diabatize(curves: &CurveSet, adt: &AdtMatrix) -> Result<DiabaticModel> {
    let n = curves.len();
    if adt.dim() != n {
        return Err(Error::Validation(format!(
            "ADT matrix is {}x{} but the curve set has {n} channels",
            adt.dim(),
            adt.dim()
        )));
    }
    let ud: Vec<DMatrix<f64>> = adt
        .mesh
        .points()
        .iter()
        .zip(&adt.d)
        .map(|(&r, d)| {
            let u = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                n,
                (0..n).map(|c| curves.potential(c, r)),
            ));
            let m = d.transpose() * u * d;
            // exact symmetry, not just to rounding
            (&m + m.transpose()) * 0.5
        })
        .collect();
    let mut splines = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let y: Vec<f64> = ud.iter().map(|m| m[(i, j)]).collect();
            splines.push(CubicSpline::natural(adt.mesh.points(), &y)?);
        }
    }
    Ok(DiabaticModel {
        channels: curves.channels().to_vec(),
        curves: curves.clone(),
        adt: adt.clone(),
        ud,
        splines,
    })
}

/// Diabatizes every Λ block of `curves` independently on `mesh` and returns
/// the block-diagonal model over all channels.
pub fn diabatize_blocks(
    curves: &CurveSet,
    couplings: &CouplingSet,
    mode: CouplingMode,
    mesh: &RadialMesh,
) -> Result<DiabaticModel> {
    let n = curves.len();
    let mut d = vec![DMatrix::<f64>::identity(n, n); mesh.len()];
    let mut lambdas: Vec<u32> = curves.channels().iter().map(|c| c.lambda).collect();
    lambdas.sort_unstable();
    lambdas.dedup();
    for lambda in lambdas {
        let idx = curves.lambda_block(lambda);
        let block: Vec<ChannelRef> = idx.iter().map(|&i| curves.channels()[i].key()).collect();
        let f = match mode {
            CouplingMode::TwoByTwo => band_reduce(couplings, &block),
            CouplingMode::Full => full_coupling(couplings, &block),
        };
        let adt = solve_adt(&f, mesh)?;
        for (full, part) in d.iter_mut().zip(adt.matrices()) {
            for (a, &ia) in idx.iter().enumerate() {
                for (b, &ib) in idx.iter().enumerate() {
                    full[(ia, ib)] = part[(a, b)];
                }
            }
        }
    }
    diabatize(
        curves,
        &AdtMatrix {
            mesh: mesh.clone(),
            d,
        },
    )
}

impl DiabaticModel {
    pub fn adt(&self) -> &AdtMatrix {
        &self.adt
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.adt.mesh
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.ud
    }

    pub fn curves(&self) -> &CurveSet {
        &self.curves
    }

    /// Diagonal diabatic curves on the mesh.
    pub fn diabatic_curve(&self, i: usize) -> Vec<f64> {
        self.ud.iter().map(|m| m[(i, i)]).collect()
    }

    /// Largest off-diagonal element at the outer mesh point.
    pub fn asymptotic_offdiagonal(&self) -> f64 {
        let m = &self.ud[self.ud.len() - 1];
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// Writes the diagonal diabatic curves in curve-file format plus a matrix
    /// dump with every D and U^d element, for plotting and regression fixtures.
    pub fn write(&self, curves_path: impl AsRef<Path>, matrix_path: impl AsRef<Path>) -> Result<()> {
        let n = self.channels.len();
        let diag = CurveSet::new(
            self.channels.clone(),
            self.mesh().clone(),
            (0..n).map(|i| self.diabatic_curve(i)).collect(),
        )?;
        crate::molecular_data::write_curve_set(&diag, curves_path)?;

        let mut out = String::from("# ctscatter diabatic matrices\n");
        for kind in ["Ud", "D"] {
            for i in 0..n {
                for j in 0..n {
                    writeln!(out, "# column {kind} {} {}", i + 1, j + 1).unwrap();
                }
            }
        }
        for (k, r) in self.mesh().points().iter().enumerate() {
            write!(out, "{r}").unwrap();
            for m in [&self.ud[k], &self.adt.d[k]] {
                for i in 0..n {
                    for j in 0..n {
                        write!(out, " {}", m[(i, j)]).unwrap();
                    }
                }
            }
            out.push('\n');
        }
        let path = matrix_path.as_ref();
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

impl DiabaticPotential for DiabaticModel {
    fn channels(&self) -> &[ElectronicChannel] {
        &self.channels
    }

    fn matrix_at(&self, r: f64) -> DMatrix<f64> {
        let n = self.channels.len();
        let mesh = &self.adt.mesh;
        if r > mesh.max() {
            DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                n,
                (0..n).map(|c| self.curves.potential(c, r)),
            ))
        } else if r < mesh.min() {
            let d = &self.adt.d[0];
            let u = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                n,
                (0..n).map(|c| self.curves.potential(c, r)),
            ));
            d.transpose() * u * d
        } else {
            DMatrix::from_fn(n, n, |i, j| self.splines[i * n + j].eval(r))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molecular_data::{CouplingFunction, CouplingKind, TailPolicy};

    fn rotation_generator(f: f64) -> CouplingMatrix {
        CouplingMatrix::from_fn(2, move |_| DMatrix::from_row_slice(2, 2, &[0.0, f, -f, 0.0]))
    }

    #[test]
    fn zero_coupling_gives_identity() {
        let mesh = RadialMesh::uniform(0.0, 10.0, 64).unwrap();
        let adt = solve_adt(&CouplingMatrix::zero(3), &mesh).unwrap();
        for d in adt.matrices() {
            assert_eq!(d, &DMatrix::<f64>::identity(3, 3));
        }
    }

    #[test]
    fn constant_coupling_rotation_angle() {
        // D(R) = exp(F (R_max - R)) = [[cos θ, sin θ], [-sin θ, cos θ]], θ = f (R_max - R)
        let mesh = RadialMesh::uniform(-0.1, 10.0, 101).unwrap();
        let adt = solve_adt(&rotation_generator(0.1), &mesh).unwrap();
        let d0 = &adt.matrices()[0];
        assert!((mesh.min() - 0.0).abs() < 1e-12);
        assert!((d0[(0, 0)] - 1f64.cos()).abs() < 1e-10);
        assert!((d0[(0, 1)] - 1f64.sin()).abs() < 1e-10);
        assert!((d0[(1, 0)] + 1f64.sin()).abs() < 1e-10);
        assert_eq!(adt.matrices().last().unwrap(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn banding_drops_next_nearest_couplings() {
        let mesh = RadialMesh::uniform(0.0, 10.0, 20).unwrap();
        let refs: Vec<_> = (1..=3).map(|m| ChannelRef { m, lambda: 0 }).collect();
        let funcs = [(0, 1), (1, 2), (0, 2)]
            .iter()
            .map(|&(a, b)| {
                let vals = mesh.points().iter().map(|r| (-(r - 3.0f64).powi(2)).exp()).collect();
                CouplingFunction::new(CouplingKind::Radial, refs[a], refs[b], &mesh, vals, TailPolicy::Zero)
                    .unwrap()
            })
            .collect();
        let set = CouplingSet::new(mesh, funcs).unwrap();
        let f = band_reduce(&set, &refs).at(3.0);
        assert!(f[(0, 1)] != 0.0 && f[(1, 2)] != 0.0);
        assert_eq!(f[(0, 2)], 0.0);
        assert_eq!(f[(2, 0)], 0.0);
        assert_eq!(f[(1, 0)], -f[(0, 1)]);
        let full = full_coupling(&set, &refs).at(3.0);
        assert!(full[(0, 2)] != 0.0);

        let two = &refs[..2];
        assert_eq!(band_reduce(&set, two).at(2.5), full_coupling(&set, two).at(2.5));
    }
}
