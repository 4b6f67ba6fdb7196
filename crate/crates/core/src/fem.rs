//! Cantilever beam model: trilinear hexahedra, lumped mass, and the
//! standardized scaled eigenproblem `A = M^{-1/2} K M^{-1/2} / α`.
//!
//! Units are tonne, mm, s and MPa (N/mm²), so `K v = λ M v` yields `λ` in
//! (rad/s)² directly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{phases_from_eigenvalues, ClampRecord, Spectrum};

/// Natural coordinates of the eight corners, counter-clockwise bottom face
/// then top face.
const XI: [f64; 8] = [-1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
const ETA: [f64; 8] = [-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
const ZETA: [f64; 8] = [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];

pub type ElementMatrix = SMatrix<f64, 24, 24>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    /// mm, along x
    pub length: f64,
    /// mm, along y
    pub width: f64,
    /// mm, along z
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// MPa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// tonne/mm³
    pub density: f64,
}

impl Default for BeamConfig {
    /// Steel cantilever, 1000 × 200 × 100 mm, 16 × 6 × 2 elements.
    fn default() -> Self {
        BeamConfig {
            length: 1000.0,
            width: 200.0,
            height: 100.0,
            nx: 16,
            ny: 6,
            nz: 2,
            youngs_modulus: 205_000.0,
            poisson_ratio: 0.3,
            density: 7.85e-9,
        }
    }
}

impl BeamConfig {
    /// Same beam on a 4 × 2 × 1 mesh (72 free DOFs).
    pub fn desk() -> Self {
        BeamConfig {
            nx: 4,
            ny: 2,
            nz: 1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.length,
            self.width,
            self.height,
            self.youngs_modulus,
            self.density,
        ];
        if dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidArgument(
                "beam dimensions and material constants must be positive".into(),
            ));
        }
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::InvalidArgument(
                "element counts must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::InvalidArgument(format!(
                "Poisson ratio must be in [0, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    /// Lexicographic node number, x slowest.
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.ny + 1) + j) * (self.nz + 1) + k
    }
}

fn elasticity_matrix(e: f64, nu: f64) -> SMatrix<f64, 6, 6> {
    let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut d = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lam;
        }
        d[(i, i)] += 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    d
}

fn gauss_points() -> impl Iterator<Item = (f64, f64, f64)> {
    let g = 1.0 / 3f64.sqrt();
    let pts = [-g, g];
    pts.into_iter().flat_map(move |a| {
        pts.into_iter()
            .flat_map(move |b| pts.into_iter().map(move |c| (a, b, c)))
    })
}

/// Shape functions and their natural derivatives at one point.
fn shape(xi: f64, eta: f64, zeta: f64) -> ([f64; 8], SMatrix<f64, 3, 8>) {
    let mut n = [0.0; 8];
    let mut dn = SMatrix::<f64, 3, 8>::zeros();
    for a in 0..8 {
        let (px, py, pz) = (1.0 + XI[a] * xi, 1.0 + ETA[a] * eta, 1.0 + ZETA[a] * zeta);
        n[a] = 0.125 * px * py * pz;
        dn[(0, a)] = 0.125 * XI[a] * py * pz;
        dn[(1, a)] = 0.125 * ETA[a] * px * pz;
        dn[(2, a)] = 0.125 * ZETA[a] * px * py;
    }
    (n, dn)
}

fn coords_matrix(nodes: &[[f64; 3]; 8]) -> SMatrix<f64, 8, 3> {
    SMatrix::<f64, 8, 3>::from_fn(|a, d| nodes[a][d])
}

/// 24 × 24 stiffness of a trilinear hexahedron, full 2×2×2 Gauss rule.
/// DOFs are ordered `(x, y, z)` per node.
pub fn hex8_stiffness(nodes: &[[f64; 3]; 8], e: f64, nu: f64) -> Result<ElementMatrix> {
    let d = elasticity_matrix(e, nu);
    let x = coords_matrix(nodes);
    let mut ke = ElementMatrix::zeros();
    for (xi, eta, zeta) in gauss_points() {
        let (_, dn) = shape(xi, eta, zeta);
        let jac = dn * x;
        let det = jac.determinant();
        if !(det > 0.0) {
            return Err(Error::NonpositiveJacobian { det });
        }
        let inv = jac
            .try_inverse()
            .ok_or(Error::NonpositiveJacobian { det })?;
        let dx = inv * dn;
        let mut b = SMatrix::<f64, 6, 24>::zeros();
        for a in 0..8 {
            let (gx, gy, gz) = (dx[(0, a)], dx[(1, a)], dx[(2, a)]);
            let c = 3 * a;
            b[(0, c)] = gx;
            b[(1, c + 1)] = gy;
            b[(2, c + 2)] = gz;
            b[(3, c)] = gy;
            b[(3, c + 1)] = gx;
            b[(4, c + 1)] = gz;
            b[(4, c + 2)] = gy;
            b[(5, c)] = gz;
            b[(5, c + 2)] = gx;
        }
        ke += b.transpose() * d * b * det;
    }
    // exact symmetry
    let sym = (ke + ke.transpose()) * 0.5;
    Ok(sym)
}

/// Row sums of the consistent mass matrix: `∫ ρ N_a dV` per node.
pub fn hex8_lumped_mass(nodes: &[[f64; 3]; 8], rho: f64) -> Result<[f64; 8]> {
    let x = coords_matrix(nodes);
    let mut m = [0.0; 8];
    for (xi, eta, zeta) in gauss_points() {
        let (n, dn) = shape(xi, eta, zeta);
        let det = (dn * x).determinant();
        if !(det > 0.0) {
            return Err(Error::NonpositiveJacobian { det });
        }
        for a in 0..8 {
            m[a] += rho * n[a] * det;
        }
    }
    Ok(m)
}

/// Assembled model after eliminating the clamped face.
#[derive(Debug, Clone)]
pub struct FemModel {
    pub config: BeamConfig,
    /// Upper and lower triangle entries `(row, col, value)` over free DOFs,
    /// sorted by row then column.
    stiffness: Vec<(usize, usize, f64)>,
    mass_diagonal: Vec<f64>,
    /// Global DOF id (`3·node + direction`) of each free DOF.
    free_dofs: Vec<usize>,
    total_dofs: usize,
    total_mass: f64,
}

impl FemModel {
    /// Free DOF count `m₀`.
    pub fn free_dof_count(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn total_dof_count(&self) -> usize {
        self.total_dofs
    }

    /// Mass of the whole beam before boundary conditions (tonne).
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn mass_diagonal(&self) -> &[f64] {
        &self.mass_diagonal
    }

    pub fn stiffness_entries(&self) -> &[(usize, usize, f64)] {
        &self.stiffness
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Free index of `(node, direction)`, if that DOF is not clamped.
    pub fn dof_index(&self, node: usize, direction: usize) -> Option<usize> {
        self.free_dofs.binary_search(&(3 * node + direction)).ok()
    }

    pub fn stiffness_dense(&self) -> DMatrix<f64> {
        let m0 = self.free_dof_count();
        let mut k = DMatrix::zeros(m0, m0);
        for &(i, j, v) in &self.stiffness {
            k[(i, j)] = v;
        }
        k
    }

    /// `y = K x` without densifying.
    pub fn stiffness_matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in &self.stiffness {
            y[i] += v * x[j];
        }
    }

    /// Stiffness in MatrixMarket coordinate format (1-based, lower triangle).
    pub fn write_stiffness<W: Write>(&self, mut out: W) -> Result<()> {
        let lower: Vec<_> = self.stiffness.iter().filter(|(i, j, _)| j <= i).collect();
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        let m0 = self.free_dof_count();
        writeln!(out, "{m0} {m0} {}", lower.len())?;
        for (i, j, v) in lower {
            writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }

    pub fn write_mass<W: Write>(&self, mut out: W) -> Result<()> {
        for m in &self.mass_diagonal {
            writeln!(out, "{m:.17e}")?;
        }
        Ok(())
    }
}

/// Assembles stiffness and lumped mass and clamps every DOF on `x = 0`.
pub fn build_cantilever(cfg: &BeamConfig) -> Result<FemModel> {
    cfg.validate()?;
    let (hx, hy, hz) = (
        cfg.length / cfg.nx as f64,
        cfg.width / cfg.ny as f64,
        cfg.height / cfg.nz as f64,
    );
    let corner = [
        (0, 0, 0),
        (1, 0, 0),
        (1, 1, 0),
        (0, 1, 0),
        (0, 0, 1),
        (1, 0, 1),
        (1, 1, 1),
        (0, 1, 1),
    ];

    let total_dofs = 3 * cfg.node_count();
    let mut mass = vec![0.0; total_dofs];
    let mut entries: HashMap<(usize, usize), f64> = HashMap::new();

    for i in 0..cfg.nx {
        for j in 0..cfg.ny {
            for k in 0..cfg.nz {
                let mut coords = [[0.0; 3]; 8];
                let mut dofs = [0usize; 24];
                for (a, &(di, dj, dk)) in corner.iter().enumerate() {
                    let (ii, jj, kk) = (i + di, j + dj, k + dk);
                    coords[a] = [ii as f64 * hx, jj as f64 * hy, kk as f64 * hz];
                    let node = cfg.node_index(ii, jj, kk);
                    for d in 0..3 {
                        dofs[3 * a + d] = 3 * node + d;
                    }
                }
                let ke = hex8_stiffness(&coords, cfg.youngs_modulus, cfg.poisson_ratio)?;
                let me = hex8_lumped_mass(&coords, cfg.density)?;
                for a in 0..24 {
                    for b in 0..24 {
                        *entries.entry((dofs[a], dofs[b])).or_insert(0.0) += ke[(a, b)];
                    }
                    mass[dofs[a]] += me[a / 3];
                }
            }
        }
    }
    let total_mass = mass.iter().sum::<f64>() / 3.0;

    let clamped_nodes = (cfg.ny + 1) * (cfg.nz + 1);
    let free_dofs: Vec<usize> = (3 * clamped_nodes..total_dofs).collect();
    let offset = 3 * clamped_nodes;
    let mut stiffness: Vec<(usize, usize, f64)> = entries
        .into_iter()
        .filter(|((r, c), _)| *r >= offset && *c >= offset)
        .map(|((r, c), v)| (r - offset, c - offset, v))
        .collect();
    stiffness.sort_by_key(|a| (a.0, a.1));
    let mass_diagonal = mass[offset..].to_vec();

    Ok(FemModel {
        config: cfg.clone(),
        stiffness,
        mass_diagonal,
        free_dofs,
        total_dofs,
        total_mass,
    })
}

/// Scaled eigenproblem with its eigenbasis and measured phases.
#[derive(Debug, Clone)]
pub struct StandardProblem {
    /// Unscaled eigenvalues of `A`, descending ((rad/s)² for FEM input).
    raw_eigenvalues: Vec<f64>,
    /// `raw / α`, descending, in `(0, target_norm]`.
    eigenvalues: Vec<f64>,
    alpha: f64,
    /// Column `k` pairs with `eigenvalues[k]` and `spectrum.phases()[k]`.
    eigenvectors: DMatrix<f64>,
    spectrum: Spectrum,
    pad_dim: usize,
    clamped: Vec<ClampRecord>,
}

pub const DEFAULT_TARGET_NORM: f64 = 0.9;

impl StandardProblem {
    /// Full eigendecomposition of a symmetric positive definite matrix,
    /// scaled so the largest eigenvalue equals `target_norm`.
    pub fn from_symmetric(
        a: DMatrix<f64>,
        target_norm: f64,
        pad_to_power_of_two: bool,
    ) -> Result<Self> {
        if !(target_norm > 0.0 && target_norm < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target norm must be in (0, 1), got {target_norm}"
            )));
        }
        let m0 = a.nrows();
        if m0 == 0 || a.ncols() != m0 {
            return Err(Error::InvalidArgument(
                "matrix must be square and nonempty".into(),
            ));
        }
        let a = (&a + a.transpose()) * 0.5;
        let eig = a
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000 * m0)
            .ok_or_else(|| Error::Eigensolver("symmetric QR did not converge".into()))?;

        let mut order: Vec<usize> = (0..m0).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let raw: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(m0, m0, |r, c| eig.eigenvectors[(r, order[c])]);

        let lmax = raw[0];
        let lmin = raw[m0 - 1];
        if !(lmin > 0.0) {
            return Err(Error::Eigensolver(format!(
                "matrix is not positive definite (smallest eigenvalue {lmin:e})"
            )));
        }

        let residual = (&a * &vectors
            - &vectors * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(raw.clone())))
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
        if residual > 1e-8 * lmax {
            return Err(Error::Eigensolver(format!(
                "eigen residual {residual:e} exceeds 1e-8·λmax"
            )));
        }
        let gram = vectors.transpose() * &vectors - DMatrix::identity(m0, m0);
        let ortho = gram.amax();
        if ortho > 1e-10 {
            return Err(Error::Eigensolver(format!(
                "eigenvectors lost orthonormality ({ortho:e})"
            )));
        }

        let alpha = lmax / target_norm;
        let mut eigenvalues: Vec<f64> = raw.iter().map(|l| l / alpha).collect();
        // λmax/α rounds to target_norm; pin it
        eigenvalues[0] = target_norm;
        let mapping = phases_from_eigenvalues(&eigenvalues)?;
        let pad_dim = if pad_to_power_of_two {
            m0.next_power_of_two()
        } else {
            m0
        };

        Ok(StandardProblem {
            raw_eigenvalues: raw,
            eigenvalues,
            alpha,
            eigenvectors: vectors,
            spectrum: mapping.spectrum,
            pad_dim,
            clamped: mapping.clamped,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn raw_eigenvalues(&self) -> &[f64] {
        &self.raw_eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `M = 2^m ≥ m₀`; the padding block is the kernel of `A` and never
    /// enters the target spectrum.
    pub fn pad_dim(&self) -> usize {
        self.pad_dim
    }

    pub fn padding_modes(&self) -> usize {
        self.pad_dim - self.dim()
    }

    /// Measured phase of a padding mode (`λ = 0`).
    pub fn padding_phase(&self) -> f64 {
        0.5
    }

    pub fn clamped(&self) -> &[ClampRecord] {
        &self.clamped
    }

    /// Natural frequencies in Hz, same order as the eigenvalues.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.raw_eigenvalues
            .iter()
            .map(|l| l.sqrt() / (2.0 * PI))
            .collect()
    }

    pub fn manifest(&self, config: Option<&BeamConfig>) -> ProblemManifest {
        let f = self.frequencies_hz();
        ProblemManifest {
            config: config.cloned(),
            m0: self.dim(),
            pad_dim: self.pad_dim,
            alpha: self.alpha,
            scaled_lambda_min: *self.eigenvalues.last().unwrap(),
            scaled_lambda_max: self.eigenvalues[0],
            raw_lambda_min: *self.raw_eigenvalues.last().unwrap(),
            raw_lambda_max: self.raw_eigenvalues[0],
            fundamental_hz: *f.last().unwrap(),
            highest_hz: f[0],
            min_phase_gap: self.spectrum.cyclic_min_gap(),
            min_admissible_bits: crate::spectrum::min_admissible_bits(
                self.spectrum.cyclic_min_gap(),
            ),
            clamped: self.clamped.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub config: Option<BeamConfig>,
    pub m0: usize,
    pub pad_dim: usize,
    pub alpha: f64,
    pub scaled_lambda_min: f64,
    pub scaled_lambda_max: f64,
    pub raw_lambda_min: f64,
    pub raw_lambda_max: f64,
    pub fundamental_hz: f64,
    pub highest_hz: f64,
    pub min_phase_gap: f64,
    pub min_admissible_bits: Option<u32>,
    pub clamped: Vec<ClampRecord>,
}

/// `A = M^{-1/2} K M^{-1/2}` for a diagonal mass.
pub fn mass_normalized(k: &DMatrix<f64>, mass_diagonal: &[f64]) -> Result<DMatrix<f64>> {
    if k.nrows() != mass_diagonal.len() {
        return Err(Error::LengthMismatch {
            expected: k.nrows(),
            got: mass_diagonal.len(),
        });
    }
    if mass_diagonal.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidArgument(
            "mass entries must be positive".into(),
        ));
    }
    let s: Vec<f64> = mass_diagonal.iter().map(|m| 1.0 / m.sqrt()).collect();
    Ok(DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        k[(i, j)] * s[i] * s[j]
    }))
}

pub fn standardize(
    model: &FemModel,
    target_norm: f64,
    pad_to_power_of_two: bool,
) -> Result<StandardProblem> {
    let a = mass_normalized(&model.stiffness_dense(), &model.mass_diagonal)?;
    StandardProblem::from_symmetric(a, target_norm, pad_to_power_of_two)
}

/// Writes `stiffness.mtx`, `mass.txt`, `manifest.json` and `spectrum.json`.
pub fn write_model_files(model: &FemModel, problem: &StandardProblem, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    model.write_stiffness(std::io::BufWriter::new(std::fs::File::create(
        dir.join("stiffness.mtx"),
    )?))?;
    model.write_mass(std::io::BufWriter::new(std::fs::File::create(
        dir.join("mass.txt"),
    )?))?;
    let manifest = problem.manifest(Some(&model.config));
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    std::fs::write(dir.join("spectrum.json"), problem.spectrum().to_json()?)?;
    Ok(())
}
