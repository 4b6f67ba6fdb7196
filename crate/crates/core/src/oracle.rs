//! Dense statevector simulation of textbook QPE for tiny unitaries.
//!
//! Nothing here touches the Fejér closed form: the ancilla register is put
//! through an explicit Hadamard layer, controlled powers `U^{2^t}` obtained by
//! repeated squaring, and an explicit inverse DFT matrix. Tests compare the
//! resulting marginals against [`crate::qpe_dist`].

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qpe_dist::{exact_weighted, ModeWeights};
use crate::spectrum::Spectrum;
use crate::torus::PhaseGrid;

pub type C64 = Complex<f64>;

pub const MAX_SYSTEM_DIM: usize = 16;
pub const MAX_ANCILLA_BITS: u32 = 8;
pub const MAX_TOTAL_DIM: usize = 4096;
const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SmallUnitary {
    matrix: DMatrix<C64>,
    /// Eigenphases and eigenvectors (columns) when built from them.
    eigen: Option<(Vec<f64>, DMatrix<C64>)>,
}

impl SmallUnitary {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        let m = matrix.nrows();
        if m == 0 || matrix.ncols() != m {
            return Err(Error::InvalidArgument("unitary must be square".into()));
        }
        if m > MAX_SYSTEM_DIM {
            return Err(Error::DimensionOverflow(format!(
                "system dimension {m} exceeds {MAX_SYSTEM_DIM}"
            )));
        }
        let dev = (matrix.adjoint() * &matrix - DMatrix::<C64>::identity(m, m))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev >= UNITARY_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not unitary (max deviation {dev:e})"
            )));
        }
        Ok(SmallUnitary {
            matrix,
            eigen: None,
        })
    }

    /// `U = V diag(e^{2πiθ_k}) V†`.
    pub fn from_eigen(phases: Vec<f64>, vectors: DMatrix<C64>) -> Result<Self> {
        if phases.len() != vectors.ncols() {
            return Err(Error::LengthMismatch {
                expected: vectors.ncols(),
                got: phases.len(),
            });
        }
        let diag = DVector::from_iterator(
            phases.len(),
            phases.iter().map(|t| C64::from_polar(1.0, 2.0 * PI * t)),
        );
        let m = &vectors * DMatrix::from_diagonal(&diag) * vectors.adjoint();
        let mut u = SmallUnitary::from_matrix(m)?;
        u.eigen = Some((phases, vectors));
        Ok(u)
    }

    /// Random eigenbasis with the given eigenphases.
    pub fn random_with_phases<R: Rng>(phases: Vec<f64>, rng: &mut R) -> Result<Self> {
        let v = random_unitary(phases.len(), rng);
        SmallUnitary::from_eigen(phases, v)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn eigenphases(&self) -> Option<&[f64]> {
        self.eigen.as_ref().map(|(p, _)| p.as_slice())
    }

    /// `|<ψ_k|init>|²` per known eigenvector.
    pub fn overlaps(&self, init: &DVector<C64>) -> Option<Vec<f64>> {
        let (_, v) = self.eigen.as_ref()?;
        Some(
            v.column_iter()
                .map(|col| col.dotc(init).norm_sqr())
                .collect(),
        )
    }

    pub fn pow2(&self, t: u32) -> DMatrix<C64> {
        let mut p = self.matrix.clone();
        for _ in 0..t {
            p = &p * &p;
        }
        p
    }
}

/// Haar-ish random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(m: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::<C64>::from_fn(m, m, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column phases so the law does not depend on the QR convention
    let mut q = q;
    for k in 0..m {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..m {
            q[(i, k)] *= ph;
        }
    }
    q
}

pub fn random_state<R: Rng>(m: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::<C64>::from_fn(m, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let n = v.norm();
    v / C64::new(n, 0.0)
}

fn hadamard_layer(bits: u32) -> DMatrix<f64> {
    let n = 1usize << bits;
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(
        n,
        n,
        |i, j| {
            if (i & j).count_ones() % 2 == 0 {
                s
            } else {
                -s
            }
        },
    )
}

/// `F†` with `F|x> = N^{-1/2} Σ_y e^{2πixy/N} |y>`.
fn inverse_dft(bits: u32) -> DMatrix<C64> {
    let n = 1usize << bits;
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |y, x| {
        let e = ((x * y) % n) as f64 / n as f64;
        C64::from_polar(s, -2.0 * PI * e)
    })
}

/// Marginal ancilla distribution of QPE with `n` ancilla bits on
/// `|0^n> ⊗ init`.
pub fn qpe_circuit_probabilities(
    u: &SmallUnitary,
    init: &DVector<C64>,
    bits: u32,
) -> Result<Vec<f64>> {
    let m = u.dim();
    if init.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: init.len(),
        });
    }
    if bits == 0 || bits > MAX_ANCILLA_BITS || m << bits > MAX_TOTAL_DIM {
        return Err(Error::DimensionOverflow(format!(
            "{bits} ancilla bits on a {m}-dimensional system exceeds {MAX_TOTAL_DIM} amplitudes"
        )));
    }
    let norm = init.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(norm));
    }

    let n = 1usize << bits;
    // rows: ancilla basis index, columns: system amplitudes
    let mut psi = DMatrix::<C64>::zeros(n, m);
    psi.row_mut(0).copy_from(&init.transpose());

    let h = hadamard_layer(bits).map(|x| C64::new(x, 0.0));
    psi = &h * psi;

    for t in 0..bits {
        let power = u.pow2(t);
        for j in 0..n {
            if (j >> t) & 1 == 1 {
                let row = psi.row(j).transpose();
                let new = &power * row;
                psi.row_mut(j).copy_from(&new.transpose());
            }
        }
    }

    psi = inverse_dft(bits) * psi;
    Ok(psi
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
        .collect())
}

/// `Ũ = U (Z ⊗ I)` for the block encoding
/// `U = [[A, √(I−A²)], [√(I−A²), −A]]` of a symmetric `A` with `‖A‖ < 1`.
/// Its eigenvalues are `e^{±i arccos λ_k}`.
pub fn twisted_block_encoding(a: &DMatrix<f64>) -> Result<SmallUnitary> {
    let m = a.nrows();
    if 2 * m > MAX_SYSTEM_DIM {
        return Err(Error::DimensionOverflow(format!(
            "block encoding of a {m}x{m} matrix exceeds {MAX_SYSTEM_DIM}"
        )));
    }
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|l| l.abs() >= 1.0) {
        return Err(Error::InvalidArgument(
            "block encoding needs ‖A‖ < 1".into(),
        ));
    }
    let s = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (1.0 - l * l).sqrt()))
        * eig.eigenvectors.transpose();
    let mut ut = DMatrix::<f64>::zeros(2 * m, 2 * m);
    ut.view_mut((0, 0), (m, m)).copy_from(a);
    ut.view_mut((0, m), (m, m)).copy_from(&(-&s));
    ut.view_mut((m, 0), (m, m)).copy_from(&s);
    ut.view_mut((m, m), (m, m)).copy_from(a);
    SmallUnitary::from_matrix(ut.map(|x| C64::new(x, 0.0)))
}

/// `|y₋> ⊗ |sys>` with `|y₋> = (|0> − i|1>)/√2` on the encoding qubit.
pub fn y_minus_tensor(sys: &DVector<C64>) -> DVector<C64> {
    let m = sys.len();
    let s = 1.0 / 2f64.sqrt();
    DVector::from_fn(2 * m, |i, _| {
        if i < m {
            sys[i] * s
        } else {
            sys[i - m] * C64::new(0.0, -s)
        }
    })
}

/// Matrix power by repeated multiplication.
pub fn unitary_power(u: &SmallUnitary, k: u32) -> Result<SmallUnitary> {
    let mut p = DMatrix::<C64>::identity(u.dim(), u.dim());
    for _ in 0..k {
        p = &p * u.matrix();
    }
    SmallUnitary::from_matrix(p)
}

/// Outcome of comparing circuit marginals with the closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub instances: usize,
    pub max_bin_error: f64,
    /// `(system dim, ancilla bits, max error)` per instance.
    pub per_instance: Vec<(usize, u32, f64)>,
}

/// Random instances with `M ≤ max_dim` and `1 ≤ n ≤ max_bits`: Haar eigenbasis,
/// uniform eigenphases, random initial state. Each circuit marginal is
/// compared bin by bin with the overlap-weighted Fejér mixture.
pub fn run_oracle_check(
    instances: usize,
    max_dim: usize,
    max_bits: u32,
    seed: u64,
) -> Result<OracleCheckReport> {
    if max_dim == 0 || max_dim > MAX_SYSTEM_DIM || max_bits == 0 || max_bits > MAX_ANCILLA_BITS {
        return Err(Error::InvalidArgument(format!(
            "oracle check needs 1 <= M <= {MAX_SYSTEM_DIM} and 1 <= n <= {MAX_ANCILLA_BITS}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_instance = Vec::with_capacity(instances);
    for _ in 0..instances {
        let m = rng.random_range(1..=max_dim);
        let bits = rng.random_range(1..=max_bits);
        if m << bits > MAX_TOTAL_DIM {
            continue;
        }
        let phases: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let u = SmallUnitary::random_with_phases(phases.clone(), &mut rng)?;
        let init = random_state(m, &mut rng);
        let p = qpe_circuit_probabilities(&u, &init, bits)?;
        let mut modes: Vec<(f64, f64)> =
            phases.into_iter().zip(u.overlaps(&init).unwrap()).collect();
        modes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let spectrum = Spectrum::new(modes.iter().map(|x| x.0))?;
        let weights = ModeWeights::normalized(modes.iter().map(|x| x.1).collect())?;
        let d = exact_weighted(&spectrum, &weights, &PhaseGrid::new(bits)?)?;
        let err = p
            .iter()
            .enumerate()
            .map(|(j, pj)| (pj - d.prob(j as u64)).abs())
            .fold(0.0, f64::max);
        per_instance.push((m, bits, err));
    }
    Ok(OracleCheckReport {
        instances: per_instance.len(),
        max_bin_error: per_instance.iter().map(|x| x.2).fold(0.0, f64::max),
        per_instance,
    })
}

/// Largest deviation of `(1/d) Σ_j |V[j,k]|²` from `1/d` over the columns
/// of `v`: averaging over computational basis states equalizes the weights.
pub fn basis_average_deviation(v: &DMatrix<C64>) -> f64 {
    let d = v.nrows() as f64;
    v.column_iter()
        .map(|c| (c.iter().map(|z| z.norm_sqr()).sum::<f64>() / d - 1.0 / d).abs())
        .fold(0.0, f64::max)
}
