//! Exact QPE measurement laws: a mixture of normalized Fejér kernels
//! centered on the eigenphases, weighted by squared overlaps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fejer::fejer_bins;
use crate::fem::StandardProblem;
use crate::spectrum::Spectrum;
use crate::torus::PhaseGrid;

/// Grids up to `2^22` points are tabulated; larger ones are evaluated on demand.
pub const DENSE_LIMIT_BITS: u32 = 22;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Nonnegative per-mode weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeWeights(Vec<f64>);

impl ModeWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if let Some(bad) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid weight {bad}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(ModeWeights(w))
    }

    /// Rescales nonnegative raw weights to unit sum.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidArgument(format!("weight total {sum}")));
        }
        ModeWeights::new(raw.into_iter().map(|x| x / sum).collect())
    }

    pub fn uniform(r: usize) -> Self {
        ModeWeights(vec![1.0 / r as f64; r])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Output law over the `N` grid bins.
#[derive(Debug, Clone)]
pub struct QpeDistribution {
    grid: PhaseGrid,
    spectrum: Spectrum,
    weights: ModeWeights,
    /// `N·θ_k`, exact because `N` is a power of two.
    scaled: Vec<f64>,
    dense: Option<Vec<f64>>,
}

impl QpeDistribution {
    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn weights(&self) -> &ModeWeights {
        &self.weights
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn dense(&self) -> Option<&[f64]> {
        self.dense.as_deref()
    }

    /// `p_j`, for any `j` (taken modulo `N`).
    pub fn prob(&self, j: u64) -> f64 {
        let j = j & (self.grid.size() - 1);
        match &self.dense {
            Some(p) => p[j as usize],
            None => self.eval(j),
        }
    }

    fn eval(&self, j: u64) -> f64 {
        let n = self.grid.size();
        let jf = j as f64;
        self.scaled
            .iter()
            .zip(self.weights.as_slice())
            .map(|(&u, &w)| w * fejer_bins(n, u - jf))
            .sum()
    }

    /// Forces tabulation regardless of grid size.
    pub fn tabulate(&self) -> Vec<f64> {
        match &self.dense {
            Some(p) => p.clone(),
            None => (0..self.grid.size()).map(|j| self.eval(j)).collect(),
        }
    }

    /// Writes `j,a_j,p_j` rows; only tabulated laws can be exported.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let p = self.dense.as_ref().ok_or_else(|| {
            Error::InvalidArgument("CSV export needs a tabulated distribution".into())
        })?;
        writeln!(out, "j,a_j,p_j")?;
        let nf = self.grid.size_f64();
        for (j, pj) in p.iter().enumerate() {
            writeln!(out, "{j},{:.17e},{:.17e}", j as f64 / nf, pj)?;
        }
        Ok(())
    }
}

/// `p_j = Σ_k w_k F̃_N(2π(θ_k - a_j))`.
pub fn exact_weighted(
    spectrum: &Spectrum,
    weights: &ModeWeights,
    grid: &PhaseGrid,
) -> Result<QpeDistribution> {
    if weights.len() != spectrum.len() {
        return Err(Error::LengthMismatch {
            expected: spectrum.len(),
            got: weights.len(),
        });
    }
    let nf = grid.size_f64();
    let scaled = spectrum.values().map(|t| t * nf).collect();
    let mut d = QpeDistribution {
        grid: *grid,
        spectrum: spectrum.clone(),
        weights: weights.clone(),
        scaled,
        dense: None,
    };
    if grid.bits() <= DENSE_LIMIT_BITS {
        d.dense = Some((0..grid.size()).map(|j| d.eval(j)).collect());
    }
    Ok(d)
}

/// The law when every eigenmode carries weight `1/r`.
pub fn state_averaged(spectrum: &Spectrum, grid: &PhaseGrid) -> QpeDistribution {
    exact_weighted(spectrum, &ModeWeights::uniform(spectrum.len()), grid)
        .expect("uniform weights match the spectrum length")
}

/// Squared components of row `j0` of the eigenvector matrix.
pub fn basis_weights(problem: &StandardProblem, j0: usize) -> Result<ModeWeights> {
    let m0 = problem.dim();
    if j0 >= m0 {
        return Err(Error::InvalidArgument(format!(
            "basis index {j0} outside 0..{m0}"
        )));
    }
    let v = problem.eigenvectors();
    ModeWeights::normalized((0..m0).map(|k| v[(j0, k)] * v[(j0, k)]).collect())
}

/// Law of one shot started from computational basis state `|j0>`.
pub fn conditional_on_basis(
    problem: &StandardProblem,
    j0: usize,
    grid: &PhaseGrid,
) -> Result<QpeDistribution> {
    let w = basis_weights(problem, j0)?;
    exact_weighted(problem.spectrum(), &w, grid)
}
