//! Bernoulli KL divergences and the Chernoff-type shot count that makes the
//! empirical threshold test succeed with probability at least `1 − δ`.

use serde::{Deserialize, Serialize};

use crate::detection::{constants, DetectionConstants};
use crate::error::{Error, Result};
use crate::torus::PhaseGrid;

fn check_shift(a: f64) -> Result<()> {
    if !(0.0..1.0 / 3.0).contains(&a) {
        return Err(Error::InvalidArgument(format!(
            "shift a = {a} outside [0, 1/3)"
        )));
    }
    Ok(())
}

/// `KL(Bern(x + a) ‖ Bern(x))`.
pub fn kl_plus(x: f64, a: f64) -> Result<f64> {
    check_shift(a)?;
    if !(x > 0.0 && x < 1.0 - a) {
        return Err(Error::InvalidArgument(format!(
            "H+ needs 0 < x < 1 - a, got x = {x}"
        )));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let y = x + a;
    Ok(y * (y / x).ln() + (1.0 - y) * ((1.0 - y) / (1.0 - x)).ln())
}

/// `KL(Bern(x − a) ‖ Bern(x))`.
pub fn kl_minus(x: f64, a: f64) -> Result<f64> {
    check_shift(a)?;
    if !(x > a && x < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "H- needs a < x < 1, got x = {x}"
        )));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let y = x - a;
    let first = if y == 0.0 { 0.0 } else { y * (y / x).ln() };
    Ok(first + (1.0 - y) * ((1.0 - y) / (1.0 - x)).ln())
}

fn gate(m_eff: usize, grid: &PhaseGrid) -> Result<DetectionConstants> {
    if grid.size() < 4 * m_eff as u64 {
        return Err(Error::Precondition(format!(
            "N = {} < 4·M = {}",
            grid.size(),
            4 * m_eff
        )));
    }
    constants(grid)
}

/// `(τ − σ)/2 − M d_N / 2`, the largest admissible margin `ε`.
pub fn epsilon_max(m_eff: usize, grid: &PhaseGrid) -> Result<f64> {
    if m_eff == 0 {
        return Err(Error::InvalidArgument("M must be positive".into()));
    }
    let c = gate(m_eff, grid)?;
    let eps = (c.tau - c.sigma) / 2.0 - m_eff as f64 * c.d_n / 2.0;
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!(
            "epsilon bound {eps} is not positive"
        )));
    }
    Ok(eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureBound {
    /// `2M exp(−K H⁻)`: some detection-set bin falls under the threshold.
    pub peak_miss: f64,
    /// `(N − M) exp(−K H⁺)`: some far bin rises over the threshold.
    pub false_positive: f64,
    /// Sum of both terms, capped at 1.
    pub two_term: f64,
    /// `(N + M) exp(−K H⁺)`, capped at 1.
    pub coarse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub m_eff: usize,
    pub n_bits: u32,
    pub grid_size: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub epsilon_max: f64,
    pub constants: DetectionConstants,
    /// Bernoulli mean `γ/M + d_N` and shift `ε/M` fed to the divergences.
    pub mean: f64,
    pub shift: f64,
    pub h_plus: f64,
    pub h_minus: f64,
    /// Smallest integer shot count meeting the bound.
    pub k_bound: u64,
    /// `k_bound` rounded up to three significant figures.
    pub suggested_shots: u64,
    /// Large-`M` approximation of the bound.
    pub asymptotic: f64,
    pub failure_at_bound: FailureBound,
}

struct Terms {
    c: DetectionConstants,
    eps_max: f64,
    mean: f64,
    shift: f64,
    h_plus: f64,
    h_minus: f64,
}

fn terms(m_eff: usize, grid: &PhaseGrid, epsilon: f64) -> Result<Terms> {
    if m_eff < 3 {
        return Err(Error::Precondition(format!(
            "M must be at least 3, got {m_eff}"
        )));
    }
    let c = gate(m_eff, grid)?;
    let eps_max = epsilon_max(m_eff, grid)?;
    if !(epsilon > 0.0 && epsilon <= eps_max) {
        return Err(Error::Precondition(format!(
            "epsilon {epsilon} outside (0, {eps_max}]"
        )));
    }
    let m = m_eff as f64;
    let mean = c.gamma / m + c.d_n;
    let shift = epsilon / m;
    Ok(Terms {
        c,
        eps_max,
        mean,
        shift,
        h_plus: kl_plus(mean, shift)?,
        h_minus: kl_minus(mean, shift)?,
    })
}

/// Rounds up to `digits` significant figures.
pub fn round_up_significant(k: u64, digits: u32) -> u64 {
    let len = (k as f64).log10().floor() as i32 + 1;
    let drop = (len - digits as i32).max(0) as u32;
    let unit = 10u64.pow(drop);
    k.div_ceil(unit) * unit
}

/// Shots sufficient for every bin to land on the correct side of the
/// empirical threshold with probability `≥ 1 − δ`. `epsilon` defaults to
/// its maximum.
pub fn shot_bound(
    m_eff: usize,
    grid: &PhaseGrid,
    delta: f64,
    epsilon: Option<f64>,
) -> Result<ShotPlan> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    let eps = match epsilon {
        Some(e) => e,
        None => epsilon_max(m_eff, grid)?,
    };
    let t = terms(m_eff, grid, eps)?;
    let m = m_eff as f64;
    let n = grid.size_f64();
    let log_term = ((n + m) / delta).ln();
    let k_bound = (log_term / t.h_plus).ceil() as u64;
    let g = t.c.gamma;
    let asymptotic = m * log_term / ((g + eps) * ((g + eps) / g).ln() - eps);
    Ok(ShotPlan {
        m_eff,
        n_bits: grid.bits(),
        grid_size: grid.size(),
        delta,
        epsilon: eps,
        epsilon_max: t.eps_max,
        constants: t.c,
        mean: t.mean,
        shift: t.shift,
        h_plus: t.h_plus,
        h_minus: t.h_minus,
        k_bound,
        suggested_shots: round_up_significant(k_bound, 3),
        asymptotic,
        failure_at_bound: failure_bound(k_bound, m_eff, grid, eps)?,
    })
}

/// Failure probability bound after `k` shots.
pub fn failure_bound(k: u64, m_eff: usize, grid: &PhaseGrid, epsilon: f64) -> Result<FailureBound> {
    let t = terms(m_eff, grid, epsilon)?;
    let m = m_eff as f64;
    let n = grid.size_f64();
    let kf = k as f64;
    let peak_miss = 2.0 * m * (-kf * t.h_minus).exp();
    let false_positive = (n - m) * (-kf * t.h_plus).exp();
    Ok(FailureBound {
        peak_miss,
        false_positive,
        two_term: (peak_miss + false_positive).min(1.0),
        coarse: ((n + m) * (-kf * t.h_plus).exp()).min(1.0),
    })
}
