//! The normalized Fejér kernel `F_N(x) / N` and the analytic bounds the
//! detection thresholds are built from.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `4 / π²`: the main-lobe floor of the normalized kernel on `[0, π/N]`.
pub const MAIN_LOBE_FLOOR: f64 = 4.0 / (PI * PI);

/// Below this `|sin(x/2)|` the kernel is evaluated from its Taylor expansion.
const SINGULAR_EPS: f64 = 1e-9;

/// `(1/N²) sin²(Nx/2) / sin²(x/2)`, equal to 1 at multiples of 2π.
pub fn fejer_normalized(n: u64, x: f64) -> f64 {
    let nf = n as f64;
    fejer_bins(n, nf * x / (2.0 * PI))
}

/// The normalized kernel with its argument given in grid bins:
/// `x = 2π·delta/N`. Used for QPE laws, where `delta = N(θ - a_j)` keeps
/// full precision even at `N = 2^40`.
pub fn fejer_bins(n: u64, delta: f64) -> f64 {
    let nf = n as f64;
    let wrapped = delta - nf * (delta / nf).round();
    let s = (PI * wrapped / nf).sin();
    if s.abs() < SINGULAR_EPS {
        let y = 2.0 * PI * wrapped / nf;
        return (1.0 - (nf * nf - 1.0) * y * y / 12.0).clamp(0.0, 1.0);
    }
    let frac = delta - delta.round();
    let num = (PI * frac).sin();
    ((num * num) / (nf * nf * s * s)).min(1.0)
}

/// Bound on the kernel over the band `[2kπ/N, 2(k+1)π/N]`:
/// `1/(k²π²) + (1 - 4/π²)/N²`.
pub fn sidelobe_bound(n: u64, k: u64) -> Result<f64> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "sidelobe bound needs N >= 4, got {n}"
        )));
    }
    if k < 1 || k > n / 2 - 1 {
        return Err(Error::InvalidArgument(format!(
            "sidelobe index k must be in 1..={}, got {k}",
            n / 2 - 1
        )));
    }
    let kf = k as f64;
    let nf = n as f64;
    Ok(1.0 / (kf * kf * PI * PI) + (1.0 - MAIN_LOBE_FLOOR) / (nf * nf))
}
