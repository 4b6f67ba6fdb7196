//! Arithmetic on the circle R/Z, the N-point measurement grid and closed
//! neighborhoods of eigenphases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A phase expressed as a fraction of a full turn, always in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint(f64);

impl TorusPoint {
    /// Reduces `x` modulo 1.
    pub fn new(x: f64) -> Self {
        let r = x - x.floor();
        // x - floor(x) rounds up to 1.0 for tiny negative x
        if r >= 1.0 {
            TorusPoint(0.0)
        } else {
            TorusPoint(r)
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn shifted(self, delta: f64) -> Self {
        TorusPoint::new(self.0 + delta)
    }
}

impl From<f64> for TorusPoint {
    fn from(x: f64) -> Self {
        TorusPoint::new(x)
    }
}

/// `|x - y|_T`, the distance to the nearest integer translate.
pub fn torus_distance(x: TorusPoint, y: TorusPoint) -> f64 {
    let d = x.0 - y.0;
    let r = d - d.floor();
    r.min(1.0 - r)
}

/// The grid `A_N = { j / N }` with `N = 2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct PhaseGrid {
    bits: u32,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    n: u32,
}

impl TryFrom<GridRepr> for PhaseGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        PhaseGrid::new(r.n)
    }
}

impl From<PhaseGrid> for GridRepr {
    fn from(g: PhaseGrid) -> Self {
        GridRepr { n: g.bits }
    }
}

impl PhaseGrid {
    /// Largest supported ancilla count; keeps `j / N` exact in binary64.
    pub const MAX_BITS: u32 = 52;

    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > Self::MAX_BITS {
            return Err(Error::InvalidArgument(format!(
                "ancilla bit count must be in 1..={}, got {bits}",
                Self::MAX_BITS
            )));
        }
        Ok(PhaseGrid { bits })
    }

    /// Ancilla bit count `n`.
    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Grid size `N = 2^n`.
    #[inline]
    pub fn size(&self) -> u64 {
        1u64 << self.bits
    }

    #[inline]
    pub fn size_f64(&self) -> f64 {
        self.size() as f64
    }

    /// Grid point `a_j = j / N`, with `j` taken modulo `N`.
    #[inline]
    pub fn point(&self, j: i64) -> TorusPoint {
        TorusPoint(self.wrap(j) as f64 / self.size_f64())
    }

    /// Reduces an arbitrary integer index into `0..N`.
    #[inline]
    pub fn wrap(&self, j: i64) -> u64 {
        j.rem_euclid(self.size() as i64) as u64
    }

    #[inline]
    pub fn next(&self, j: u64) -> u64 {
        (j + 1) & (self.size() - 1)
    }

    #[inline]
    pub fn prev(&self, j: u64) -> u64 {
        j.wrapping_sub(1) & (self.size() - 1)
    }

    /// The closed `1/N`-neighborhood of a phase.
    pub fn neighborhood(&self, center: TorusPoint) -> TorusInterval {
        TorusInterval {
            center,
            half_width: 1.0 / self.size_f64(),
        }
    }
}

/// Closed arc `[center - half_width, center + half_width]` on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusInterval {
    pub center: TorusPoint,
    pub half_width: f64,
}

impl TorusInterval {
    pub fn new(center: impl Into<TorusPoint>, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "interval half width must be positive, got {half_width}"
            )));
        }
        Ok(TorusInterval {
            center: center.into(),
            half_width,
        })
    }

    /// Arc from `a` to `b` going in the positive direction.
    pub fn spanning(a: TorusPoint, b: TorusPoint) -> Self {
        let len = TorusPoint::new(b.0 - a.0).0;
        TorusInterval {
            center: a.shifted(len / 2.0),
            half_width: len / 2.0,
        }
    }

    pub fn contains(&self, x: TorusPoint) -> bool {
        interval_contains(self, x)
    }
}

pub fn interval_contains(interval: &TorusInterval, x: TorusPoint) -> bool {
    torus_distance(interval.center, x) <= interval.half_width
}

/// Grid indices inside `interval`, in cyclic order starting from the lowest
/// edge of the arc.
pub fn grid_points_in(interval: &TorusInterval, grid: &PhaseGrid) -> Result<Vec<u64>> {
    if !(interval.half_width < 0.5) {
        return Err(Error::InvalidArgument(
            "grid_points_in requires half width < 1/2".into(),
        ));
    }
    let n = grid.size_f64();
    let lo = ((interval.center.0 - interval.half_width) * n).ceil() as i64 - 1;
    let hi = ((interval.center.0 + interval.half_width) * n).floor() as i64 + 1;
    let mut out = Vec::new();
    for j in lo..=hi {
        let wrapped = grid.wrap(j);
        if interval.contains(grid.point(j)) && !out.contains(&wrapped) {
            out.push(wrapped);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tp(x: f64) -> TorusPoint {
        TorusPoint::new(x)
    }

    #[test]
    fn distance_examples() {
        assert!((torus_distance(tp(0.1), tp(0.9)) - 0.2).abs() < 1e-15);
        assert_eq!(torus_distance(tp(0.25), tp(0.25)), 0.0);
        assert_eq!(torus_distance(tp(0.0), tp(0.5)), 0.5);
    }

    #[test]
    fn reduction_stays_in_unit_interval() {
        assert_eq!(tp(-1e-20).value(), 0.0);
        assert_eq!(tp(1.0).value(), 0.0);
        assert!((tp(-0.25).value() - 0.75).abs() < 1e-15);
        assert!((tp(3.125).value() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn containment_examples() {
        let i = TorusInterval::new(0.95, 0.1).unwrap();
        assert!(i.contains(tp(0.02)));
        let i = TorusInterval::new(0.5, 0.01).unwrap();
        assert!(!i.contains(tp(0.52)));
        let g = PhaseGrid::new(6).unwrap();
        let theta = tp(0.3717);
        assert!(g.neighborhood(theta).contains(theta));
        assert!(TorusInterval::new(0.5, 0.0).is_err());
    }

    #[test]
    fn grid_points_examples() {
        let g = PhaseGrid::new(3).unwrap();
        let i = TorusInterval::new(0.5, 0.125).unwrap();
        assert_eq!(grid_points_in(&i, &g).unwrap(), vec![3, 4, 5]);
        let i = TorusInterval::new(0.99, 0.125).unwrap();
        assert_eq!(grid_points_in(&i, &g).unwrap(), vec![7, 0]);
        let i = TorusInterval::new(0.5, 0.01).unwrap();
        assert_eq!(grid_points_in(&i, &g).unwrap(), vec![4]);
        let i = TorusInterval::new(0.5, 0.5).unwrap();
        assert!(grid_points_in(&i, &g).is_err());
    }

    #[test]
    fn grid_wraps_indices() {
        let g = PhaseGrid::new(3).unwrap();
        assert_eq!(g.size(), 8);
        assert_eq!(g.wrap(-1), 7);
        assert_eq!(g.next(7), 0);
        assert_eq!(g.prev(0), 7);
        assert_eq!(g.point(9).value(), 0.125);
        assert!(PhaseGrid::new(0).is_err());
        assert!(PhaseGrid::new(53).is_err());
    }

    #[test]
    fn spanning_arc_handles_wrap() {
        let a = TorusInterval::spanning(tp(0.9), tp(0.1));
        assert!((a.half_width - 0.1).abs() < 1e-15);
        assert!(a.contains(tp(0.0)));
        assert!(!a.contains(tp(0.5)));
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
            let (x, y, z) = (tp(x), tp(y), tp(z));
            let dxy = torus_distance(x, y);
            prop_assert!((0.0..=0.5).contains(&dxy));
            prop_assert!((dxy - torus_distance(y, x)).abs() < 1e-15);
            prop_assert!(dxy <= torus_distance(x, z) + torus_distance(z, y) + 1e-15);
        }

        #[test]
        fn neighborhood_holds_two_or_three_points(theta in 0.0f64..1.0, bits in 2u32..20) {
            let g = PhaseGrid::new(bits).unwrap();
            let pts = grid_points_in(&g.neighborhood(tp(theta)), &g).unwrap();
            prop_assert!((2..=3).contains(&pts.len()), "{} points", pts.len());
            for w in pts.windows(2) {
                prop_assert_eq!(g.next(w[0]), w[1]);
            }
        }
    }
}
