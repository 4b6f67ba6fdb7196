//! Eigenphase sets, their cyclic separation, and the map from scaled matrix
//! eigenvalues to measured phases.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::torus::{torus_distance, PhaseGrid, TorusPoint};

/// Two phases closer than this are treated as the same eigenphase.
pub const DUPLICATE_TOL: f64 = 1e-15;

/// Eigenvalues closer than this to the domain edge are clamped inward.
pub const CLAMP_EPS: f64 = 1e-12;

/// How far outside `(0, 1)` an eigenvalue may fall and still be clamped
/// (rounding noise) rather than rejected.
pub const CLAMP_SLACK: f64 = 1e-9;

/// Distinct eigenphases sorted ascending on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    phases: Vec<TorusPoint>,
}

impl Spectrum {
    /// Sorts `phases` and rejects near-duplicates (cyclically).
    pub fn new(phases: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut v: Vec<TorusPoint> = phases.into_iter().map(TorusPoint::new).collect();
        if v.is_empty() {
            return Err(Error::TooFewPhases { needed: 1, got: 0 });
        }
        if v.iter().any(|p| !p.value().is_finite()) {
            return Err(Error::InvalidArgument("non-finite phase".into()));
        }
        v.sort_by(|a, b| a.value().total_cmp(&b.value()));
        let s = Spectrum { phases: v };
        if s.len() >= 2 {
            for k in 0..s.len() {
                let (a, b) = (s.phases[k], s.phases[(k + 1) % s.len()]);
                if torus_distance(a, b) <= DUPLICATE_TOL {
                    return Err(Error::DuplicatePhase(a.value()));
                }
            }
        }
        Ok(s)
    }

    pub fn phases(&self) -> &[TorusPoint] {
        &self.phases
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.phases.iter().map(|p| p.value())
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Cyclic minimum gap, defined as 1 for a single phase.
    pub fn cyclic_min_gap(&self) -> f64 {
        if self.len() < 2 {
            return 1.0;
        }
        (0..self.len())
            .map(|k| torus_distance(self.phases[k], self.phases[(k + 1) % self.len()]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_gap(&self) -> Result<SeparationReport> {
        if self.len() < 2 {
            return Err(Error::TooFewPhases {
                needed: 2,
                got: self.len(),
            });
        }
        let mut best = (f64::INFINITY, 0usize);
        for k in 0..self.len() {
            let g = torus_distance(self.phases[k], self.phases[(k + 1) % self.len()]);
            if g < best.0 {
                best = (g, k);
            }
        }
        let min_gap = best.0;
        Ok(SeparationReport {
            min_gap,
            argmin: best.1,
            n_min: min_admissible_bits(min_gap),
        })
    }

    /// `N >= 4r` and `3/N <= min gap`.
    pub fn peak_hypotheses_hold(&self, grid: &PhaseGrid) -> bool {
        grid.size() >= 4 * self.len() as u64 && 3.0 / grid.size_f64() <= self.cyclic_min_gap()
    }

    /// Same as [`Self::peak_hypotheses_hold`] with strict separation `3/N < min gap`.
    pub fn sample_hypotheses_hold(&self, grid: &PhaseGrid) -> bool {
        grid.size() >= 4 * self.len() as u64 && 3.0 / grid.size_f64() < self.cyclic_min_gap()
    }

    /// Serializes phases as 17-significant-digit decimal strings.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Smallest `n` with `3 / 2^n < gap`, if any fits in a supported grid.
pub fn min_admissible_bits(gap: f64) -> Option<u32> {
    (1..=PhaseGrid::MAX_BITS).find(|&n| 3.0 / ((1u64 << n) as f64) < gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub min_gap: f64,
    /// Index `k` of the closest pair `(θ_k, θ_{k+1})`.
    pub argmin: usize,
    /// Smallest ancilla count with `3/N < min_gap`.
    pub n_min: Option<u32>,
}

impl SeparationReport {
    pub fn satisfies_3_over_n(&self, grid: &PhaseGrid) -> bool {
        3.0 / grid.size_f64() <= self.min_gap
    }
}

pub fn format_phase(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Spectrum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.phases.iter().map(|p| format_phase(p.value())))
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Num {
            Str(String),
            F(f64),
        }
        let raw: Vec<Num> = Vec::deserialize(d)?;
        let mut vals = Vec::with_capacity(raw.len());
        for r in raw {
            vals.push(match r {
                Num::F(x) => x,
                Num::Str(s) => s.trim().parse::<f64>().map_err(serde::de::Error::custom)?,
            });
        }
        Spectrum::new(vals).map_err(serde::de::Error::custom)
    }
}

/// An eigenvalue that sat on or just outside the `(0, 1)` edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampRecord {
    pub index: usize,
    pub original: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseMapping {
    pub spectrum: Spectrum,
    pub clamped: Vec<ClampRecord>,
}

/// Phase measured for a scaled eigenvalue when kickback starts at the fourth
/// power of the twisted block encoding: `2·arccos(λ)/π`.
#[inline]
pub fn phase_of_eigenvalue(lambda: f64) -> f64 {
    2.0 * lambda.acos() / PI
}

/// Inverse of [`phase_of_eigenvalue`].
#[inline]
pub fn eigenvalue_of_phase(phase: f64) -> f64 {
    (PI * phase / 2.0).cos()
}

pub fn phases_from_eigenvalues(lambdas: &[f64]) -> Result<PhaseMapping> {
    let mut clamped = Vec::new();
    let mut phases = Vec::with_capacity(lambdas.len());
    for (index, &l) in lambdas.iter().enumerate() {
        if !l.is_finite() || l <= -CLAMP_SLACK || l >= 1.0 + CLAMP_SLACK {
            return Err(Error::EigenvalueOutOfDomain { index, value: l });
        }
        let c = l.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
        if c != l {
            clamped.push(ClampRecord {
                index,
                original: l,
                clamped: c,
            });
        }
        phases.push(phase_of_eigenvalue(c));
    }
    Ok(PhaseMapping {
        spectrum: Spectrum::new(phases)?,
        clamped,
    })
}

/// `r` random phases whose cyclic gaps are all at least `min_sep_bins / N`.
///
/// The gap vector is a floor plus a uniformly random split of the remaining
/// slack (flat Dirichlet), rotated by a uniform offset.
pub fn synthetic_spectrum(r: usize, n: u64, min_sep_bins: f64, seed: u64) -> Result<Spectrum> {
    if r == 0 {
        return Err(Error::TooFewPhases { needed: 1, got: 0 });
    }
    if !(min_sep_bins >= 3.0) {
        return Err(Error::InvalidArgument(format!(
            "minimum separation must be at least 3 bins, got {min_sep_bins}"
        )));
    }
    if n < 4 * r as u64 {
        return Err(Error::InfeasiblePacking(format!(
            "N = {n} < 4r = {}",
            4 * r
        )));
    }
    let floor = min_sep_bins / n as f64;
    let slack = 1.0 - r as f64 * floor;
    if r > 1 && slack <= 0.0 {
        return Err(Error::InfeasiblePacking(format!(
            "{r} phases with gap {floor} do not fit on the circle"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: f64 = rng.random();
    if r == 1 {
        return Spectrum::new([offset]);
    }
    let e: Vec<f64> = (0..r).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    // keep a hair above the floor so rounding in the cumulative sum cannot
    // push an adjacent gap below it
    let floor_eff = floor * (1.0 + 1e-9);
    let slack_eff = 1.0 - r as f64 * floor_eff;
    let mut acc = offset;
    let mut phases = Vec::with_capacity(r);
    for ei in &e {
        phases.push(acc);
        acc += floor_eff + slack_eff * ei / total;
    }
    Spectrum::new(phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn min_gap_examples() {
        let s = Spectrum::new([0.1, 0.5, 0.9]).unwrap();
        let rep = s.min_gap().unwrap();
        assert!((rep.min_gap - 0.2).abs() < 1e-15);
        let s = Spectrum::new([0.0, 0.5]).unwrap();
        assert_eq!(s.min_gap().unwrap().min_gap, 0.5);
        assert!(Spectrum::new([0.3]).unwrap().min_gap().is_err());
    }

    #[test]
    fn admissible_bits_rule() {
        // 3/2^27 = 2.235e-8 < 3.58e-8 <= 3/2^26 = 4.47e-8
        assert_eq!(min_admissible_bits(3.58e-8), Some(27));
        assert_eq!(min_admissible_bits(0.2), Some(4));
        // boundary: 3/16 is not strictly below 3/16
        assert_eq!(min_admissible_bits(3.0 / 16.0), Some(5));
        assert_eq!(min_admissible_bits(0.0), None);
    }

    #[test]
    fn duplicate_phases_rejected() {
        assert!(matches!(
            Spectrum::new([0.25, 0.25]),
            Err(Error::DuplicatePhase(_))
        ));
        assert!(Spectrum::new([0.0, 1.0 - 1e-17]).is_err());
        assert!(Spectrum::new(Vec::<f64>::new()).is_err());
    }

    #[test]
    fn eigenvalue_mapping_examples() {
        let m = phases_from_eigenvalues(&[(PI / 8.0).cos()]).unwrap();
        assert!((m.spectrum.phases()[0].value() - 0.25).abs() < 1e-15);
        assert!(m.clamped.is_empty());

        // independently: 2*acos(x)/pi via atan2 form
        let oracle = |x: f64| 2.0 * (1.0f64 - x * x).sqrt().atan2(x) / PI;
        let m = phases_from_eigenvalues(&[0.9, 0.5, 0.1]).unwrap();
        let got: Vec<f64> = m.spectrum.values().collect();
        let want = [oracle(0.9), oracle(0.5), oracle(0.1)];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14);
        }
        assert!((got[0] - 0.287_132_586_257_4).abs() < 1e-12);
        assert!((got[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((got[2] - 0.936_231_439_141_5).abs() < 1e-12);
    }

    #[test]
    fn edge_eigenvalues_clamped_or_rejected() {
        let m = phases_from_eigenvalues(&[1.0 - 1e-16, 0.5]).unwrap();
        assert_eq!(m.clamped.len(), 1);
        assert_eq!(m.clamped[0].clamped, 1.0 - CLAMP_EPS);
        let m = phases_from_eigenvalues(&[1.0]).unwrap();
        assert_eq!(m.clamped.len(), 1);
        assert!(phases_from_eigenvalues(&[1.5]).is_err());
        assert!(phases_from_eigenvalues(&[-0.1]).is_err());
        assert!(phases_from_eigenvalues(&[f64::NAN]).is_err());
        assert!(matches!(
            phases_from_eigenvalues(&[0.5, 0.5]),
            Err(Error::DuplicatePhase(_))
        ));
    }

    #[test]
    fn synthetic_examples() {
        let s = synthetic_spectrum(4, 64, 3.0, 11).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.cyclic_min_gap() >= 3.0 / 64.0);
        assert!(synthetic_spectrum(16, 64, 3.0, 1).is_ok());
        assert!(synthetic_spectrum(17, 64, 3.0, 1).is_err());
        assert!(synthetic_spectrum(4, 64, 2.0, 1).is_err());
        assert_eq!(synthetic_spectrum(1, 8, 3.0, 5).unwrap().len(), 1);
        assert_eq!(
            synthetic_spectrum(8, 256, 3.0, 42).unwrap(),
            synthetic_spectrum(8, 256, 3.0, 42).unwrap()
        );
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let s = synthetic_spectrum(10, 1024, 3.0, 3).unwrap();
        let text = s.to_json().unwrap();
        assert!(text.contains('"'));
        assert_eq!(Spectrum::from_json(&text).unwrap(), s);
        let t = Spectrum::from_json("[0.25, \"0.5\"]").unwrap();
        assert_eq!(t.len(), 2);
    }

    proptest! {
        #[test]
        fn mapping_is_decreasing_and_invertible(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            prop_assume!((a - b).abs() > 1e-9);
            let (pa, pb) = (phase_of_eigenvalue(a), phase_of_eigenvalue(b));
            prop_assert_eq!(a > b, pa < pb);
            prop_assert!((eigenvalue_of_phase(pa) - a).abs() < 1e-12);
        }

        #[test]
        fn synthetic_meets_hypotheses(r in 1usize..16, bits in 6u32..11, seed in 0u64..1000) {
            let n = 1u64 << bits;
            prop_assume!(n >= 4 * r as u64);
            let s = synthetic_spectrum(r, n, 3.0, seed).unwrap();
            let g = PhaseGrid::new(bits).unwrap();
            prop_assert!(s.peak_hypotheses_hold(&g));
        }
    }
}
