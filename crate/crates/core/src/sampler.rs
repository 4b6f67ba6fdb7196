//! Exact shot sampling from QPE output laws.
//!
//! Shots are grouped into fixed-size chunks, each driven by its own ChaCha
//! stream keyed by `(seed, stream id)` and indexed by chunk number. Counts are
//! merged by addition, so results do not depend on how chunks are scheduled
//! across threads.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::StandardProblem;
use crate::qpe_dist::{ModeWeights, QpeDistribution};
use crate::spectrum::Spectrum;
use crate::torus::PhaseGrid;

/// Shots drawn from one ChaCha stream.
pub const CHUNK_SHOTS: u64 = 1 << 16;

/// Seed and substream id for reproducible sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotStream {
    pub seed: u64,
    pub stream: u64,
}

impl ShotStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        ShotStream { seed, stream }
    }

    /// Generator for chunk `chunk`.
    pub fn chunk_rng(&self, chunk: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        key[16..24].copy_from_slice(b"qpe-shot");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(chunk);
        rng
    }
}

/// Shot counts per bin; bins never hit are absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    grid: PhaseGrid,
    counts: HashMap<u64, u64>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct EmpiricalRepr {
    grid: PhaseGrid,
    shots: u64,
    counts: Vec<(u64, u64)>,
}

impl Serialize for EmpiricalDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EmpiricalRepr {
            grid: self.grid,
            shots: self.total,
            counts: self.sorted(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EmpiricalDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = EmpiricalRepr::deserialize(d)?;
        let e = EmpiricalDistribution::from_counts(r.grid, r.counts)
            .map_err(serde::de::Error::custom)?;
        if e.total != r.shots {
            return Err(serde::de::Error::custom(format!(
                "counts sum to {}, header says {}",
                e.total, r.shots
            )));
        }
        Ok(e)
    }
}

impl EmpiricalDistribution {
    pub fn new(grid: PhaseGrid) -> Self {
        EmpiricalDistribution {
            grid,
            counts: HashMap::new(),
            total: 0,
        }
    }

    /// Builds from `(bin, count)` pairs; repeated bins accumulate.
    pub fn from_counts(
        grid: PhaseGrid,
        pairs: impl IntoIterator<Item = (u64, u64)>,
    ) -> Result<Self> {
        let mut e = EmpiricalDistribution::new(grid);
        for (j, c) in pairs {
            if j >= grid.size() {
                return Err(Error::InvalidArgument(format!(
                    "bin {j} outside grid of {}",
                    grid.size()
                )));
            }
            e.add(j, c);
        }
        Ok(e)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    /// Total shots `K`.
    pub fn shots(&self) -> u64 {
        self.total
    }

    pub fn occupied(&self) -> usize {
        self.counts.len()
    }

    fn add(&mut self, j: u64, c: u64) {
        if c > 0 {
            *self.counts.entry(j).or_insert(0) += c;
            self.total += c;
        }
    }

    pub fn record(&mut self, j: u64) {
        self.add(j, 1);
    }

    pub fn merge(&mut self, other: &EmpiricalDistribution) -> Result<()> {
        if other.grid != self.grid {
            return Err(Error::InvalidArgument(
                "merging distributions on different grids".into(),
            ));
        }
        for (&j, &c) in &other.counts {
            self.add(j, c);
        }
        Ok(())
    }

    pub fn count(&self, j: u64) -> u64 {
        self.counts.get(&j).copied().unwrap_or(0)
    }

    /// `p̂_j = count_j / K`.
    pub fn frequency(&self, j: u64) -> f64 {
        self.frequency_of(self.count(j))
    }

    pub fn frequency_of(&self, count: u64) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            count as f64 / self.total as f64
        }
    }

    /// Occupied `(bin, count)` pairs in arbitrary order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&j, &c)| (j, c))
    }

    /// Occupied `(bin, count)` pairs sorted by bin.
    pub fn sorted(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable();
        v
    }

    /// Total-variation distance to a law given bin by bin on the whole grid.
    pub fn tv_distance(&self, p: &[f64]) -> Result<f64> {
        if p.len() as u64 != self.grid.size() {
            return Err(Error::LengthMismatch {
                expected: self.grid.size() as usize,
                got: p.len(),
            });
        }
        Ok(0.5
            * p.iter()
                .enumerate()
                .map(|(j, pj)| (self.frequency(j as u64) - pj).abs())
                .sum::<f64>())
    }

    /// Writes `j,count,p_hat` rows sorted by bin.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,count,p_hat")?;
        for (j, c) in self.sorted() {
            writeln!(out, "{j},{c},{:.17e}", self.frequency_of(c))?;
        }
        Ok(())
    }
}

/// Vose alias table for O(1) categorical draws.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 || n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "alias table over {n} outcomes"
            )));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "alias weights must be nonnegative with positive sum".into(),
            ));
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        Ok(AliasTable { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

/// Dominating envelope for the single-mode law centered at `θ`.
///
/// Bins are addressed by the offset `d = j − ⌊Nθ⌋` in `(−N/2, N/2]`. The two
/// nearest bins are exact atoms; offsets `d ≥ 2` and `d ≤ −1` use the
/// continuous `1/y²` law integrated over unit cells, scaled by `sin²(πt)/4`.
#[derive(Debug, Clone)]
pub struct FejerEnvelope {
    n: u64,
    base: i64,
    /// Fractional part of `Nθ`.
    t: f64,
    /// `sin²(π N θ)`
    s: f64,
    p0: f64,
    p1: f64,
    w_right: f64,
    w_left: f64,
    half: f64,
}

/// Outcome of one envelope draw attempt.
enum Proposal {
    Accept(i64),
    Reject,
}

impl FejerEnvelope {
    pub fn new(theta: f64, grid: &PhaseGrid) -> Self {
        let n = grid.size();
        let nf = grid.size_f64();
        let u = theta * nf;
        let base = u.floor();
        let t = u - base;
        let half = nf / 2.0;
        let s = (PI * t).sin().powi(2);
        let mut env = FejerEnvelope {
            n,
            base: base as i64,
            t,
            s,
            p0: 0.0,
            p1: 0.0,
            w_right: (1.0 / (1.5 - t) - 1.0 / (half + 0.5 - t)).max(0.0),
            w_left: (1.0 / (t + 0.5) - 1.0 / (t + half - 0.5)).max(0.0),
            half,
        };
        if t == 0.0 {
            env.p0 = 1.0;
        } else {
            env.p0 = env.prob(0);
            env.p1 = env.prob(1);
        }
        env
    }

    pub fn is_point_mass(&self) -> bool {
        self.t == 0.0
    }

    /// Admissible offsets `(−N/2, N/2]`.
    pub fn offsets(&self) -> std::ops::RangeInclusive<i64> {
        let h = (self.n / 2) as i64;
        (1 - h)..=h
    }

    /// Bin index of offset `d`.
    pub fn bin(&self, d: i64) -> u64 {
        (self.base + d).rem_euclid(self.n as i64) as u64
    }

    /// Exact single-mode probability `sin²(πt) / (N² sin²(π(t − d)/N))`.
    pub fn prob(&self, d: i64) -> f64 {
        if self.t == 0.0 {
            return if d == 0 { 1.0 } else { 0.0 };
        }
        let den = self.n as f64 * (PI * (self.t - d as f64) / self.n as f64).sin();
        self.s / (den * den)
    }

    fn tail_cell(&self, d: i64) -> f64 {
        let y = (self.t - d as f64).abs();
        1.0 / (y - 0.5) - 1.0 / (y + 0.5)
    }

    /// Unnormalized proposal mass of offset `d`.
    pub fn proposal_mass(&self, d: i64) -> f64 {
        match d {
            0 => self.p0,
            1 => self.p1,
            _ if self.t == 0.0 => 0.0,
            _ => 0.25 * self.s * self.tail_cell(d),
        }
    }

    /// Probability that a proposal at `d` is accepted.
    pub fn acceptance(&self, d: i64) -> f64 {
        match d {
            0 | 1 => 1.0,
            _ => {
                let e = self.proposal_mass(d);
                if e == 0.0 {
                    0.0
                } else {
                    (self.prob(d) / e).min(1.0)
                }
            }
        }
    }

    /// Total proposal mass `Z`; the mean acceptance rate is `1/Z`.
    pub fn total_mass(&self) -> f64 {
        if self.t == 0.0 {
            1.0
        } else {
            self.p0 + self.p1 + 0.25 * self.s * (self.w_right + self.w_left)
        }
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Proposal {
        if self.t == 0.0 {
            return Proposal::Accept(0);
        }
        let v = rng.random::<f64>() * self.total_mass();
        if v < self.p0 {
            return Proposal::Accept(0);
        }
        if v < self.p0 + self.p1 {
            return Proposal::Accept(1);
        }
        let u: f64 = rng.random();
        let right = v < self.p0 + self.p1 + 0.25 * self.s * self.w_right;
        let d = if right {
            let y = 1.0 / (1.0 / (1.5 - self.t) - u * self.w_right);
            ((y + self.t + 0.5).floor() as i64)
                .min(self.half as i64)
                .max(2)
        } else {
            let y = 1.0 / (1.0 / (self.t + 0.5) - u * self.w_left);
            -((y - self.t + 0.5).floor() as i64)
                .min(self.half as i64 - 1)
                .max(1)
        };
        if rng.random::<f64>() < self.prob(d) / self.proposal_mass(d) {
            Proposal::Accept(d)
        } else {
            Proposal::Reject
        }
    }

    /// Draws one bin, returning it with the number of proposals used.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let mut tries = 0;
        loop {
            tries += 1;
            if let Proposal::Accept(d) = self.propose(rng) {
                return (self.bin(d), tries);
            }
        }
    }
}

/// Proposal and acceptance totals from a rejection run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub shots: u64,
    pub proposals: u64,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.shots as f64 / self.proposals as f64
        }
    }
}

fn run_chunks<F>(
    grid: PhaseGrid,
    shots: u64,
    stream: ShotStream,
    draw: F,
) -> (EmpiricalDistribution, SamplerStats)
where
    F: Fn(&mut ChaCha8Rng) -> (u64, u64) + Sync,
{
    let chunks = shots.div_ceil(CHUNK_SHOTS);
    let parts: Vec<(HashMap<u64, u64>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.chunk_rng(c);
            let len = CHUNK_SHOTS.min(shots - c * CHUNK_SHOTS);
            let mut counts = HashMap::new();
            let mut proposals = 0;
            for _ in 0..len {
                let (j, tries) = draw(&mut rng);
                *counts.entry(j).or_insert(0u64) += 1;
                proposals += tries;
            }
            (counts, proposals)
        })
        .collect();
    let mut out = EmpiricalDistribution::new(grid);
    let mut stats = SamplerStats {
        shots,
        proposals: 0,
    };
    for (counts, proposals) in parts {
        for (j, c) in counts {
            out.add(j, c);
        }
        stats.proposals += proposals;
    }
    (out, stats)
}

/// `K` categorical draws from a tabulated law.
pub fn sample_enumeration(
    d: &QpeDistribution,
    shots: u64,
    stream: ShotStream,
) -> Result<EmpiricalDistribution> {
    let p = d.dense().ok_or_else(|| {
        Error::InvalidArgument("enumeration sampling needs a tabulated distribution".into())
    })?;
    let table = AliasTable::new(p)?;
    Ok(run_chunks(*d.grid(), shots, stream, |rng| {
        (table.sample(rng) as u64, 1)
    })
    .0)
}

/// Mixture sampler: mode by weight, then bin by rejection from that mode's
/// Fejér law. Works for any grid size.
pub fn sample_rejection(
    s: &Spectrum,
    weights: &ModeWeights,
    grid: &PhaseGrid,
    shots: u64,
    stream: ShotStream,
) -> Result<EmpiricalDistribution> {
    Ok(sample_rejection_with_stats(s, weights, grid, shots, stream)?.0)
}

pub fn sample_rejection_with_stats(
    s: &Spectrum,
    weights: &ModeWeights,
    grid: &PhaseGrid,
    shots: u64,
    stream: ShotStream,
) -> Result<(EmpiricalDistribution, SamplerStats)> {
    if weights.len() != s.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            got: weights.len(),
        });
    }
    let modes = AliasTable::new(weights.as_slice())?;
    let envs: Vec<FejerEnvelope> = s.values().map(|t| FejerEnvelope::new(t, grid)).collect();
    Ok(run_chunks(*grid, shots, stream, |rng| {
        envs[modes.sample(rng)].sample(rng)
    }))
}

/// The physical protocol: each shot prepares a uniformly random basis state
/// `|j₀⟩`, which selects mode `k` with probability `V[j₀,k]²`.
pub fn two_stage_sample(
    problem: &StandardProblem,
    grid: &PhaseGrid,
    shots: u64,
    stream: ShotStream,
) -> Result<EmpiricalDistribution> {
    let m0 = problem.dim();
    let v = problem.eigenvectors();
    let rows: Vec<AliasTable> = (0..m0)
        .into_par_iter()
        .map(|j0| AliasTable::new(&(0..m0).map(|k| v[(j0, k)] * v[(j0, k)]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let envs: Vec<FejerEnvelope> = problem
        .spectrum()
        .values()
        .map(|t| FejerEnvelope::new(t, grid))
        .collect();
    Ok(run_chunks(*grid, shots, stream, |rng| {
        let j0 = rng.random_range(0..m0);
        envs[rows[j0].sample(rng)].sample(rng)
    })
    .0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fejer::fejer_bins;
    use crate::qpe_dist::state_averaged;

    fn grid(bits: u32) -> PhaseGrid {
        PhaseGrid::new(bits).unwrap()
    }

    #[test]
    fn alias_table_is_exact() {
        let w = [0.1, 0.0, 0.5, 0.25, 0.15];
        let t = AliasTable::new(&w).unwrap();
        let n = w.len() as f64;
        let mut mass = [0.0; 5];
        for i in 0..w.len() {
            mass[i] += t.prob[i] / n;
            mass[t.alias[i] as usize] += (1.0 - t.prob[i]) / n;
        }
        for i in 0..w.len() {
            assert!((mass[i] - w[i]).abs() < 1e-15);
        }
        assert!(AliasTable::new(&[]).is_err());
        assert!(AliasTable::new(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn envelope_dominates_and_reconstructs() {
        for bits in [1u32, 2, 3, 6, 9] {
            let g = grid(bits);
            for &theta in &[0.1, 0.37, 0.999, 0.5 + 1e-9, 0.0001] {
                let env = FejerEnvelope::new(theta, &g);
                let z = env.total_mass();
                let mut sum = 0.0;
                for d in env.offsets() {
                    let p = fejer_bins(g.size(), theta * g.size_f64() - env.bin(d) as f64);
                    assert!(env.proposal_mass(d) >= p * (1.0 - 1e-12));
                    let got = env.proposal_mass(d) * env.acceptance(d);
                    assert!((got - p).abs() < 1e-12, "bits {bits} theta {theta} d {d}");
                    sum += env.proposal_mass(d);
                }
                assert!((sum - z).abs() < 1e-9 * z);
            }
        }
    }

    #[test]
    fn point_mass_on_grid() {
        let g = grid(27);
        let s = Spectrum::new([12345.0 / g.size_f64()]).unwrap();
        let e = sample_rejection(
            &s,
            &ModeWeights::uniform(1),
            &g,
            1000,
            ShotStream::new(1, 0),
        )
        .unwrap();
        assert_eq!(e.sorted(), vec![(12345, 1000)]);
    }

    #[test]
    fn enumeration_point_mass() {
        let g = grid(3);
        let d = state_averaged(&Spectrum::new([0.25]).unwrap(), &g);
        let e = sample_enumeration(&d, 1000, ShotStream::new(3, 0)).unwrap();
        assert_eq!(e.sorted(), vec![(2, 1000)]);
    }

    #[test]
    fn chunking_is_deterministic() {
        let g = grid(10);
        let s = Spectrum::new([0.123, 0.654]).unwrap();
        let w = ModeWeights::uniform(2);
        let k = 3 * CHUNK_SHOTS + 17;
        let a = sample_rejection(&s, &w, &g, k, ShotStream::new(5, 1)).unwrap();
        let b = sample_rejection(&s, &w, &g, k, ShotStream::new(5, 1)).unwrap();
        let c = sample_rejection(&s, &w, &g, k, ShotStream::new(5, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.shots(), k);
    }

    #[test]
    fn merge_and_csv() {
        let g = grid(3);
        let mut a = EmpiricalDistribution::from_counts(g, [(1, 2), (5, 3)]).unwrap();
        let b = EmpiricalDistribution::from_counts(g, [(5, 1), (7, 4)]).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.shots(), 10);
        assert_eq!(a.count(5), 4);
        assert!((a.frequency(7) - 0.4).abs() < 1e-15);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("j,count,p_hat\n1,2,"));
        assert!(a.merge(&EmpiricalDistribution::new(grid(4))).is_err());
        assert!(EmpiricalDistribution::from_counts(g, [(8, 1)]).is_err());
        let json = serde_json::to_string(&a).unwrap();
        let back: EmpiricalDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn uniform_enumeration_concentrates() {
        let g = grid(2);
        let s = Spectrum::new([0.125, 0.375, 0.625, 0.875]).unwrap();
        // half-bin offsets do not give a uniform law; use on-grid phases
        let s_grid = Spectrum::new([0.0, 0.25, 0.5, 0.75]).unwrap();
        let d = state_averaged(&s_grid, &g);
        let e = sample_enumeration(&d, 4_000_000, ShotStream::new(11, 0)).unwrap();
        for j in 0..4 {
            assert!((e.frequency(j) - 0.25).abs() < 0.002);
        }
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn acceptance_rate_at_large_grid() {
        let g = grid(27);
        let s = Spectrum::new([0.1234567891]).unwrap();
        let (_, stats) = sample_rejection_with_stats(
            &s,
            &ModeWeights::uniform(1),
            &g,
            100_000,
            ShotStream::new(2, 0),
        )
        .unwrap();
        assert!(
            stats.acceptance_rate() >= 0.3,
            "{}",
            stats.acceptance_rate()
        );
        let env = FejerEnvelope::new(0.5 / g.size_f64(), &g);
        assert!(1.0 / env.total_mass() > 0.7);
    }
}
