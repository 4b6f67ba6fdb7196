//! End-to-end modal experiments: beam model, phase gate, shot budget,
//! sampling, detection, estimation and scoring against the known spectrum.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{
    check_peak_theorem, check_sample_theorem, detect_empirical, detect_exact, estimate_phases,
    frequency_of_phase, nearest_phase, PeakTheoremReport, PhaseEstimate,
};
use crate::error::{Error, Result};
use crate::fem::{
    build_cantilever, standardize, BeamConfig, ProblemManifest, StandardProblem,
    DEFAULT_TARGET_NORM,
};
use crate::qpe_dist::{state_averaged, ModeWeights};
use crate::sampler::{sample_rejection, two_stage_sample, ShotStream};
use crate::shots::{shot_bound, ShotPlan};
use crate::spectrum::{min_admissible_bits, Spectrum};
use crate::torus::{torus_distance, PhaseGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Random basis state per shot, then mode, then bin.
    TwoStage,
    /// Mode drawn with weight `1/m₀`, then bin.
    Rejection,
}

fn default_delta() -> f64 {
    0.001
}
fn default_fractions() -> Vec<f64> {
    vec![1.0]
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_trials() -> usize {
    1
}
fn default_target_norm() -> f64 {
    DEFAULT_TARGET_NORM
}
fn default_sampler() -> SamplerKind {
    SamplerKind::TwoStage
}

/// Experiment description, read from JSON. Only `mode` is required; the beam
/// defaults to the mode's mesh and `n` to the smallest admissible value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub beam: Option<BeamConfig>,
    /// Ancilla bits; `None` picks the smallest `n` with `3/2^n` below the gap.
    #[serde(default)]
    pub n: Option<u32>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Baseline shot count; `None` uses the bound rounded to three figures.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default = "default_fractions")]
    pub shot_fractions: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials_per_point: usize,
    #[serde(default = "default_target_norm")]
    pub target_norm: f64,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerKind,
    /// Run the exact-law detection checks as well.
    #[serde(default)]
    pub check_exact: bool,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            beam: None,
            n: None,
            delta: default_delta(),
            shots: None,
            shot_fractions: default_fractions(),
            seeds: default_seeds(),
            trials_per_point: default_trials(),
            target_norm: default_target_norm(),
            sampler: default_sampler(),
            check_exact: false,
        }
    }

    /// All-mode detection at five multiples of the shot bound.
    pub fn experiment1(mode: Mode) -> Self {
        ExperimentConfig {
            shot_fractions: vec![0.25, 0.5, 0.75, 1.0, 1.5],
            ..ExperimentConfig::new(mode)
        }
    }

    /// Search for the critical shot count, three seeds per level.
    pub fn experiment2(mode: Mode) -> Self {
        ExperimentConfig {
            shot_fractions: vec![0.005, 0.01, 0.02, 0.03, 0.05, 0.1],
            seeds: vec![1, 2, 3],
            ..ExperimentConfig::new(mode)
        }
    }

    pub fn beam(&self) -> BeamConfig {
        self.beam.clone().unwrap_or_else(|| match self.mode {
            Mode::Full => BeamConfig::default(),
            Mode::Desk => BeamConfig::desk(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.beam().validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if self.shot_fractions.is_empty()
            || self
                .shot_fractions
                .iter()
                .any(|f| !(*f > 0.0) || !f.is_finite())
        {
            return Err(Error::InvalidArgument(
                "shot fractions must be positive".into(),
            ));
        }
        if self.seeds.is_empty() || self.trials_per_point == 0 {
            return Err(Error::InvalidArgument(
                "need at least one seed and one trial".into(),
            ));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument(
                "baseline shot count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Greedy nearest-on-torus matching of estimates to true phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(estimate index, truth index, |error|_T)`
    pub pairs: Vec<(usize, usize, f64)>,
    pub undetected: Vec<usize>,
    pub spurious: Vec<usize>,
    pub phase_rmse: f64,
    pub max_phase_error: f64,
}

impl MatchResult {
    pub fn matched(&self) -> usize {
        self.pairs.len()
    }
}

/// Each estimate may claim a true phase within `1/N`; candidate pairs are
/// assigned in order of increasing distance.
pub fn match_and_score(
    estimates: &[PhaseEstimate],
    truth: &Spectrum,
    g: &PhaseGrid,
) -> MatchResult {
    let radius = 1.0 / g.size_f64();
    let mut cand: Vec<(usize, usize, f64)> = Vec::new();
    if !truth.is_empty() {
        for (i, e) in estimates.iter().enumerate() {
            let k = nearest_phase(truth, e.value);
            let r = truth.len();
            // the nearest phase and its neighbors cover every phase within 1/N
            for kk in [k, (k + 1) % r, (k + r - 1) % r] {
                let d = torus_distance(truth.phases()[kk], e.value);
                if d <= radius {
                    cand.push((i, kk, d));
                }
            }
        }
    }
    cand.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    cand.dedup();
    let mut est_used = vec![false; estimates.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (i, k, d) in cand {
        if !est_used[i] && !truth_used[k] {
            est_used[i] = true;
            truth_used[k] = true;
            pairs.push((i, k, d));
        }
    }
    pairs.sort_by_key(|p| p.1);
    let sq: f64 = pairs.iter().map(|p| p.2 * p.2).sum();
    let phase_rmse = if pairs.is_empty() {
        0.0
    } else {
        (sq / pairs.len() as f64).sqrt()
    };
    MatchResult {
        max_phase_error: pairs.iter().map(|p| p.2).fold(0.0, f64::max),
        phase_rmse,
        undetected: (0..truth.len()).filter(|&k| !truth_used[k]).collect(),
        spurious: (0..estimates.len()).filter(|&i| !est_used[i]).collect(),
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub fraction: f64,
    pub seed: u64,
    pub trial: usize,
    pub shots: u64,
    pub occupied_bins: usize,
    pub detected_bins: usize,
    /// Number of estimates `r̂`.
    pub estimates: usize,
    pub anomalous_estimates: usize,
    pub target_modes: usize,
    /// `r̂ / r`
    pub detection_rate: f64,
    pub matched: usize,
    pub matched_rate: f64,
    pub undetected: usize,
    pub spurious: usize,
    pub phase_rmse: f64,
    pub max_phase_error: f64,
    pub max_freq_rel_error: f64,
    /// Every matched mode is within half a bin.
    pub within_half_bin: bool,
    pub sample_properties_hold: bool,
    pub max_run_length: usize,
    pub runtime_s: f64,
}

impl TrialResult {
    /// The trial with its wall-clock time removed, for reproducibility checks.
    pub fn without_timing(&self) -> TrialResult {
        TrialResult {
            runtime_s: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionSummary {
    pub fraction: f64,
    pub shots: u64,
    pub trials: usize,
    pub mean_detection_rate: f64,
    pub min_detection_rate: f64,
    pub mean_matched_rate: f64,
    pub min_matched_rate: f64,
    pub total_spurious: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub manifest: ProblemManifest,
    pub n_bits: u32,
    pub grid_size: u64,
    pub min_phase_gap: f64,
    pub required_bits: Option<u32>,
    pub shot_plan: ShotPlan,
    pub base_shots: u64,
    pub exact_check: Option<PeakTheoremReport>,
    pub trials: Vec<TrialResult>,
    pub summary: Vec<FractionSummary>,
    pub runtime_s: f64,
}

impl ExperimentReport {
    pub fn all_detected(&self) -> bool {
        self.trials
            .iter()
            .all(|t| t.matched == t.target_modes && t.spurious == 0)
    }

    pub fn write_trials_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "fraction,shots,seed,trial,detected,target,detection_rate,matched,undetected,spurious,anomalous,phase_rmse,max_phase_error,max_freq_rel_error,within_half_bin,sample_properties_hold,runtime_s"
        )?;
        for t in &self.trials {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{},{},{},{},{:.6e},{:.6e},{:.6e},{},{},{:.3}",
                t.fraction,
                t.shots,
                t.seed,
                t.trial,
                t.estimates,
                t.target_modes,
                t.detection_rate,
                t.matched,
                t.undetected,
                t.spurious,
                t.anomalous_estimates,
                t.phase_rmse,
                t.max_phase_error,
                t.max_freq_rel_error,
                t.within_half_bin,
                t.sample_properties_hold,
                t.runtime_s
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "fraction,shots,trials,mean_detection_rate,min_detection_rate,mean_matched_rate,min_matched_rate,spurious")?;
        for s in &self.summary {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                s.fraction,
                s.shots,
                s.trials,
                s.mean_detection_rate,
                s.min_detection_rate,
                s.mean_matched_rate,
                s.min_matched_rate,
                s.total_spurious
            )?;
        }
        Ok(())
    }

    /// Writes `report.json`, `trials.csv` and `summary.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        self.write_trials_csv(std::fs::File::create(dir.join("trials.csv"))?)?;
        self.write_summary_csv(std::fs::File::create(dir.join("summary.csv"))?)?;
        Ok(())
    }
}

/// Chooses `n`: the configured value if it passes `3/N < gap`, otherwise an
/// error naming the smallest admissible `n`.
pub fn gate_bits(spectrum: &Spectrum, requested: Option<u32>) -> Result<(PhaseGrid, Option<u32>)> {
    let gap = spectrum.cyclic_min_gap();
    let required = min_admissible_bits(gap);
    let n = match (requested, required) {
        (Some(n), Some(req)) if n >= req => n,
        (None, Some(req)) => req,
        (n, Some(req)) => {
            return Err(Error::SeparationGate {
                min_gap: gap,
                n: n.unwrap_or(0),
                required_n: req,
            })
        }
        (_, None) => {
            return Err(Error::Precondition(format!(
                "minimum phase gap {gap:e} needs more than {} ancilla bits",
                PhaseGrid::MAX_BITS
            )))
        }
    };
    Ok((PhaseGrid::new(n)?, required))
}

/// Builds the beam problem used by an experiment.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<StandardProblem> {
    let model = build_cantilever(&cfg.beam())?;
    standardize(&model, cfg.target_norm, true)
}

fn trial(
    problem: &StandardProblem,
    grid: &PhaseGrid,
    cfg: &ExperimentConfig,
    (fi, fraction, shots): (usize, f64, u64),
    seed: u64,
    t: usize,
) -> Result<TrialResult> {
    let start = Instant::now();
    let spectrum = problem.spectrum();
    let r = problem.dim();
    let stream = ShotStream::new(seed, ((fi as u64) << 32) | t as u64);
    let emp = match cfg.sampler {
        SamplerKind::TwoStage => two_stage_sample(problem, grid, shots, stream)?,
        SamplerKind::Rejection => {
            sample_rejection(spectrum, &ModeWeights::uniform(r), grid, shots, stream)?
        }
    };
    let chat = detect_empirical(&emp, r)?;
    let est = estimate_phases(&chat, &emp);
    let sample = check_sample_theorem(&chat, spectrum, grid)?;
    let m = match_and_score(&est, spectrum, grid);

    let truth_hz = problem.frequencies_hz();
    let alpha = problem.alpha();
    let max_freq_rel_error = m
        .pairs
        .iter()
        .map(|&(i, k, _)| {
            let (f, _) = frequency_of_phase(est[i].value.value(), alpha);
            (f - truth_hz[k]).abs() / truth_hz[k]
        })
        .fold(0.0, f64::max);
    let half_bin = 0.5 / grid.size_f64();

    Ok(TrialResult {
        fraction,
        seed,
        trial: t,
        shots,
        occupied_bins: emp.occupied(),
        detected_bins: chat.len(),
        estimates: est.len(),
        anomalous_estimates: est.iter().filter(|e| e.anomalous).count(),
        target_modes: r,
        detection_rate: est.len() as f64 / r as f64,
        matched: m.matched(),
        matched_rate: m.matched() as f64 / r as f64,
        undetected: m.undetected.len(),
        spurious: m.spurious.len(),
        phase_rmse: m.phase_rmse,
        max_phase_error: m.max_phase_error,
        max_freq_rel_error,
        within_half_bin: m.max_phase_error <= half_bin * (1.0 + 1e-9),
        sample_properties_hold: sample.all_hold(),
        max_run_length: sample.max_run_length,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

fn summarize(trials: &[TrialResult], levels: &[(usize, f64, u64)]) -> Vec<FractionSummary> {
    levels
        .iter()
        .map(|&(_, fraction, shots)| {
            let ts: Vec<&TrialResult> = trials.iter().filter(|t| t.fraction == fraction).collect();
            let n = ts.len().max(1) as f64;
            FractionSummary {
                fraction,
                shots,
                trials: ts.len(),
                mean_detection_rate: ts.iter().map(|t| t.detection_rate).sum::<f64>() / n,
                min_detection_rate: ts
                    .iter()
                    .map(|t| t.detection_rate)
                    .fold(f64::INFINITY, f64::min),
                mean_matched_rate: ts.iter().map(|t| t.matched_rate).sum::<f64>() / n,
                min_matched_rate: ts
                    .iter()
                    .map(|t| t.matched_rate)
                    .fold(f64::INFINITY, f64::min),
                total_spurious: ts.iter().map(|t| t.spurious).sum(),
            }
        })
        .collect()
}

/// Runs the experiment on an already standardized problem.
pub fn run_on_problem(
    cfg: &ExperimentConfig,
    problem: &StandardProblem,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let spectrum = problem.spectrum();
    let (grid, required_bits) = gate_bits(spectrum, cfg.n)?;
    let plan = shot_bound(problem.dim(), &grid, cfg.delta, None)?;
    let base_shots = cfg.shots.unwrap_or(plan.suggested_shots);

    let exact_check = if cfg.check_exact {
        let d = state_averaged(spectrum, &grid);
        Some(check_peak_theorem(
            &detect_exact(&d, problem.dim())?,
            spectrum,
            &grid,
        )?)
    } else {
        None
    };

    let levels: Vec<(usize, f64, u64)> = cfg
        .shot_fractions
        .iter()
        .enumerate()
        .map(|(i, &f)| (i, f, ((base_shots as f64) * f).round().max(1.0) as u64))
        .collect();
    let jobs: Vec<((usize, f64, u64), u64, usize)> = levels
        .iter()
        .flat_map(|&lv| {
            cfg.seeds
                .iter()
                .flat_map(move |&s| (0..cfg.trials_per_point).map(move |t| (lv, s, t)))
        })
        .collect();
    let trials: Vec<TrialResult> = jobs
        .into_par_iter()
        .map(|(lv, s, t)| trial(problem, &grid, cfg, lv, s, t))
        .collect::<Result<_>>()?;

    Ok(ExperimentReport {
        config: cfg.clone(),
        manifest: problem.manifest(Some(&cfg.beam())),
        n_bits: grid.bits(),
        grid_size: grid.size(),
        min_phase_gap: spectrum.cyclic_min_gap(),
        required_bits,
        shot_plan: plan,
        base_shots,
        exact_check,
        summary: summarize(&trials, &levels),
        trials,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Full pipeline from the beam description.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    run_on_problem(cfg, &problem)
}
