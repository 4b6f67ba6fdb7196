use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qpe_lab::detection::{detect_empirical, estimate_phases, recover_frequencies};
use qpe_lab::fem::{
    build_cantilever, standardize, write_model_files, BeamConfig, DEFAULT_TARGET_NORM,
};
use qpe_lab::harness::{run_experiment, ExperimentConfig, Mode};
use qpe_lab::oracle::run_oracle_check;
use qpe_lab::qpe_dist::{exact_weighted, ModeWeights};
use qpe_lab::sampler::{sample_rejection, EmpiricalDistribution, ShotStream};
use qpe_lab::shots::shot_bound;
use qpe_lab::spectrum::Spectrum;
use qpe_lab::torus::PhaseGrid;
use qpe_lab::Error;

#[derive(Parser)]
#[command(
    name = "qpe-lab",
    version,
    about = "State-averaged QPE simulation and eigenphase detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Desk,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Full => Mode::Full,
            ModeArg::Desk => Mode::Desk,
        }
    }
}

#[derive(clap::Args)]
struct ExperimentArgs {
    /// Experiment config JSON (see docs/config.md); overrides --mode.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    mode: ModeArg,
    /// Output directory for report.json, trials.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Detect every mode at five multiples of the shot bound.
    Experiment1(ExperimentArgs),
    /// Sweep small shot fractions to find the critical shot count.
    Experiment2(ExperimentArgs),
    /// Sample shots from a phase list and write the empirical CSV.
    Simulate {
        /// Comma-separated phases in [0, 1).
        #[arg(long, value_delimiter = ',', conflicts_with = "spectrum")]
        phases: Option<Vec<f64>>,
        /// Spectrum JSON file (array of phases).
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// Comma-separated mode weights (default uniform).
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        shots: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Empirical CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the exact law as CSV (grids up to 2^22 only).
        #[arg(long)]
        exact_out: Option<PathBuf>,
    },
    /// Threshold an empirical CSV and estimate phases and frequencies.
    Detect {
        /// CSV with columns j,count[,p_hat].
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        n: u32,
        /// Number of target modes m₀ used in the threshold.
        #[arg(long)]
        m0: usize,
        /// Scale α for frequency recovery.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Print the shot plan as JSON.
    ShotBound {
        #[arg(long)]
        m0: usize,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0.001)]
        delta: f64,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Assemble the beam model and write matrices, manifest and spectrum.
    FemBuild {
        /// Beam config JSON; defaults to the 16x6x2 mesh.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        desk: bool,
        #[arg(long, default_value_t = DEFAULT_TARGET_NORM)]
        target_norm: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare statevector QPE with the closed-form law on random instances.
    OracleCheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 8)]
        max_dim: usize,
        #[arg(long, default_value_t = 6)]
        max_bits: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
}

fn load_experiment(
    args: &ExperimentArgs,
    preset: fn(Mode) -> ExperimentConfig,
) -> Result<ExperimentConfig, Error> {
    match &args.config {
        Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?),
        None => Ok(preset(args.mode.into())),
    }
}

fn run_and_write(cfg: ExperimentConfig, out: &Path) -> Result<ExitCode, Error> {
    let report = run_experiment(&cfg)?;
    report.write_to_dir(out)?;
    report.write_summary_csv(io::stdout())?;
    Ok(ExitCode::SUCCESS)
}

fn read_counts(path: &Path, grid: PhaseGrid) -> Result<EmpiricalDistribution, Error> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('j')) {
            continue;
        }
        let mut cols = line.split(',');
        let parse = |c: Option<&str>| -> Result<u64, Error> {
            c.and_then(|s| s.trim().parse().ok()).ok_or_else(|| {
                Error::InvalidArgument(format!("line {}: expected j,count", lineno + 1))
            })
        };
        let j = parse(cols.next())?;
        let c = parse(cols.next())?;
        pairs.push((j, c));
    }
    EmpiricalDistribution::from_counts(grid, pairs)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Experiment1(args) => run_and_write(
            load_experiment(&args, ExperimentConfig::experiment1)?,
            &args.out,
        ),
        Command::Experiment2(args) => run_and_write(
            load_experiment(&args, ExperimentConfig::experiment2)?,
            &args.out,
        ),
        Command::Simulate {
            phases,
            spectrum,
            weights,
            n,
            shots,
            seed,
            out,
            exact_out,
        } => {
            let s = match (phases, spectrum) {
                (Some(p), _) => Spectrum::new(p)?,
                (None, Some(path)) => Spectrum::from_json(&fs::read_to_string(path)?)?,
                (None, None) => {
                    return Err(Error::InvalidArgument("give --phases or --spectrum".into()))
                }
            };
            let grid = PhaseGrid::new(n)?;
            let w = match weights {
                Some(w) => ModeWeights::normalized(w)?,
                None => ModeWeights::uniform(s.len()),
            };
            let e = sample_rejection(&s, &w, &grid, shots, ShotStream::new(seed, 0))?;
            match out {
                Some(p) => e.write_csv(fs::File::create(p)?)?,
                None => e.write_csv(io::stdout().lock())?,
            }
            if let Some(p) = exact_out {
                exact_weighted(&s, &w, &grid)?.write_csv(fs::File::create(p)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Detect {
            counts,
            n,
            m0,
            alpha,
        } => {
            let grid = PhaseGrid::new(n)?;
            let e = read_counts(&counts, grid)?;
            let chat = detect_empirical(&e, m0)?;
            let est = estimate_phases(&chat, &e);
            let freqs = match alpha {
                Some(a) => Some(recover_frequencies(&est, a)?),
                None => None,
            };
            let out = json!({
                "shots": e.shots(),
                "threshold": chat.threshold,
                "detected_bins": chat.bins,
                "estimates": est,
                "frequencies": freqs,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::ShotBound {
            m0,
            n,
            delta,
            epsilon,
        } => {
            let plan = shot_bound(m0, &PhaseGrid::new(n)?, delta, epsilon)?;
            println!("{}", serde_json::to_string_pretty(&plan)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::FemBuild {
            config,
            desk,
            target_norm,
            out,
        } => {
            let beam = match config {
                Some(p) => serde_json::from_str::<BeamConfig>(&fs::read_to_string(p)?)?,
                None if desk => BeamConfig::desk(),
                None => BeamConfig::default(),
            };
            let model = build_cantilever(&beam)?;
            let problem = standardize(&model, target_norm, true)?;
            write_model_files(&model, &problem, &out)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&problem.manifest(Some(&beam)))?
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck {
            instances,
            max_dim,
            max_bits,
            seed,
            tolerance,
        } => {
            let rep = run_oracle_check(instances, max_dim, max_bits, seed)?;
            println!(
                "{}",
                json!({"instances": rep.instances, "max_bin_error": rep.max_bin_error, "tolerance": tolerance})
            );
            Ok(if rep.max_bin_error <= tolerance {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::SeparationGate { .. } | Error::Precondition(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
