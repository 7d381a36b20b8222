//! `morphkit`: face-morphing attack experiments on pre-extracted embeddings.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "morphkit", version, about = "Morph pre-selection, vulnerability metrics and differential MAD on embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic embedding population.
    Simulate(SimulateArgs),
    /// Select subject pairs for morphing.
    Pair(PairArgs),
    /// Create synthetic midpoint morphs for selected pairs.
    Morph(MorphArgs),
    /// Score morphs against the verification probes of their subjects.
    Compare(CompareArgs),
    /// Calibrate a decision threshold at a target FMR.
    Calibrate(CalibrateArgs),
    /// Vulnerability metrics (MMPMR, prodAvgMMPMR, RMMR) and ECDFs.
    Vuln(VulnArgs),
    /// Morphing attack potential matrix across several FRSs.
    Map(MapArgs),
    /// Train a differential morphing attack detector.
    DmadTrain(DmadTrainArgs),
    /// Evaluate a trained differential detector.
    DmadEval(DmadEvalArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Directory for output artifacts.
    #[arg(long, env = "MORPHKIT_OUT_DIR", default_value = ".")]
    // Where artifacts go does not change what they contain.
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// Embedding file (JSON lines).
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: usize,
    /// Drop subjects with fewer samples.
    #[arg(long, default_value_t = 5)]
    pub min_samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 200)]
    pub subjects: usize,
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Per-coordinate standard deviation of the direction noise.
    #[arg(long, default_value_t = 0.08)]
    pub noise: f64,
    #[arg(long, default_value_t = 10.0)]
    pub magnitude_min: f64,
    #[arg(long, default_value_t = 30.0)]
    pub magnitude_max: f64,
    #[arg(long, default_value_t = 2)]
    pub genders: usize,
    #[arg(long, default_value_t = 2)]
    pub ethnicities: usize,
    #[arg(long, default_value_t = 20)]
    pub age_min: u32,
    #[arg(long, default_value_t = 60)]
    pub age_max: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    Embedding,
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PairArgs {
    #[arg(long, value_enum, default_value = "embedding")]
    pub mode: PairMode,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value_t = morphkit::pair_selection::DEFAULT_MAX_AGE_GAP)]
    pub max_age_gap: u32,
    /// Seed for random pairing.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MorphArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Pair CSV from `pair`.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Direction noise added to each morph.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value = "midpoint")]
    pub morpher: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// Verification embeddings (one FRS).
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Morph file (JSON lines) in the same embedding space.
    #[arg(long)]
    pub morphs: PathBuf,
    #[arg(long)]
    pub frs_id: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreOrientation {
    Distance,
    Similarity,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Embedding file to derive mated and non-mated scores from.
    #[arg(long, required_unless_present = "scores_in", conflicts_with = "scores_in")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, requires = "embeddings")]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub min_samples: usize,
    /// Precomputed score CSV (`label,score,id_a,id_b`) instead of embeddings.
    #[arg(long)]
    pub scores_in: Option<PathBuf>,
    /// Orientation of scores read with `--scores-in`.
    #[arg(long, value_enum, default_value = "distance")]
    pub orientation: ScoreOrientation,
    #[arg(long)]
    pub frs_id: String,
    /// Target false match rate.
    #[arg(long, default_value_t = morphkit::calibration::DEFAULT_TARGET_FMR)]
    pub fmr: f64,
    /// Number of subjects sampled for calibration (all when omitted).
    #[arg(long)]
    pub subset: Option<usize>,
    /// Non-mated comparisons to draw (defaults to the mated count).
    #[arg(long)]
    pub nonmated: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThresholdArgs {
    /// Calibration JSON from `calibrate` (repeatable).
    #[arg(long = "calibration")]
    pub calibrations: Vec<PathBuf>,
    /// Explicit threshold `FRS=TAU` (repeatable; overrides calibration files).
    #[arg(long = "tau", value_parser = parse_assignment)]
    pub taus: Vec<(String, f64)>,
    /// Explicit FNMR `FRS=VALUE` for RMMR when no calibration file is given.
    #[arg(long = "fnmr", value_parser = parse_assignment)]
    pub fnmrs: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Any,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VulnArgs {
    /// Comparison CSV (repeatable).
    #[arg(long = "comparisons", required = true)]
    pub comparisons: Vec<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub thresholds: ThresholdArgs,
    /// Subject rule used for RMMR.
    #[arg(long, value_enum, default_value = "all")]
    pub rule: RuleArg,
    /// Pre-selection label recorded in the metrics table.
    #[arg(long, default_value = "unspecified")]
    pub selection: String,
    /// Morphing algorithm label recorded in the metrics table.
    #[arg(long, default_value = "unspecified")]
    pub morpher: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MapArgs {
    #[arg(long = "comparisons", required = true)]
    pub comparisons: Vec<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long, default_value_t = morphkit::vulnerability::DEFAULT_MAP_ATTEMPTS)]
    pub attempts: usize,
    /// Count an attempt only when the same probe index succeeds for every subject.
    #[arg(long)]
    pub map_paired: bool,
    /// JSON weight matrix (attempts x FRSs); defaults to w(i, j) = i * j.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SvmArgs {
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// RBF width; defaults to 1 / (D * mean feature variance).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iterations: usize,
    /// Kernel row cache size in MiB.
    #[arg(long, default_value_t = 512)]
    pub cache_mib: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DmadTrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Control morphs (JSON lines), typically from random pairing.
    #[arg(long)]
    pub morphs: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// Bona fide differentials per subject.
    #[arg(long, default_value_t = 1)]
    pub bona_fide_pairs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub svm: SvmArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalScope {
    /// Only subjects held out during training.
    Holdout,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DmadEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub morphs: PathBuf,
    #[arg(long, value_enum, default_value = "holdout")]
    pub scope: EvalScope,
    #[arg(long, default_value_t = 1)]
    pub bona_fide_pairs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (key, value) = s.split_once('=').ok_or_else(|| format!("expected FRS=VALUE, got {s:?}"))?;
    let value: f64 = value.parse().map_err(|e| format!("{value:?}: {e}"))?;
    if key.is_empty() || !value.is_finite() {
        return Err(format!("invalid assignment {s:?}"));
    }
    Ok((key.to_string(), value))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Pair(a) => commands::pair(&a),
        Command::Morph(a) => commands::morph(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Vuln(a) => commands::vuln(&a),
        Command::Map(a) => commands::map(&a),
        Command::DmadTrain(a) => commands::dmad_train(&a),
        Command::DmadEval(a) => commands::dmad_eval(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
