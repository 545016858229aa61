use std::path::PathBuf;

use boostr::boost_dynamic::DynamicConfig;
use boostr::boost_static::BoostConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "boostr", version, about = "Boosted additive trees for recurrent event data")]
pub struct Cli {
    /// Flat `key=value` file supplying defaults for any long flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Simulate(SimulateArgs),
    /// Fit a model and write model.json, loss.csv and leaves.csv.
    Train(TrainArgs),
    /// Predicted cumulative intensity curves for every individual.
    Predict(PredictArgs),
    /// Repeated train/test evaluation of one or more methods.
    Evaluate(EvaluateArgs),
    /// Raw and standardized feature importance of a model.
    Importance(ImportanceArgs),
    /// Latin hypercube search over (gamma1, gamma2).
    Tune(TuneArgs),
    #[command(subcommand)]
    Export(ExportCommand),
}

#[derive(Debug, Subcommand)]
pub enum ExportCommand {
    /// Leaf rectangles of every tree.
    Partition(PartitionArgs),
    /// Summed spline coefficients over the static feature plane.
    BetaMap(BetaMapArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "BOOSTR_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Grid points over the time horizon.
    #[arg(long, default_value_t = 100)]
    pub m: usize,

    /// Time horizon; defaults to the largest censoring time.
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// A, B, C, D or morvita.
    #[arg(long)]
    pub dataset: String,

    /// Individuals; defaults to the dataset's standard size.
    #[arg(long)]
    pub n: Option<usize>,

    /// Frailty standard deviation (morvita only).
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,

    #[command(flatten)]
    pub seed: SeedArg,

    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoostArgs {
    /// Number of trees.
    #[arg(long = "K", alias = "n-trees", default_value_t = 50)]
    pub n_trees: usize,

    #[arg(long, default_value_t = 300.0)]
    pub gamma1: f64,

    #[arg(long, default_value_t = 100.0)]
    pub gamma2: f64,

    #[arg(long, default_value_t = 4)]
    pub d_max: usize,

    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,

    #[arg(long, default_value_t = 32)]
    pub max_thresholds: usize,

    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,

    /// Internal spline knots (dynamic mode).
    #[arg(long, default_value_t = 2)]
    pub u: usize,

    /// Spline order (dynamic mode).
    #[arg(long, default_value_t = 3)]
    pub v: usize,
}

impl BoostArgs {
    pub fn boost_config(&self, seed: u64) -> BoostConfig {
        BoostConfig {
            n_trees: self.n_trees,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            d_max: self.d_max,
            min_leaf: self.min_leaf,
            max_thresholds: self.max_thresholds,
            learning_rate: self.learning_rate,
            seed,
        }
    }

    pub fn dynamic_config(&self, seed: u64) -> DynamicConfig {
        DynamicConfig {
            boost: self.boost_config(seed),
            u: self.u,
            v: self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Static,
    Dynamic,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory with events.csv, static.csv and optionally dynamic.csv.
    #[arg(long)]
    pub dataset: PathBuf,

    #[arg(long, value_enum, default_value_t = Mode::Static)]
    pub mode: Mode,

    #[command(flatten)]
    pub boost: BoostArgs,

    #[command(flatten)]
    pub grid: GridArgs,

    #[command(flatten)]
    pub seed: SeedArg,

    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub dataset: PathBuf,

    /// Curve CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,

    /// Comma-separated: boostr, boostr-dynamic, pooled-mcf, mcf-knn,
    /// hpp-loglinear, time-feature, oracle.
    #[arg(long, value_delimiter = ',', default_value = "boostr")]
    pub methods: Vec<String>,

    /// Neighbours for mcf-knn.
    #[arg(long, default_value_t = 20)]
    pub knn_k: usize,

    /// Synthetic dataset kind for the oracle method.
    #[arg(long)]
    pub truth: Option<String>,

    #[arg(long, default_value_t = 50)]
    pub reps: usize,

    #[arg(long, default_value_t = 150)]
    pub n_train: usize,

    #[arg(long, default_value_t = 50)]
    pub n_test: usize,

    /// Evaluation time for concordance and count error; defaults to the horizon.
    #[arg(long)]
    pub t_eval: Option<f64>,

    #[command(flatten)]
    pub boost: BoostArgs,

    #[command(flatten)]
    pub grid: GridArgs,

    #[command(flatten)]
    pub seed: SeedArg,

    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub dataset: PathBuf,

    #[arg(long, default_value_t = 15)]
    pub runs: usize,

    /// `lo,hi`
    #[arg(long, default_value = "0,600")]
    pub gamma1_range: Span,

    /// `lo,hi`
    #[arg(long, default_value = "0,200")]
    pub gamma2_range: Span,

    #[command(flatten)]
    pub boost: BoostArgs,

    #[command(flatten)]
    pub grid: GridArgs,

    #[command(flatten)]
    pub seed: SeedArg,

    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BetaMapArgs {
    #[arg(long)]
    pub model: PathBuf,

    /// Cells per axis.
    #[arg(long, default_value_t = 20)]
    pub resolution: usize,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span(pub f64, pub f64);

impl std::str::FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Span(parse(lo)?, parse(hi)?))
    }
}
