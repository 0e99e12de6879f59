use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Sample entropy with bootstrap uncertainty and Bayesian selection of (m, r, q).
#[derive(Debug, Parser)]
#[command(name = "sampen", version, args_override_self = true)]
pub struct Cli {
    /// Configuration file (TOML or key=value lines); command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select (m, r, q) for a signal set by minimising the regularised bootstrap MSE.
    Optimize(OptimizeArgs),
    /// Entropy per signal at a given (m, r), optionally with bootstrap SE and MSE.
    Estimate(EstimateArgs),
    /// Compare the entropy of two labelled groups with a Mann-Whitney U test.
    Compare(CompareArgs),
    /// Difference, normalise and ADF-screen a signal set.
    Preprocess(PreprocessArgs),
    /// Run a baseline radius-selection rule.
    Baseline(BaselineArgs),
    /// Generate a synthetic signal set as long CSV.
    Synth(SynthArgs),
    /// Benchmark the counting and bootstrap SampEn variance estimators.
    Varbench(VarbenchArgs),
    /// Compare the optimised parameters against the baseline rules.
    CompareMethods(CompareMethodsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Optimize(_) => "optimize",
            Self::Estimate(_) => "estimate",
            Self::Compare(_) => "compare",
            Self::Preprocess(_) => "preprocess",
            Self::Baseline(_) => "baseline",
            Self::Synth(_) => "synth",
            Self::Varbench(_) => "varbench",
            Self::CompareMethods(_) => "compare-methods",
        }
    }
}

pub const SUBCOMMANDS: [&str; 8] = [
    "optimize",
    "estimate",
    "compare",
    "preprocess",
    "baseline",
    "synth",
    "varbench",
    "compare-methods",
];

/// Accepts plain reals and fractions such as `1/3`.
pub fn real(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
            a / b
        }
        None => s.trim().parse().map_err(|_| format!("bad number '{s}'"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Signal set as long CSV (signal_id,label,t,value) or wide CSV.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Penalty weight on sqrt(r). Raise it if trials pile up at the top of the
    /// r domain; lower it if they pile up at the bottom.
    #[arg(long, value_parser = real, default_value = "1/3")]
    pub lambda: f64,
    /// Bootstrap replicates per signal and trial.
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    /// Total trials (use about 200 for recorded data).
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Initial random trials, capped at --trials.
    #[arg(long, default_value_t = 10)]
    pub init_trials: usize,
    /// Largest embedding dimension searched.
    #[arg(long, default_value_t = 3)]
    pub m_max: usize,
    #[arg(long, value_parser = real, default_value_t = 0.01)]
    pub r_lo: f64,
    #[arg(long, value_parser = real, default_value_t = 1.0)]
    pub r_hi: f64,
    #[arg(long, value_parser = real, default_value_t = 0.01)]
    pub q_lo: f64,
    #[arg(long, value_parser = real, default_value_t = 0.99)]
    pub q_hi: f64,
    /// Hold q fixed instead of searching it.
    #[arg(long, value_parser = real)]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessFlags {
    /// Skip differencing and ADF screening; only normalise.
    #[arg(long)]
    pub no_preprocess: bool,
    /// Family-wise level for the ADF screen.
    #[arg(long, value_parser = real, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub preprocess: PreprocessFlags,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_parser = real)]
    pub r: f64,
    /// Bootstrap block parameter; enables bootstrap SE and MSE.
    #[arg(long, value_parser = real)]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    /// Emit fuzzy entropy instead of sample entropy.
    #[arg(long)]
    pub fuzzen: bool,
    #[arg(long, value_parser = real, default_value_t = 2.0)]
    pub eta: f64,
    /// Use the samples as given instead of normalising them.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlternativeArg {
    TwoSided,
    Less,
    Greater,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Embedding dimension; with --r skips the search.
    #[arg(long, requires = "r")]
    pub m: Option<usize>,
    #[arg(long, value_parser = real, requires = "m")]
    pub r: Option<f64>,
    /// Hypothesis about the first label (lexicographic order) relative to the second.
    #[arg(long, value_enum, default_value_t = AlternativeArg::TwoSided)]
    pub alternative: AlternativeArg,
    /// Block parameter for the per-class bootstrap SE when (m, r) are given.
    #[arg(long = "se-q", value_parser = real, default_value_t = 0.5)]
    pub se_q: f64,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Difference and ADF-screen before comparing; by default signals are only normalised.
    #[arg(long)]
    pub preprocess: bool,
    #[arg(long, value_parser = real, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = real, default_value_t = 0.05)]
    pub alpha: f64,
    /// Write the retained signals here, in the input layout.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sampeneff,
    Convergence,
    Standard,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Embedding dimension; chosen by AR order and BIC when omitted.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub p_max: usize,
    /// Also report FuzzEn at the selected pair.
    #[arg(long)]
    pub fuzzen: bool,
    #[arg(long, value_parser = real, default_value_t = 2.0)]
    pub eta: f64,
    /// Penalty weight for the Gaussian-approximation score.
    #[arg(long, value_parser = real, default_value = "1/3")]
    pub lambda: f64,
    /// Gaussian draws per signal for the score.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Use the samples as given instead of normalising them.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    WhiteNoise,
    Ar1,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: KindArg,
    /// Number of signals.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub len: usize,
    #[arg(long, value_parser = real, default_value_t = 0.9)]
    pub phi: f64,
    #[arg(long, value_parser = real, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    /// Label written on every row.
    #[arg(long)]
    pub label: Option<String>,
    /// Write the CSV here and print a JSON summary; otherwise the CSV goes to stdout.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VarbenchArgs {
    #[arg(long, value_enum, default_value_t = KindArg::WhiteNoise)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 100)]
    pub len: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, value_parser = real, default_value_t = 0.2)]
    pub r: f64,
    /// Defaults to 0.9 for white noise and 0.5 for AR(1).
    #[arg(long, value_parser = real)]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 2000)]
    pub population: usize,
    #[arg(long, default_value_t = 100)]
    pub subsample: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Population 10000 and 20 repeats; slow.
    #[arg(long)]
    pub full_scale: bool,
    /// Also write the per-repeat table as CSV.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareMethodsArgs {
    #[arg(long, value_enum, default_value_t = KindArg::WhiteNoise)]
    pub kind: KindArg,
    /// Signals in the generated set.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 100)]
    pub len: usize,
    /// Defaults to 1/3 for white noise and 1/10 for AR(1).
    #[arg(long, value_parser = real)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 3)]
    pub m_max: usize,
    /// Hold q fixed in the search.
    #[arg(long, value_parser = real)]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 10)]
    pub p_max: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}
