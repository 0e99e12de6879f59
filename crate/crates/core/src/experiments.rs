//! Synthetic benchmark harnesses: accuracy of the two SampEn variance
//! estimators against a population reference, and a head-to-head of the
//! parameter-selection strategies on one generated signal set.

use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    ar_order_m, convergence_select, gaussian_mse_approx, sampeneff_select, BaselineResult, RadiusGrid,
};
use crate::bootstrap::{bootstrap_sampen, BootstrapConfig};
use crate::entropy::{counting_uncertainty, sampen, SampEnParams};
use crate::optimizer::{optimize_set, OptimizerConfig};
use crate::signal::{ar1_set, white_noise_set, SignalSet};
use crate::tpe::SearchSpace;
use crate::{par, rng};
use crate::{Error, Result};

const POPULATION_TAG: u64 = 1;
const SUBSAMPLE_TAG: u64 = 2;
const BOOTSTRAP_TAG: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    WhiteNoise,
    Ar1,
}

impl std::str::FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white_noise" | "white-noise" | "wn" => Ok(Self::WhiteNoise),
            "ar1" => Ok(Self::Ar1),
            other => Err(Error::invalid(format!("unknown signal type '{other}'"))),
        }
    }
}

impl SignalKind {
    /// `count` normalised signals: unit white noise, or AR(1) with
    /// `phi = 0.9`, `sigma = 0.1` and a 500-step burn-in.
    pub fn generate(self, count: usize, len: usize, seed: u64) -> Result<SignalSet> {
        let raw = match self {
            Self::WhiteNoise => white_noise_set(count, len, 1.0, seed)?,
            Self::Ar1 => ar1_set(count, 0.9, 0.1, len, seed)?,
        };
        raw.normalized()
    }
}

/// `(n - 1)`-divisor variance of the finite SampEn values over a population.
pub fn true_variance(population: &SignalSet, m: usize, r: f64) -> Result<f64> {
    let p = SampEnParams::new(m, r)?;
    let signals = population.signals();
    let values: Vec<f64> = par::map_range(signals.len(), |i| {
        sampen(signals[i].values(), &p).ok().and_then(|s| s.value.finite())
    })
    .into_iter()
    .flatten()
    .collect();
    sample_variance(&values)
}

fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientDefined);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Challenger {
    /// Stationary-bootstrap variance.
    Bootstrap,
    /// The counting estimator again; the reduction is then exactly zero.
    Counting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBenchConfig {
    pub kind: SignalKind,
    pub len: usize,
    pub m: usize,
    pub r: f64,
    pub q: f64,
    pub replicates: usize,
    /// Reference population size.
    pub population: usize,
    /// Signals drawn from the population per repeat.
    pub subsample: usize,
    pub repeats: usize,
    pub seed: u64,
    pub challenger: Challenger,
}

impl VarBenchConfig {
    /// Desk-scale defaults: `N = 100`, `m = 1`, `r = 0.2`, `B = 100`, a
    /// population of 2000, subsamples of 100, 5 repeats, and `q = 0.9`
    /// (white noise) or `q = 0.5` (AR(1)).
    pub fn desk(kind: SignalKind, seed: u64) -> Self {
        Self {
            kind,
            len: 100,
            m: 1,
            r: 0.2,
            q: match kind {
                SignalKind::WhiteNoise => 0.9,
                SignalKind::Ar1 => 0.5,
            },
            replicates: 100,
            population: 2000,
            subsample: 100,
            repeats: 5,
            seed,
            challenger: Challenger::Bootstrap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subsample == 0 || self.subsample > self.population {
            return Err(Error::invalid("subsample size must lie in 1..=population"));
        }
        if self.repeats == 0 || self.replicates == 0 {
            return Err(Error::invalid("repeats and replicates must be >= 1"));
        }
        SampEnParams::new(self.m, self.r)?;
        BootstrapConfig::new(self.q, self.replicates, 0)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatError {
    /// Mean squared error of the counting estimates against the reference.
    pub counting_mse: f64,
    pub challenger_mse: f64,
    /// `100 (counting - challenger) / counting`.
    pub reduction_pct: f64,
    /// Signals where both estimators were defined.
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBenchResult {
    pub config: VarBenchConfig,
    pub true_variance: f64,
    pub repeats: Vec<RepeatError>,
    pub mean_reduction_pct: f64,
    /// 2.5th and 97.5th percentiles of the per-repeat reductions.
    pub reduction_interval: (f64, f64),
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 1]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Score the counting and challenger variance estimators against the
/// population reference over repeated subsamples.
pub fn estimator_error(cfg: &VarBenchConfig) -> Result<VarBenchResult> {
    cfg.validate()?;
    let population = cfg
        .kind
        .generate(cfg.population, cfg.len, rng::child_seed(cfg.seed, &[POPULATION_TAG]))?;
    let truth = true_variance(&population, cfg.m, cfg.r)?;
    let p = SampEnParams::new(cfg.m, cfg.r)?;
    let signals = population.signals();

    let mut repeats = Vec::with_capacity(cfg.repeats);
    for k in 0..cfg.repeats {
        let mut sub_rng = rng::stream(cfg.seed, &[SUBSAMPLE_TAG, k as u64]);
        let picks = index::sample(&mut sub_rng, cfg.population, cfg.subsample).into_vec();
        let pairs = par::map_range(picks.len(), |j| {
            let i = picks[j];
            let x = signals[i].values();
            let counting = counting_uncertainty(x, &p).ok().map(|u| u.se.powi(2))?;
            let challenger = match cfg.challenger {
                Challenger::Counting => counting,
                Challenger::Bootstrap => {
                    let seed = rng::child_seed(cfg.seed, &[BOOTSTRAP_TAG, k as u64, i as u64]);
                    let bc = BootstrapConfig::new(cfg.q, cfg.replicates, seed).ok()?;
                    bootstrap_sampen(x, &p, &bc).ok()?.variance().ok()?
                }
            };
            Some((counting, challenger))
        });
        let used: Vec<(f64, f64)> = pairs.into_iter().flatten().collect();
        if used.is_empty() {
            return Err(Error::InsufficientDefined);
        }
        let n = used.len() as f64;
        let counting_mse = used.iter().map(|(c, _)| (c - truth).powi(2)).sum::<f64>() / n;
        let challenger_mse = used.iter().map(|(_, b)| (b - truth).powi(2)).sum::<f64>() / n;
        let reduction_pct = if counting_mse > 0.0 {
            100.0 * (counting_mse - challenger_mse) / counting_mse
        } else {
            0.0
        };
        repeats.push(RepeatError {
            counting_mse,
            challenger_mse,
            reduction_pct,
            used: used.len(),
        });
    }

    let mut reductions: Vec<f64> = repeats.iter().map(|r| r.reduction_pct).collect();
    let mean_reduction_pct = reductions.iter().sum::<f64>() / reductions.len() as f64;
    reductions.sort_by(f64::total_cmp);
    Ok(VarBenchResult {
        config: *cfg,
        true_variance: truth,
        repeats,
        mean_reduction_pct,
        reduction_interval: (percentile(&reductions, 0.025), percentile(&reductions, 0.975)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub kind: SignalKind,
    /// Number of signals in the generated set.
    pub count: usize,
    pub len: usize,
    pub lambda: f64,
    pub replicates: usize,
    pub trials: usize,
    pub space: SearchSpace,
    /// Gaussian draws per signal when scoring the baselines.
    pub draws: usize,
    /// Largest AR order tried when choosing `m` for the radius baselines.
    pub p_max: usize,
    pub grid: RadiusGrid,
    pub repeats: usize,
    pub seed: u64,
}

impl ComparisonConfig {
    /// Synthetic-study defaults: 100 signals of length 100, `B = 100`,
    /// 100 trials, `m <= 3`, `lambda = 1/3` (white noise) or `1/10` (AR(1)).
    pub fn desk(kind: SignalKind, seed: u64) -> Self {
        Self {
            kind,
            count: 100,
            len: 100,
            lambda: match kind {
                SignalKind::WhiteNoise => 1.0 / 3.0,
                SignalKind::Ar1 => 0.1,
            },
            replicates: 100,
            trials: 100,
            space: SearchSpace::default(),
            draws: 1000,
            p_max: 10,
            grid: RadiusGrid::default(),
            repeats: 1,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Optimized,
    SampEnEff,
    Convergence,
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub repeat: usize,
    pub strategy: Strategy,
    pub m_star: Option<usize>,
    pub r_star: Option<f64>,
    pub q_star: Option<f64>,
    /// Regularised MSE: the bootstrap objective for the optimised pair, the
    /// Gaussian approximation for the baselines.
    pub objective: Option<f64>,
    pub mean_entropy: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

fn mean_entropy(res: &BaselineResult) -> Option<f64> {
    let v: Vec<f64> = res.per_signal.iter().filter_map(|s| s.entropy.finite()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn set_mean_entropy(set: &SignalSet, m: usize, r: f64) -> Option<f64> {
    let p = SampEnParams::new(m, r).ok()?;
    let v: Vec<f64> = set
        .iter()
        .filter_map(|s| sampen(s.values(), &p).ok()?.value.finite())
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Run the four strategies on a common set per repeat. A strategy that fails
/// yields a row carrying the error instead of aborting the table.
pub fn method_comparison(cfg: &ComparisonConfig) -> Result<Vec<ComparisonRow>> {
    if cfg.repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let mut rows = Vec::with_capacity(4 * cfg.repeats);
    for k in 0..cfg.repeats {
        let seed = rng::child_seed(cfg.seed, &[k as u64]);
        let set = cfg.kind.generate(cfg.count, cfg.len, rng::child_seed(seed, &[POPULATION_TAG]))?;
        let score_seed = rng::child_seed(seed, &[SUBSAMPLE_TAG]);

        let start = Instant::now();
        let mut opt_cfg = OptimizerConfig::new(cfg.lambda, cfg.replicates, cfg.trials, cfg.space, seed);
        opt_cfg.init_trials = opt_cfg.init_trials.min(cfg.trials);
        rows.push(match optimize_set(&set, &opt_cfg) {
            Ok(res) => ComparisonRow {
                repeat: k,
                strategy: Strategy::Optimized,
                m_star: Some(res.best_psi.m),
                r_star: Some(res.best_psi.r),
                q_star: Some(res.best_psi.q),
                objective: Some(res.best_y),
                mean_entropy: set_mean_entropy(&set, res.best_psi.m, res.best_psi.r),
                seconds: start.elapsed().as_secs_f64(),
                error: None,
            },
            Err(e) => error_row(k, Strategy::Optimized, start, e),
        });

        let m_ar = ar_order_m(&set, cfg.p_max);
        for strategy in [Strategy::SampEnEff, Strategy::Convergence, Strategy::Standard] {
            let start = Instant::now();
            let selected = match strategy {
                Strategy::Standard => Ok(crate::baselines::standard_params_eval(&set, None)),
                _ => m_ar.clone().and_then(|m| match strategy {
                    Strategy::SampEnEff => sampeneff_select(&set, m, &cfg.grid),
                    _ => convergence_select(&set, m, &cfg.grid),
                }),
            };
            let row = selected.and_then(|res| {
                let objective = gaussian_mse_approx(&set, res.m_star, res.r_star, cfg.draws, cfg.lambda, score_seed)?;
                Ok(ComparisonRow {
                    repeat: k,
                    strategy,
                    m_star: Some(res.m_star),
                    r_star: Some(res.r_star),
                    q_star: None,
                    objective: Some(objective),
                    mean_entropy: mean_entropy(&res),
                    seconds: start.elapsed().as_secs_f64(),
                    error: None,
                })
            });
            rows.push(row.unwrap_or_else(|e| error_row(k, strategy, start, e)));
        }
    }
    Ok(rows)
}

fn error_row(repeat: usize, strategy: Strategy, start: Instant, e: Error) -> ComparisonRow {
    ComparisonRow {
        repeat,
        strategy,
        m_star: None,
        r_star: None,
        q_star: None,
        objective: None,
        mean_entropy: None,
        seconds: start.elapsed().as_secs_f64(),
        error: Some(e.to_string()),
    }
}
