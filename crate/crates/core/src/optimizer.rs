//! The regularised bootstrap-MSE objective and the sequential search drivers.
//!
//! A trial evaluates `psi = (m, r, q)` on every signal: each signal gets its
//! own bootstrap stream, derived from the master seed, the trial index and the
//! signal index, so results do not depend on the thread schedule.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_sampen, BootstrapConfig};
use crate::entropy::{EntropyValue, SampEnParams};
use crate::signal::{Signal, SignalSet};
use crate::tpe::{propose, ParamVector, SearchSpace, TpeConfig, Trial, TrialHistory};
use crate::{par, rng};
use crate::{Error, Result};

const EVAL_TAG: u64 = 0x6576_616c;
const PROPOSE_TAG: u64 = 0x7072_6f70;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Weight of the `sqrt(r)` penalty.
    pub lambda: f64,
    /// Bootstrap replicates per signal and trial.
    pub replicates: usize,
    /// Total trial budget, random initial trials included.
    pub trials: usize,
    pub init_trials: usize,
    pub space: SearchSpace,
    pub tpe: TpeConfig,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn new(lambda: f64, replicates: usize, trials: usize, space: SearchSpace, seed: u64) -> Self {
        Self {
            lambda,
            replicates,
            trials,
            init_trials: 10.min(trials),
            space,
            tpe: TpeConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be finite and >= 0"));
        }
        if self.replicates == 0 || self.trials == 0 || self.init_trials == 0 {
            return Err(Error::invalid("replicates, trials and initial trials must be >= 1"));
        }
        if self.init_trials > self.trials {
            return Err(Error::invalid("initial trials exceed the trial budget"));
        }
        self.space.validate()?;
        self.tpe.validate()
    }
}

/// Bootstrap summary of one signal at one `psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEvaluation {
    pub entropy: EntropyValue,
    pub feasible: bool,
    pub mse: Option<f64>,
    pub variance: Option<f64>,
    pub bias: Option<f64>,
}

impl SignalEvaluation {
    fn infeasible(entropy: EntropyValue) -> Self {
        Self {
            entropy,
            feasible: false,
            mse: None,
            variance: None,
            bias: None,
        }
    }
}

/// Bootstrap the SampEn of `x` at `psi`; any failure (too short, undefined
/// entropy, too many undefined replicates) is reported as infeasible.
pub fn evaluate_signal(x: &[f64], psi: &ParamVector, replicates: usize, seed: u64) -> SignalEvaluation {
    let (Ok(p), Ok(cfg)) = (SampEnParams::new(psi.m, psi.r), BootstrapConfig::new(psi.q, replicates, seed)) else {
        return SignalEvaluation::infeasible(EntropyValue::Undefined);
    };
    match bootstrap_sampen(x, &p, &cfg) {
        Ok(est) if est.feasible => SignalEvaluation {
            entropy: est.original.value,
            feasible: true,
            mse: est.mse().ok(),
            variance: est.variance().ok(),
            bias: est.bias().ok(),
        },
        Ok(est) => SignalEvaluation::infeasible(est.original.value),
        Err(_) => SignalEvaluation::infeasible(EntropyValue::Undefined),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEvaluation {
    #[serde(with = "crate::io::float_or_inf")]
    pub y: f64,
    pub per_signal: Vec<SignalEvaluation>,
}

/// Mean per-signal bootstrap MSE plus `lambda * sqrt(r)`; `+inf` if any signal
/// is infeasible. Signal `i` bootstraps from stream seed `child_seed(seed, [i])`.
pub fn evaluate_set<'a, I>(signals: I, psi: &ParamVector, lambda: f64, replicates: usize, seed: u64) -> SetEvaluation
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let signals: Vec<&[f64]> = signals.into_iter().collect();
    let per_signal = par::map_range(signals.len(), |i| {
        evaluate_signal(signals[i], psi, replicates, rng::child_seed(seed, &[i as u64]))
    });
    let y = if per_signal.iter().all(|e| e.feasible) && !per_signal.is_empty() {
        let total: f64 = per_signal.iter().map(|e| e.mse.unwrap_or(f64::INFINITY)).sum();
        total / per_signal.len() as f64 + lambda * psi.r.sqrt()
    } else {
        f64::INFINITY
    };
    SetEvaluation { y, per_signal }
}

pub fn objective_single(x: &[f64], psi: &ParamVector, lambda: f64, replicates: usize, seed: u64) -> f64 {
    evaluate_set([x], psi, lambda, replicates, seed).y
}

pub fn objective_set(set: &SignalSet, psi: &ParamVector, lambda: f64, replicates: usize, seed: u64) -> f64 {
    evaluate_set(set.iter().map(Signal::values), psi, lambda, replicates, seed).y
}

/// Per-trial summary kept alongside the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDiagnostics {
    pub index: usize,
    pub feasible: bool,
    /// Signals at which the trial was infeasible.
    pub infeasible_signals: usize,
    pub mean_entropy: Option<f64>,
    pub mean_variance: Option<f64>,
    pub mean_bias: Option<f64>,
    #[serde(with = "crate::io::float_or_inf")]
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_psi: ParamVector,
    pub best_y: f64,
    /// Index of the best trial; the earliest wins on ties.
    pub best_index: usize,
    /// Per-signal bootstrap summaries of the best trial.
    pub best_per_signal: Vec<SignalEvaluation>,
    pub history: TrialHistory,
    pub diagnostics: Vec<TrialDiagnostics>,
}

impl OptResult {
    pub fn best_so_far(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.best_so_far).collect()
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Random initial trials followed by TPE proposals until the budget is spent.
pub fn optimize_set(set: &SignalSet, cfg: &OptimizerConfig) -> Result<OptResult> {
    cfg.validate()?;
    let signals: Vec<&[f64]> = set.iter().map(Signal::values).collect();
    let mut history = TrialHistory::new();
    let mut diagnostics = Vec::with_capacity(cfg.trials);
    let mut best: Option<(usize, f64)> = None;
    let mut best_per_signal = Vec::new();

    for t in 0..cfg.trials {
        let mut prng = rng::stream(cfg.seed, &[PROPOSE_TAG, t as u64]);
        let psi = if t < cfg.init_trials {
            cfg.space.sample_uniform(&mut prng)
        } else {
            propose(&history, &cfg.tpe, &cfg.space, &mut prng)?
        };
        let eval_seed = rng::child_seed(cfg.seed, &[EVAL_TAG, t as u64]);
        let eval = evaluate_set(signals.iter().copied(), &psi, cfg.lambda, cfg.replicates, eval_seed);
        if eval.y.is_finite() && best.is_none_or(|(_, y)| eval.y < y) {
            best = Some((t, eval.y));
            best_per_signal.clone_from(&eval.per_signal);
        }
        let per = &eval.per_signal;
        diagnostics.push(TrialDiagnostics {
            index: t,
            feasible: eval.y.is_finite(),
            infeasible_signals: per.iter().filter(|e| !e.feasible).count(),
            mean_entropy: mean_of(per.iter().map(|e| e.entropy.finite())),
            mean_variance: mean_of(per.iter().map(|e| e.variance)),
            mean_bias: mean_of(per.iter().map(|e| e.bias)),
            best_so_far: best.map_or(f64::INFINITY, |(_, y)| y),
        });
        history.push(Trial::new(psi, eval.y));
    }

    let (best_index, best_y) = best.ok_or(Error::AllTrialsInfeasible)?;
    Ok(OptResult {
        best_psi: history.trials()[best_index].psi,
        best_y,
        best_index,
        best_per_signal,
        history,
        diagnostics,
    })
}

/// Single-signal search; identical to a one-member set.
pub fn optimize_single(x: &Signal, cfg: &OptimizerConfig) -> Result<OptResult> {
    optimize_set(&SignalSet::new(vec![x.clone()])?, cfg)
}
