//! Browser bindings. Every exported function takes plain numbers and returns
//! a JSON string; errors come back as a JS exception carrying the message.

use sampen_core::bootstrap::{bootstrap_sampen, BootstrapConfig};
use sampen_core::entropy::{counting_se, sampen, SampEnParams};
use sampen_core::experiments::SignalKind;
use sampen_core::optimizer::{optimize_single, OptimizerConfig};
use sampen_core::signal::normalize;
use sampen_core::tpe::SearchSpace;
use sampen_core::Signal;
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn to_json(v: &impl Serialize) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct CurvePoint {
    r: f64,
    sampen: Option<f64>,
    counting_se: Option<f64>,
}

pub fn curve_json(values: &[f64], m: usize, r_lo: f64, r_hi: f64, steps: usize) -> Out {
    if steps < 2 || !(r_hi > r_lo && r_lo > 0.0) {
        return Err("need 0 < r_lo < r_hi and at least two steps".into());
    }
    let x = normalize(values).map_err(err)?;
    let points: Vec<CurvePoint> = (0..steps)
        .map(|i| {
            let r = r_lo + (r_hi - r_lo) * i as f64 / (steps - 1) as f64;
            let p = SampEnParams::new(m, r).map_err(err)?;
            Ok(CurvePoint {
                r,
                sampen: sampen(&x, &p).map_err(err)?.value.finite(),
                counting_se: counting_se(&x, &p).ok(),
            })
        })
        .collect::<Result<_, String>>()?;
    to_json(&points)
}

#[derive(Serialize)]
struct Distribution {
    original: Option<f64>,
    replicates: Vec<f64>,
    non_finite: usize,
    feasible: bool,
    se: Option<f64>,
    bias: Option<f64>,
    mse: Option<f64>,
}

pub fn bootstrap_json(values: &[f64], m: usize, r: f64, q: f64, replicates: usize, seed: u64) -> Out {
    let x = normalize(values).map_err(err)?;
    let p = SampEnParams::new(m, r).map_err(err)?;
    let est = bootstrap_sampen(&x, &p, &BootstrapConfig::new(q, replicates, seed).map_err(err)?).map_err(err)?;
    let finite = est.finite_values();
    to_json(&Distribution {
        original: est.original.value.finite(),
        non_finite: replicates - finite.len(),
        replicates: finite,
        feasible: est.feasible,
        se: est.variance().ok().map(f64::sqrt),
        bias: est.bias().ok(),
        mse: est.mse().ok(),
    })
}

#[derive(Serialize)]
struct TrialPoint {
    m: usize,
    r: f64,
    q: f64,
    y: Option<f64>,
    best_so_far: Option<f64>,
}

#[derive(Serialize)]
struct Trace {
    best: TrialPoint,
    trials: Vec<TrialPoint>,
}

pub fn optimize_json(values: &[f64], lambda: f64, replicates: usize, trials: usize, seed: u64) -> Out {
    let x = Signal::new("input", normalize(values).map_err(err)?).map_err(err)?;
    let cfg = OptimizerConfig::new(lambda, replicates, trials, SearchSpace::default(), seed);
    let res = optimize_single(&x, &cfg).map_err(err)?;
    let finite = |v: f64| v.is_finite().then_some(v);
    let trials = res
        .history
        .trials()
        .iter()
        .zip(res.best_so_far())
        .map(|(t, b)| TrialPoint {
            m: t.psi.m,
            r: t.psi.r,
            q: t.psi.q,
            y: finite(t.y),
            best_so_far: finite(b),
        })
        .collect();
    let best = TrialPoint {
        m: res.best_psi.m,
        r: res.best_psi.r,
        q: res.best_psi.q,
        y: finite(res.best_y),
        best_so_far: finite(res.best_y),
    };
    to_json(&Trace { best, trials })
}

pub fn synth_values(kind: &str, len: usize, seed: u64) -> Result<Vec<f64>, String> {
    let kind: SignalKind = kind.parse().map_err(err)?;
    let set = kind.generate(1, len, seed).map_err(err)?;
    Ok(set.signals()[0].values().to_vec())
}

/// SampEn and its counting SE over `steps` radii in `[r_lo, r_hi]`.
#[wasm_bindgen(js_name = entropyCurve)]
pub fn entropy_curve(values: &[f64], m: usize, r_lo: f64, r_hi: f64, steps: usize) -> Result<String, JsError> {
    curve_json(values, m, r_lo, r_hi, steps).map_err(|e| JsError::new(&e))
}

/// Stationary bootstrap replicate distribution at one `(m, r, q)`.
#[wasm_bindgen(js_name = bootstrapDistribution)]
pub fn bootstrap_distribution(
    values: &[f64],
    m: usize,
    r: f64,
    q: f64,
    replicates: usize,
    seed: u32,
) -> Result<String, JsError> {
    bootstrap_json(values, m, r, q, replicates, u64::from(seed)).map_err(|e| JsError::new(&e))
}

/// Trial-by-trial trace of the `(m, r, q)` search on one signal.
#[wasm_bindgen(js_name = optimizeTrace)]
pub fn optimize_trace(values: &[f64], lambda: f64, replicates: usize, trials: usize, seed: u32) -> Result<String, JsError> {
    optimize_json(values, lambda, replicates, trials, u64::from(seed)).map_err(|e| JsError::new(&e))
}

/// A normalised synthetic signal: `"white_noise"` or `"ar1"`.
#[wasm_bindgen(js_name = synthSignal)]
pub fn synth_signal(kind: &str, len: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    synth_values(kind, len, u64::from(seed)).map_err(|e| JsError::new(&e))
}
