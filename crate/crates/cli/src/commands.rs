use std::collections::BTreeSet;
use std::path::Path;

use sampen_core::baselines::{
    ar_order_m, convergence_select, gaussian_mse_approx, sampeneff_select, standard_params_eval, RadiusGrid,
};
use sampen_core::bootstrap::{bootstrap_sampen, BootstrapConfig};
use sampen_core::entropy::{counting_se, fuzzen, sampen, EntropyValue, SampEnParams};
use sampen_core::experiments::{
    estimator_error, method_comparison, ComparisonConfig, SignalKind, VarBenchConfig,
};
use sampen_core::io::{format_float, read_signals_path, write_signals, CsvLayout};
use sampen_core::optimizer::{optimize_set, OptResult, OptimizerConfig};
use sampen_core::signal::{ar1, white_noise, Ar1Config};
use sampen_core::stats::{mann_whitney_u, median, stationarity_report, Alternative, PipelineReport};
use sampen_core::tpe::{QDomain, SearchSpace};
use sampen_core::{rng, Signal, SignalSet};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::CliError;

pub enum Outcome {
    /// Wrapped in the result envelope.
    Json(Value),
    /// Written to stdout verbatim.
    Raw(String),
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("payload types serialise")
}

fn load(input: &InputArgs) -> Result<(SignalSet, CsvLayout), CliError> {
    Ok(read_signals_path(&input.input)?)
}

fn layout_name(l: CsvLayout) -> &'static str {
    match l {
        CsvLayout::Long => "long",
        CsvLayout::Wide => "wide",
    }
}

/// Normalise every signal, keeping constant signals as they are.
fn normalize_lenient(set: &SignalSet) -> Result<(SignalSet, Vec<bool>), CliError> {
    let mut flags = Vec::with_capacity(set.len());
    let signals = set
        .iter()
        .map(|s| match s.normalize() {
            Ok(n) => {
                flags.push(true);
                Ok(n)
            }
            Err(sampen_core::Error::ZeroVariance | sampen_core::Error::TooShort { .. }) => {
                flags.push(false);
                Ok(s.clone())
            }
            Err(e) => Err(CliError::from(e)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((SignalSet::new(signals)?, flags))
}

fn prepare(set: &SignalSet, skip: bool, alpha: f64) -> Result<(SignalSet, Option<PipelineReport>), CliError> {
    if skip {
        return Ok((set.normalized()?, None));
    }
    let (kept, report) = stationarity_report(set, alpha)?;
    match kept {
        Some(k) => Ok((k, Some(report))),
        None => Err(CliError::data(format!(
            "no signal survived the stationarity screen at alpha = {alpha}; see --no-preprocess"
        ))),
    }
}

fn search_space(a: &SearchArgs) -> SearchSpace {
    SearchSpace {
        m_max: a.m_max,
        r_lo: a.r_lo,
        r_hi: a.r_hi,
        q: match a.q {
            Some(value) => QDomain::Fixed { value },
            None => QDomain::Search { lo: a.q_lo, hi: a.q_hi },
        },
    }
}

fn optimizer_config(a: &SearchArgs, seed: u64) -> OptimizerConfig {
    let mut cfg = OptimizerConfig::new(a.lambda, a.replicates, a.trials, search_space(a), seed);
    cfg.init_trials = a.init_trials.min(a.trials);
    cfg
}

/// Advice on lambda when most trials crowd one end of the r domain.
fn lambda_guidance(res: &OptResult, space: &SearchSpace) -> Option<String> {
    let trials = res.history.trials();
    let share = |pred: &dyn Fn(f64) -> bool| trials.iter().filter(|t| pred(t.psi.r)).count() as f64 / trials.len() as f64;
    let high = share(&|r| r >= space.r_hi - 0.05);
    let low = share(&|r| r <= space.r_lo + 0.05);
    if high > 0.5 {
        Some(format!(
            "{:.0}% of trials explored r near its upper bound; consider increasing lambda",
            100.0 * high
        ))
    } else if low > 0.5 {
        Some(format!(
            "{:.0}% of trials explored r near its lower bound; consider decreasing lambda",
            100.0 * low
        ))
    } else {
        None
    }
}

fn ids(set: &SignalSet) -> Vec<String> {
    set.iter().map(|s| s.id().to_string()).collect()
}

pub fn optimize(a: &OptimizeArgs, seed: u64) -> Result<Outcome, CliError> {
    let (raw, layout) = load(&a.input)?;
    let (set, report) = prepare(&raw, a.preprocess.no_preprocess, a.preprocess.alpha)?;
    let cfg = optimizer_config(&a.search, seed);
    let res = optimize_set(&set, &cfg)?;
    let at_best: Vec<Value> = set
        .iter()
        .zip(&res.best_per_signal)
        .map(|(s, e)| {
            json!({
                "signal_id": s.id(),
                "entropy": e.entropy,
                "bootstrap_se": e.variance.map(f64::sqrt),
                "mse": e.mse,
                "bias": e.bias,
                "feasible": e.feasible,
            })
        })
        .collect();
    Ok(Outcome::Json(json!({
        "input_layout": layout_name(layout),
        "signals_in": raw.len(),
        "signals_used": ids(&set),
        "preprocessing": report,
        "best": {
            "m": res.best_psi.m,
            "r": res.best_psi.r,
            "q": res.best_psi.q,
            "objective": res.best_y,
            "trial": res.best_index,
        },
        "lambda_guidance": lambda_guidance(&res, &cfg.space),
        "at_best": at_best,
        "result": to_value(&res),
    })))
}

pub fn estimate(a: &EstimateArgs, seed: u64) -> Result<Outcome, CliError> {
    let (raw, layout) = load(&a.input)?;
    let params = SampEnParams::new(a.m, a.r)?;
    let boot = a.q.map(|q| BootstrapConfig::new(q, a.replicates, 0)).transpose()?;
    let (set, normalized) = if a.raw {
        (raw.clone(), vec![false; raw.len()])
    } else {
        normalize_lenient(&raw)?
    };
    let rows: Vec<Value> = set
        .iter()
        .zip(normalized)
        .enumerate()
        .map(|(i, (s, norm))| {
            let x = s.values();
            let mut row = json!({
                "signal_id": s.id(),
                "label": s.label(),
                "len": s.len(),
                "normalized": norm,
            });
            if a.fuzzen {
                let v = fuzzen(x, a.m, a.r, a.eta);
                row["fuzzen"] = to_value(v.as_ref().ok());
                row["error"] = to_value(v.err().map(|e| e.to_string()));
                return row;
            }
            match sampen(x, &params) {
                Ok(res) => {
                    row["sampen"] = to_value(res.value);
                    row["counting_se"] = to_value(counting_se(x, &params).ok());
                }
                Err(e) => {
                    row["sampen"] = to_value(EntropyValue::Undefined);
                    row["error"] = to_value(e.to_string());
                }
            }
            if let Some(b) = boot {
                let cfg = BootstrapConfig {
                    seed: rng::child_seed(seed, &[i as u64]),
                    ..b
                };
                match bootstrap_sampen(x, &params, &cfg) {
                    Ok(est) => {
                        row["bootstrap_feasible"] = json!(est.feasible);
                        row["bootstrap_se"] = to_value(est.variance().ok().map(f64::sqrt));
                        row["bootstrap_mse"] = to_value(est.mse().ok());
                        row["bootstrap_bias"] = to_value(est.bias().ok());
                    }
                    Err(e) => {
                        row["bootstrap_feasible"] = json!(false);
                        row["error"] = to_value(e.to_string());
                    }
                }
            }
            row
        })
        .collect();
    Ok(Outcome::Json(json!({
        "input_layout": layout_name(layout),
        "m": a.m,
        "r": a.r,
        "q": a.q,
        "replicates": a.q.map(|_| a.replicates),
        "measure": if a.fuzzen { "fuzzen" } else { "sampen" },
        "eta": a.fuzzen.then_some(a.eta),
        "signals": rows,
    })))
}

pub fn compare(a: &CompareArgs, seed: u64) -> Result<Outcome, CliError> {
    let (raw, layout) = load(&a.input)?;
    let labels: BTreeSet<&str> = raw
        .iter()
        .map(|s| s.label().ok_or_else(|| CliError::data(format!("signal '{}' has no label", s.id()))))
        .collect::<Result<_, _>>()?;
    if labels.len() != 2 {
        return Err(CliError::data(format!(
            "compare needs exactly two labels, found {}",
            labels.len()
        )));
    }
    let labels: Vec<String> = labels.into_iter().map(str::to_string).collect();
    let (set, report) = prepare(&raw, !a.preprocess, a.alpha)?;

    let (m, r, q, source, per_signal): (usize, f64, f64, &str, Vec<(Option<f64>, Option<f64>)>) = match (a.m, a.r) {
        (Some(m), Some(r)) => {
            let p = SampEnParams::new(m, r)?;
            let bc = BootstrapConfig::new(a.se_q, a.search.replicates, 0)?;
            let rows = set
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let cfg = BootstrapConfig {
                        seed: rng::child_seed(seed, &[i as u64]),
                        ..bc
                    };
                    let est = bootstrap_sampen(s.values(), &p, &cfg).ok();
                    let value = est.as_ref().and_then(|e| e.original.value.finite());
                    let se = est.and_then(|e| e.variance().ok()).map(f64::sqrt);
                    (value, se)
                })
                .collect();
            (m, r, a.se_q, "given", rows)
        }
        _ => {
            let res = optimize_set(&set, &optimizer_config(&a.search, seed))?;
            let rows = res
                .best_per_signal
                .iter()
                .map(|e| (e.entropy.finite(), e.variance.map(f64::sqrt)))
                .collect();
            (res.best_psi.m, res.best_psi.r, res.best_psi.q, "optimized", rows)
        }
    };

    let mut groups = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut ses: Vec<Vec<f64>> = Vec::new();
    for label in &labels {
        let members: Vec<usize> = (0..set.len()).filter(|&i| set.signals()[i].label() == Some(label.as_str())).collect();
        let v: Vec<f64> = members.iter().filter_map(|&i| per_signal[i].0).collect();
        let s: Vec<f64> = members.iter().filter_map(|&i| per_signal[i].1).collect();
        groups.push(json!({
            "label": label,
            "signals": members.len(),
            "defined": v.len(),
            "entropies": v,
        }));
        values.push(v);
        ses.push(s);
    }
    let alternative = match a.alternative {
        AlternativeArg::TwoSided => Alternative::TwoSided,
        AlternativeArg::Less => Alternative::Less,
        AlternativeArg::Greater => Alternative::Greater,
    };
    let mut test = mann_whitney_u(&values[0], &values[1], alternative)?;
    let med = |v: &Vec<f64>| (!v.is_empty()).then(|| median(v));
    test.median_se_a = med(&ses[0]);
    test.median_se_b = med(&ses[1]);
    Ok(Outcome::Json(json!({
        "input_layout": layout_name(layout),
        "parameters": { "m": m, "r": r, "q": q, "source": source },
        "preprocessing": report,
        "labels": labels,
        "groups": groups,
        "test": test,
    })))
}

pub fn preprocess(a: &PreprocessArgs) -> Result<Outcome, CliError> {
    let (raw, layout) = load(&a.input)?;
    let (kept, report) = stationarity_report(&raw, a.alpha)?;
    let Some(kept) = kept else {
        return Err(CliError::data(format!(
            "no signal survived the stationarity screen at alpha = {}",
            a.alpha
        )));
    };
    if let Some(path) = &a.csv_out {
        write_csv(&kept, layout, path)?;
    }
    Ok(Outcome::Json(json!({
        "input_layout": layout_name(layout),
        "signals_in": raw.len(),
        "retained": ids(&kept),
        "report": report,
        "csv_out": a.csv_out.as_ref().map(|p| p.display().to_string()),
    })))
}

fn write_csv(set: &SignalSet, layout: CsvLayout, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    Ok(write_signals(set, layout, file)?)
}

pub fn baseline(a: &BaselineArgs, seed: u64) -> Result<Outcome, CliError> {
    let (raw, layout) = load(&a.input)?;
    let set = if a.raw { raw } else { raw.normalized()? };
    let grid = RadiusGrid::default();
    let (m, m_source) = match a.m {
        Some(m) => (m, "given"),
        None if a.method == MethodArg::Standard => (2, "standard"),
        None => (ar_order_m(&set, a.p_max)?, "ar_order_bic"),
    };
    let eta = a.fuzzen.then_some(a.eta);
    let mut result = match a.method {
        MethodArg::Sampeneff => sampeneff_select(&set, m, &grid)?,
        MethodArg::Convergence => convergence_select(&set, m, &grid)?,
        MethodArg::Standard => standard_params_eval(&set, eta),
    };
    if let Some(eta) = eta {
        for (row, s) in result.per_signal.iter_mut().zip(set.iter()) {
            row.fuzzen = fuzzen(s.values(), result.m_star, result.r_star, eta).ok();
        }
    }
    let objective = gaussian_mse_approx(&set, result.m_star, result.r_star, a.draws, a.lambda, seed);
    Ok(Outcome::Json(json!({
        "input_layout": layout_name(layout),
        "m_source": m_source,
        "result": result,
        "objective": objective.as_ref().ok(),
        "objective_error": objective.err().map(|e| e.to_string()),
        "lambda": a.lambda,
        "draws": a.draws,
    })))
}

pub fn synth(a: &SynthArgs, seed: u64) -> Result<Outcome, CliError> {
    let signals = (0..a.n)
        .map(|i| {
            let child = rng::child_seed(seed, &[i as u64]);
            let s = match a.kind {
                KindArg::WhiteNoise => white_noise(a.len, a.sigma, child)?.with_id(format!("wn-{i}")),
                KindArg::Ar1 => ar1(&Ar1Config {
                    phi: a.phi,
                    sigma: a.sigma,
                    burn_in: a.burn_in,
                    len: a.len,
                    seed: child,
                })?
                .with_id(format!("ar1-{i}")),
            };
            Ok(s.with_label(a.label.clone()))
        })
        .collect::<Result<Vec<Signal>, CliError>>()?;
    let set = SignalSet::new(signals)?;
    match &a.csv_out {
        None => {
            let mut buf = Vec::new();
            write_signals(&set, CsvLayout::Long, &mut buf)?;
            Ok(Outcome::Raw(String::from_utf8(buf).expect("CSV output is UTF-8")))
        }
        Some(path) => {
            write_csv(&set, CsvLayout::Long, path)?;
            Ok(Outcome::Json(json!({
                "kind": kind_name(a.kind),
                "count": a.n,
                "len": a.len,
                "phi": (a.kind == KindArg::Ar1).then_some(a.phi),
                "sigma": a.sigma,
                "burn_in": (a.kind == KindArg::Ar1).then_some(a.burn_in),
                "csv_out": path.display().to_string(),
                "signal_ids": ids(&set),
            })))
        }
    }
}

fn kind(k: KindArg) -> SignalKind {
    match k {
        KindArg::WhiteNoise => SignalKind::WhiteNoise,
        KindArg::Ar1 => SignalKind::Ar1,
    }
}

fn kind_name(k: KindArg) -> &'static str {
    match k {
        KindArg::WhiteNoise => "white_noise",
        KindArg::Ar1 => "ar1",
    }
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn varbench(a: &VarbenchArgs, seed: u64) -> Result<Outcome, CliError> {
    let mut cfg = VarBenchConfig::desk(kind(a.kind), seed);
    cfg.len = a.len;
    cfg.m = a.m;
    cfg.r = a.r;
    cfg.q = a.q.unwrap_or(cfg.q);
    cfg.replicates = a.replicates;
    cfg.population = a.population;
    cfg.subsample = a.subsample;
    cfg.repeats = a.repeats;
    if a.full_scale {
        cfg.population = 10_000;
        cfg.repeats = 20;
    }
    let res = estimator_error(&cfg)?;
    if let Some(path) = &a.csv_out {
        let rows = res
            .repeats
            .iter()
            .enumerate()
            .map(|(k, r)| {
                vec![
                    k.to_string(),
                    format_float(r.counting_mse),
                    format_float(r.challenger_mse),
                    format_float(r.reduction_pct),
                    r.used.to_string(),
                ]
            })
            .collect();
        write_table(
            path,
            &["repeat", "counting_mse", "bootstrap_mse", "reduction_pct", "signals_used"],
            rows,
        )?;
    }
    Ok(Outcome::Json(to_value(&res)))
}

pub fn compare_methods(a: &CompareMethodsArgs, seed: u64) -> Result<Outcome, CliError> {
    let mut cfg = ComparisonConfig::desk(kind(a.kind), seed);
    cfg.count = a.count;
    cfg.len = a.len;
    cfg.lambda = a.lambda.unwrap_or(cfg.lambda);
    cfg.replicates = a.replicates;
    cfg.trials = a.trials;
    cfg.space.m_max = a.m_max;
    if let Some(q) = a.q {
        cfg.space = cfg.space.with_fixed_q(q);
    }
    cfg.draws = a.draws;
    cfg.p_max = a.p_max;
    cfg.repeats = a.repeats;
    let rows = method_comparison(&cfg)?;
    if let Some(path) = &a.csv_out {
        let table = rows
            .iter()
            .map(|r| {
                vec![
                    r.repeat.to_string(),
                    to_value(r.strategy).as_str().unwrap_or_default().to_string(),
                    r.m_star.map(|m| m.to_string()).unwrap_or_default(),
                    opt_float(r.r_star),
                    opt_float(r.q_star),
                    opt_float(r.objective),
                    opt_float(r.mean_entropy),
                    format_float(r.seconds),
                ]
            })
            .collect();
        write_table(
            path,
            &["repeat", "method", "m_star", "r_star", "q_star", "objective", "mean_entropy", "seconds"],
            table,
        )?;
    }
    // Wall-clock times vary run to run; they live in a separate block.
    let timings: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "repeat": r.repeat, "strategy": r.strategy, "seconds": r.seconds }))
        .collect();
    let stable: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut v = to_value(r);
            v.as_object_mut().expect("row is an object").remove("seconds");
            v
        })
        .collect();
    Ok(Outcome::Json(json!({
        "config": cfg,
        "rows": stable,
        "timings": timings,
    })))
}
