use sampen_core::entropy::{sampen, SampEnParams};
use sampen_core::experiments::SignalKind;
use sampen_core::io::{read_signals, write_signals, CsvLayout};
use sampen_core::optimizer::{optimize_set, OptimizerConfig};
use sampen_core::stats::{mann_whitney_u, stationarity_pipeline, Alternative};
use sampen_core::tpe::SearchSpace;
use sampen_core::SignalSet;

fn labelled(kind: SignalKind, label: &str, seed: u64) -> Vec<sampen_core::Signal> {
    kind.generate(12, 150, seed)
        .unwrap()
        .into_signals()
        .into_iter()
        .map(|s| {
            let id = format!("{label}-{}", s.id());
            s.with_id(id).with_label(Some(label.to_string()))
        })
        .collect()
}

#[test]
fn csv_to_group_comparison() {
    let mut signals = labelled(SignalKind::Ar1, "ar", 1);
    signals.extend(labelled(SignalKind::WhiteNoise, "wn", 2));
    let set = SignalSet::new(signals).unwrap();
    let mut csv = Vec::new();
    write_signals(&set, CsvLayout::Long, &mut csv).unwrap();
    let (loaded, _) = read_signals(csv.as_slice()).unwrap();
    assert_eq!(loaded, set);

    // Raw AR(1) and white noise differ sharply in regularity.
    let cfg = OptimizerConfig::new(1.0 / 3.0, 30, 20, SearchSpace::default(), 7);
    let res = optimize_set(&loaded, &cfg).unwrap();
    let best = res.best_psi;
    let p = SampEnParams::new(best.m, best.r).unwrap();
    let group = |label: &str| -> Vec<f64> {
        loaded
            .iter()
            .filter(|s| s.label() == Some(label))
            .filter_map(|s| sampen(s.values(), &p).unwrap().value.finite())
            .collect()
    };
    let (ar, wn) = (group("ar"), group("wn"));
    let test = mann_whitney_u(&ar, &wn, Alternative::Less).unwrap();
    assert!(test.p_value < 0.01, "{test:?}");

    // After differencing the screen keeps everything and the result is normalised.
    let (kept, report) = stationarity_pipeline(&loaded, 0.05).unwrap();
    assert_eq!(report.entries.len(), loaded.len());
    assert!(kept.len() >= 22, "{}", kept.len());
    assert!(kept.iter().all(|s| s.len() == 149));
}

#[test]
fn optimisation_is_reproducible() {
    let set = SignalKind::WhiteNoise.generate(5, 80, 3).unwrap();
    let cfg = OptimizerConfig::new(0.2, 20, 15, SearchSpace::default().with_fixed_q(0.7), 11);
    let a = optimize_set(&set, &cfg).unwrap();
    let b = optimize_set(&set, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.history.trials().iter().all(|t| t.psi.q == 0.7));
}
