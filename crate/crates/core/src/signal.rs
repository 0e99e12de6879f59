//! Signals, normalisation, differencing, and the synthetic generators.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// One finite, real-valued time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    id: String,
    label: Option<String>,
    values: Vec<f64>,
}

impl Signal {
    /// Fails on an empty series or on any non-finite sample.
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::Data(format!("signal '{id}' has no samples")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "signal '{id}' has a non-finite value at position {pos}"
            )));
        }
        Ok(Self {
            id,
            label: None,
            values,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same id and label, new samples.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            id: self.id.clone(),
            label: self.label.clone(),
            values,
        }
    }

    /// Zero mean, unit sample (n - 1) standard deviation.
    pub fn normalize(&self) -> Result<Signal> {
        Ok(self.with_values(normalize(&self.values)?))
    }

    /// First difference, `out[t] = x[t + 1] - x[t]`.
    pub fn difference(&self) -> Result<Signal> {
        Ok(self.with_values(difference(&self.values)?))
    }
}

/// Sample mean and (n - 1) standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn normalize(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: x.len(),
        });
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::ZeroVariance);
    }
    let (mean, sd) = mean_std(x);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::ZeroVariance);
    }
    let mut out: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    // A second centring pass removes the rounding residue of the first.
    let residual = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|v| *v -= residual);
    Ok(out)
}

pub fn difference(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: x.len(),
        });
    }
    Ok(x.windows(2).map(|w| w[1] - w[0]).collect())
}

/// A non-empty collection of signals with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSet {
    signals: Vec<Signal>,
}

impl SignalSet {
    pub fn new(signals: Vec<Signal>) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::Data("signal set is empty".into()));
        }
        let mut seen = HashSet::with_capacity(signals.len());
        for s in &signals {
            if !seen.insert(s.id()) {
                return Err(Error::Data(format!("duplicate signal id '{}'", s.id())));
            }
        }
        Ok(Self { signals })
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Signal> {
        self.signals.iter()
    }

    pub fn into_signals(self) -> Vec<Signal> {
        self.signals
    }

    /// Normalise every member; fails on the first degenerate signal.
    pub fn normalized(&self) -> Result<SignalSet> {
        let signals = self
            .signals
            .iter()
            .map(Signal::normalize)
            .collect::<Result<Vec<_>>>()?;
        SignalSet::new(signals)
    }
}

impl<'a> IntoIterator for &'a SignalSet {
    type Item = &'a Signal;
    type IntoIter = std::slice::Iter<'a, Signal>;

    fn into_iter(self) -> Self::IntoIter {
        self.signals.iter()
    }
}

/// `len` i.i.d. draws from N(0, sigma^2).
pub fn white_noise(len: usize, sigma: f64, seed: u64) -> Result<Signal> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng::stream(seed, &[]);
    let values = (0..len).map(|_| normal.sample(&mut rng)).collect();
    Signal::new(format!("wn-{seed}"), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Config {
    pub phi: f64,
    pub sigma: f64,
    pub burn_in: usize,
    pub len: usize,
    pub seed: u64,
}

impl Ar1Config {
    pub fn new(phi: f64, sigma: f64, len: usize, seed: u64) -> Self {
        Self {
            phi,
            sigma,
            burn_in: 500,
            len,
            seed,
        }
    }
}

/// `x_t = phi x_{t-1} + eps_t` from `x_0 = 0`, discarding the first `burn_in` steps.
pub fn ar1(cfg: &Ar1Config) -> Result<Signal> {
    if !(cfg.phi.abs() < 1.0) {
        return Err(Error::NonStationaryConfig(cfg.phi.abs()));
    }
    let mut rng = rng::stream(cfg.seed, &[]);
    let values = ar1_path(cfg.phi, cfg.sigma, cfg.burn_in, cfg.len, &mut rng)?;
    Signal::new(format!("ar1-{}", cfg.seed), values)
}

/// Simulate an AR(1) path with any coefficient (unit roots allowed).
pub(crate) fn ar1_path<R: Rng + ?Sized>(
    phi: f64,
    sigma: f64,
    burn_in: usize,
    len: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut x = 0.0;
    let mut out = Vec::with_capacity(len);
    for step in 0..burn_in + len {
        x = phi * x + normal.sample(rng);
        if step >= burn_in {
            out.push(x);
        }
    }
    Ok(out)
}

/// A set of `count` signals from one generator, seeds derived from `seed` by index.
pub fn white_noise_set(count: usize, len: usize, sigma: f64, seed: u64) -> Result<SignalSet> {
    let signals = (0..count)
        .map(|i| {
            let s = white_noise(len, sigma, rng::child_seed(seed, &[i as u64]))?;
            Ok(s.with_id(format!("wn-{i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    SignalSet::new(signals)
}

pub fn ar1_set(count: usize, phi: f64, sigma: f64, len: usize, seed: u64) -> Result<SignalSet> {
    let signals = (0..count)
        .map(|i| {
            let cfg = Ar1Config::new(phi, sigma, len, rng::child_seed(seed, &[i as u64]));
            Ok(ar1(&cfg)?.with_id(format!("ar1-{i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    SignalSet::new(signals)
}


/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let den: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    num / den
}
