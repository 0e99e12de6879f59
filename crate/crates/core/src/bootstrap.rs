//! Stationary bootstrap replicates and the bootstrap variance, bias and MSE
//! of a SampEn estimate.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::entropy::{sampen, SampEnParams, SampEnResult};
use crate::{par, rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Geometric success probability; the expected block length is `1 / q`.
    pub q: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(q: f64, replicates: usize, seed: u64) -> Result<Self> {
        check_q(q)?;
        if replicates == 0 {
            return Err(Error::invalid("replicate count must be >= 1"));
        }
        Ok(Self {
            q,
            replicates,
            seed,
        })
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("q must lie in (0, 1), got {q}")));
    }
    Ok(())
}

/// Block length draw with support `{1, 2, ...}` and `P(b = 1) = q`.
pub fn block_length<R: Rng + ?Sized>(q: f64, rng: &mut R) -> usize {
    let geom = Geometric::new(q).expect("q validated in (0, 1)");
    (geom.sample(rng) as usize).saturating_add(1)
}

/// Append `len` samples starting at `start` (0-based), wrapping past the end.
pub fn push_block(x: &[f64], start: usize, len: usize, out: &mut Vec<f64>) {
    let n = x.len();
    out.extend((0..len).map(|k| x[(start + k) % n]));
}

/// One stationary bootstrap replicate of `x`, exactly `x.len()` samples long.
///
/// Blocks start at a uniform index, have geometric length, wrap around the end
/// of the series, and the last block is truncated to fit.
pub fn stationary_bootstrap<R: Rng + ?Sized>(x: &[f64], q: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_q(q)?;
    let n = x.len();
    if n == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let start = rng.random_range(0..n);
        let len = block_length(q, rng).min(n - out.len());
        push_block(x, start, len, &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimates {
    pub original: SampEnResult,
    pub replicates: Vec<SampEnResult>,
    pub feasible: bool,
}

impl BootstrapEstimates {
    pub fn new(original: SampEnResult, replicates: Vec<SampEnResult>) -> Self {
        let finite = replicates.iter().filter(|r| r.value.is_finite()).count();
        // At least 90% of replicates must be finite.
        let feasible = original.value.is_finite() && 10 * finite >= 9 * replicates.len();
        Self {
            original,
            replicates,
            feasible,
        }
    }

    pub fn finite_values(&self) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.value.finite()).collect()
    }

    fn checked(&self) -> Result<(f64, Vec<f64>)> {
        match (self.feasible, self.original.value.finite()) {
            (true, Some(theta)) => Ok((theta, self.finite_values())),
            _ => Err(Error::Infeasible),
        }
    }

    /// Mean of the finite replicates.
    pub fn replicate_mean(&self) -> Result<f64> {
        let (_, v) = self.checked()?;
        Ok(mean(&v))
    }

    /// Spread of the finite replicates around their mean, divisor = their count.
    pub fn variance(&self) -> Result<f64> {
        let (_, v) = self.checked()?;
        let mu = mean(&v);
        Ok(v.iter().map(|t| (t - mu).powi(2)).sum::<f64>() / v.len() as f64)
    }

    /// Replicate mean minus the original estimate.
    pub fn bias(&self) -> Result<f64> {
        let (theta, v) = self.checked()?;
        Ok(mean(&v) - theta)
    }

    /// Mean squared deviation of the replicates from the original estimate;
    /// equals `bias^2 + variance`.
    pub fn mse(&self) -> Result<f64> {
        let (theta, v) = self.checked()?;
        Ok(v.iter().map(|t| (theta - t).powi(2)).sum::<f64>() / v.len() as f64)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Score `cfg.replicates` stationary bootstrap replicates of `x` by SampEn.
/// Replicate `b` (1-based) draws from stream `(cfg.seed, b)`.
pub fn bootstrap_sampen(x: &[f64], p: &SampEnParams, cfg: &BootstrapConfig) -> Result<BootstrapEstimates> {
    check_q(cfg.q)?;
    let original = sampen(x, p)?;
    let replicates = par::map_range(cfg.replicates, |b| {
        let mut rng = rng::stream(cfg.seed, &[b as u64 + 1]);
        let xb = stationary_bootstrap(x, cfg.q, &mut rng)?;
        sampen(&xb, p)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapEstimates::new(original, replicates))
}
