//! Tree-structured Parzen Estimator over `(m, r, q)`.
//!
//! The history is split into a better group (the `min(ceil(gamma T), 25)`
//! lowest objectives) and a worse group. Each group gets a density that is a
//! product over dimensions of one-dimensional mixtures sharing the component
//! weights: component 0 is the non-informative prior, the remaining components
//! are kernels centred on the group's trials. `r` and `q` use Gaussian kernels
//! truncated to their interval; `m` uses a Gaussian discretised onto
//! `{1, ..., U}`. Candidates are drawn from the better density and the one
//! maximising `log p_better - log p_worse` is proposed.

use std::cmp::Ordering;
use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::{Error, Result};

/// Samples drawn at a domain edge are pulled inside by this much.
pub const EDGE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub m: usize,
    pub r: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QDomain {
    Search { lo: f64, hi: f64 },
    Fixed { value: f64 },
}

/// The decision space: `m` in `{1..=m_max}`, `r` in `(r_lo, r_hi)`, `q` searched or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub m_max: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub q: QDomain,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            m_max: 3,
            r_lo: 0.01,
            r_hi: 1.0,
            q: QDomain::Search { lo: 0.01, hi: 0.99 },
        }
    }
}

impl SearchSpace {
    pub fn with_fixed_q(mut self, q: f64) -> Self {
        self.q = QDomain::Fixed { value: q };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_max < 1 {
            return Err(Error::invalid("m upper bound must be >= 1"));
        }
        if !(self.r_lo > 0.0 && self.r_lo < self.r_hi && self.r_hi.is_finite()) {
            return Err(Error::invalid("r domain must satisfy 0 < lo < hi"));
        }
        match self.q {
            QDomain::Search { lo, hi } if !(lo > 0.0 && lo < hi && hi < 1.0) => {
                Err(Error::invalid("q domain must satisfy 0 < lo < hi < 1"))
            }
            QDomain::Fixed { value } if !(value > 0.0 && value < 1.0) => {
                Err(Error::invalid("fixed q must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }

    /// Number of searched dimensions.
    pub fn dims(&self) -> usize {
        match self.q {
            QDomain::Search { .. } => 3,
            QDomain::Fixed { .. } => 2,
        }
    }

    pub fn contains(&self, p: &ParamVector) -> bool {
        let q_ok = match self.q {
            QDomain::Search { lo, hi } => p.q > lo && p.q < hi,
            QDomain::Fixed { value } => p.q == value,
        };
        (1..=self.m_max).contains(&p.m) && p.r > self.r_lo && p.r < self.r_hi && q_ok
    }

    /// Pull continuous coordinates strictly inside their open intervals.
    pub fn clamp(&self, mut p: ParamVector) -> ParamVector {
        p.m = p.m.clamp(1, self.m_max);
        p.r = p.r.clamp(self.r_lo + EDGE_EPS, self.r_hi - EDGE_EPS);
        p.q = match self.q {
            QDomain::Search { lo, hi } => p.q.clamp(lo + EDGE_EPS, hi - EDGE_EPS),
            QDomain::Fixed { value } => value,
        };
        p
    }

    /// Uniform draw: `m` uniform on `{1..=m_max}`, `r` and `q` uniform on their intervals.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let m = rng.random_range(1..=self.m_max);
        let r = rng.random_range(self.r_lo..self.r_hi);
        let q = match self.q {
            QDomain::Search { lo, hi } => rng.random_range(lo..hi),
            QDomain::Fixed { value } => value,
        };
        self.clamp(ParamVector { m, r, q })
    }
}

/// One evaluated point; `y = +inf` marks an infeasible trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub psi: ParamVector,
    #[serde(with = "crate::io::float_or_inf")]
    pub y: f64,
}

impl Trial {
    pub fn new(psi: ParamVector, y: f64) -> Self {
        let y = if y.is_nan() { f64::INFINITY } else { y };
        Self { psi, y }
    }
}

/// Trials in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialHistory {
    trials: Vec<Trial>,
}

impl TrialHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, trial: Trial) {
        self.trials.push(trial);
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Indices sorted by `y` ascending; `+inf` last, ties by insertion order.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.trials.len()).collect();
        idx.sort_by(|&a, &b| self.trials[a].y.total_cmp(&self.trials[b].y).then(a.cmp(&b)));
        idx
    }
}

impl FromIterator<Trial> for TrialHistory {
    fn from_iter<I: IntoIterator<Item = Trial>>(iter: I) -> Self {
        Self {
            trials: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub gamma: f64,
    pub better_cap: usize,
    pub candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.10,
            better_cap: 25,
            candidates: 24,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid("gamma must lie in (0, 1]"));
        }
        if self.candidates == 0 || self.better_cap == 0 {
            return Err(Error::invalid("candidates and better_cap must be >= 1"));
        }
        Ok(())
    }
}

/// `min(ceil(gamma T), cap)`.
pub fn better_count(total: usize, gamma: f64, cap: usize) -> usize {
    // Guard the ceiling against representation error, e.g. 0.1 * 30.
    let raw = gamma * total as f64;
    let rounded = raw.round();
    let ceil = if (raw - rounded).abs() < 1e-9 { rounded } else { raw.ceil() };
    (ceil as usize).min(cap)
}

/// Better and worse trial indices, each in ascending-`y` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistorySplit {
    pub better: Vec<usize>,
    pub worse: Vec<usize>,
}

pub fn split_history(history: &TrialHistory, cfg: &TpeConfig) -> Result<HistorySplit> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut sorted = history.sorted_indices();
    let n_better = better_count(history.len(), cfg.gamma, cfg.better_cap);
    let worse = sorted.split_off(n_better);
    Ok(HistorySplit {
        better: sorted,
        worse,
    })
}

/// Scott's rule `T^(-1/(d+4))` clipped below by `(hi - lo) / min(T_total, 100)`.
pub fn scott_bandwidth(t_group: usize, d: usize, lo: f64, hi: f64, t_total: usize) -> f64 {
    let scott = (t_group.max(1) as f64).powf(-1.0 / (d as f64 + 4.0));
    let b_min = (hi - lo) / t_total.clamp(1, 100) as f64;
    scott.max(b_min)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Standard normal mass on `[a, b]`, evaluated on the accurate tail.
fn std_normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_cdf(-b)
    }
}

/// Standard normal draw conditioned on `[a, b]`.
fn sample_std_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a >= 0.0 {
        return -sample_std_truncated(-b, -a, rng);
    }
    let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
    let u: f64 = rng.random();
    std_normal_quantile(pa + u * (pb - pa)).clamp(a, b)
}

/// Log density at `v` of N(center, b^2) truncated to `[lo, hi]`.
pub fn log_kernel_continuous(v: f64, center: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let z = (v - center) / b;
    let mass = std_normal_mass((lo - center) / b, (hi - center) / b);
    -0.5 * z * z - b.ln() - 0.5 * (2.0 * PI).ln() - mass.ln()
}

pub fn kernel_continuous(v: f64, center: f64, b: f64, lo: f64, hi: f64) -> f64 {
    log_kernel_continuous(v, center, b, lo, hi).exp()
}

/// Mass of N(center, b^2) on `[m - 1/2, m + 1/2]` over its mass on `[1/2, U + 1/2]`.
pub fn kernel_discrete(m: usize, center: f64, b: f64, upper: usize) -> f64 {
    let cell = std_normal_mass((m as f64 - 0.5 - center) / b, (m as f64 + 0.5 - center) / b);
    let total = std_normal_mass((0.5 - center) / b, (upper as f64 + 0.5 - center) / b);
    if total > 0.0 {
        cell / total
    } else {
        // All mass lies far outside the support; fall back to the nearest cell.
        let nearest = center.round().clamp(1.0, upper as f64) as usize;
        f64::from(u8::from(m == nearest))
    }
}

/// Mixture weights for the better group (uniform) and the worse group
/// (recency-decayed), each with the prior at index 0.
///
/// In the worse group the prior takes query rank 1 (the oldest slot) and the
/// group's trials take ranks `2..=T_g + 1` in insertion order. Raw weights are
/// 1 for the 25 most recent ranks and `tau + (1 - tau) / (T_g + 1)` with
/// `tau = (i - 1) / (T_g - 25)` otherwise, then normalised.
pub fn decay_weights(t_better: usize, t_worse: usize) -> (Vec<f64>, Vec<f64>) {
    (better_weights(t_better), worse_weights(t_worse))
}

fn better_weights(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64 + 1.0); n + 1]
}

fn worse_weights(n: usize) -> Vec<f64> {
    let slots = n + 1;
    let raw: Vec<f64> = (1..=slots)
        .map(|i| {
            if n <= 25 || i > slots - 25 {
                1.0
            } else {
                let tau = (i - 1) as f64 / (n - 25) as f64;
                tau + (1.0 - tau) / slots as f64
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupRole {
    Better,
    Worse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DimKind {
    Continuous { lo: f64, hi: f64 },
    Discrete { upper: usize },
}

/// One coordinate's kernels; component `t` has `centers[t]` and `widths[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimMixture {
    pub kind: DimKind,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl DimMixture {
    fn log_kernel(&self, t: usize, v: f64) -> f64 {
        let (c, b) = (self.centers[t], self.widths[t]);
        match self.kind {
            DimKind::Continuous { lo, hi } => log_kernel_continuous(v, c, b, lo, hi),
            DimKind::Discrete { upper } => kernel_discrete(v as usize, c, b, upper).ln(),
        }
    }

    pub fn log_pdf(&self, weights: &[f64], v: f64) -> f64 {
        log_sum_exp(weights.iter().enumerate().map(|(t, w)| w.ln() + self.log_kernel(t, v)))
    }

    fn sample_component<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> f64 {
        let (c, b) = (self.centers[t], self.widths[t]);
        match self.kind {
            DimKind::Continuous { lo, hi } => {
                c + b * sample_std_truncated((lo - c) / b, (hi - c) / b, rng)
            }
            DimKind::Discrete { upper } => {
                let masses: Vec<f64> = (1..=upper).map(|m| kernel_discrete(m, c, b, upper)).collect();
                (categorical(&masses, rng) + 1) as f64
            }
        }
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Product of per-dimension mixtures with shared component weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDensity {
    pub weights: Vec<f64>,
    pub m: DimMixture,
    pub r: DimMixture,
    /// `None` when `q` is fixed.
    pub q: Option<DimMixture>,
    pub fixed_q: Option<f64>,
}

impl SurrogateDensity {
    pub fn log_pdf(&self, p: &ParamVector) -> f64 {
        let mut lp = self.m.log_pdf(&self.weights, p.m as f64) + self.r.log_pdf(&self.weights, p.r);
        if let Some(q) = &self.q {
            lp += q.log_pdf(&self.weights, p.q);
        }
        lp
    }

    /// Each coordinate picks its own component by weight, then samples that kernel.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let m = self.m.sample_component(categorical(&self.weights, rng), rng) as usize;
        let r = self.r.sample_component(categorical(&self.weights, rng), rng);
        let q = match (&self.q, self.fixed_q) {
            (Some(q), _) => q.sample_component(categorical(&self.weights, rng), rng),
            (None, Some(v)) => v,
            (None, None) => unreachable!("q is either searched or fixed"),
        };
        ParamVector { m, r, q }
    }
}

/// Density for one group. `group` holds trial indices into `history`; the
/// worse group is re-ordered by insertion for the recency weights.
pub fn build_density(
    history: &TrialHistory,
    group: &[usize],
    role: GroupRole,
    space: &SearchSpace,
) -> SurrogateDensity {
    let mut members = group.to_vec();
    let weights = match role {
        GroupRole::Better => better_weights(members.len()),
        GroupRole::Worse => {
            members.sort_unstable();
            worse_weights(members.len())
        }
    };
    let trials: Vec<&Trial> = members.iter().map(|&i| &history.trials()[i]).collect();
    let (n, d, total) = (trials.len(), space.dims(), history.len());

    let m_width = (space.m_max - 1).max(1) as f64;
    let m_band = scott_bandwidth(n, d, 1.0, space.m_max as f64, total).max(f64::MIN_POSITIVE);
    let mut m_mix = DimMixture {
        kind: DimKind::Discrete { upper: space.m_max },
        centers: vec![(space.m_max as f64 - 1.0) / 2.0],
        widths: vec![m_width],
    };
    let r_band = scott_bandwidth(n, d, space.r_lo, space.r_hi, total);
    let mut r_mix = DimMixture {
        kind: DimKind::Continuous {
            lo: space.r_lo,
            hi: space.r_hi,
        },
        centers: vec![0.5],
        widths: vec![1.0],
    };
    let (mut q_mix, fixed_q, q_band) = match space.q {
        QDomain::Search { lo, hi } => (
            Some(DimMixture {
                kind: DimKind::Continuous { lo, hi },
                centers: vec![0.5],
                widths: vec![1.0],
            }),
            None,
            scott_bandwidth(n, d, lo, hi, total),
        ),
        QDomain::Fixed { value } => (None, Some(value), 0.0),
    };
    for t in &trials {
        m_mix.centers.push(t.psi.m as f64);
        m_mix.widths.push(m_band);
        r_mix.centers.push(t.psi.r);
        r_mix.widths.push(r_band);
        if let Some(q) = q_mix.as_mut() {
            q.centers.push(t.psi.q);
            q.widths.push(q_band);
        }
    }
    SurrogateDensity {
        weights,
        m: m_mix,
        r: r_mix,
        q: q_mix,
        fixed_q,
    }
}

/// Candidate scores of one acquisition step, kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub psi: ParamVector,
    pub candidates: Vec<ParamVector>,
    pub scores: Vec<f64>,
}

pub fn propose<R: Rng + ?Sized>(
    history: &TrialHistory,
    cfg: &TpeConfig,
    space: &SearchSpace,
    rng: &mut R,
) -> Result<ParamVector> {
    Ok(propose_detailed(history, cfg, space, rng)?.psi)
}

pub fn propose_detailed<R: Rng + ?Sized>(
    history: &TrialHistory,
    cfg: &TpeConfig,
    space: &SearchSpace,
    rng: &mut R,
) -> Result<Proposal> {
    let split = split_history(history, cfg)?;
    let better = build_density(history, &split.better, GroupRole::Better, space);
    let worse = build_density(history, &split.worse, GroupRole::Worse, space);

    let candidates: Vec<ParamVector> = (0..cfg.candidates)
        .map(|_| space.clamp(better.sample(rng)))
        .collect();
    let scores: Vec<f64> = candidates
        .iter()
        .map(|c| better.log_pdf(c) - worse.log_pdf(c))
        .collect();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| match s.partial_cmp(&scores[best]) {
            Some(Ordering::Greater) => i,
            _ => best,
        });
    Ok(Proposal {
        psi: candidates[best],
        candidates,
        scores,
    })
}
