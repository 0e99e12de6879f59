//! Stationarity testing, multiple-testing correction, rank comparison, and
//! the weakly-stationary signal-set pipeline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::signal::{Signal, SignalSet};
use crate::{Error, Result};

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) struct OlsFit {
    pub beta: DVector<f64>,
    pub rss: f64,
    pub se: DVector<f64>,
}

/// Ordinary least squares with classical standard errors.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::SingularDesign);
    }
    let sv = x.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > smax * 1e-10) {
        return Err(Error::SingularDesign);
    }
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky().ok_or(Error::SingularDesign)?;
    let beta = chol.solve(&(x.transpose() * y));
    let resid = y - x * &beta;
    let rss = resid.dot(&resid);
    let sigma2 = rss / (n - k) as f64;
    let inv = chol.inverse();
    let se = DVector::from_iterator(k, (0..k).map(|j| (sigma2 * inv[(j, j)]).sqrt()));
    Ok(OlsFit { beta, rss, se })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
    pub nobs: usize,
}

/// Regress `dx[t]` on `[1, x[t], dx[t-1], ..., dx[t-lags]]` for `t >= start`.
fn adf_design(x: &[f64], dx: &[f64], lags: usize, start: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows = dx.len() - start;
    let cols = 2 + lags;
    let mut design = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for (row, t) in (start..dx.len()).enumerate() {
        y[row] = dx[t];
        design[(row, 0)] = 1.0;
        design[(row, 1)] = x[t];
        for l in 1..=lags {
            design[(row, 1 + l)] = dx[t - l];
        }
    }
    (design, y)
}

/// Augmented Dickey-Fuller test with a constant and no trend.
///
/// Lags are chosen by AIC over `0..=floor(12 (N / 100)^(1/4))` (capped at
/// `N / 2 - 2`) on a common estimation sample, then the regression is refitted
/// on the full sample for the chosen lag. The p-value uses MacKinnon's (1994)
/// response surface for the constant-only, single-series case.
pub fn adf_test(x: &[f64]) -> Result<AdfResult> {
    let n = x.len();
    if n < 15 {
        return Err(Error::TooShort { needed: 15, got: n });
    }
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    let max_lag = schwert.min(n / 2 - 2);
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();

    let mut best: Option<(f64, usize)> = None;
    for lags in 0..=max_lag {
        let (design, y) = adf_design(x, &dx, lags, max_lag);
        let fit = match ols(&design, &y) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let nobs = y.len() as f64;
        let aic = nobs * (fit.rss / nobs).ln() + 2.0 * design.ncols() as f64;
        if best.is_none_or(|(a, _)| aic < a) {
            best = Some((aic, lags));
        }
    }
    let (_, lags) = best.ok_or(Error::SingularDesign)?;
    let (design, y) = adf_design(x, &dx, lags, lags);
    let fit = ols(&design, &y)?;
    let statistic = fit.beta[1] / fit.se[1];
    if !statistic.is_finite() {
        return Err(Error::SingularDesign);
    }
    Ok(AdfResult {
        statistic,
        p_value: mackinnon_p_constant(statistic),
        lags,
        nobs: y.len(),
    })
}

/// MacKinnon (1994) approximate asymptotic p-value, constant-only regression,
/// one series. Beyond the surface's validity range the p-value is 0 or 1.
pub fn mackinnon_p_constant(stat: f64) -> f64 {
    const TAU_MAX: f64 = 2.74;
    const TAU_MIN: f64 = -18.83;
    const TAU_STAR: f64 = -1.61;
    const SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
    const LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];
    if stat > TAU_MAX {
        return 1.0;
    }
    if stat < TAU_MIN {
        return 0.0;
    }
    let coeffs: &[f64] = if stat <= TAU_STAR { &SMALL_P } else { &LARGE_P };
    let poly = coeffs.iter().rev().fold(0.0, |acc, c| acc * stat + c);
    normal_cdf(poly)
}

/// Holm-Šidák step-down adjustment, returned in input order.
pub fn holm_sidak(pvals: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidP(bad));
    }
    let n = pvals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; n];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let k = (n - rank) as f64;
        // 1 - (1 - p)^k without cancellation.
        let step = -((k * (-pvals[idx]).ln_1p()).exp_m1());
        running = running.max(step).min(1.0);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// The first group tends to be smaller.
    Less,
    /// The first group tends to be larger.
    Greater,
}

impl std::str::FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Self::TwoSided),
            "less" => Ok(Self::Less),
            "greater" => Ok(Self::Greater),
            other => Err(Error::invalid(format!("unknown alternative '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    /// `U` of the first group: pairs with `a > b` plus half the ties.
    pub u_statistic: f64,
    pub u_other: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub method: PMethod,
    pub median_a: f64,
    pub median_b: f64,
    pub median_se_a: Option<f64>,
    pub median_se_b: Option<f64>,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Number of arrangements giving each value of `U` (pairs `a > b`) for group sizes `(na, nb)`.
fn exact_u_counts(na: usize, nb: usize) -> Vec<u64> {
    // counts[i][j][u]: arrangements of i a's and j b's with statistic u.
    let max_u = na * nb;
    let mut prev: Vec<Vec<u64>> = vec![vec![0; max_u + 1]; nb + 1];
    for row in prev.iter_mut() {
        row[0] = 1;
    }
    for _i in 1..=na {
        let mut cur: Vec<Vec<u64>> = vec![vec![0; max_u + 1]; nb + 1];
        cur[0][0] = 1;
        for j in 1..=nb {
            for u in 0..=max_u {
                // Largest element is an a (beats all j b's) or a b.
                let from_a = if u >= j { prev[j][u - j] } else { 0 };
                cur[j][u] = from_a + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev[nb].clone()
}

/// Mann-Whitney U test. Exact when `na + nb <= 16` and there are no ties,
/// otherwise the normal approximation with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<ComparisonResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let (na, nb) = (a.len(), b.len());
    let mut u = 0.0;
    for x in a {
        for y in b {
            u += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    let nn = (na * nb) as f64;

    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let j = pooled[i..].iter().take_while(|v| **v == pooled[i]).count();
        tie_term += (j * j * j - j) as f64;
        i += j;
    }
    let has_ties = tie_term > 0.0;

    let (p_value, method) = if na + nb <= 16 && !has_ties {
        let counts = exact_u_counts(na, nb);
        let total: u64 = counts.iter().sum();
        let u_int = u as usize;
        let le: u64 = counts[..=u_int].iter().sum();
        let ge: u64 = counts[u_int..].iter().sum();
        let (p_le, p_ge) = (le as f64 / total as f64, ge as f64 / total as f64);
        let p = match alternative {
            Alternative::Less => p_le,
            Alternative::Greater => p_ge,
            Alternative::TwoSided => (2.0 * p_le.min(p_ge)).min(1.0),
        };
        (p, PMethod::Exact)
    } else {
        let n = (na + nb) as f64;
        let mu = nn / 2.0;
        let var = nn / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
        let p = if var <= 0.0 {
            1.0
        } else {
            let sd = var.sqrt();
            match alternative {
                Alternative::Less => normal_cdf((u - mu + 0.5) / sd),
                Alternative::Greater => normal_cdf(-(u - mu - 0.5) / sd),
                Alternative::TwoSided => {
                    let z = ((u - mu).abs() - 0.5).max(0.0) / sd;
                    (2.0 * normal_cdf(-z)).min(1.0)
                }
            }
        };
        (p, PMethod::Normal)
    };
    Ok(ComparisonResult {
        u_statistic: u,
        u_other: nn - u,
        p_value: p_value.clamp(0.0, 1.0),
        alternative,
        method,
        median_a: median(a),
        median_b: median(b),
        median_se_a: None,
        median_se_b: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEntry {
    pub signal_id: String,
    pub raw_p: Option<f64>,
    pub adjusted_p: Option<f64>,
    pub retained: bool,
    pub drop_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub alpha: f64,
    pub entries: Vec<PipelineEntry>,
}

/// Difference, normalise and ADF-test each signal, adjust the p-values by
/// Holm-Šidák, and keep the signals whose adjusted p-value is `<= alpha`.
/// Signals that cannot be tested are dropped with a recorded reason.
pub fn stationarity_pipeline(set: &SignalSet, alpha: f64) -> Result<(SignalSet, PipelineReport)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1]"));
    }
    let prepared: Vec<Result<(Signal, f64)>> = set
        .iter()
        .map(|s| {
            if s.len() < 16 {
                return Err(Error::TooShort { needed: 16, got: s.len() });
            }
            let d = s.difference()?.normalize()?;
            let p = adf_test(d.values())?.p_value;
            Ok((d, p))
        })
        .collect();
    let raw: Vec<f64> = prepared.iter().filter_map(|r| r.as_ref().ok().map(|(_, p)| *p)).collect();
    let mut adjusted = holm_sidak(&raw)?.into_iter();

    let mut entries = Vec::with_capacity(set.len());
    let mut kept = Vec::new();
    for (s, prep) in set.iter().zip(prepared) {
        match prep {
            Ok((d, p)) => {
                let adj = adjusted.next().expect("one adjusted p per tested signal");
                let retained = adj <= alpha;
                entries.push(PipelineEntry {
                    signal_id: s.id().to_string(),
                    raw_p: Some(p),
                    adjusted_p: Some(adj),
                    retained,
                    drop_reason: (!retained).then(|| format!("adjusted p {adj:.4} > alpha {alpha}")),
                });
                if retained {
                    kept.push(d);
                }
            }
            Err(e) => entries.push(PipelineEntry {
                signal_id: s.id().to_string(),
                raw_p: None,
                adjusted_p: None,
                retained: false,
                drop_reason: Some(e.to_string()),
            }),
        }
    }
    let report = PipelineReport { alpha, entries };
    if kept.is_empty() {
        return Err(Error::EmptySurvivorSet);
    }
    Ok((SignalSet::new(kept)?, report))
}

/// Same as [`stationarity_pipeline`] but keeps the report when nothing survives.
pub fn stationarity_report(set: &SignalSet, alpha: f64) -> Result<(Option<SignalSet>, PipelineReport)> {
    match stationarity_pipeline(set, alpha) {
        Ok((s, r)) => Ok((Some(s), r)),
        Err(Error::EmptySurvivorSet) => {
            let dropped = set
                .iter()
                .map(|s| PipelineEntry {
                    signal_id: s.id().to_string(),
                    raw_p: None,
                    adjusted_p: None,
                    retained: false,
                    drop_reason: None,
                })
                .collect::<Vec<_>>();
            // Recompute with alpha = 1 only to recover the per-signal diagnostics.
            let report = match stationarity_pipeline(set, 1.0) {
                Ok((_, mut r)) => {
                    r.alpha = alpha;
                    for e in r.entries.iter_mut().filter(|e| e.retained) {
                        e.retained = false;
                        e.drop_reason = Some(format!(
                            "adjusted p {:.4} > alpha {alpha}",
                            e.adjusted_p.unwrap_or(f64::NAN)
                        ));
                    }
                    r
                }
                Err(_) => PipelineReport { alpha, entries: dropped },
            };
            Ok((None, report))
        }
        Err(e) => Err(e),
    }
}
