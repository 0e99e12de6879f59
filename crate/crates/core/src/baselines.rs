//! Competing parameter-selection rules: the SampEn efficiency criterion, the
//! variance-curve knee, the fixed standard pair, the AR-order proxy for `m`,
//! and a Gaussian approximation of the regularised MSE used to score them.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::entropy::{counting_uncertainty, fuzzen, sampen, EntropyValue, SampEnParams};
use crate::signal::{Signal, SignalSet};
use crate::stats::{median, ols};
use crate::{par, rng};
use crate::{Error, Result};

/// Radii in hundredths of a standard deviation, so grid arithmetic is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiusGrid {
    pub lo: u32,
    pub hi: u32,
    pub coarse_step: u32,
    pub fine_step: u32,
}

impl Default for RadiusGrid {
    /// Coarse `0.10, 0.15, ..., 1.00`, fine step `0.01`.
    fn default() -> Self {
        Self {
            lo: 10,
            hi: 100,
            coarse_step: 5,
            fine_step: 1,
        }
    }
}

impl RadiusGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lo > 0
            && self.lo < self.hi
            && self.coarse_step > 0
            && self.fine_step > 0
            && (self.hi - self.lo) % self.coarse_step == 0
            && self.coarse_step % self.fine_step == 0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("inconsistent radius grid {self:?}")))
        }
    }

    fn points(&self, step: u32) -> Vec<f64> {
        (self.lo..=self.hi).step_by(step as usize).map(|h| f64::from(h) / 100.0).collect()
    }

    pub fn coarse(&self) -> Vec<f64> {
        self.points(self.coarse_step)
    }

    pub fn fine(&self) -> Vec<f64> {
        self.points(self.fine_step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    SampEnEff,
    Convergence,
    Standard,
}

impl std::str::FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampeneff" | "samp_en_eff" => Ok(Self::SampEnEff),
            "convergence" => Ok(Self::Convergence),
            "standard" => Ok(Self::Standard),
            other => Err(Error::invalid(format!("unknown baseline method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEntropy {
    pub signal_id: String,
    pub entropy: EntropyValue,
    /// Counting-based standard error, when defined.
    pub se: Option<f64>,
    pub fuzzen: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    pub m_star: usize,
    pub r_star: f64,
    /// Aggregated criterion at the selected radius; absent for the standard pair.
    pub criterion: Option<f64>,
    /// Aggregated criterion at the usable coarse radii.
    pub curve: Vec<CurvePoint>,
    pub per_signal: Vec<SignalEntropy>,
}

/// `max(sigma_CP / CP, sigma_CP / (-ln(CP) CP))`.
pub fn sampeneff(x: &[f64], m: usize, r: f64) -> Result<f64> {
    let u = counting_uncertainty(x, &SampEnParams::new(m, r)?)?;
    if u.cp >= 1.0 {
        return Err(Error::UndefinedEntropy);
    }
    Ok((u.sigma_cp / u.cp).max(u.sigma_cp / (-u.cp.ln() * u.cp)))
}

/// Counting-based SampEn variance, `(sigma_CP / CP)^2`.
pub fn counting_variance(x: &[f64], m: usize, r: f64) -> Result<f64> {
    Ok(counting_uncertainty(x, &SampEnParams::new(m, r)?)?.se.powi(2))
}

/// Median of `f` over the set at each coarse radius, skipping radii where
/// `f` fails for any signal.
fn median_curve<F>(set: &SignalSet, grid: &RadiusGrid, f: F) -> Result<Vec<CurvePoint>>
where
    F: Fn(&[f64], f64) -> Result<f64> + Sync,
{
    grid.validate()?;
    let coarse = grid.coarse();
    let signals: Vec<&[f64]> = set.iter().map(Signal::values).collect();
    let n = signals.len();
    let cells = par::map_range(coarse.len() * n, |k| f(signals[k % n], coarse[k / n]));
    let curve: Vec<CurvePoint> = coarse
        .iter()
        .enumerate()
        .filter_map(|(g, &r)| {
            let vals: Option<Vec<f64>> = cells[g * n..(g + 1) * n].iter().map(|c| c.as_ref().ok().copied()).collect();
            vals.map(|v| CurvePoint { r, value: median(&v) })
        })
        .collect();
    if curve.len() < 3 {
        return Err(Error::NoFeasibleRadius);
    }
    Ok(curve)
}

/// Piecewise-linear interpolation of `curve` at the fine radii it spans.
pub fn interpolate_fine(curve: &[CurvePoint], grid: &RadiusGrid) -> Vec<CurvePoint> {
    let (lo, hi) = (curve[0].r, curve[curve.len() - 1].r);
    let mut seg = 0;
    grid.fine()
        .into_iter()
        .filter(|&r| r >= lo - 1e-12 && r <= hi + 1e-12)
        .map(|r| {
            while seg + 2 < curve.len() && r > curve[seg + 1].r {
                seg += 1;
            }
            let (a, b) = (curve[seg], curve[seg + 1]);
            let w = ((r - a.r) / (b.r - a.r)).clamp(0.0, 1.0);
            CurvePoint {
                r,
                value: a.value + w * (b.value - a.value),
            }
        })
        .collect()
}

fn argmin_first(points: &[CurvePoint]) -> usize {
    points
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.value < points[best].value { i } else { best })
}

fn per_signal_at(set: &SignalSet, m: usize, r: f64, fuzzy_eta: Option<f64>) -> Vec<SignalEntropy> {
    let signals = set.signals();
    par::map_range(signals.len(), |i| {
        let x = signals[i].values();
        let p = SampEnParams::new(m, r).ok();
        SignalEntropy {
            signal_id: signals[i].id().to_string(),
            entropy: p
                .and_then(|p| sampen(x, &p).ok())
                .map_or(EntropyValue::Undefined, |s| s.value),
            se: p.and_then(|p| counting_uncertainty(x, &p).ok()).map(|u| u.se),
            fuzzen: fuzzy_eta.and_then(|eta| fuzzen(x, m, r, eta).ok()),
        }
    })
}

/// Radius minimising the median efficiency criterion on the fine grid.
pub fn sampeneff_select(set: &SignalSet, m: usize, grid: &RadiusGrid) -> Result<BaselineResult> {
    let curve = median_curve(set, grid, |x, r| sampeneff(x, m, r))?;
    let fine = interpolate_fine(&curve, grid);
    let best = fine[argmin_first(&fine)];
    Ok(BaselineResult {
        method: BaselineMethod::SampEnEff,
        m_star: m,
        r_star: best.r,
        criterion: Some(best.value),
        curve,
        per_signal: per_signal_at(set, m, best.r, None),
    })
}

/// Knee of the median counting-variance curve over the fine grid.
pub fn convergence_select(set: &SignalSet, m: usize, grid: &RadiusGrid) -> Result<BaselineResult> {
    let curve = median_curve(set, grid, |x, r| counting_variance(x, m, r))?;
    let fine = interpolate_fine(&curve, grid);
    let xs: Vec<f64> = fine.iter().map(|p| p.r).collect();
    let ys: Vec<f64> = fine.iter().map(|p| p.value).collect();
    let k = knee_point(&xs, &ys, 1.0)?;
    Ok(BaselineResult {
        method: BaselineMethod::Convergence,
        m_star: m,
        r_star: fine[k].r,
        criterion: Some(fine[k].value),
        curve,
        per_signal: per_signal_at(set, m, fine[k].r, None),
    })
}

/// Entropies at the conventional `(m, r) = (2, 0.20)`, optionally with FuzzEn.
pub fn standard_params_eval(set: &SignalSet, fuzzy_eta: Option<f64>) -> BaselineResult {
    BaselineResult {
        method: BaselineMethod::Standard,
        m_star: 2,
        r_star: 0.2,
        criterion: None,
        curve: Vec::new(),
        per_signal: per_signal_at(set, 2, 0.2, fuzzy_eta),
    }
}

/// Kneedle difference curve for a decreasing convex shape: `1 - y_n - x_n`
/// after min-max normalising both axes.
pub fn knee_difference_curve(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    if xs.len() < 3 || xs.len() != ys.len() {
        return Err(Error::NoKnee);
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("knee input must have strictly increasing x and finite y"));
    }
    let (x0, x1) = (xs[0], xs[xs.len() - 1]);
    let (y0, y1) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if !(y1 > y0) {
        return Err(Error::NoKnee);
    }
    Ok(xs
        .iter()
        .zip(ys)
        .map(|(x, y)| 1.0 - (y - y0) / (y1 - y0) - (x - x0) / (x1 - x0))
        .collect())
}

/// Kneedle (Satopää et al., 2011) in offline mode for a decreasing convex
/// curve. Returns the index of the first confirmed knee.
pub fn knee_point(xs: &[f64], ys: &[f64], sensitivity: f64) -> Result<usize> {
    let d = knee_difference_curve(xs, ys)?;
    let n = d.len();
    // Flat difference curves (straight lines) carry no knee.
    if d.iter().all(|v| v.abs() <= 1e-12) {
        return Err(Error::NoKnee);
    }
    let is_max = |i: usize| (i == 0 || d[i] >= d[i - 1]) && (i + 1 == n || d[i] >= d[i + 1]);
    let is_min = |i: usize| (i == 0 || d[i] <= d[i - 1]) && (i + 1 == n || d[i] <= d[i + 1]);
    let first_max = (0..n).find(|&i| is_max(i)).ok_or(Error::NoKnee)?;
    let mean_dx = 1.0 / (n - 1) as f64;

    let mut threshold = f64::NEG_INFINITY;
    let mut threshold_index = first_max;
    for i in first_max..n - 1 {
        if is_max(i) {
            threshold = d[i] - sensitivity * mean_dx;
            threshold_index = i;
        }
        if is_min(i) {
            threshold = 0.0;
        }
        if d[i + 1] < threshold {
            return Ok(threshold_index);
        }
    }
    Err(Error::NoKnee)
}

/// BIC-optimal AR order per signal (OLS on a common sample of `N - p_max`
/// rows), then the median over the set rounded half up and floored at 1.
pub fn ar_order_m(set: &SignalSet, p_max: usize) -> Result<usize> {
    if p_max < 1 {
        return Err(Error::invalid("p_max must be >= 1"));
    }
    let orders = set
        .iter()
        .map(|s| ar_order(s.values(), p_max))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = orders;
    sorted.sort_unstable();
    let k = sorted.len();
    let med = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        (sorted[k / 2 - 1] + sorted[k / 2]).div_ceil(2)
    };
    Ok(med.max(1))
}

pub fn ar_order(x: &[f64], p_max: usize) -> Result<usize> {
    let len = x.len();
    if len <= p_max + 2 {
        return Err(Error::TooShort {
            needed: p_max + 3,
            got: len,
        });
    }
    if p_max == 1 {
        return Ok(1);
    }
    let rows = len - p_max;
    let nf = rows as f64;
    let y = DVector::from_iterator(rows, x[p_max..].iter().copied());
    let mut best: Option<(f64, usize)> = None;
    for p in 1..=p_max {
        let design = DMatrix::from_fn(rows, p + 1, |row, col| {
            if col == 0 {
                1.0
            } else {
                x[p_max + row - col]
            }
        });
        let Ok(fit) = ols(&design, &y) else { continue };
        let bic = nf * (fit.rss / nf).ln() + p as f64 * nf.ln();
        if best.is_none_or(|(b, _)| bic < b) {
            best = Some((bic, p));
        }
    }
    best.map(|(_, p)| p).ok_or(Error::SingularDesign)
}

/// Mean over signals of `mean_d (z_d - theta_i)^2` with `z_d ~ N(theta_i, s_i^2)`,
/// `s_i` the counting SE, plus `lambda * sqrt(r)`. Signal `i` draws from
/// stream `(seed, i)`.
pub fn gaussian_mse_approx(set: &SignalSet, m: usize, r: f64, draws: usize, lambda: f64, seed: u64) -> Result<f64> {
    if draws == 0 {
        return Err(Error::invalid("draw count must be >= 1"));
    }
    let p = SampEnParams::new(m, r)?;
    let signals = set.signals();
    let errs = par::map_range(signals.len(), |i| {
        let x = signals[i].values();
        sampen(x, &p)?.value.finite().ok_or(Error::UndefinedEntropy)?;
        let s = counting_uncertainty(x, &p)?.se;
        let mut rng = rng::stream(seed, &[i as u64]);
        let sum: f64 = (0..draws)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (s * z).powi(2)
            })
            .sum();
        Ok(sum / draws as f64)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64 + lambda * r.sqrt())
}
