//! Sample entropy and fuzzy entropy by template matching, plus the
//! counting-based standard error used by the baseline selectors.
//!
//! Templates have delay 1. For a signal of length `N` and dimension `m` both
//! the `m`- and `(m + 1)`-templates are drawn from the same `N - m` start
//! indices, so `B` and `A` share the normaliser `Z = (N - m)(N - m - 1)`.
//! Matches use the closed Chebyshev ball (`distance <= r`).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampEnParams {
    pub m: usize,
    pub r: f64,
}

impl SampEnParams {
    pub fn new(m: usize, r: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::invalid("m must be >= 1"));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("r must be positive and finite, got {r}")));
        }
        Ok(Self { m, r })
    }
}

/// Ordered-pair match counts at lengths `m` (`b_count`) and `m + 1` (`a_count`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub b_count: u64,
    pub a_count: u64,
    pub z: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "value", rename_all = "snake_case")]
pub enum EntropyValue {
    Finite(f64),
    Infinite,
    Undefined,
}

impl EntropyValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            EntropyValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, EntropyValue::Finite(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampEnResult {
    pub bm: f64,
    pub am: f64,
    /// `A / B`; `None` when there are no length-`m` matches.
    pub cp: Option<f64>,
    pub value: EntropyValue,
}

impl SampEnResult {
    pub fn from_counts(c: &MatchCounts) -> Self {
        let z = c.z as f64;
        let bm = c.b_count as f64 / z;
        let am = c.a_count as f64 / z;
        let (cp, value) = if c.b_count == 0 {
            (None, EntropyValue::Undefined)
        } else if c.a_count == 0 {
            (Some(0.0), EntropyValue::Infinite)
        } else {
            let cp = c.a_count as f64 / c.b_count as f64;
            (Some(cp), EntropyValue::Finite(-cp.ln()))
        };
        Self { bm, am, cp, value }
    }
}

fn check_length(n: usize, m: usize) -> Result<()> {
    if n < m + 2 {
        return Err(Error::SignalTooShort {
            m,
            needed: m + 2,
            got: n,
        });
    }
    Ok(())
}

/// Chebyshev match of the length-`m` templates starting at `i` and `j`.
#[inline]
fn templates_match(x: &[f64], i: usize, j: usize, m: usize, r: f64) -> bool {
    let (a, b) = (&x[i..i + m], &x[j..j + m]);
    a.iter().zip(b).all(|(u, v)| (u - v).abs() <= r)
}

pub fn count_matches(x: &[f64], p: &SampEnParams) -> Result<MatchCounts> {
    let (n, m, r) = (x.len(), p.m, p.r);
    check_length(n, m)?;
    let templates = n - m;
    let (mut b, mut a) = (0u64, 0u64);
    for i in 0..templates {
        for j in i + 1..templates {
            if templates_match(x, i, j, m, r) {
                b += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    let t = templates as u64;
    Ok(MatchCounts {
        b_count: 2 * b,
        a_count: 2 * a,
        z: t * (t - 1),
    })
}

pub fn sampen(x: &[f64], p: &SampEnParams) -> Result<SampEnResult> {
    Ok(SampEnResult::from_counts(&count_matches(x, p)?))
}

/// Fuzzy entropy with baseline-removed templates and membership
/// `exp(-(d / r)^eta)`, averaged over ordered pairs `i != j` of the `N - m`
/// start indices at both lengths.
pub fn fuzzen(x: &[f64], m: usize, r: f64, eta: f64) -> Result<f64> {
    SampEnParams::new(m, r)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta must be positive"));
    }
    check_length(x.len(), m)?;
    let templates = x.len() - m;
    let phi_m = fuzzy_phi(x, m, templates, r, eta);
    let phi_m1 = fuzzy_phi(x, m + 1, templates, r, eta);
    Ok(phi_m.ln() - phi_m1.ln())
}

fn fuzzy_phi(x: &[f64], len: usize, templates: usize, r: f64, eta: f64) -> f64 {
    let means: Vec<f64> = (0..templates)
        .map(|i| x[i..i + len].iter().sum::<f64>() / len as f64)
        .collect();
    let mut total = 0.0;
    for i in 0..templates {
        for j in i + 1..templates {
            let shift = means[i] - means[j];
            let d = x[i..i + len]
                .iter()
                .zip(&x[j..j + len])
                .map(|(u, v)| (u - v - shift).abs())
                .fold(0.0, f64::max);
            total += (-(d / r).powf(eta)).exp();
        }
    }
    let pairs = templates * (templates - 1);
    2.0 * total / pairs as f64
}

/// Counting-based uncertainty of the conditional probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingUncertainty {
    pub cp: f64,
    pub sigma_cp: f64,
    /// `sigma_cp / cp`, the standard error of SampEn.
    pub se: f64,
    pub b_pairs: u64,
    pub a_pairs: u64,
    pub k_b: u64,
    pub k_a: u64,
}

/// Standard deviation of `CP = A / B` with the overlapping-pair correction of
/// Lake et al. (2002, Am. J. Physiol. Regul. Integr. Comp. Physiol. 283).
///
/// Counting over unordered template pairs `p = {i, j}` (start indices in
/// `0..N - m`), let `B` be the number of pairs matching at length `m`, `A` the
/// number also matching at `m + 1`, and `CP = A / B`. Two pairs *overlap* when
/// some template of one and some template of the other share a sample of their
/// `(m + 1)`-spans, i.e. `|u - v| <= m` for some `u` in `p`, `v` in `p'`.
/// `K_B` (`K_A`) counts ordered pairs `(p, p')`, `p != p'`, of overlapping
/// length-`m` (length-`(m + 1)`) matches. Then
///
/// ```text
/// sigma_CP^2 = CP (1 - CP) / B + (K_A - CP^2 K_B) / B^2
/// ```
///
/// which is the variance of the mean of the match indicators `Y_p` over the
/// `B` matched pairs when only overlapping pairs covary, with
/// `cov(Y_p, Y_p')` estimated by `Y_p Y_p' - CP^2`. Negative estimates are
/// clamped to zero. The formula is reproduced from the cited reference rather
/// than derived here.
pub fn counting_uncertainty(x: &[f64], p: &SampEnParams) -> Result<CountingUncertainty> {
    let (n, m, r) = (x.len(), p.m, p.r);
    check_length(n, m)?;
    let t = n - m;

    let mut b_pairs = Vec::new();
    let mut a_flags = Vec::new();
    let mut deg_b = vec![0u64; t];
    let mut deg_a = vec![0u64; t];
    for i in 0..t {
        for j in i + 1..t {
            if templates_match(x, i, j, m, r) {
                let a = (x[i + m] - x[j + m]).abs() <= r;
                b_pairs.push((i, j));
                a_flags.push(a);
                deg_b[i] += 1;
                deg_b[j] += 1;
                if a {
                    deg_a[i] += 1;
                    deg_a[j] += 1;
                }
            }
        }
    }
    let b = b_pairs.len() as u64;
    let a = a_flags.iter().filter(|&&f| f).count() as u64;
    if b == 0 || a == 0 {
        return Err(Error::UndefinedEntropy);
    }

    let mut k_b = 0u64;
    let mut k_a = 0u64;
    let mut window: Vec<usize> = Vec::with_capacity(4 * m + 2);
    for (&(i, j), &is_a) in b_pairs.iter().zip(&a_flags) {
        window.clear();
        window.extend(i.saturating_sub(m)..=(i + m).min(t - 1));
        window.extend(j.saturating_sub(m)..=(j + m).min(t - 1));
        window.sort_unstable();
        window.dedup();

        // Matched pairs with at least one endpoint in the window, minus `p` itself.
        let (mut touch_b, mut touch_a) = (0u64, 0u64);
        for &w in &window {
            touch_b += deg_b[w];
            touch_a += deg_a[w];
        }
        let (mut inner_b, mut inner_a) = (0u64, 0u64);
        for (ia, &u) in window.iter().enumerate() {
            for &v in &window[ia + 1..] {
                if templates_match(x, u, v, m, r) {
                    inner_b += 1;
                    if (x[u + m] - x[v + m]).abs() <= r {
                        inner_a += 1;
                    }
                }
            }
        }
        k_b += touch_b - inner_b - 1;
        if is_a {
            k_a += touch_a - inner_a - 1;
        }
    }

    let (bf, af) = (b as f64, a as f64);
    let cp = af / bf;
    let var = cp * (1.0 - cp) / bf + (k_a as f64 - cp * cp * k_b as f64) / (bf * bf);
    let sigma_cp = var.max(0.0).sqrt();
    Ok(CountingUncertainty {
        cp,
        sigma_cp,
        se: sigma_cp / cp,
        b_pairs: b,
        a_pairs: a,
        k_b,
        k_a,
    })
}

/// `sigma_CP / CP`; the counting estimate of the SampEn variance is its square.
pub fn counting_se(x: &[f64], p: &SampEnParams) -> Result<f64> {
    Ok(counting_uncertainty(x, p)?.se)
}
