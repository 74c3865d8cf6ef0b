//! Analytical significance measures and binomial confidence intervals.

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::noise::{DistKind, RateDistribution};

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(X = L/2) / P(X >= L/2)` for `X ~ Binomial(L, p)`: the share of the
/// upper tail held by chains of exactly half the code length.
#[allow(non_snake_case)]
pub fn chain_fraction_R(l: u64, p: f64) -> Result<f64> {
    if l % 2 != 0 || !(2..=1000).contains(&l) {
        return Err(Error::Domain(format!("L must be even in [2, 1000], got {l}")));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::Domain(format!("p must lie in (0, 0.5), got {p}")));
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let term = |i: u64| ln_choose(l, i) + i as f64 * lp + (l - i) as f64 * lq;
    let h = l / 2;
    let terms: Vec<f64> = (h..=l).map(term).collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_tail = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    Ok((terms[0] - ln_tail).exp())
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Estimates `std(prod_{i<=L} p_i) / (E[prod_{i<=L} p_i] - E[prod_{i<=L+1} p_i])`
/// from `n_samples` independent products.
///
/// Each sample draws `L + 1` rates; `X` is the product of the first `L` and
/// `Y = X (1 - p_{L+1})` estimates the gap in the denominator. The standard
/// error follows from the delta method on the sample means of `X`, `X^2`, `Y`.
pub fn product_ratio<R: Rng + ?Sized>(dist: &RateDistribution, l: usize, n_samples: usize, rng: &mut R) -> Result<Estimate> {
    dist.validate()?;
    if dist.kind() == DistKind::Constant {
        return Err(Error::Domain("product_ratio needs a bimodal or uniform law".into()));
    }
    if l < 1 {
        return Err(Error::Domain("L must be at least 1".into()));
    }
    if n_samples < 10_000 {
        return Err(Error::Domain(format!("at least 10^4 samples required, got {n_samples}")));
    }
    // moments are rescaled by m1^L so long products stay well away from underflow
    let scale = dist.mean();
    let mut rows = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut x = 1.0;
        for _ in 0..l {
            x *= dist.sample(rng) / scale;
        }
        let y = x * (1.0 - dist.sample(rng));
        rows.push([x, x * x, y]);
    }
    let n = n_samples as f64;
    let mut mean = [0.0; 3];
    for r in &rows {
        for k in 0..3 {
            mean[k] += r[k];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = [[0.0; 3]; 3];
    for r in &rows {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in &mut cov {
        for c in row.iter_mut() {
            *c /= n - 1.0;
        }
    }
    let [a, b, c] = mean;
    let var = (b - a * a).max(0.0);
    let s = var.sqrt();
    let value = s / c;
    let grad = if s > 0.0 {
        [-a / (s * c), 1.0 / (2.0 * s * c), -s / (c * c)]
    } else {
        [0.0; 3]
    };
    let mut v = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            v += grad[i] * cov[i][j] * grad[j];
        }
    }
    Ok(Estimate {
        value,
        std_error: (v / n).max(0.0).sqrt(),
    })
}

/// Closed form of [`product_ratio`] from the first two moments:
/// `sqrt(m2^L - m1^2L) / (m1^L (1 - m1))`.
pub fn product_ratio_exact(dist: &RateDistribution, l: usize) -> Result<f64> {
    dist.validate()?;
    let m1 = dist.mean();
    let m2 = dist.second_moment();
    if m1 <= 0.0 {
        return Err(Error::Domain("the mean rate must be positive".into()));
    }
    // (m2/m1^2)^L - 1, written to avoid cancellation for small variance
    let excess = (l as f64 * (m2 / (m1 * m1)).ln()).exp_m1().max(0.0);
    Ok(excess.sqrt() / (1.0 - m1))
}

/// Number of monotone lattice paths with `d[i]` steps along dimension `i`.
pub fn path_count(d: &[u64]) -> BigUint {
    // product of binomials C(d_0 + .. + d_i, d_i), each exact
    let mut total = BigUint::from(1u32);
    let mut sum = 0u64;
    for &k in d {
        for j in 1..=k {
            total *= sum + j;
            total /= j;
        }
        sum += k;
    }
    total
}

/// Upper bound on the physical rate below which the most likely chain
/// dominates its class: `(1/m) ((n+1)/n)^((m-1)/(2m))`.
pub fn critical_probability(m: u32, n: u64) -> Result<f64> {
    if m < 1 || n < 1 {
        return Err(Error::Domain("m and n must be at least 1".into()));
    }
    let m = f64::from(m);
    let n = n as f64;
    Ok(((m - 1.0) / (2.0 * m) * (1.0 / n).ln_1p()).exp() / m)
}

/// `p_th / p_critical` in the large-`n` limit, where `p_critical = 1/m`.
pub fn threshold_ratio(p_th: f64, m: u32) -> Result<f64> {
    let m_f = f64::from(m);
    if m < 1 || !(p_th > 0.0 && p_th < 1.0 / m_f) {
        return Err(Error::Domain(format!("need 0 < p_th < 1/m, got p_th={p_th}, m={m}")));
    }
    Ok(p_th * m_f)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Domain("wilson interval needs n >= 1".into()));
    }
    if k > n {
        return Err(Error::Domain(format!("k={k} exceeds n={n}")));
    }
    if !(z > 0.0) {
        return Err(Error::Domain(format!("z must be positive, got {z}")));
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let denom = 1.0 + z2 / nf;
    let mut lo = ((centre - half) / denom).clamp(0.0, 1.0);
    let mut hi = ((centre + half) / denom).clamp(0.0, 1.0);
    // pin the exact endpoints rounding can miss
    if k == 0 {
        lo = 0.0;
    }
    if k == n {
        hi = 1.0;
    }
    Ok((lo.min(p), hi.max(p)))
}

/// A ratio measured against chain length or code distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub samples: usize,
    pub dist: String,
}

impl RatioSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>, samples: usize, dist: impl Into<String>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Domain("x and y differ in length".into()));
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("x must be strictly increasing".into()));
        }
        if y.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("y must be finite and non-negative".into()));
        }
        Ok(RatioSeries {
            x,
            y,
            samples,
            dist: dist.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}
