//! One-sample Kolmogorov–Smirnov goodness-of-fit test.
//!
//! Fitted parameters are treated as fixed (no Lilliefors correction), and
//! critical values come from the asymptotic Kolmogorov distribution, so the
//! test is intended for samples of a few hundred or more.

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Right-continuous empirical CDF `F_n(x) = #{x_i <= x} / n`.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empirical CDF of an empty sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidInput("sample contains NaN".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `(x_i, i/n)` pairs in sorted order.
    pub fn table(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, (i + 1) as f64 / n))
            .collect()
    }
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples)
}

/// Supremum distance `D` between the empirical CDF of `samples` and `dist`.
pub fn ks_statistic(samples: &[f64], dist: &Distribution) -> Result<f64> {
    let ecdf = EmpiricalCdf::new(samples)?;
    dist.validate()?;
    Ok(statistic_sorted(ecdf.sorted(), dist))
}

pub(crate) fn statistic_sorted(sorted: &[f64], dist: &Distribution) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf_unchecked(x);
            let upper = ((i + 1) as f64 / n - f).abs();
            let lower = (i as f64 / n - f).abs();
            upper.max(lower)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k>=1} (-1)^(k-1) exp(-2 k² λ²)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // The alternating series converges slowly here; Q is 1 to machine precision.
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic coefficient `c(α)` with `Q(c) = α`.
pub fn kolmogorov_coefficient(significance: f64) -> Result<f64> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::ParameterDomain {
            name: "significance",
            value: significance,
            reason: "must lie in (0, 1)",
        });
    }
    // Q is decreasing; bracket [0.2, 10] covers α ∈ (~1e-80, 1).
    let (mut lo, mut hi) = (0.2, 10.0);
    if kolmogorov_survival(lo) < significance {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > significance {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical value `c(α) / √n`.
pub fn ks_critical(n: usize, significance: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::ParameterDomain {
            name: "n",
            value: n as f64,
            reason: "sample count must be at least 1",
        });
    }
    Ok(kolmogorov_coefficient(significance)? / (n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub significance: f64,
    pub n: usize,
    pub passed: bool,
}

impl KsResult {
    /// Assembles a result; `passed` is `statistic < critical_value`.
    pub fn new(statistic: f64, critical_value: f64, significance: f64, n: usize) -> Self {
        Self {
            statistic,
            critical_value,
            significance,
            n,
            passed: statistic < critical_value,
        }
    }

    /// Asymptotic p-value `Q(√n · D)`.
    pub fn p_value(&self) -> f64 {
        kolmogorov_survival((self.n as f64).sqrt() * self.statistic)
    }
}

pub fn ks_test(samples: &[f64], dist: &Distribution, significance: f64) -> Result<KsResult> {
    let statistic = ks_statistic(samples, dist)?;
    let critical = ks_critical(samples.len(), significance)?;
    Ok(KsResult::new(statistic, critical, significance, samples.len()))
}
