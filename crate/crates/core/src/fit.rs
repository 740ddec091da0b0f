//! Maximum-likelihood fitting of latency samples and best-fit selection.
//!
//! Fits are computed on raw samples, not on histograms, so they do not
//! depend on a bin width.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::dist::special::{digamma_unchecked, gamma_unchecked, trigamma_unchecked, EULER_GAMMA};
use crate::dist::{Distribution, Family, GevParams};
use crate::error::{Error, Result};
use crate::ks;
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Minimum sample count accepted by [`fit_gev`].
pub const GEV_MIN_SAMPLES: usize = 100;
/// KS statistics closer than this are treated as a tie in [`select_best_fit`].
pub const TIE_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_OUTLIER_K: f64 = 5.0;

const GAMMA_MAX_ITER: usize = 100;
const GAMMA_TOL: f64 = 1e-10;

/// Operating point a sample set was measured at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTag {
    pub lambda_t: f64,
    pub block_size: usize,
    pub block_timeout: f64,
}

/// Latency observations (seconds), all finite and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    pub run_id: String,
    pub meta: Option<ScenarioTag>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, run_id: impl Into<String>, meta: Option<ScenarioTag>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("sample set is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "sample {i} = {v} is not a finite positive latency"
            )));
        }
        Ok(Self {
            values,
            run_id: run_id.into(),
            meta,
        })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, "", None)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for SampleSet {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// How the reported distribution was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// The family was requested explicitly.
    Fixed,
    /// Minimum KS statistic among candidates, fewer parameters on ties.
    MinKs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub distribution: Distribution,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub significance: f64,
    pub passed: bool,
    pub empirical_mean: f64,
    #[serde(with = "crate::nan_as_null")]
    pub bestfit_mean: f64,
    pub n: usize,
    pub log_likelihood: f64,
    pub selection: Selection,
}

impl FitReport {
    /// Scores `dist` against `samples`. `bestfit_mean` is `dist.mean()`, or
    /// NaN when the mean does not exist (GEV with ξ >= 1).
    pub fn evaluate(samples: &SampleSet, dist: Distribution, significance: f64, selection: Selection) -> Result<Self> {
        let ks = ks::ks_test(samples, &dist, significance)?;
        let bestfit_mean = match dist.mean() {
            Ok(m) => m,
            Err(Error::UndefinedMoment(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(Self {
            distribution: dist,
            ks_statistic: ks.statistic,
            ks_critical: ks.critical_value,
            significance,
            passed: ks.passed,
            empirical_mean: samples.mean(),
            bestfit_mean,
            n: samples.len(),
            log_likelihood: log_likelihood(samples, &dist),
            selection,
        })
    }
}

pub fn log_likelihood(samples: &[f64], dist: &Distribution) -> f64 {
    samples.iter().map(|&x| dist.ln_pdf_unchecked(x)).sum()
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// MLE rate `1 / mean`.
pub fn fit_exponential(samples: &SampleSet) -> Result<Distribution> {
    Distribution::exponential(1.0 / samples.mean())
}

/// Method-of-moments Gamma estimate, the Newton start for [`fit_gamma`].
pub fn gamma_moments(samples: &SampleSet) -> Result<Distribution> {
    let (mean, var) = mean_and_variance(samples);
    if var <= 0.0 {
        return Err(Error::FitDegenerate("zero sample variance".into()));
    }
    Distribution::gamma(mean * mean / var, mean / var)
}

/// Gamma MLE: Newton iteration on `ln α − ψ(α) = ln(mean) − mean(ln x)`,
/// then `β = α / mean`.
pub fn fit_gamma(samples: &SampleSet) -> Result<Distribution> {
    let start = gamma_moments(samples)?;
    let mean = samples.mean();
    let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / samples.len() as f64;
    let s = mean.ln() - mean_ln;
    if s.is_nan() || s <= 0.0 {
        return Err(Error::FitDegenerate("log-mean gap is not positive".into()));
    }
    let mut alpha = match start {
        Distribution::Gamma(p) => p.alpha,
        _ => unreachable!(),
    };
    let mut converged = false;
    for _ in 0..GAMMA_MAX_ITER {
        let g = alpha.ln() - digamma_unchecked(alpha) - s;
        let dg = 1.0 / alpha - trigamma_unchecked(alpha);
        let step = g / dg;
        let next = if alpha - step > 0.0 { alpha - step } else { alpha / 2.0 };
        let delta = (next - alpha).abs();
        alpha = next;
        if delta < GAMMA_TOL {
            converged = true;
            break;
        }
    }
    if !converged || !alpha.is_finite() {
        return Err(Error::FitFailed {
            best: Distribution::gamma(alpha, alpha / mean).unwrap_or(start),
            evaluations: GAMMA_MAX_ITER,
        });
    }
    Distribution::gamma(alpha, alpha / mean)
}

/// Probability-weighted-moment GEV estimate (Hosking's approximation),
/// the starting point for [`fit_gev`].
pub fn gev_pwm(samples: &SampleSet) -> Result<Distribution> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: n });
    }
    let mut xs = samples.values().to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    for (j, &x) in xs.iter().enumerate() {
        let j = j as f64;
        b0 += x;
        b1 += x * j / (nf - 1.0);
        b2 += x * j * (j - 1.0) / ((nf - 1.0) * (nf - 2.0));
    }
    b0 /= nf;
    b1 /= nf;
    b2 /= nf;
    let l2 = 2.0 * b1 - b0;
    if l2.is_nan() || l2 <= 0.0 {
        return Err(Error::FitDegenerate("zero sample spread".into()));
    }
    let c = l2 / (3.0 * b2 - b0) - 2f64.ln() / 3f64.ln();
    // Hosking's k has the opposite sign of ξ.
    let k = 7.8590 * c + 2.9554 * c * c;
    let (xi, sigma, mu) = if k.abs() < 1e-6 {
        let sigma = l2 / 2f64.ln();
        (0.0, sigma, b0 - EULER_GAMMA * sigma)
    } else {
        let g = gamma_unchecked(1.0 + k);
        let sigma = l2 * k / (g * (1.0 - 2f64.powf(-k)));
        (-k, sigma, b0 + sigma * (g - 1.0) / k)
    };
    if sigma.is_finite() && sigma > 0.0 && mu.is_finite() {
        Distribution::gev(xi, sigma, mu)
    } else {
        let (mean, var) = mean_and_variance(samples);
        let sigma = (6.0 * var).sqrt() / std::f64::consts::PI;
        Distribution::gev(0.0, sigma, mean - EULER_GAMMA * sigma)
    }
}

fn gev_nll(samples: &[f64], xi: f64, sigma: f64, mu: f64) -> f64 {
    // ξ <= -1 makes the likelihood unbounded at the upper support end.
    if sigma.is_nan() || sigma <= 0.0 || xi <= -1.0 {
        return f64::INFINITY;
    }
    let d = Distribution::Gev(GevParams { xi, sigma, mu });
    let mut nll = 0.0;
    for &x in samples {
        let lp = d.ln_pdf_unchecked(x);
        if lp == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        nll -= lp;
    }
    nll
}

/// GEV MLE by Nelder–Mead over `(ξ, ln σ, μ)` started from the PWM estimate.
pub fn fit_gev(samples: &SampleSet) -> Result<Distribution> {
    fit_gev_with(samples, &NelderMeadOptions::default())
}

pub fn fit_gev_with(samples: &SampleSet, opts: &NelderMeadOptions) -> Result<Distribution> {
    if samples.len() < GEV_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: GEV_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let start = match gev_pwm(samples)? {
        Distribution::Gev(p) => p,
        _ => unreachable!(),
    };
    // Pull the shape toward zero until every sample lies inside the support.
    let mut xi0 = start.xi.max(-0.9);
    while gev_nll(samples, xi0, start.sigma, start.mu).is_infinite() && xi0.abs() > 1e-12 {
        xi0 *= 0.5;
    }
    if gev_nll(samples, xi0, start.sigma, start.mu).is_infinite() {
        xi0 = 0.0;
    }
    let x0 = [xi0, start.sigma.ln(), start.mu];
    let steps = [0.05, 0.1, 0.1 * start.sigma];
    let m = nelder_mead(|p| gev_nll(samples, p[0], p[1].exp(), p[2]), &x0, &steps, opts);
    let best = Distribution::gev(m.x[0], m.x[1].exp(), m.x[2])?;
    if !m.converged || !m.value.is_finite() {
        return Err(Error::FitFailed {
            best,
            evaluations: m.evals,
        });
    }
    Ok(best)
}

pub fn fit_family(samples: &SampleSet, family: Family) -> Result<Distribution> {
    match family {
        Family::Exponential => fit_exponential(samples),
        Family::Gamma => fit_gamma(samples),
        Family::Gev => fit_gev(samples),
    }
}

/// Fits `family` and scores it.
pub fn fit_report(samples: &SampleSet, family: Family, significance: f64) -> Result<FitReport> {
    let dist = fit_family(samples, family)?;
    FitReport::evaluate(samples, dist, significance, Selection::Fixed)
}

/// Fits every candidate and reports the one with the smallest KS statistic.
/// Candidates within [`TIE_TOLERANCE`] of the minimum are resolved in favour
/// of the family with fewer parameters.
pub fn select_best_fit(samples: &SampleSet, candidates: &[Family], significance: f64) -> Result<FitReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate families".into()));
    }
    let (scored, failures) = fit_candidates(samples, candidates, significance);
    pick_best(scored).ok_or(Error::AllFitsFailed(failures))
}

/// Fits and scores every candidate, returning the successes and a message per failure.
pub fn fit_candidates(samples: &SampleSet, candidates: &[Family], significance: f64) -> (Vec<FitReport>, Vec<String>) {
    let mut scored = Vec::new();
    let mut failures = Vec::new();
    for &family in candidates {
        match fit_family(samples, family).and_then(|d| FitReport::evaluate(samples, d, significance, Selection::MinKs))
        {
            Ok(report) => scored.push(report),
            Err(e) => failures.push(format!("{family}: {e}")),
        }
    }
    (scored, failures)
}

/// Minimum-KS choice among scored fits, fewer parameters on near ties.
pub fn pick_best(scored: Vec<FitReport>) -> Option<FitReport> {
    let min_ks = scored.iter().map(|r| r.ks_statistic).fold(f64::INFINITY, f64::min);
    scored
        .into_iter()
        .filter(|r| r.ks_statistic <= min_ks + TIE_TOLERANCE)
        .min_by(|a, b| {
            a.distribution
                .family()
                .param_count()
                .cmp(&b.distribution.family().param_count())
                .then(a.ks_statistic.total_cmp(&b.ks_statistic))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRun {
    pub run_id: String,
    pub mean: f64,
    pub threshold: f64,
}

/// Indices of runs whose mean exceeds `median + k · MAD` of the run means,
/// together with that threshold. Fewer than three runs are never filtered.
pub fn outlier_runs(means: &[f64], k: f64) -> (Vec<usize>, f64) {
    if means.len() < 3 {
        return (Vec::new(), f64::INFINITY);
    }
    let med = median(means);
    let deviations: Vec<f64> = means.iter().map(|m| (m - med).abs()).collect();
    let threshold = med + k * median(&deviations);
    let idx = means
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > threshold)
        .map(|(i, _)| i)
        .collect();
    (idx, threshold)
}

/// Drops runs with a remarkably long mean latency; see [`outlier_runs`].
pub fn filter_outlier_runs(runs: Vec<SampleSet>, k: f64) -> (Vec<SampleSet>, Vec<ExcludedRun>) {
    let means: Vec<f64> = runs.iter().map(SampleSet::mean).collect();
    let (drop, threshold) = outlier_runs(&means, k);
    let mut kept = Vec::with_capacity(runs.len());
    let mut excluded = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        if drop.contains(&i) {
            excluded.push(ExcludedRun {
                run_id: run.run_id.clone(),
                mean: means[i],
                threshold,
            });
        } else {
            kept.push(run);
        }
    }
    (kept, excluded)
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
