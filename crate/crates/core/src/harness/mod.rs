//! Parameter sweeps over (λ_t, S_b, T_b): repeated seeded runs, outlier
//! filtering, per-latency fitting with KS validation, and regime detection.

mod histogram;
mod regime;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::fit::{self, ExcludedRun, FitReport, SampleSet, ScenarioTag, Selection};
use crate::sim::{run_simulation, LatencyKind, SimConfig, SimOutput};

pub use histogram::{make_cdf, make_histogram, Bin, Histogram};
pub use regime::{detect_regime, Regime, RegimeThresholds, RegimeVerdict};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "HLL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda_t: f64,
    pub block_size: usize,
    pub block_timeout: f64,
}

impl GridPoint {
    pub fn new(lambda_t: f64, block_size: usize, block_timeout: f64) -> Self {
        Self {
            lambda_t,
            block_size,
            block_timeout,
        }
    }

    fn key(&self) -> (f64, usize, f64) {
        (self.lambda_t, self.block_size, self.block_timeout)
    }

    fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2))
    }

    pub fn tag(&self) -> ScenarioTag {
        ScenarioTag {
            lambda_t: self.lambda_t,
            block_size: self.block_size,
            block_timeout: self.block_timeout,
        }
    }
}

/// One cartesian block of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub lambda_t: Vec<f64>,
    pub block_size: Vec<usize>,
    pub block_timeout: Vec<f64>,
}

impl GridBlock {
    pub fn single(point: GridPoint) -> Self {
        Self {
            lambda_t: vec![point.lambda_t],
            block_size: vec![point.block_size],
            block_timeout: vec![point.block_timeout],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessSettings {
    pub significance: f64,
    /// Runs whose mean total latency exceeds median + k·MAD are dropped.
    pub outlier_k: f64,
    pub histogram_bin_width: f64,
    pub regime: RegimeThresholds,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        Self {
            significance: 0.01,
            outlier_k: fit::DEFAULT_OUTLIER_K,
            histogram_bin_width: 0.05,
            regime: RegimeThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Union of cartesian blocks; duplicate points are evaluated once.
    pub grid: Vec<GridBlock>,
    pub runs_per_point: usize,
    /// Service models, `n_tx`, warmup and base seed shared by every point.
    pub base: SimConfig,
    pub settings: HarnessSettings,
}

impl SweepSpec {
    pub const DEFAULT_RUNS: usize = 10;

    pub fn new(base: SimConfig, grid: Vec<GridBlock>) -> Self {
        Self {
            grid,
            runs_per_point: Self::DEFAULT_RUNS,
            base,
            settings: HarnessSettings::default(),
        }
    }

    /// Every grid point, sorted by (λ_t, S_b, T_b) without duplicates.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut pts: Vec<GridPoint> = self
            .grid
            .iter()
            .flat_map(|g| {
                g.lambda_t.iter().flat_map(move |&l| {
                    g.block_size
                        .iter()
                        .flat_map(move |&s| g.block_timeout.iter().map(move |&t| GridPoint::new(l, s, t)))
                })
            })
            .collect();
        pts.sort_by(GridPoint::cmp_key);
        pts.dedup_by(|a, b| a.cmp_key(b).is_eq());
        pts
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.points().is_empty() {
            return Err(Error::config("grid", "must contain at least one point"));
        }
        if self.runs_per_point < 1 {
            return Err(Error::config("runs_per_point", "must be at least 1"));
        }
        let s = &self.settings;
        if !(s.significance > 0.0 && s.significance < 1.0) {
            return Err(Error::config("significance", "must lie in (0, 1)"));
        }
        if s.outlier_k.is_nan() || s.outlier_k <= 0.0 {
            return Err(Error::config("outlier_k", "must be positive"));
        }
        if !(s.histogram_bin_width > 0.0 && s.histogram_bin_width.is_finite()) {
            return Err(Error::config("histogram_bin_width", "must be a finite positive width"));
        }
        for p in self.points() {
            self.config_for(p, 0).validate()?;
        }
        Ok(())
    }

    /// Simulation config of run `run` at `point`.
    pub fn config_for(&self, point: GridPoint, run: usize) -> SimConfig {
        let mut cfg = self.base.clone();
        cfg.lambda_t = point.lambda_t;
        cfg.block_size = point.block_size;
        cfg.block_timeout = point.block_timeout;
        cfg.seed = run_seed(self.base.seed, point, run);
        cfg
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one run, hashed from the base seed, the grid coordinates and the run index.
pub fn run_seed(base: u64, point: GridPoint, run: usize) -> u64 {
    [
        point.lambda_t.to_bits(),
        point.block_size as u64,
        point.block_timeout.to_bits(),
        run as u64,
    ]
    .into_iter()
    .fold(splitmix64(base), |h, x| splitmix64(h ^ x))
}

pub fn run_id(point: GridPoint, run: usize) -> String {
    format!(
        "l{}-s{}-t{}-r{}",
        point.lambda_t, point.block_size, point.block_timeout, run
    )
}

/// Family fitted to each latency type in sweep reports.
pub fn assigned_family(kind: LatencyKind) -> Family {
    match kind {
        LatencyKind::Endorse => Family::Exponential,
        LatencyKind::Order => Family::Gamma,
        LatencyKind::Validate => Family::Gev,
        LatencyKind::Total => Family::Gamma,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub latency: LatencyKind,
    pub family: Family,
    /// Mean over the pooled samples of the surviving runs.
    #[serde(with = "crate::nan_as_null")]
    pub empirical_mean: f64,
    /// `family` fitted to the pooled samples.
    pub pooled: Option<FitReport>,
    /// Minimum-KS family on the pooled samples.
    pub best_family: Option<Family>,
    /// Per-run fitted parameters of `family`, averaged over fitted runs.
    pub mean_params: Option<Vec<f64>>,
    pub mean_ks_statistic: Option<f64>,
    pub mean_ks_critical: Option<f64>,
    pub runs_fitted: usize,
    pub runs_passed: usize,
    /// Runs where `family` had the minimum KS statistic.
    pub runs_best: usize,
    /// ... and also passed its KS test.
    pub runs_best_passed: usize,
    pub errors: Vec<String>,
}

impl LatencySummary {
    /// Mean of the distribution with averaged parameters.
    pub fn bestfit_mean(&self) -> Option<f64> {
        let params = self.mean_params.as_ref()?;
        crate::Distribution::from_params(self.family, params).ok()?.mean().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: GridPoint,
    pub runs: usize,
    pub excluded: Vec<ExcludedRun>,
    pub regime: Option<RegimeVerdict>,
    pub latencies: Vec<LatencySummary>,
    pub errors: Vec<String>,
}

impl PointSummary {
    pub fn latency(&self, kind: LatencyKind) -> Option<&LatencySummary> {
        self.latencies.iter().find(|l| l.latency == kind)
    }

    pub fn surviving_runs(&self) -> usize {
        self.runs - self.excluded.len()
    }
}

/// Runs all seeded simulations of one point, in run order.
pub fn simulate_point(spec: &SweepSpec, point: GridPoint) -> Result<Vec<(String, SimOutput)>> {
    (0..spec.runs_per_point)
        .into_par_iter()
        .map(|r| run_simulation(&spec.config_for(point, r)).map(|out| (run_id(point, r), out)))
        .collect()
}

/// Simulates, filters, fits and classifies one grid point. Failures are
/// recorded in the summary rather than returned.
pub fn run_experiment(spec: &SweepSpec, point: GridPoint) -> PointSummary {
    let mut summary = PointSummary {
        point,
        runs: spec.runs_per_point,
        excluded: Vec::new(),
        regime: None,
        latencies: Vec::new(),
        errors: Vec::new(),
    };
    let runs = match simulate_point(spec, point) {
        Ok(runs) => runs,
        Err(e) => {
            summary.errors.push(e.to_string());
            return summary;
        }
    };
    let settings = &spec.settings;

    let means: Vec<f64> = runs
        .iter()
        .map(|(_, out)| mean(&out.latencies(LatencyKind::Total)))
        .collect();
    let (drop, threshold) = fit::outlier_runs(&means, settings.outlier_k);
    let mut kept = Vec::with_capacity(runs.len());
    for (i, (id, out)) in runs.into_iter().enumerate() {
        if drop.contains(&i) {
            summary.excluded.push(ExcludedRun {
                run_id: id,
                mean: means[i],
                threshold,
            });
        } else {
            kept.push((id, out));
        }
    }

    let blocks: Vec<_> = kept.iter().flat_map(|(_, o)| o.blocks.iter().cloned()).collect();
    let samples: Vec<_> = kept.iter().flat_map(|(_, o)| o.samples.iter().copied()).collect();
    match detect_regime(&blocks, &samples, &settings.regime) {
        Ok(v) => summary.regime = Some(v),
        Err(e) => summary.errors.push(e.to_string()),
    }

    summary.latencies = LatencyKind::ALL
        .par_iter()
        .map(|&kind| summarize_latency(kind, point, &kept, settings.significance))
        .collect();
    summary
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

struct RunFit {
    assigned: Option<FitReport>,
    best: Option<Family>,
    error: Option<String>,
}

fn fit_run(samples: &SampleSet, family: Family, significance: f64) -> RunFit {
    let (scored, failures) = fit::fit_candidates(samples, &Family::ALL, significance);
    let assigned = scored
        .iter()
        .find(|r| r.distribution.family() == family)
        .cloned()
        .map(|r| FitReport {
            selection: Selection::Fixed,
            ..r
        });
    let error = if assigned.is_none() {
        failures
            .into_iter()
            .find(|f| f.starts_with(family.as_str()))
            .map(|f| format!("{}: {f}", samples.run_id))
    } else {
        None
    };
    RunFit {
        assigned,
        best: fit::pick_best(scored).map(|r| r.distribution.family()),
        error,
    }
}

fn summarize_latency(
    kind: LatencyKind,
    point: GridPoint,
    runs: &[(String, SimOutput)],
    significance: f64,
) -> LatencySummary {
    let family = assigned_family(kind);
    let mut summary = LatencySummary {
        latency: kind,
        family,
        empirical_mean: f64::NAN,
        pooled: None,
        best_family: None,
        mean_params: None,
        mean_ks_statistic: None,
        mean_ks_critical: None,
        runs_fitted: 0,
        runs_passed: 0,
        runs_best: 0,
        runs_best_passed: 0,
        errors: Vec::new(),
    };

    let mut per_run = Vec::new();
    for (id, out) in runs {
        match SampleSet::new(out.latencies(kind), id.clone(), Some(point.tag())) {
            Ok(s) => per_run.push(s),
            Err(e) => summary.errors.push(format!("{id}: {e}")),
        }
    }

    let fits: Vec<RunFit> = per_run.par_iter().map(|s| fit_run(s, family, significance)).collect();
    let mut reports = Vec::new();
    for f in fits {
        let best = f.best == Some(family);
        if let Some(r) = f.assigned {
            summary.runs_passed += r.passed as usize;
            summary.runs_best += best as usize;
            summary.runs_best_passed += (best && r.passed) as usize;
            reports.push(r);
        }
        summary.errors.extend(f.error);
    }
    summary.runs_fitted = reports.len();
    if !reports.is_empty() {
        let k = reports.len() as f64;
        let n_params = family.param_count();
        let mut params = vec![0.0; n_params];
        for r in &reports {
            for (acc, p) in params.iter_mut().zip(r.distribution.params()) {
                *acc += p / k;
            }
        }
        summary.mean_params = Some(params);
        summary.mean_ks_statistic = Some(reports.iter().map(|r| r.ks_statistic).sum::<f64>() / k);
        summary.mean_ks_critical = Some(reports.iter().map(|r| r.ks_critical).sum::<f64>() / k);
    }

    let pooled: Vec<f64> = per_run.iter().flat_map(|s| s.values().iter().copied()).collect();
    if pooled.is_empty() {
        return summary;
    }
    summary.empirical_mean = mean(&pooled);
    let pooled = match SampleSet::new(pooled, "pooled", Some(point.tag())) {
        Ok(s) => s,
        Err(e) => {
            summary.errors.push(format!("pooled: {e}"));
            return summary;
        }
    };
    let (scored, failures) = fit::fit_candidates(&pooled, &Family::ALL, significance);
    summary.pooled = scored
        .iter()
        .find(|r| r.distribution.family() == family)
        .cloned()
        .map(|r| FitReport {
            selection: Selection::Fixed,
            ..r
        });
    if summary.pooled.is_none() {
        summary
            .errors
            .extend(failures.into_iter().map(|f| format!("pooled: {f}")));
    }
    summary.best_family = fit::pick_best(scored).map(|r| r.distribution.family());
    summary
}

/// Size of the worker pool: `HLL_THREADS` if set to a positive integer,
/// otherwise rayon's default.
pub fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Evaluates every grid point, in grid order regardless of completion order.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<PointSummary>> {
    spec.validate()?;
    let points = spec.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(|&p| run_experiment(spec, p)).collect()))
}

/// Mean total latency at `point` averaged over `seeds` independent runs,
/// without fitting. Used for sweep-curve comparisons.
pub fn mean_total_latency(spec: &SweepSpec, point: GridPoint, seeds: usize) -> Result<f64> {
    let means: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|r| run_simulation(&spec.config_for(point, r)).map(|o| mean(&o.latencies(LatencyKind::Total))))
        .collect::<Result<_>>()?;
    Ok(mean(&means))
}
