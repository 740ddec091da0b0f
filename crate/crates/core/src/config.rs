//! TOML scenario files.
//!
//! ```toml
//! [scenario]
//! lambda_t = 10.0        # tx/s
//! block_size = 10
//! block_timeout = 2.0    # seconds
//! n_tx = 1000            # default 1000
//! seed = 42              # default 0; the CLI --seed flag overrides it
//! warmup_discard = 0     # default 0
//!
//! [models]               # every key optional; calibrated defaults otherwise
//! endorse = "exp:94.5"
//! order_overhead = "gamma:1.5,10"
//! validate_base = "gev:0,0.02,0.35"
//! validate_per_tx = "zero"
//!
//! [sweep]                # present only in sweep files
//! runs_per_point = 10
//! significance = 0.01
//! outlier_k = 5.0
//! histogram_bin_width = 0.05
//!
//! [sweep.regime]
//! timeout_fraction = 0.95
//! tail_fraction = 0.01
//! tail_sigmas = 4.0
//! size_fraction = 0.95
//!
//! [[sweep.grid]]         # the grid is the union of these cartesian blocks
//! lambda_t = [10, 11, 12, 13]
//! block_size = [20]
//! block_timeout = [1.0]
//! ```
//!
//! In a sweep file the `[scenario]` operating point is optional. Unknown
//! keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::{GridBlock, HarnessSettings, RegimeThresholds, SweepSpec};
use crate::sim::{ServiceModel, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Config {
    Simulation(SimConfig),
    Sweep(SweepSpec),
}

impl Config {
    /// The single-run configuration; for a sweep, its first grid point.
    pub fn sim_config(&self) -> SimConfig {
        match self {
            Config::Simulation(c) => c.clone(),
            Config::Sweep(s) => {
                let p = s.points()[0];
                let mut c = s.base.clone();
                c.lambda_t = p.lambda_t;
                c.block_size = p.block_size;
                c.block_timeout = p.block_timeout;
                c
            }
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Config::Simulation(c) => c.seed = seed,
            Config::Sweep(s) => s.base.seed = seed,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    models: RawModels,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    lambda_t: Option<f64>,
    block_size: Option<i64>,
    block_timeout: Option<f64>,
    n_tx: Option<i64>,
    seed: Option<u64>,
    warmup_discard: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModels {
    endorse: Option<String>,
    order_overhead: Option<String>,
    validate_base: Option<String>,
    validate_per_tx: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    runs_per_point: Option<i64>,
    significance: Option<f64>,
    outlier_k: Option<f64>,
    histogram_bin_width: Option<f64>,
    regime: Option<RegimeThresholds>,
    #[serde(default)]
    grid: Vec<GridBlock>,
}

pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

/// Parses config text; `origin` only labels error messages.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<Config> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::ConfigParse {
        path: origin.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    build(raw)
}

fn count(field: &str, v: Option<i64>, min: i64) -> Result<Option<usize>> {
    match v {
        None => Ok(None),
        Some(v) if v >= min => Ok(Some(v as usize)),
        Some(v) => Err(Error::config(field, format!("must be at least {min}, got {v}"))),
    }
}

fn model(field: &str, v: Option<String>, default: ServiceModel) -> Result<ServiceModel> {
    match v {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: Error| Error::config(field, e.to_string())),
    }
}

// Re-scopes a field name reported by `SimConfig::validate`.
fn scoped(e: Error) -> Error {
    match e {
        Error::Config { field, reason } => {
            let section = match field.as_str() {
                "endorse" | "order_overhead" | "validate_base" | "validate_per_tx" => "models",
                _ => "scenario",
            };
            Error::Config {
                field: format!("{section}.{field}"),
                reason,
            }
        }
        other => other,
    }
}

fn build(raw: RawFile) -> Result<Config> {
    let sc = raw.scenario;
    let block_size = count("scenario.block_size", sc.block_size, 1)?;
    let n_tx = count("scenario.n_tx", sc.n_tx, 1)?;
    let warmup = count("scenario.warmup_discard", sc.warmup_discard, 0)?;

    let mut base = SimConfig::new(
        sc.lambda_t.unwrap_or(f64::NAN),
        block_size.unwrap_or(0),
        sc.block_timeout.unwrap_or(f64::NAN),
    );
    base.n_tx = n_tx.unwrap_or(SimConfig::DEFAULT_N_TX);
    base.seed = sc.seed.unwrap_or(0);
    base.warmup_discard = warmup.unwrap_or(0);
    let m = raw.models;
    base.endorse_model = model("models.endorse", m.endorse, base.endorse_model)?;
    base.order_overhead_model = model("models.order_overhead", m.order_overhead, base.order_overhead_model)?;
    base.validate_model.base = model("models.validate_base", m.validate_base, base.validate_model.base)?;
    base.validate_model.per_tx = model("models.validate_per_tx", m.validate_per_tx, base.validate_model.per_tx)?;

    let Some(sw) = raw.sweep else {
        for (field, missing) in [
            ("scenario.lambda_t", sc.lambda_t.is_none()),
            ("scenario.block_size", sc.block_size.is_none()),
            ("scenario.block_timeout", sc.block_timeout.is_none()),
        ] {
            if missing {
                return Err(Error::config(field, "is required"));
            }
        }
        base.validate().map_err(scoped)?;
        return Ok(Config::Simulation(base));
    };

    if sw.grid.is_empty() {
        return Err(Error::config("sweep.grid", "must contain at least one block"));
    }
    for (i, g) in sw.grid.iter().enumerate() {
        for (name, empty) in [
            ("lambda_t", g.lambda_t.is_empty()),
            ("block_size", g.block_size.is_empty()),
            ("block_timeout", g.block_timeout.is_empty()),
        ] {
            if empty {
                return Err(Error::config(format!("sweep.grid[{i}].{name}"), "must not be empty"));
            }
        }
    }
    let defaults = HarnessSettings::default();
    let mut spec = SweepSpec::new(base, sw.grid);
    spec.runs_per_point = count("sweep.runs_per_point", sw.runs_per_point, 1)?.unwrap_or(SweepSpec::DEFAULT_RUNS);
    spec.settings = HarnessSettings {
        significance: sw.significance.unwrap_or(defaults.significance),
        outlier_k: sw.outlier_k.unwrap_or(defaults.outlier_k),
        histogram_bin_width: sw.histogram_bin_width.unwrap_or(defaults.histogram_bin_width),
        regime: sw.regime.unwrap_or_default(),
    };
    // The operating point in [scenario] is only a placeholder for sweeps.
    let first = spec.points()[0];
    if spec.base.lambda_t.is_nan() {
        spec.base.lambda_t = first.lambda_t;
    }
    if spec.base.block_size == 0 {
        spec.base.block_size = first.block_size;
    }
    if spec.base.block_timeout.is_nan() {
        spec.base.block_timeout = first.block_timeout;
    }
    spec.validate().map_err(|e| match e {
        Error::Config { field, reason } if !field.contains('.') => {
            let field = match field.as_str() {
                "runs_per_point" | "significance" | "outlier_k" | "histogram_bin_width" | "grid" => {
                    format!("sweep.{field}")
                }
                _ => return scoped(Error::Config { field, reason }),
            };
            Error::Config { field, reason }
        }
        other => other,
    })?;
    Ok(Config::Sweep(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::calibrated;

    fn parse(text: &str) -> Result<Config> {
        parse_config_str(text, Path::new("test.toml"))
    }

    fn field_of(r: Result<Config>) -> String {
        match r {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("[scenario]\nlambda_t = 10\nblock_size = 10\nblock_timeout = 2\nseed = 42\n").unwrap();
        let Config::Simulation(c) = c else { panic!() };
        assert_eq!(c, SimConfig::new(10.0, 10, 2.0).with_seed(42));
        assert_eq!(c.endorse_model, calibrated::endorse());
        assert_eq!(c.n_tx, 1000);
    }

    #[test]
    fn zero_block_size_is_named() {
        let r = parse("[scenario]\nlambda_t = 10\nblock_size = 0\nblock_timeout = 2\n");
        assert_eq!(field_of(r), "scenario.block_size");
        let r = parse("[scenario]\nlambda_t = -1\nblock_size = 3\nblock_timeout = 2\n");
        assert_eq!(field_of(r), "scenario.lambda_t");
        let r = parse("[scenario]\nlambda_t = 1\nblock_size = 3\n");
        assert_eq!(field_of(r), "scenario.block_timeout");
        let r =
            parse("[scenario]\nlambda_t = 1\nblock_size = 3\nblock_timeout = 1\n[models]\nendorse = \"gamma:-1,2\"\n");
        assert_eq!(field_of(r), "models.endorse");
    }

    #[test]
    fn unknown_keys_report_location() {
        let err = parse("[scenario]\nlambda_t = 10\nblok_size = 10\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::ConfigParse { .. }));
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("blok_size"), "{msg}");
    }

    #[test]
    fn sweep_grid_union() {
        let text = r#"
[scenario]
n_tx = 500
[sweep]
runs_per_point = 4
[[sweep.grid]]
lambda_t = [12, 10]
block_size = [20]
block_timeout = [1.0]
[[sweep.grid]]
lambda_t = [8]
block_size = [10]
block_timeout = [2.0]
"#;
        let Config::Sweep(s) = parse(text).unwrap() else {
            panic!()
        };
        assert_eq!(s.runs_per_point, 4);
        assert_eq!(s.base.n_tx, 500);
        let pts = s.points();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].lambda_t, 8.0);
        assert_eq!(s.settings, HarnessSettings::default());
    }

    #[test]
    fn sweep_errors_are_scoped() {
        let r = parse(
            "[sweep]\nruns_per_point = 0\n[[sweep.grid]]\nlambda_t = [1]\nblock_size = [1]\nblock_timeout = [1]\n",
        );
        assert_eq!(field_of(r), "sweep.runs_per_point");
        let r = parse("[sweep]\n");
        assert_eq!(field_of(r), "sweep.grid");
        let r = parse("[sweep]\n[[sweep.grid]]\nlambda_t = []\nblock_size = [1]\nblock_timeout = [1]\n");
        assert_eq!(field_of(r), "sweep.grid[0].lambda_t");
        let r =
            parse("[sweep]\nsignificance = 2\n[[sweep.grid]]\nlambda_t = [1]\nblock_size = [1]\nblock_timeout = [1]\n");
        assert_eq!(field_of(r), "sweep.significance");
        let r = parse("[sweep]\n[[sweep.grid]]\nlambda_t = [1]\nblock_size = [0]\nblock_timeout = [1]\n");
        assert_eq!(field_of(r), "scenario.block_size");
    }
}
