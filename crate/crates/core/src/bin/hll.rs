//! `hll`: simulate, fit, test and sweep ledger-commitment latency.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 when a
//! simulation, fit or I/O step fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hll_core::config::{parse_config, Config};
use hll_core::fit::{self, SampleSet};
use hll_core::harness::{self, make_cdf, make_histogram, HarnessSettings, PointSummary};
use hll_core::report::{self, FitEntry, FitFile};
use hll_core::sim::{run_simulation, LatencyKind};
use hll_core::{ks, Distribution, Error, Family};

#[derive(Parser)]
#[command(
    name = "hll",
    version,
    about = "Ledger-commitment latency simulator and distribution fitter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded simulation and write samples, blocks, histograms and a CDF.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write a STAMP file with the wall-clock time.
        #[arg(long)]
        stamp: bool,
    },
    /// Fit latency columns of a samples file.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, value_enum, default_value_t = FamilyArg::Auto)]
        family: FamilyArg,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one latency column (default: all four).
        #[arg(long)]
        column: Option<LatencyKind>,
    },
    /// KS-test one latency column against a given distribution.
    Kstest {
        #[arg(long)]
        samples: PathBuf,
        /// e.g. `gamma:8.9573,5.5858`
        #[arg(long)]
        dist: Distribution,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value = "total")]
        column: LatencyKind,
    },
    /// Evaluate every grid point of a sweep file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stamp: bool,
    },
    /// Rebuild the sweep table from a sweep output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Exp,
    Gamma,
    Gev,
    Auto,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::ConfigParse { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Simulate {
            config,
            seed,
            out,
            stamp,
        } => simulate(&config, seed, &out, stamp),
        Command::Fit {
            samples,
            family,
            alpha,
            out,
            column,
        } => fit_samples(&samples, family, alpha, &out, column),
        Command::Kstest {
            samples,
            dist,
            alpha,
            column,
        } => kstest(&samples, &dist, alpha, column),
        Command::Sweep {
            config,
            seed,
            out,
            stamp,
        } => sweep(&config, seed, &out, stamp),
        Command::Report { input, out } => rebuild_report(&input, &out),
    }
}

fn load_config(path: &Path, seed: u64) -> Result<Config, Failure> {
    let mut cfg = parse_config(path).map_err(|e| match e {
        Error::Io { .. } => Failure::Usage(e.to_string()),
        other => Failure::from(other),
    })?;
    cfg.set_seed(seed);
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn write_stamp(dir: &Path) -> Result<(), Failure> {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    report::write_atomic(&dir.join("STAMP"), format!("{secs}\n").as_bytes())?;
    Ok(())
}

fn simulate(config: &Path, seed: u64, out: &Path, stamp: bool) -> Result<(), Failure> {
    let cfg = load_config(config, seed)?;
    let bin_width = match &cfg {
        Config::Sweep(s) => s.settings.histogram_bin_width,
        Config::Simulation(_) => HarnessSettings::default().histogram_bin_width,
    };
    let sim = cfg.sim_config();
    sim.validate()?;
    let result = run_simulation(&sim)?;
    create_dir(out)?;

    let run_id = format!("seed{seed}");
    report::emit_samples(
        &out.join("samples.csv"),
        result.samples.iter().map(|s| (run_id.as_str(), s)),
    )?;
    report::emit_blocks(
        &out.join("blocks.csv"),
        result.blocks.iter().map(|b| (run_id.as_str(), b)),
    )?;
    for kind in LatencyKind::ALL {
        let values = result.latencies(kind);
        let h = make_histogram(&values, bin_width)?;
        report::emit_histogram(&out.join(format!("histogram_{kind}.csv")), &h)?;
    }
    report::emit_cdf(
        &out.join("cdf_total.csv"),
        &make_cdf(&result.latencies(LatencyKind::Total))?,
    )?;
    if stamp {
        write_stamp(out)?;
    }

    let total = result.latencies(LatencyKind::Total);
    println!(
        "{} samples in {} blocks, mean total latency {}",
        total.len(),
        result.blocks.len(),
        report::format_sig9(total.iter().sum::<f64>() / total.len() as f64)
    );
    Ok(())
}

fn fit_samples(
    path: &Path,
    family: FamilyArg,
    alpha: f64,
    out: &Path,
    column: Option<LatencyKind>,
) -> Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    let rows = report::read_samples(path)?;
    let kinds: Vec<LatencyKind> = match column {
        Some(k) => vec![k],
        None => LatencyKind::ALL.to_vec(),
    };
    let mut fits: FitFile = BTreeMap::new();
    let mut failed = 0;
    for kind in kinds {
        let result =
            SampleSet::new(report::column(&rows, kind), path.display().to_string(), None).and_then(|s| match family {
                FamilyArg::Exp => fit::fit_report(&s, Family::Exponential, alpha),
                FamilyArg::Gamma => fit::fit_report(&s, Family::Gamma, alpha),
                FamilyArg::Gev => fit::fit_report(&s, Family::Gev, alpha),
                FamilyArg::Auto => fit::select_best_fit(&s, &Family::ALL, alpha),
            });
        let entry = match result {
            Ok(r) => {
                println!(
                    "{kind}: {} D={} critical={} {}",
                    r.distribution,
                    report::format_sig9(r.ks_statistic),
                    report::format_sig9(r.ks_critical),
                    if r.passed { "pass" } else { "fail" }
                );
                FitEntry::Fitted(r)
            }
            Err(e) => {
                eprintln!("{kind}: {e}");
                failed += 1;
                FitEntry::Failed { error: e.to_string() }
            }
        };
        fits.insert(kind, entry);
    }
    report::emit_fit_report(out, &fits)?;
    if failed > 0 {
        return Err(Failure::Runtime(format!(
            "{failed} fit(s) failed; see {}",
            out.display()
        )));
    }
    Ok(())
}

fn kstest(path: &Path, dist: &Distribution, alpha: f64, column: LatencyKind) -> Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    let rows = report::read_samples(path)?;
    let result = ks::ks_test(&report::column(&rows, column), dist, alpha)?;
    let json = serde_json::json!({
        "distribution": dist.to_string(),
        "column": column,
        "statistic": result.statistic,
        "critical_value": result.critical_value,
        "significance": alpha,
        "n": result.n,
        "p_value": result.p_value(),
        "passed": result.passed,
    });
    println!("{}", serde_json::to_string_pretty(&json).expect("json value"));
    Ok(())
}

fn point_file(dir: &Path, index: usize) -> PathBuf {
    dir.join("points").join(format!("point_{index:04}.json"))
}

fn sweep(config: &Path, seed: u64, out: &Path, stamp: bool) -> Result<(), Failure> {
    let spec = match load_config(config, seed)? {
        Config::Sweep(spec) => spec,
        Config::Simulation(_) => {
            return Err(Failure::Usage(format!("{}: no [sweep] section", config.display())));
        }
    };
    let summaries = harness::sweep(&spec)?;
    create_dir(&out.join("points"))?;
    for (i, s) in summaries.iter().enumerate() {
        report::emit_json(&point_file(out, i), s)?;
    }
    let rows = report::sweep_rows(&summaries);
    report::emit_sweep_table(&out.join("sweep.csv"), &rows)?;
    if stamp {
        write_stamp(out)?;
    }
    for r in &rows {
        println!(
            "lambda_t={} S_b={} T_b={} mean={} regime={}",
            report::format_sig9(r.lambda_t),
            r.block_size,
            report::format_sig9(r.block_timeout),
            r.empirical_mean.map(report::format_sig9).unwrap_or_else(|| "-".into()),
            r.regime.map(|g| g.to_string()).unwrap_or_else(|| "-".into()),
        );
    }
    Ok(())
}

fn rebuild_report(dir: &Path, out: &Path) -> Result<(), Failure> {
    let points = dir.join("points");
    let entries = std::fs::read_dir(&points).map_err(|e| Failure::Runtime(format!("{}: {e}", points.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::Runtime(format!("{}: no point summaries", points.display())));
    }
    let summaries = files
        .iter()
        .map(|f| report::read_json::<PointSummary>(f))
        .collect::<Result<Vec<_>, _>>()?;
    report::emit_sweep_table(out, &report::sweep_rows(&summaries))?;
    Ok(())
}
