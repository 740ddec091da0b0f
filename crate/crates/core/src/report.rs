//! Columnar and JSON artifacts: samples, blocks, histograms, CDFs, fit
//! reports and sweep tables.
//!
//! Floats are written with nine significant digits in plain decimal
//! notation, so emit → parse → emit reproduces the same bytes. Every file is
//! written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::fit::FitReport;
use crate::harness::{Histogram, PointSummary, Regime};
use crate::sim::{BlockRecord, CutReason, LatencyKind, LatencySample};

pub const SAMPLE_COLUMNS: [&str; 9] = [
    "run_id",
    "tx_id",
    "t_gen",
    "endorse_latency",
    "order_latency",
    "validate_latency",
    "total_latency",
    "block_id",
    "cut_reason",
];

pub const SWEEP_COLUMNS: [&str; 17] = [
    "lambda_t",
    "block_size",
    "block_timeout",
    "runs",
    "runs_excluded",
    "alpha",
    "beta",
    "ks_statistic",
    "ks_critical",
    "runs_passed",
    "empirical_mean",
    "bestfit_mean",
    "best_family",
    "timeout_cut_fraction",
    "tail_fraction",
    "regime",
    "error",
];

/// Nine significant digits, plain decimal where practical.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-12..=15).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let mut out = String::from(sign);
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    if out.contains('.') {
        let trimmed = out.trim_end_matches('0').trim_end_matches('.').len();
        out.truncate(trimmed);
    }
    out
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    match field {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        s => s.parse().map_err(|_| Error::Format {
            path: path.to_path_buf(),
            message: format!("line {line}: `{s}` is not a number"),
        }),
    }
}

fn parse_int<T: std::str::FromStr>(field: &str, path: &Path, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Format {
        path: path.to_path_buf(),
        message: format!("line {line}: `{field}` is not an integer"),
    })
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_default()
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let got = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!(
                "expected columns {}, found {}",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| rec.map(|rec| (i + 2, rec)).map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// One line of the samples file.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub run_id: String,
    pub sample: LatencySample,
}

pub fn samples_csv<'a, I>(rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = (&'a str, &'a LatencySample)>,
{
    csv_bytes(
        &SAMPLE_COLUMNS,
        rows.into_iter().map(|(run, s)| {
            [
                run.to_string(),
                s.tx_id.to_string(),
                format_sig9(s.t_gen),
                format_sig9(s.endorse_latency),
                format_sig9(s.order_latency),
                format_sig9(s.validate_latency),
                format_sig9(s.total_latency),
                s.block_id.to_string(),
                s.cut_reason.to_string(),
            ]
        }),
    )
}

pub fn emit_samples<'a, I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a LatencySample)>,
{
    write_atomic(path, &samples_csv(rows))
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRow>> {
    read_csv(path, &SAMPLE_COLUMNS)?
        .into_iter()
        .map(|(line, rec)| {
            if rec.len() != SAMPLE_COLUMNS.len() {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("line {line}: expected {} fields", SAMPLE_COLUMNS.len()),
                });
            }
            let f = |i: usize| parse_f64(&rec[i], path, line);
            Ok(SampleRow {
                run_id: rec[0].to_string(),
                sample: LatencySample {
                    tx_id: parse_int(&rec[1], path, line)?,
                    t_gen: f(2)?,
                    endorse_latency: f(3)?,
                    order_latency: f(4)?,
                    validate_latency: f(5)?,
                    total_latency: f(6)?,
                    block_id: parse_int(&rec[7], path, line)?,
                    cut_reason: rec[8].parse::<CutReason>().map_err(|e| Error::Format {
                        path: path.to_path_buf(),
                        message: format!("line {line}: {e}"),
                    })?,
                },
            })
        })
        .collect()
}

/// Latency column of parsed sample rows.
pub fn column(rows: &[SampleRow], kind: LatencyKind) -> Vec<f64> {
    rows.iter().map(|r| r.sample.latency(kind)).collect()
}

pub fn emit_blocks<'a, I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a BlockRecord)>,
{
    let bytes = csv_bytes(
        &[
            "run_id",
            "block_id",
            "n_tx",
            "cut_reason",
            "opened_at",
            "cut_time",
            "delivered_at",
            "validation_start",
            "commit_time",
        ],
        rows.into_iter().map(|(run, b)| {
            [
                run.to_string(),
                b.block_id.to_string(),
                b.tx_ids.len().to_string(),
                b.cut_reason.to_string(),
                format_sig9(b.opened_at),
                format_sig9(b.cut_time),
                format_sig9(b.delivered_at),
                format_sig9(b.validation_start),
                format_sig9(b.commit_time),
            ]
        }),
    );
    write_atomic(path, &bytes)
}

pub fn emit_histogram(path: &Path, h: &Histogram) -> Result<()> {
    let bytes = csv_bytes(
        &["lower", "upper", "count", "density"],
        h.bins().map(|b| {
            [
                format_sig9(b.lower),
                format_sig9(b.upper),
                b.count.to_string(),
                format_sig9(b.density),
            ]
        }),
    );
    write_atomic(path, &bytes)
}

pub fn emit_cdf(path: &Path, table: &[(f64, f64)]) -> Result<()> {
    let bytes = csv_bytes(
        &["x", "cdf"],
        table.iter().map(|&(x, p)| [format_sig9(x), format_sig9(p)]),
    );
    write_atomic(path, &bytes)
}

/// Outcome of fitting one latency column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FitEntry {
    Fitted(FitReport),
    Failed { error: String },
}

/// Fit results keyed by latency type (`endorse`, `order`, `validate`, `total`).
pub type FitFile = BTreeMap<LatencyKind, FitEntry>;

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable value");
    bytes.push(b'\n');
    bytes
}

pub fn emit_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn emit_fit_report(path: &Path, fits: &FitFile) -> Result<()> {
    emit_json(path, fits)
}

/// One row of the sweep table: operating point, averaged Gamma parameters and
/// KS statistic of the total latency, means, and the regime verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda_t: f64,
    pub block_size: usize,
    pub block_timeout: f64,
    pub runs: usize,
    pub runs_excluded: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub ks_statistic: Option<f64>,
    pub ks_critical: Option<f64>,
    pub runs_passed: usize,
    pub empirical_mean: Option<f64>,
    pub bestfit_mean: Option<f64>,
    pub best_family: Option<Family>,
    pub timeout_cut_fraction: Option<f64>,
    pub tail_fraction: Option<f64>,
    pub regime: Option<Regime>,
    pub error: String,
}

impl SweepRow {
    pub fn from_summary(s: &PointSummary) -> Self {
        let total = s.latency(LatencyKind::Total);
        let params = total.and_then(|t| t.mean_params.clone());
        let mut errors = s.errors.clone();
        if let Some(t) = total {
            errors.extend(t.errors.iter().cloned());
        }
        Self {
            lambda_t: s.point.lambda_t,
            block_size: s.point.block_size,
            block_timeout: s.point.block_timeout,
            runs: s.runs,
            runs_excluded: s.excluded.len(),
            alpha: params.as_ref().map(|p| p[0]),
            beta: params.as_ref().map(|p| p[1]),
            ks_statistic: total.and_then(|t| t.mean_ks_statistic),
            ks_critical: total.and_then(|t| t.mean_ks_critical),
            runs_passed: total.map_or(0, |t| t.runs_passed),
            empirical_mean: total.map(|t| t.empirical_mean).filter(|m| m.is_finite()),
            bestfit_mean: total.and_then(|t| t.bestfit_mean()),
            best_family: total.and_then(|t| t.best_family),
            timeout_cut_fraction: s.regime.map(|r| r.timeout_cut_fraction),
            tail_fraction: s.regime.map(|r| r.tail_fraction),
            regime: s.regime.map(|r| r.label),
            error: errors.join("; "),
        }
    }

    fn fields(&self) -> [String; 17] {
        [
            format_sig9(self.lambda_t),
            self.block_size.to_string(),
            format_sig9(self.block_timeout),
            self.runs.to_string(),
            self.runs_excluded.to_string(),
            opt_f64(self.alpha),
            opt_f64(self.beta),
            opt_f64(self.ks_statistic),
            opt_f64(self.ks_critical),
            self.runs_passed.to_string(),
            opt_f64(self.empirical_mean),
            opt_f64(self.bestfit_mean),
            self.best_family.map(|f| f.to_string()).unwrap_or_default(),
            opt_f64(self.timeout_cut_fraction),
            opt_f64(self.tail_fraction),
            self.regime.map(|r| r.to_string()).unwrap_or_default(),
            self.error.clone(),
        ]
    }
}

/// Rows sorted by (λ_t, S_b, T_b).
pub fn sweep_table_csv(rows: &[SweepRow]) -> Vec<u8> {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.lambda_t
            .total_cmp(&b.lambda_t)
            .then(a.block_size.cmp(&b.block_size))
            .then(a.block_timeout.total_cmp(&b.block_timeout))
    });
    csv_bytes(&SWEEP_COLUMNS, sorted.into_iter().map(SweepRow::fields))
}

pub fn emit_sweep_table(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_atomic(path, &sweep_table_csv(rows))
}

pub fn read_sweep_table(path: &Path) -> Result<Vec<SweepRow>> {
    read_csv(path, &SWEEP_COLUMNS)?
        .into_iter()
        .map(|(line, rec)| {
            let bad = |message: String| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {line}: {message}"),
            };
            if rec.len() != SWEEP_COLUMNS.len() {
                return Err(bad(format!("expected {} fields", SWEEP_COLUMNS.len())));
            }
            let opt = |i: usize| -> Result<Option<f64>> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    parse_f64(&rec[i], path, line).map(Some)
                }
            };
            Ok(SweepRow {
                lambda_t: parse_f64(&rec[0], path, line)?,
                block_size: parse_int(&rec[1], path, line)?,
                block_timeout: parse_f64(&rec[2], path, line)?,
                runs: parse_int(&rec[3], path, line)?,
                runs_excluded: parse_int(&rec[4], path, line)?,
                alpha: opt(5)?,
                beta: opt(6)?,
                ks_statistic: opt(7)?,
                ks_critical: opt(8)?,
                runs_passed: parse_int(&rec[9], path, line)?,
                empirical_mean: opt(10)?,
                bestfit_mean: opt(11)?,
                best_family: match &rec[12] {
                    "" => None,
                    s => Some(s.parse().map_err(|e: Error| bad(e.to_string()))?),
                },
                timeout_cut_fraction: opt(13)?,
                tail_fraction: opt(14)?,
                regime: match &rec[15] {
                    "" => None,
                    s => Some(s.parse().map_err(|e: Error| bad(e.to_string()))?),
                },
                error: rec[16].to_string(),
            })
        })
        .collect()
}

/// Sweep rows rebuilt from per-point summaries.
pub fn sweep_rows(summaries: &[PointSummary]) -> Vec<SweepRow> {
    summaries.iter().map(SweepRow::from_summary).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{SampleSet, Selection};
    use crate::Distribution;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(1.5), "1.5");
        assert_eq!(format_sig9(0.0105820106), "0.0105820106");
        assert_eq!(format_sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig9(-2.0 / 3.0), "-0.666666667");
        assert_eq!(format_sig9(123_456_789_012.0), "123456789000");
        assert_eq!(format_sig9(1e-20), "1.00000000e-20");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(f64::NAN), "nan");
    }

    #[test]
    fn sig9_is_a_fixed_point() {
        let mut x = 1.234_567_891_234e-7;
        while x < 1e9 {
            let once = format_sig9(x);
            let back: f64 = once.parse().unwrap();
            assert_eq!(format_sig9(back), once, "{x}");
            assert!((back / x - 1.0).abs() < 1e-8);
            x *= 3.7;
        }
    }

    #[test]
    fn gamma_report_serializes_means() {
        let samples = SampleSet::from_values(vec![1.0, 1.5, 2.0]).unwrap();
        let mut r = FitReport::evaluate(
            &samples,
            Distribution::gamma(8.9573, 5.5858).unwrap(),
            0.01,
            Selection::Fixed,
        )
        .unwrap();
        r.empirical_mean = 1.6066;
        let json = String::from_utf8(to_json(&r)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["family"], "gamma");
        assert_eq!(v["params"]["alpha"], 8.9573);
        assert_eq!(v["empirical_mean"], 1.6066);
        assert!((v["bestfit_mean"].as_f64().unwrap() - 1.6035).abs() < 1e-3);
        for key in ["ks_statistic", "ks_critical", "passed", "n"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: FitReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn undefined_mean_round_trips_as_null() {
        let samples = SampleSet::from_values(vec![1.0, 1.5, 2.0]).unwrap();
        let r = FitReport::evaluate(
            &samples,
            Distribution::gev(1.2, 1.0, 1.0).unwrap(),
            0.01,
            Selection::Fixed,
        )
        .unwrap();
        let json = to_json(&r);
        assert!(String::from_utf8_lossy(&json).contains("\"bestfit_mean\": null"));
        let back: FitReport = serde_json::from_slice(&json).unwrap();
        assert!(back.bestfit_mean.is_nan());
    }
}
