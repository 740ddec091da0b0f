use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::sim::{BlockRecord, CutReason, LatencySample};

/// Operating regimes in which a smooth latency model is or is not adequate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Feasible,
    /// Nearly every block is cut by the timer; ordering latency spikes at T_b.
    TimeoutDominant,
    /// Blocks fill instantly and validation backlog produces a long tail.
    SizeDominant,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Feasible => "Feasible",
            Regime::TimeoutDominant => "TimeoutDominant",
            Regime::SizeDominant => "SizeDominant",
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Feasible" => Ok(Regime::Feasible),
            "TimeoutDominant" => Ok(Regime::TimeoutDominant),
            "SizeDominant" => Ok(Regime::SizeDominant),
            other => Err(Error::InvalidInput(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeThresholds {
    /// Timeout-cut fraction at or above which the point is timeout dominant.
    pub timeout_fraction: f64,
    /// Tail mass at or above which a size-cut point is size dominant.
    pub tail_fraction: f64,
    /// The tail starts this many standard deviations above the mean.
    pub tail_sigmas: f64,
    pub size_fraction: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            timeout_fraction: 0.95,
            tail_fraction: 0.01,
            tail_sigmas: 4.0,
            size_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub label: Regime,
    pub timeout_cut_fraction: f64,
    pub size_cut_fraction: f64,
    pub tail_fraction: f64,
    pub thresholds: RegimeThresholds,
}

pub fn detect_regime(
    blocks: &[BlockRecord],
    samples: &[LatencySample],
    thresholds: &RegimeThresholds,
) -> Result<RegimeVerdict> {
    if blocks.is_empty() || samples.is_empty() {
        return Err(Error::InvalidInput("regime detection needs blocks and samples".into()));
    }
    let timeouts = blocks.iter().filter(|b| b.cut_reason == CutReason::Timeout).count();
    let timeout_cut_fraction = timeouts as f64 / blocks.len() as f64;
    let size_cut_fraction = 1.0 - timeout_cut_fraction;

    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.total_latency).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.total_latency - mean).powi(2)).sum::<f64>() / n;
    let cutoff = mean + thresholds.tail_sigmas * var.sqrt();
    let tail_fraction = samples.iter().filter(|s| s.total_latency > cutoff).count() as f64 / n;

    let label = if timeout_cut_fraction >= thresholds.timeout_fraction {
        Regime::TimeoutDominant
    } else if size_cut_fraction >= thresholds.size_fraction && tail_fraction >= thresholds.tail_fraction {
        Regime::SizeDominant
    } else {
        Regime::Feasible
    };
    Ok(RegimeVerdict {
        label,
        timeout_cut_fraction,
        size_cut_fraction,
        tail_fraction,
        thresholds: *thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(id: usize, reason: CutReason) -> BlockRecord {
        BlockRecord {
            block_id: id,
            tx_ids: vec![id],
            cut_reason: reason,
            opened_at: 0.0,
            cut_time: 0.0,
            delivered_at: 0.0,
            validation_start: 0.0,
            commit_time: 0.0,
        }
    }

    fn sample(total: f64) -> LatencySample {
        LatencySample {
            tx_id: 0,
            t_gen: 0.0,
            endorse_latency: 0.0,
            order_latency: 0.0,
            validate_latency: total,
            total_latency: total,
            block_id: 0,
            cut_reason: CutReason::Size,
        }
    }

    #[test]
    fn all_timeouts() {
        let blocks: Vec<_> = (0..10).map(|i| block(i, CutReason::Timeout)).collect();
        let v = detect_regime(&blocks, &[sample(1.0)], &RegimeThresholds::default()).unwrap();
        assert_eq!(v.label, Regime::TimeoutDominant);
        assert_eq!(v.timeout_cut_fraction, 1.0);
    }

    #[test]
    fn size_cut_without_tail_is_feasible() {
        let blocks: Vec<_> = (0..10).map(|i| block(i, CutReason::Size)).collect();
        let samples: Vec<_> = (0..1000).map(|i| sample(1.0 + (i % 10) as f64 * 0.01)).collect();
        let v = detect_regime(&blocks, &samples, &RegimeThresholds::default()).unwrap();
        assert_eq!(v.label, Regime::Feasible);
        assert_eq!(v.tail_fraction, 0.0);
    }

    #[test]
    fn size_cut_with_long_tail() {
        let blocks: Vec<_> = (0..10).map(|i| block(i, CutReason::Size)).collect();
        // 2% of samples far beyond mean + 4 sd
        let samples: Vec<_> = (0..1000)
            .map(|i| sample(if i % 50 == 0 { 40.0 } else { 1.0 }))
            .collect();
        let v = detect_regime(&blocks, &samples, &RegimeThresholds::default()).unwrap();
        assert_eq!(v.label, Regime::SizeDominant);
        assert!((v.tail_fraction - 0.02).abs() < 1e-12);
        assert!(detect_regime(&[], &samples, &RegimeThresholds::default()).is_err());
    }
}
