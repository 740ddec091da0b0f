use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutReason {
    Size,
    Timeout,
}

impl fmt::Display for CutReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CutReason::Size => "size",
            CutReason::Timeout => "timeout",
        })
    }
}

impl FromStr for CutReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "size" => Ok(CutReason::Size),
            "timeout" => Ok(CutReason::Timeout),
            other => Err(Error::InvalidInput(format!("unknown cut reason `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub tx_ids: Vec<usize>,
    pub reason: CutReason,
    /// Arrival time of the first transaction into the empty queue.
    pub opened_at: f64,
    pub cut_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrderingAction {
    /// Nothing to do beyond queueing the transaction.
    Queued,
    /// The queue was empty; a timer must fire at `at` carrying `epoch`.
    ArmTimer {
        at: f64,
        epoch: u64,
    },
    Cut(Cut),
}

/// Block cutter of a single ordering channel.
///
/// A block is cut as soon as it holds `block_size` transactions, or when
/// `block_timeout` has elapsed since its first transaction arrived. Timers
/// are identified by an epoch; a fire whose epoch is stale is ignored.
#[derive(Debug, Clone)]
pub struct OrderingService {
    block_size: usize,
    block_timeout: f64,
    pending: Vec<usize>,
    opened_at: Option<f64>,
    epoch: u64,
}

impl OrderingService {
    pub fn new(block_size: usize, block_timeout: f64) -> Self {
        assert!(block_size >= 1 && block_timeout > 0.0);
        Self {
            block_size,
            block_timeout,
            pending: Vec::with_capacity(block_size.min(4096)),
            opened_at: None,
            epoch: 0,
        }
    }

    pub fn pending(&self) -> &[usize] {
        &self.pending
    }

    /// Deadline and epoch of the armed timer, if any.
    pub fn timer(&self) -> Option<(f64, u64)> {
        self.opened_at.map(|t| (t + self.block_timeout, self.epoch))
    }

    pub fn arrive(&mut self, tx: usize, now: f64) -> OrderingAction {
        let was_empty = self.pending.is_empty();
        if was_empty {
            self.opened_at = Some(now);
        }
        self.pending.push(tx);
        if self.pending.len() >= self.block_size {
            return OrderingAction::Cut(self.cut(CutReason::Size, now));
        }
        if was_empty {
            let (at, epoch) = self.timer().expect("timer armed on first arrival");
            OrderingAction::ArmTimer { at, epoch }
        } else {
            OrderingAction::Queued
        }
    }

    pub fn timer_fired(&mut self, epoch: u64, now: f64) -> Option<Cut> {
        if epoch != self.epoch || self.pending.is_empty() {
            return None;
        }
        Some(self.cut(CutReason::Timeout, now))
    }

    fn cut(&mut self, reason: CutReason, now: f64) -> Cut {
        let opened_at = self.opened_at.take().expect("cut of a non-empty queue");
        self.epoch += 1;
        let tx_ids = std::mem::take(&mut self.pending);
        Cut {
            tx_ids,
            reason,
            opened_at,
            cut_time: now,
        }
    }
}
