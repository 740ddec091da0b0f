//! Discrete-event model of the endorse → order → validate transaction flow.
//!
//! One client submits proposals as a Poisson stream. Endorsement runs with
//! unlimited parallelism, a single ordering channel cuts blocks by size or
//! timeout, and one committing peer validates blocks one at a time in cut
//! order. Each run is single-threaded and reproducible from its seed.

mod event;
mod ordering;
mod validation;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{parse_param_list, Distribution};
use crate::error::{Error, Result};

pub use event::{Event, EventKind, EventQueue};
pub use ordering::{Cut, CutReason, OrderingAction, OrderingService};
pub use validation::ValidationQueue;

/// Service time of one pipeline stage.
///
/// Written as `zero`, `const:v`, or a distribution string such as
/// `gamma:1.5,10`. Draws below zero are clamped to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ServiceModel {
    Zero,
    Constant(f64),
    Random(Distribution),
}

impl ServiceModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ServiceModel::Zero => Ok(()),
            ServiceModel::Constant(v) if v.is_finite() && *v >= 0.0 => Ok(()),
            ServiceModel::Constant(v) => Err(Error::ParameterDomain {
                name: "const",
                value: *v,
                reason: "must be finite and non-negative",
            }),
            ServiceModel::Random(d) => d.validate(),
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ServiceModel::Zero => 0.0,
            ServiceModel::Constant(v) => *v,
            ServiceModel::Random(d) => d.sample_unchecked(rng).max(0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ServiceModel::Zero) || matches!(self, ServiceModel::Constant(v) if *v == 0.0)
    }
}

impl fmt::Display for ServiceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceModel::Zero => f.write_str("zero"),
            ServiceModel::Constant(v) => write!(f, "const:{v}"),
            ServiceModel::Random(d) => d.fmt(f),
        }
    }
}

impl FromStr for ServiceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("zero") {
            return Ok(ServiceModel::Zero);
        }
        if let Some(rest) = s.strip_prefix("const:") {
            let v = match parse_param_list(rest)?.as_slice() {
                [v] => *v,
                _ => return Err(Error::InvalidInput(format!("`{s}`: const takes one value"))),
            };
            let m = ServiceModel::Constant(v);
            m.validate()?;
            return Ok(m);
        }
        s.parse().map(ServiceModel::Random)
    }
}

impl TryFrom<String> for ServiceModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ServiceModel> for String {
    fn from(m: ServiceModel) -> String {
        m.to_string()
    }
}

impl From<Distribution> for ServiceModel {
    fn from(d: Distribution) -> Self {
        ServiceModel::Random(d)
    }
}

/// Per-block validation time: `base + |block| · per_tx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationModel {
    pub base: ServiceModel,
    pub per_tx: ServiceModel,
}

impl ValidationModel {
    pub fn draw(&self, block_len: usize, rng: &mut ChaCha8Rng) -> f64 {
        self.base.draw(rng) + block_len as f64 * self.per_tx.draw(rng)
    }

    pub fn zero() -> Self {
        Self {
            base: ServiceModel::Zero,
            per_tx: ServiceModel::Zero,
        }
    }
}

/// Calibrated stage models. These are reconstructions chosen so that the
/// composite latencies resemble the measured ones, not stage measurements.
pub mod calibrated {
    use super::{ServiceModel, ValidationModel};
    use crate::dist::Distribution;

    pub fn endorse() -> ServiceModel {
        ServiceModel::Random(Distribution::exponential(94.5).expect("valid"))
    }

    pub fn order_overhead() -> ServiceModel {
        ServiceModel::Random(Distribution::gamma(1.5, 10.0).expect("valid"))
    }

    pub fn validate() -> ValidationModel {
        ValidationModel {
            base: ServiceModel::Random(Distribution::gev(0.0, 0.02, 0.35).expect("valid")),
            per_tx: ServiceModel::Zero,
        }
    }
}

/// How transaction generation times are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Arrivals {
    /// First proposal at t = 0, then exponential gaps with rate `lambda_t`.
    Poisson,
    /// Fixed non-decreasing generation times, one per transaction.
    Scripted(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Transaction generation rate, tx/s.
    pub lambda_t: f64,
    pub block_size: usize,
    /// Seconds.
    pub block_timeout: f64,
    pub endorse_model: ServiceModel,
    pub order_overhead_model: ServiceModel,
    pub validate_model: ValidationModel,
    pub n_tx: usize,
    pub seed: u64,
    pub warmup_discard: usize,
    pub arrivals: Arrivals,
}

impl SimConfig {
    pub const DEFAULT_N_TX: usize = 1_000;

    /// A configuration with calibrated service models, 1000 transactions and seed 0.
    pub fn new(lambda_t: f64, block_size: usize, block_timeout: f64) -> Self {
        Self {
            lambda_t,
            block_size,
            block_timeout,
            endorse_model: calibrated::endorse(),
            order_overhead_model: calibrated::order_overhead(),
            validate_model: calibrated::validate(),
            n_tx: Self::DEFAULT_N_TX,
            seed: 0,
            warmup_discard: 0,
            arrivals: Arrivals::Poisson,
        }
    }

    /// All service times zero.
    pub fn zero_service(mut self) -> Self {
        self.endorse_model = ServiceModel::Zero;
        self.order_overhead_model = ServiceModel::Zero;
        self.validate_model = ValidationModel::zero();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_n_tx(mut self, n_tx: usize) -> Self {
        self.n_tx = n_tx;
        self
    }

    /// Replaces Poisson generation with fixed times and sets `n_tx` to match.
    pub fn with_scripted_arrivals(mut self, times: Vec<f64>) -> Self {
        self.n_tx = times.len();
        self.arrivals = Arrivals::Scripted(times);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_t > 0.0 && self.lambda_t.is_finite()) {
            return Err(Error::config(
                "lambda_t",
                format!("must be a finite positive rate, got {}", self.lambda_t),
            ));
        }
        if self.block_size < 1 {
            return Err(Error::config("block_size", "must be at least 1"));
        }
        if !(self.block_timeout > 0.0 && self.block_timeout.is_finite()) {
            return Err(Error::config(
                "block_timeout",
                format!("must be a finite positive duration, got {}", self.block_timeout),
            ));
        }
        if self.n_tx < 1 {
            return Err(Error::config("n_tx", "must be at least 1"));
        }
        if self.warmup_discard >= self.n_tx {
            return Err(Error::config("warmup_discard", "must leave at least one transaction"));
        }
        let check = |field: &str, m: &ServiceModel| m.validate().map_err(|e| Error::config(field, e.to_string()));
        check("endorse", &self.endorse_model)?;
        check("order_overhead", &self.order_overhead_model)?;
        check("validate_base", &self.validate_model.base)?;
        check("validate_per_tx", &self.validate_model.per_tx)?;
        if let Arrivals::Scripted(times) = &self.arrivals {
            if times.len() != self.n_tx {
                return Err(Error::config("arrivals", "needs exactly n_tx generation times"));
            }
            if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::config(
                    "arrivals",
                    "times must be finite, non-negative and non-decreasing",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block_id: usize,
    pub tx_ids: Vec<usize>,
    pub cut_reason: CutReason,
    /// When the first transaction of the block entered the empty queue.
    pub opened_at: f64,
    pub cut_time: f64,
    pub delivered_at: f64,
    pub validation_start: f64,
    pub commit_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub tx_id: usize,
    pub t_gen: f64,
    pub endorse_latency: f64,
    pub order_latency: f64,
    pub validate_latency: f64,
    pub total_latency: f64,
    pub block_id: usize,
    pub cut_reason: CutReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyKind {
    Endorse,
    Order,
    Validate,
    Total,
}

impl LatencyKind {
    pub const ALL: [LatencyKind; 4] = [
        LatencyKind::Endorse,
        LatencyKind::Order,
        LatencyKind::Validate,
        LatencyKind::Total,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LatencyKind::Endorse => "endorse",
            LatencyKind::Order => "order",
            LatencyKind::Validate => "validate",
            LatencyKind::Total => "total",
        }
    }
}

impl fmt::Display for LatencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LatencyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LatencyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown latency type `{s}`")))
    }
}

impl LatencySample {
    pub fn latency(&self, kind: LatencyKind) -> f64 {
        match kind {
            LatencyKind::Endorse => self.endorse_latency,
            LatencyKind::Order => self.order_latency,
            LatencyKind::Validate => self.validate_latency,
            LatencyKind::Total => self.total_latency,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub samples: Vec<LatencySample>,
    pub blocks: Vec<BlockRecord>,
}

impl SimOutput {
    pub fn latencies(&self, kind: LatencyKind) -> Vec<f64> {
        self.samples.iter().map(|s| s.latency(kind)).collect()
    }
}

// Independent random streams per stage keep draws aligned across configurations.
const STREAM_ARRIVAL: u64 = 0;
const STREAM_ENDORSE: u64 = 1;
const STREAM_ORDER: u64 = 2;
const STREAM_VALIDATE: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy)]
struct TxState {
    t_gen: f64,
    endorsed_at: f64,
    block: usize,
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let n = cfg.n_tx;

    let t_gen: Vec<f64> = match &cfg.arrivals {
        Arrivals::Scripted(times) => times.clone(),
        Arrivals::Poisson => {
            let mut rng = stream(cfg.seed, STREAM_ARRIVAL);
            let gap = Distribution::exponential(cfg.lambda_t)?;
            let mut t = 0.0;
            (0..n)
                .map(|i| {
                    if i > 0 {
                        t += gap.sample_unchecked(&mut rng);
                    }
                    t
                })
                .collect()
        }
    };

    let mut endorse_rng = stream(cfg.seed, STREAM_ENDORSE);
    let mut order_rng = stream(cfg.seed, STREAM_ORDER);
    let mut validate_rng = stream(cfg.seed, STREAM_VALIDATE);

    let mut txs: Vec<TxState> = t_gen
        .iter()
        .map(|&t| TxState {
            t_gen: t,
            endorsed_at: f64::NAN,
            block: usize::MAX,
        })
        .collect();
    let mut blocks: Vec<BlockRecord> = Vec::new();
    let mut orderer = OrderingService::new(cfg.block_size, cfg.block_timeout);
    let mut validator = ValidationQueue::new();
    let mut last_delivery = f64::NEG_INFINITY;

    let mut events = EventQueue::new();
    for (i, &t) in t_gen.iter().enumerate() {
        events.schedule(t, EventKind::TxGenerated(i));
    }

    while let Some(ev) = events.pop() {
        let now = ev.time;
        match ev.kind {
            EventKind::TxGenerated(tx) => {
                let done = now + cfg.endorse_model.draw(&mut endorse_rng);
                events.schedule(done, EventKind::EndorseComplete(tx));
            }
            EventKind::EndorseComplete(tx) => {
                txs[tx].endorsed_at = now;
                match orderer.arrive(tx, now) {
                    OrderingAction::Queued => {}
                    OrderingAction::ArmTimer { at, epoch } => {
                        events.schedule(at, EventKind::OrderTimerFired { epoch });
                    }
                    OrderingAction::Cut(cut) => {
                        let b = record_cut(cut, &mut blocks, &mut txs);
                        schedule_delivery(b, &mut blocks, &mut last_delivery, cfg, &mut order_rng, &mut events);
                    }
                }
            }
            EventKind::OrderTimerFired { epoch } => {
                if let Some(cut) = orderer.timer_fired(epoch, now) {
                    let b = record_cut(cut, &mut blocks, &mut txs);
                    schedule_delivery(b, &mut blocks, &mut last_delivery, cfg, &mut order_rng, &mut events);
                }
            }
            EventKind::BlockDelivered(b) => {
                if let Some(start) = validator.arrive(b) {
                    start_validation(start, now, &mut blocks, cfg, &mut validate_rng, &mut events);
                }
            }
            EventKind::BlockValidated(b) => {
                blocks[b].commit_time = now;
                if let Some(next) = validator.complete() {
                    start_validation(next, now, &mut blocks, cfg, &mut validate_rng, &mut events);
                }
            }
        }
    }
    debug_assert!(orderer.pending().is_empty());

    let samples = txs
        .iter()
        .enumerate()
        .skip(cfg.warmup_discard)
        .map(|(tx_id, tx)| {
            let block = &blocks[tx.block];
            LatencySample {
                tx_id,
                t_gen: tx.t_gen,
                endorse_latency: tx.endorsed_at - tx.t_gen,
                order_latency: block.validation_start - tx.endorsed_at,
                validate_latency: block.commit_time - block.validation_start,
                total_latency: block.commit_time - tx.t_gen,
                block_id: block.block_id,
                cut_reason: block.cut_reason,
            }
        })
        .collect();
    Ok(SimOutput { samples, blocks })
}

fn record_cut(cut: Cut, blocks: &mut Vec<BlockRecord>, txs: &mut [TxState]) -> usize {
    let id = blocks.len();
    for &tx in &cut.tx_ids {
        txs[tx].block = id;
    }
    blocks.push(BlockRecord {
        block_id: id,
        tx_ids: cut.tx_ids,
        cut_reason: cut.reason,
        opened_at: cut.opened_at,
        cut_time: cut.cut_time,
        delivered_at: f64::NAN,
        validation_start: f64::NAN,
        commit_time: f64::NAN,
    });
    id
}

// Blocks reach the peer in cut order, after the consensus/delivery overhead.
fn schedule_delivery(
    b: usize,
    blocks: &mut [BlockRecord],
    last_delivery: &mut f64,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
    events: &mut EventQueue,
) {
    let at = (blocks[b].cut_time + cfg.order_overhead_model.draw(rng)).max(*last_delivery);
    *last_delivery = at;
    blocks[b].delivered_at = at;
    events.schedule(at, EventKind::BlockDelivered(b));
}

fn start_validation(
    b: usize,
    now: f64,
    blocks: &mut [BlockRecord],
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
    events: &mut EventQueue,
) {
    blocks[b].validation_start = now;
    let service = cfg.validate_model.draw(blocks[b].tx_ids.len(), rng);
    events.schedule(now + service, EventKind::BlockValidated(b));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lone_transaction_waits_full_timeout() {
        let cfg = SimConfig::new(5.0, 10, 1.0).zero_service().with_n_tx(1);
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.samples[0].order_latency, 1.0);
        assert_eq!(out.blocks[0].cut_reason, CutReason::Timeout);
    }

    #[test]
    fn unit_blocks_never_wait() {
        let cfg = SimConfig::new(7.0, 1, 1.0).zero_service().with_n_tx(200);
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.blocks.len(), 200);
        for s in &out.samples {
            assert_eq!(s.order_latency, 0.0);
            assert_eq!(s.total_latency, 0.0);
            assert_eq!(s.cut_reason, CutReason::Size);
        }
    }

    #[test]
    fn scripted_ten_fill_one_block() {
        let times: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let cfg = SimConfig::new(1.0, 10, 5.0)
            .zero_service()
            .with_scripted_arrivals(times);
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.blocks.len(), 1);
        let b = &out.blocks[0];
        assert_eq!(b.cut_reason, CutReason::Size);
        assert_eq!(b.cut_time, 0.9);
        assert_eq!(out.samples[0].order_latency, 0.9);
        assert_eq!(out.samples[9].order_latency, 0.0);
    }

    #[test]
    fn burst_fills_one_block_per_window() {
        let cfg = SimConfig::new(1.0, 100, 0.5)
            .zero_service()
            .with_scripted_arrivals(vec![0.0; 40]);
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.blocks.len(), 1);
        assert_eq!(out.blocks[0].cut_time, 0.5);
        assert_eq!(out.blocks[0].tx_ids.len(), 40);
    }

    #[test]
    fn simultaneous_proposals_endorse_independently() {
        let mut cfg = SimConfig::new(1.0, 2, 10.0)
            .zero_service()
            .with_scripted_arrivals(vec![1.0, 1.0]);
        cfg.endorse_model = ServiceModel::Constant(0.25);
        let out = run_simulation(&cfg).unwrap();
        for s in &out.samples {
            assert_eq!(s.endorse_latency, 0.25);
            assert_eq!(s.order_latency, 0.0);
        }
    }

    #[test]
    fn exponential_endorsement_mean() {
        let cfg = SimConfig::new(50.0, 10, 1.0).with_n_tx(20_000).with_seed(3);
        let out = run_simulation(&cfg).unwrap();
        let mean = out.latencies(LatencyKind::Endorse).iter().sum::<f64>() / 20_000.0;
        assert!((mean / (1.0 / 94.5) - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn fill_on_deadline_is_a_size_cut() {
        let cfg = SimConfig::new(1.0, 2, 1.0)
            .zero_service()
            .with_scripted_arrivals(vec![0.0, 1.0]);
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.blocks.len(), 1);
        assert_eq!(out.blocks[0].cut_reason, CutReason::Size);
    }

    #[test]
    fn validation_is_fifo_at_the_peer() {
        let mut cfg = SimConfig::new(20.0, 2, 1.0).zero_service().with_n_tx(400);
        cfg.validate_model.base = ServiceModel::Constant(0.3);
        let out = run_simulation(&cfg).unwrap();
        for w in out.blocks.windows(2) {
            assert!(w[1].validation_start >= w[0].commit_time);
            assert!(w[1].validation_start >= w[1].delivered_at);
        }
        // 10 blocks/s offered against 3.3 blocks/s of capacity: the tail waits long.
        let last = out.samples.last().unwrap();
        assert!(last.order_latency > 10.0);
    }

    #[test]
    fn warmup_drops_leading_samples() {
        let mut cfg = SimConfig::new(10.0, 10, 2.0).with_n_tx(100);
        cfg.warmup_discard = 30;
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.samples.len(), 70);
        assert_eq!(out.samples[0].tx_id, 30);
        assert_eq!(out.blocks.iter().map(|b| b.tx_ids.len()).sum::<usize>(), 100);
    }

    #[test]
    fn rejects_bad_configs() {
        let err = |cfg: SimConfig| match cfg.validate() {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(err(SimConfig::new(10.0, 0, 2.0)), "block_size");
        assert_eq!(err(SimConfig::new(0.0, 10, 2.0)), "lambda_t");
        assert_eq!(err(SimConfig::new(10.0, 10, 0.0)), "block_timeout");
        assert_eq!(err(SimConfig::new(10.0, 10, 2.0).with_n_tx(0)), "n_tx");
        assert!(run_simulation(&SimConfig::new(10.0, 0, 2.0)).is_err());
    }

    #[test]
    fn service_model_strings() {
        assert_eq!("zero".parse::<ServiceModel>().unwrap(), ServiceModel::Zero);
        assert_eq!(
            "const:0.25".parse::<ServiceModel>().unwrap(),
            ServiceModel::Constant(0.25)
        );
        let m: ServiceModel = "gamma:1.5,10".parse().unwrap();
        assert_eq!(m, ServiceModel::Random(Distribution::gamma(1.5, 10.0).unwrap()));
        assert_eq!(m.to_string().parse::<ServiceModel>().unwrap(), m);
        assert!("const:-1".parse::<ServiceModel>().is_err());
        assert!("const:1,2".parse::<ServiceModel>().is_err());
        assert!("weibull:1".parse::<ServiceModel>().is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SimConfig::new(10.0, 10, 2.0).with_seed(99);
        assert_eq!(run_simulation(&cfg).unwrap(), run_simulation(&cfg).unwrap());
        let other = run_simulation(&cfg.clone().with_seed(100)).unwrap();
        assert_ne!(run_simulation(&cfg).unwrap().samples, other.samples);
    }
}
