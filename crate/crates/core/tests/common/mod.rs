//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use hll_core::sim::{CutReason, ServiceModel, SimConfig, SimOutput, ValidationModel};
use hll_core::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
        + adapt(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over [a, b], split into `pieces`
/// panels so narrow peaks are not skipped.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == pieces { b } else { lo + h };
            let (flo, fhi) = (f(lo), f(hi));
            let (whole, m, fm) = simpson(&f, lo, flo, hi, fhi);
            adapt(&f, lo, flo, hi, fhi, whole, m, fm, tol / pieces as f64, 40)
        })
        .sum()
}

/// Interval carrying all but a negligible amount of the mass of `d`, found
/// by stepping outward until the density is tiny relative to the span.
pub fn effective_support(d: &Distribution) -> (f64, f64) {
    let (lo, hi) = d.support();
    let center = match d {
        Distribution::Exponential(p) => 1.0 / p.lambda,
        Distribution::Gamma(p) => p.alpha / p.beta,
        Distribution::Gev(p) => p.mu,
    };
    let scale = match d {
        Distribution::Exponential(p) => 1.0 / p.lambda,
        Distribution::Gamma(p) => p.alpha.sqrt() / p.beta,
        Distribution::Gev(p) => p.sigma,
    };
    let pdf = |x: f64| d.pdf(x).unwrap();
    let mut a = if lo.is_finite() { lo } else { center - scale };
    if !lo.is_finite() {
        let mut step = scale;
        while pdf(a) * step > 1e-14 {
            a -= step;
            step *= 1.5;
        }
    }
    let mut b = if hi.is_finite() { hi } else { center + scale };
    if !hi.is_finite() {
        let mut step = scale;
        while pdf(b) * (b - a) > 1e-12 {
            b += step;
            step *= 1.5;
        }
    }
    (a, b)
}

pub fn random_exponential(r: &mut ChaCha8Rng) -> Distribution {
    Distribution::exponential(r.gen_range(0.5..100.0)).unwrap()
}

pub fn random_gamma(r: &mut ChaCha8Rng) -> Distribution {
    Distribution::gamma(r.gen_range(1.5..12.0), r.gen_range(1.0..10.0)).unwrap()
}

pub fn random_gev(r: &mut ChaCha8Rng) -> Distribution {
    Distribution::gev(r.gen_range(-0.4..0.3), r.gen_range(0.05..1.0), r.gen_range(0.0..2.0)).unwrap()
}

/// max |∫ pdf − 1| over the effective support, and the largest gap between
/// the running integral and the CDF at `points` random abscissae.
pub fn normalization_and_consistency(d: &Distribution, r: &mut ChaCha8Rng, points: usize) -> (f64, f64) {
    let (a, b) = effective_support(d);
    let pdf = |x: f64| d.pdf(x).unwrap();
    let mut xs: Vec<f64> = (0..points).map(|_| r.gen_range(a..b)).collect();
    xs.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    let mut prev = a;
    let mut worst: f64 = 0.0;
    for &x in &xs {
        acc += integrate(pdf, prev, x, 1e-11);
        prev = x;
        worst = worst.max((acc - d.cdf(x).unwrap()).abs());
    }
    let total = acc + integrate(pdf, prev, b, 1e-11);
    ((total - 1.0).abs(), worst)
}

/// First violated batching invariant of a simulation output, if any.
pub fn batching_violation(cfg: &SimConfig, out: &SimOutput) -> Option<String> {
    let fail = |msg: String| Some(msg);
    let n = cfg.n_tx - cfg.warmup_discard;
    if out.samples.len() != n {
        return fail(format!("{} samples for {n} transactions", out.samples.len()));
    }
    let mut seen = vec![0u8; cfg.n_tx];
    for (i, b) in out.blocks.iter().enumerate() {
        if b.block_id != i {
            return fail(format!("block {i} has id {}", b.block_id));
        }
        if b.tx_ids.is_empty() || b.tx_ids.len() > cfg.block_size {
            return fail(format!("block {i} holds {} transactions", b.tx_ids.len()));
        }
        match b.cut_reason {
            CutReason::Size if b.tx_ids.len() != cfg.block_size => {
                return fail(format!("size cut of block {i} at {} transactions", b.tx_ids.len()));
            }
            CutReason::Timeout if b.cut_time != b.opened_at + cfg.block_timeout => {
                return fail(format!(
                    "timeout cut of block {i} at {} != {} + T_b",
                    b.cut_time, b.opened_at
                ));
            }
            _ => {}
        }
        if b.cut_time > b.opened_at + cfg.block_timeout {
            return fail(format!("block {i} open longer than T_b"));
        }
        if !(b.cut_time <= b.delivered_at
            && b.delivered_at <= b.validation_start
            && b.validation_start <= b.commit_time)
        {
            return fail(format!("block {i} timestamps out of order"));
        }
        if i > 0 {
            let prev = &out.blocks[i - 1];
            if prev.cut_time > b.opened_at
                || prev.delivered_at > b.delivered_at
                || prev.commit_time > b.validation_start
            {
                return fail(format!("block {i} overtakes block {}", i - 1));
            }
        }
        for &t in &b.tx_ids {
            seen[t] += 1;
        }
    }
    if let Some(t) = seen.iter().position(|&c| c != 1) {
        return fail(format!("transaction {t} appears in {} blocks", seen[t]));
    }
    for s in &out.samples {
        let b = &out.blocks[s.block_id];
        if !b.tx_ids.contains(&s.tx_id) || s.cut_reason != b.cut_reason {
            return fail(format!("transaction {} misattributed to block {}", s.tx_id, s.block_id));
        }
        let parts = s.endorse_latency + s.order_latency + s.validate_latency;
        if (parts - s.total_latency).abs() > 1e-9 {
            return fail(format!(
                "transaction {}: parts sum to {parts}, total {}",
                s.tx_id, s.total_latency
            ));
        }
        if s.endorse_latency < 0.0 || s.order_latency < 0.0 || s.validate_latency < 0.0 {
            return fail(format!("transaction {} has a negative latency", s.tx_id));
        }
        let endorsed = s.t_gen + s.endorse_latency;
        if endorsed < b.opened_at - 1e-9 || endorsed > b.cut_time + 1e-9 {
            return fail(format!("transaction {} endorsed outside its block window", s.tx_id));
        }
        if (s.t_gen + s.total_latency - b.commit_time).abs() > 1e-9 {
            return fail(format!("transaction {} does not commit with its block", s.tx_id));
        }
    }
    None
}

fn random_service(r: &mut ChaCha8Rng) -> ServiceModel {
    match r.gen_range(0..5) {
        0 => ServiceModel::Zero,
        1 => ServiceModel::Constant(r.gen_range(0.0..0.5)),
        2 => ServiceModel::Random(Distribution::exponential(r.gen_range(1.0..200.0)).unwrap()),
        3 => ServiceModel::Random(Distribution::gamma(r.gen_range(0.5..5.0), r.gen_range(2.0..50.0)).unwrap()),
        _ => ServiceModel::Random(
            Distribution::gev(r.gen_range(-0.3..0.4), r.gen_range(0.01..0.2), r.gen_range(0.0..0.5)).unwrap(),
        ),
    }
}

/// A random scenario with `n_tx` transactions and mixed service models.
pub fn random_sim_config(r: &mut ChaCha8Rng, n_tx: usize) -> SimConfig {
    let mut cfg = SimConfig::new(r.gen_range(0.5..60.0), r.gen_range(1..40), r.gen_range(0.05..4.0))
        .with_n_tx(n_tx)
        .with_seed(r.gen());
    cfg.endorse_model = random_service(r);
    cfg.order_overhead_model = random_service(r);
    cfg.validate_model = ValidationModel {
        base: random_service(r),
        per_tx: if r.gen_bool(0.5) {
            ServiceModel::Zero
        } else {
            ServiceModel::Constant(r.gen_range(0.0..0.01))
        },
    };
    cfg
}
