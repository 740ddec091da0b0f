mod common;

use hll_core::dist::special;
use hll_core::ks::{ks_critical, ks_statistic};
use hll_core::{Distribution, Family};
use proptest::prelude::*;

#[test]
fn densities_integrate_to_one_and_match_cdf() {
    let mut r = common::rng(9);
    for i in 0..50 {
        for d in [
            common::random_exponential(&mut r),
            common::random_gamma(&mut r),
            common::random_gev(&mut r),
        ] {
            let (norm, consistency) = common::normalization_and_consistency(&d, &mut r, 100);
            assert!(norm < 1e-6, "set {i}: {d} integrates to 1 ± {norm}");
            assert!(consistency < 1e-6, "set {i}: {d} cdf gap {consistency}");
        }
    }
}

#[test]
fn pdf_point_values() {
    assert_eq!(Distribution::exponential(1.0).unwrap().pdf(0.0).unwrap(), 1.0);
    let g = Distribution::gamma(1.0, 2.0).unwrap();
    assert!((g.pdf(0.5).unwrap() - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
    let g = Distribution::gamma(1.0, 3.0).unwrap();
    assert!((g.cdf(1.0).unwrap() - (1.0 - (-3.0f64).exp())).abs() < 1e-12);
    let g = Distribution::gamma(2.652, 3.458).unwrap();
    assert_eq!(g.cdf(1e6).unwrap(), 1.0);
    assert_eq!(g.cdf(f64::INFINITY).unwrap(), 1.0);
    for xi in [-0.3, 0.0, 0.2105, 0.8] {
        let d = Distribution::gev(xi, 0.1441, 0.4797).unwrap();
        assert!((d.cdf(0.4797).unwrap() - (-1.0f64).exp()).abs() < 1e-12, "xi={xi}");
    }
}

#[test]
fn gamma_with_unit_shape_is_exponential() {
    for beta in [0.3, 1.0, 5.5858, 94.5] {
        let g = Distribution::gamma(1.0, beta).unwrap();
        let e = Distribution::exponential(beta).unwrap();
        for i in 0..200 {
            let x = i as f64 * 0.05 / beta;
            assert!((g.pdf(x).unwrap() - e.pdf(x).unwrap()).abs() < 1e-12 * e.pdf(0.0).unwrap().max(1.0));
            assert!((g.cdf(x).unwrap() - e.cdf(x).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn gev_shape_near_zero_matches_gumbel() {
    let gumbel = Distribution::gev(0.0, 0.1441, 0.4797).unwrap();
    for xi in [1e-8, -1e-8] {
        let near = Distribution::gev(xi, 0.1441, 0.4797).unwrap();
        for i in 0..400 {
            let x = -0.5 + i as f64 * 0.01;
            assert!((near.pdf(x).unwrap() - gumbel.pdf(x).unwrap()).abs() < 1e-5);
            assert!((near.cdf(x).unwrap() - gumbel.cdf(x).unwrap()).abs() < 1e-5);
        }
    }
}

#[test]
fn outside_support_is_zero_density() {
    let d = Distribution::gev(0.5, 1.0, 0.0).unwrap();
    assert_eq!(d.support().0, -2.0);
    assert_eq!(d.pdf(-3.0).unwrap(), 0.0);
    assert_eq!(d.cdf(-3.0).unwrap(), 0.0);
    let d = Distribution::gev(-0.5, 1.0, 0.0).unwrap();
    assert_eq!(d.pdf(3.0).unwrap(), 0.0);
    assert_eq!(d.cdf(3.0).unwrap(), 1.0);
    let g = Distribution::gamma(2.0, 1.0).unwrap();
    assert_eq!(g.pdf(-1.0).unwrap(), 0.0);
    assert_eq!(g.cdf(-1.0).unwrap(), 0.0);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(Distribution::exponential(0.0).is_err());
    assert!(Distribution::gamma(-1.0, 2.0).is_err());
    assert!(Distribution::gamma(1.0, f64::NAN).is_err());
    assert!(Distribution::gev(0.1, 0.0, 0.0).is_err());
    assert!(Distribution::from_params(Family::Gamma, &[1.0]).is_err());
    assert!("gamma:1".parse::<Distribution>().is_err());
    assert!("beta:1,2".parse::<Distribution>().is_err());
}

#[test]
fn incomplete_gamma_examples() {
    assert_eq!(special::lower_incomplete_gamma(3.0, 0.0).unwrap(), 0.0);
    let quad = common::integrate(|t| t * (-t).exp(), 0.0, 1.0, 1e-14);
    assert!((special::lower_incomplete_gamma(2.0, 1.0).unwrap() - quad).abs() < 1e-12);
    assert!((quad - 0.2642).abs() < 1e-4);
    for x in [0.01, 0.5, 3.0, 40.0] {
        let got = special::lower_incomplete_gamma(1.0, x).unwrap();
        assert!((got - (1.0 - (-x).exp())).abs() < 1e-14);
    }
}

#[test]
fn log_gamma_and_digamma_examples() {
    assert!(special::log_gamma(1.0).unwrap().abs() < 1e-14);
    assert!((special::log_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-13);
    let h = 1e-6;
    let fd = (special::log_gamma(1.0 + h).unwrap() - special::log_gamma(1.0 - h).unwrap()) / (2.0 * h);
    assert!((special::digamma(1.0).unwrap() - fd).abs() < 1e-8);
    assert!((special::digamma(1.0).unwrap() + 0.577_215_7).abs() < 1e-7);
    for a in [0.2, 1.7, 12.0] {
        let lhs = special::digamma(a + 1.0).unwrap() - special::digamma(a).unwrap();
        assert!((lhs - 1.0 / a).abs() < 1e-12 / a.min(1.0));
    }
}

#[test]
fn samplers_pass_their_own_ks_test() {
    let crit = ks_critical(100_000, 0.01).unwrap();
    let mut r = common::rng(2024);
    for d in [
        Distribution::exponential(94.5).unwrap(),
        Distribution::gamma(7.362, 5.445).unwrap(),
        Distribution::gamma(0.6, 2.0).unwrap(),
        Distribution::gev(0.2105, 0.1441, 0.4797).unwrap(),
        Distribution::gev(-0.2, 1.0, 0.0).unwrap(),
        Distribution::gev(0.0, 1.0, 0.0).unwrap(),
    ] {
        let xs = d.sample_n(&mut r, 100_000).unwrap();
        let stat = ks_statistic(&xs, &d).unwrap();
        assert!(stat < crit, "{d}: D={stat} >= {crit}");
    }
}

#[test]
fn sampler_moment_examples() {
    let mut r = common::rng(77);
    let mean = |d: Distribution, r: &mut _| d.sample_n(r, 1_000_000).unwrap().iter().sum::<f64>() / 1e6;
    let m = mean(Distribution::exponential(94.5).unwrap(), &mut r);
    assert!((m * 94.5 - 1.0).abs() < 0.01);
    let m = mean(Distribution::gamma(2.652, 3.458).unwrap(), &mut r);
    assert!((m / 0.7669 - 1.0).abs() < 0.01);
    let mut xs = Distribution::gev(0.0, 1.0, 0.0)
        .unwrap()
        .sample_n(&mut r, 1_000_000)
        .unwrap();
    xs.sort_by(f64::total_cmp);
    let median = xs[500_000];
    assert!((median / -(2f64.ln().ln()) - 1.0).abs() < 0.02);
}

fn any_distribution() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (0.01f64..200.0).prop_map(|l| Distribution::exponential(l).unwrap()),
        (0.2f64..50.0, 0.01f64..100.0).prop_map(|(a, b)| Distribution::gamma(a, b).unwrap()),
        (-0.9f64..0.9, 0.01f64..5.0, -3.0f64..3.0).prop_map(|(x, s, m)| Distribution::gev(x, s, m).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn cdf_is_monotone_and_pdf_non_negative(d in any_distribution(), a in -5.0f64..20.0, gap in 0.0f64..5.0) {
        let b = a + gap;
        let (fa, fb) = (d.cdf(a).unwrap(), d.cdf(b).unwrap());
        prop_assert!((0.0..=1.0).contains(&fa) && (0.0..=1.0).contains(&fb));
        prop_assert!(fa <= fb);
        prop_assert!(d.pdf(a).unwrap() >= 0.0);
    }

    #[test]
    fn display_parse_round_trip(d in any_distribution()) {
        let back: Distribution = d.to_string().parse().unwrap();
        prop_assert_eq!(back, d);
    }
}
