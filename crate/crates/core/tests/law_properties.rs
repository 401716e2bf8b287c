//! Transition laws, the mean function and the critical levels: closed forms
//! against exact simulation, plus randomized identities.

use meanrev::model::{critical_levels, mean_m, sample_transition, transition_law, truncated_affine_expectation, MarketSpec, ModelSpec, Side};
use meanrev::sim::path_rng;
use proptest::prelude::*;

const DRAWS: usize = 1_000_000;

fn reference_ou() -> ModelSpec {
    ModelSpec::ou(16.0, 0.54, 0.16).unwrap()
}

/// Sample mean, variance, skewness and excess kurtosis.
fn moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

fn draws(model: &ModelSpec, s: f64, x: f64, seed: u64) -> Vec<f64> {
    let law = transition_law(model, s, x).unwrap();
    let mut rng = path_rng(seed, 0);
    (0..DRAWS).map(|_| sample_transition(&law, &mut rng)).collect()
}

#[test]
fn ou_mean_matches_exact_draws() {
    let m = reference_ou();
    let xs = draws(&m, 0.1, 0.50, 1);
    let (mean, var, _, _) = moments(&xs);
    let se = (var / DRAWS as f64).sqrt();
    let want = mean_m(&m, 0.1, 0.50).unwrap();
    assert!((mean - want).abs() <= 3.0 * se, "mean {mean} vs {want} (se {se})");
}

#[test]
fn ou_draws_are_gaussian() {
    let m = reference_ou();
    let law = transition_law(&m, 0.1, 0.50).unwrap();
    let xs = draws(&m, 0.1, 0.50, 2);
    let (_, var, skew, kurt) = moments(&xs);
    let n = DRAWS as f64;
    assert!(skew.abs() <= 3.0 * (6.0 / n).sqrt(), "skewness {skew}");
    assert!(kurt.abs() <= 3.0 * (24.0 / n).sqrt(), "excess kurtosis {kurt}");
    // variance of the sample variance is about 2σ⁴/n for a normal law
    let want = law.variance();
    assert!((var - want).abs() <= 3.0 * want * (2.0 / n).sqrt(), "variance {var} vs {want}");
}

#[test]
fn cir_draws_are_positive_with_matching_moments() {
    // 2μθ = 2 > σ² = 0.09: the Feller condition holds
    let m = ModelSpec::cir(2.0, 0.5, 0.3).unwrap();
    let law = transition_law(&m, 0.25, 0.3).unwrap();
    let xs = draws(&m, 0.25, 0.3, 3);
    assert!(xs.iter().all(|&x| x > 0.0));
    let (mean, var, skew, kurt) = moments(&xs);
    let n = DRAWS as f64;
    assert!((mean - law.mean).abs() <= 3.0 * (var / n).sqrt(), "mean {mean} vs {}", law.mean);
    // sample-variance standard error from the fourth moment
    let se_var = var * ((kurt + 2.0) / n).sqrt();
    assert!((var - law.variance()).abs() <= 3.0 * se_var, "variance {var} vs {}", law.variance());
    assert!(skew > 0.0);
}

#[test]
fn short_horizon_draws_concentrate_at_the_start() {
    let m = reference_ou();
    let law = transition_law(&m, 1e-12, 0.5).unwrap();
    let mut rng = path_rng(4, 0);
    for _ in 0..1000 {
        assert!((sample_transition(&law, &mut rng) - 0.5).abs() < 1e-5);
    }
}

fn model_strategy() -> impl Strategy<Value = (ModelSpec, f64)> {
    prop_oneof![
        (0.5..30.0_f64, -1.0..2.0_f64, 0.05..1.0_f64, -3.0..3.0_f64)
            .prop_map(|(mu, theta, sigma, x)| (ModelSpec::ou(mu, theta, sigma).unwrap(), x)),
        (0.5..30.0_f64, 0.2..2.0_f64, 0.05..0.5_f64, 0.01..4.0_f64)
            .prop_map(|(mu, theta, sigma, x)| (ModelSpec::cir(mu, theta, sigma).unwrap(), x)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_reverts_to_theta((m, x) in model_strategy()) {
        let v = mean_m(&m, 100.0 / m.mu, x).unwrap();
        prop_assert!((v - m.theta).abs() <= 1e-10, "m = {v}, theta = {}", m.theta);
    }

    #[test]
    fn truncated_expectations_split_additively(
        (m, x) in model_strategy(),
        s in 0.01..2.0_f64,
        a0 in -5.0..5.0_f64,
        a1 in -20.0..20.0_f64,
        k in -4.0..4.0_f64,
    ) {
        let law = transition_law(&m, s, x).unwrap();
        let z = (law.mean + k * law.variance().sqrt()).max(m.state_space.lower);
        let above = truncated_affine_expectation(&law, a0, a1, z, Side::Above);
        let below = truncated_affine_expectation(&law, a0, a1, z, Side::Below);
        let full = a0 + a1 * law.mean;
        prop_assert!((above + below - full).abs() <= 1e-10 * (1.0 + full.abs()), "{above} + {below} != {full}");
    }

    #[test]
    fn critical_levels_ignore_sigma(
        mu in 0.5..30.0_f64,
        theta in -1.0..2.0_f64,
        s1 in 0.01..2.0_f64,
        s2 in 0.01..2.0_f64,
        r in 0.0..0.2_f64,
        c in 0.0..0.1_f64,
    ) {
        let mk = MarketSpec::new(r, c, 1.0, 1.0).unwrap();
        let a = critical_levels(&ModelSpec::ou(mu, theta, s1).unwrap(), &mk);
        let b = critical_levels(&ModelSpec::ou(mu, theta, s2).unwrap(), &mk);
        prop_assert_eq!(a, b);
        prop_assert!(a.lower <= a.upper);
    }
}
