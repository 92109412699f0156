use proptest::prelude::*;
use qkd2way::photonics::{
    bs12_success, bs_eve_info, crossover_distance, crossover_distance_for, optimize_mu, pns_margin,
    pns_probability, poisson_pmf, raw_gain, LinkBudget, Objective, MU_BRACKET,
};
use qkd2way::protocol::Protocol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn probabilities_in_unit_interval(mu in 1e-5..2.0f64, l in 0.0..200.0f64) {
        let b = LinkBudget::default().with_mu(mu).at(l);
        for p in [Protocol::Bb84, Protocol::Lm05] {
            for v in [raw_gain(p, &b), bs_eve_info(p, mu), pns_probability(p, mu)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((-1.0..=1.0).contains(&pns_margin(p, &b)));
        }
        prop_assert!(pns_probability(Protocol::Lm05, mu) < pns_probability(Protocol::Bb84, mu));
    }

    #[test]
    fn beam_splitter_pair_never_beats_p_star(r1 in 0.0..=1.0f64, r2 in 0.0..=1.0f64, mu in 1e-3..2.0f64) {
        prop_assert!(bs12_success(r1, r2, mu) <= bs_eve_info(Protocol::Lm05, mu) + 1e-15);
    }
}

#[test]
fn p_star_bound_on_grid() {
    for mu in [0.05, 0.1, 0.5, 1.0] {
        let bound = bs_eve_info(Protocol::Lm05, mu);
        for i in 0..100 {
            for j in 0..100 {
                let (r1, r2) = (f64::from(i) / 99.0, f64::from(j) / 99.0);
                assert!(bs12_success(r1, r2, mu) <= bound + 1e-15);
            }
        }
    }
}

#[test]
fn pmf_anchor_values() {
    assert!((poisson_pmf(0, 0.1) - (-0.1f64).exp()).abs() < 1e-15);
    assert!((poisson_pmf(2, 0.1) - 0.00452419).abs() < 1e-8);
    let total: f64 = (0..=50).map(|n| poisson_pmf(n, 1.0)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((pns_probability(Protocol::Bb84, 0.1) - 0.00467884).abs() < 1e-8);
}

/// Poisson source, first beam splitter 1/2 on the way out, everything on the way back.
#[test]
fn lm05_beam_splitting_matches_photon_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mu: f64 = 0.1;
    let n = 2_000_000u32;
    let mut hits = 0u32;
    for _ in 0..n {
        let u: f64 = rng.gen();
        let (mut photons, mut p, mut cdf) = (0u32, (-mu).exp(), (-mu).exp());
        while u > cdf {
            photons += 1;
            p *= mu / f64::from(photons);
            cdf += p;
        }
        let tapped = (0..photons).filter(|_| rng.gen::<bool>()).count() as u32;
        if tapped >= 1 && photons - tapped >= 1 {
            hits += 1;
        }
    }
    let p = bs_eve_info(Protocol::Lm05, mu);
    let rate = f64::from(hits) / f64::from(n);
    let sigma = (p * (1.0 - p) / f64::from(n)).sqrt();
    assert!((rate - p).abs() < 5.0 * sigma, "{rate} vs {p}");
}

#[test]
fn golden_section_agrees_with_grid_scan() {
    let budget = LinkBudget::default();
    for l in [0.0, 10.0, 50.0] {
        let g = optimize_mu(Objective::SecureGain, Protocol::Bb84, &budget, l);
        let b = budget.at(l);
        let grid = (0..10_000)
            .map(|i| MU_BRACKET.0 + (MU_BRACKET.1 - MU_BRACKET.0) * f64::from(i) / 9_999.0)
            .map(|mu| Objective::SecureGain.eval(Protocol::Bb84, &b.with_mu(mu)))
            .fold(f64::MIN, f64::max);
        assert!(
            g.value >= grid - 1e-12 && g.value - grid < 1e-6,
            "L = {l}: {} vs {grid}",
            g.value
        );
        assert!((MU_BRACKET.0..=MU_BRACKET.1).contains(&g.mu_star));
    }
}

#[test]
fn optimised_gains_decrease_with_distance_and_favour_bb84() {
    let budget = LinkBudget::default();
    let mut prev = [f64::INFINITY; 2];
    for i in 0..=50 {
        let l = f64::from(i);
        let b = optimize_mu(Objective::SecureGain, Protocol::Bb84, &budget, l).value;
        let m = optimize_mu(Objective::SecureGain, Protocol::Lm05, &budget, l).value;
        assert!(b < prev[0] && m < prev[1], "not decreasing at {l} km");
        assert!(b >= m, "LM05 above BB84 at {l} km");
        prev = [b, m];
    }
}

#[test]
fn bb84_pns_optimum_near_small_mu_asymptote() {
    let budget = LinkBudget::default();
    let g = optimize_mu(Objective::PnsMargin, Protocol::Bb84, &budget, 0.0);
    let t = budget.eta_d * budget.gamma_b;
    assert!(
        (g.mu_star - t).abs() <= 0.2 * t,
        "mu* = {} vs {t}",
        g.mu_star
    );
}

#[test]
fn lm05_pns_margin_negative_far_away() {
    let g = optimize_mu(
        Objective::PnsMargin,
        Protocol::Lm05,
        &LinkBudget::default(),
        300.0,
    );
    assert!(g.value < 0.0);
}

#[test]
fn crossover_responds_to_link_budget() {
    let base = crossover_distance().unwrap();
    let lossless_alice = LinkBudget {
        gamma_a: 1.0,
        ..LinkBudget::default()
    };
    assert!(crossover_distance_for(&lossless_alice).unwrap() > base);
    let no_loss = LinkBudget {
        atten: 0.0,
        ..LinkBudget::default()
    };
    assert!(crossover_distance_for(&no_loss).is_err());
}
