use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xebsim_core::oracle::{chi_from_distributions, enumerate_records, exact_chi_dense, total_variation};
use xebsim_core::rng::{mix_seed, BitStream};
use xebsim_core::xeb::*;
use xebsim_core::{build_circuit, inject_noise, Circuit, CircuitSpec, Connectivity, NoisySpec, PauliString};

fn small_pair(l: usize, p: f64, q: f64, seed: u64) -> (Circuit, Circuit) {
    let mut spec = CircuitSpec::new(l, Connectivity::Chain1D, p, seed);
    spec.encoding_ratio = 0.5;
    spec.bulk_ratio = 1.0;
    let clean = build_circuit(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 77));
    let noisy = inject_noise(&clean, &NoisySpec { q }, &mut rng).unwrap();
    (noisy, clean)
}

fn random_state(l: usize, rng: &mut ChaCha8Rng) -> InitialState {
    match rng.gen_range(0..4) {
        0 => InitialState::AllZero,
        1 => InitialState::MaximallyMixed,
        2 => InitialState::PlusAll,
        _ => InitialState::Custom(random_stabilizer_group(l, rng)),
    }
}

#[test]
fn three_exact_routes_agree_with_dense_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for seed in 0..200u64 {
        let l = [2, 4, 6][seed as usize % 3];
        let p = rng.gen_range(0.05..0.5);
        let q = if seed % 2 == 0 { 0.0 } else { rng.gen_range(0.0..0.3) };
        let (noisy, clean) = small_pair(l, p, q, seed);
        if noisy.measurement_count() > 14 {
            continue;
        }
        let rho = random_state(l, &mut rng);
        let sigma = random_state(l, &mut rng);
        let fast = exact_chi(&noisy, &clean, &rho, &sigma).unwrap();
        let purified = exact_chi_purified(&noisy, &clean, &rho, &sigma).unwrap();
        assert_eq!(fast, purified, "seed {seed}");
        let dense =
            exact_chi_dense(&noisy, &clean, &rho.dense(l).unwrap(), &sigma.dense(l).unwrap()).unwrap();
        assert!((fast.value() - dense).abs() < 1e-10, "seed {seed}: {fast:?} vs {dense}");
        checked += 1;
    }
    assert!(checked > 120);
}

#[test]
fn stabilizer_distribution_matches_dense_and_indicator_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..60u64 {
        let l = [4, 6][seed as usize % 2];
        let (noisy, clean) = small_pair(l, 0.3, 0.1, 1000 + seed);
        if noisy.measurement_count() > 14 {
            continue;
        }
        let rho = random_state(l, &mut rng);
        let sigma = random_state(l, &mut rng);
        let pr = stabilizer_record_distribution(&noisy, &rho, 20).unwrap();
        let dense = enumerate_records(&noisy, &rho.dense(l).unwrap()).unwrap();
        assert!(total_variation(&pr, &dense) < 1e-10);
        let ps = stabilizer_record_distribution(&clean, &sigma, 20).unwrap();

        // Σ_m p^ρ_m 1[p^σ_m > 0], exact in dyadic arithmetic
        let indicator_mean: f64 = pr
            .iter()
            .map(|(m, p)| if replay_indicator(&clean, &sigma, m).unwrap() == 1 { *p } else { 0.0 })
            .sum();
        let via_support: f64 = pr.iter().filter(|(m, _)| ps.contains_key(*m)).map(|(_, p)| p).sum();
        assert_eq!(indicator_mean, via_support);
        let exact = exact_chi(&noisy, &clean, &rho, &sigma).unwrap().value();
        assert_eq!(indicator_mean, exact, "seed {seed}");
        assert_eq!(chi_from_distributions(&pr, &ps), exact);

        let den: f64 = ps.values().map(|p| p * p).sum();
        let n_rand = random_measurement_count(&clean, &sigma).unwrap();
        assert_eq!(den, 2f64.powi(-(n_rand as i32)));
    }
}

#[test]
fn sampled_records_follow_the_exact_distribution() {
    let (noisy, _) = small_pair(4, 0.4, 0.1, 5);
    let rho = InitialState::MaximallyMixed;
    let exact = stabilizer_record_distribution(&noisy, &rho, 20).unwrap();
    let runner = ShotRunner::new(&noisy, &rho).unwrap();
    let shots = 100_000;
    let mut counts = std::collections::BTreeMap::new();
    let mut bits = BitStream::from_seed(3);
    for _ in 0..shots {
        *counts.entry(runner.sample(&mut bits)).or_insert(0.0) += 1.0 / shots as f64;
    }
    assert!(total_variation(&counts, &exact) < 0.01);
}

#[test]
fn identical_states_without_noise_always_replay() {
    for seed in 0..20u64 {
        let c = build_circuit(&CircuitSpec::new(8, Connectivity::Chain1D, 0.2, seed)).unwrap();
        for st in [InitialState::MaximallyMixed, InitialState::AllZero, InitialState::PlusAll] {
            assert_eq!(estimate_chi(&c, &c, &st, &st, 50, seed).unwrap(), (1.0, 0.0));
            assert_eq!(exact_chi(&c, &c, &st, &st).unwrap(), ExactChi::Pow2(0));
        }
    }
}

#[test]
fn estimator_is_centred_on_exact_value() {
    let (noisy, clean) = small_pair(6, 0.25, 0.05, 9);
    let rho = InitialState::MaximallyMixed;
    let sigma = InitialState::AllZero;
    let exact = exact_chi(&noisy, &clean, &rho, &sigma).unwrap().value();
    let mut within = 0;
    for rep in 0..200u64 {
        let (chi, eps) = estimate_chi(&noisy, &clean, &rho, &sigma, 400, mix_seed(42, rep)).unwrap();
        if (chi - exact).abs() <= 3.0 * eps + 1e-12 {
            within += 1;
        }
    }
    assert!(within >= 190, "{within}");
}

#[test]
fn erasures_never_raise_chi_above_the_matched_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..300u64 {
        let l = 2 + 2 * (seed as usize % 5);
        let (noisy, clean) = small_pair(l, rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.3), 5000 + seed);
        let rho = random_state(l, &mut rng);
        let sigma = random_state(l, &mut rng);
        let rep = check_inequality(&noisy, &clean, &rho, &sigma).unwrap();
        assert!(rep.holds, "seed {seed}: {rep:?}");
    }
}

#[test]
fn dephased_initial_state_is_no_closer() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for seed in 0..200u64 {
        let l = 4;
        let (noisy, clean) = small_pair(l, 0.3, 0.1, 7000 + seed);
        let g2 = random_stabilizer_group(l, &mut rng);
        let ch: Vec<PauliString> =
            (0..rng.gen_range(1..3)).map(|_| PauliString::single(l, rng.gen_range(0..l), xebsim_core::Letter::X)).collect();
        let mut g1 = g2.clone();
        for p in &ch {
            g1.dephase(p).unwrap();
        }
        let sigma = random_state(l, &mut rng);
        let rep = check_inequality_dephased(
            &noisy,
            &clean,
            &InitialState::Custom(g1),
            &InitialState::Custom(g2.clone()),
            &ch,
            &sigma,
        )
        .unwrap();
        assert!(rep.holds, "seed {seed}: {rep:?}");
        if !g2.is_empty() {
            let wrong = check_inequality_dephased(
                &noisy,
                &clean,
                &InitialState::MaximallyMixed,
                &InitialState::Custom(g2),
                &[],
                &sigma,
            );
            assert!(wrong.is_err());
        }
    }
}
