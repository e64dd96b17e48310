use std::collections::HashMap;

use rand::SeedableRng;

use xebsim_core::clifford::{sample_two_qubit_clifford, two_qubit_clifford_table, TWO_QUBIT_CLIFFORD_COUNT};
use xebsim_core::rng::StreamRng;
use xebsim_core::{build_circuit, inject_noise, Circuit, CircuitSpec, Connectivity, NoisySpec};

#[test]
fn golden_circuit_is_stable() {
    let c = build_circuit(&CircuitSpec::new(4, Connectivity::Chain1D, 0.25, 7)).unwrap();
    let golden = include_str!("data/golden_chain_l4_p025_seed7.txt");
    assert_eq!(c.to_text(), golden);
    assert_eq!(Circuit::from_text(golden).unwrap(), c);
}

#[test]
fn two_qubit_cliffords_are_uniform() {
    let index: HashMap<String, usize> =
        two_qubit_clifford_table().iter().enumerate().map(|(i, c)| (c.literal(), i)).collect();
    assert_eq!(index.len(), TWO_QUBIT_CLIFFORD_COUNT);
    let per_class = 20;
    let draws = per_class * TWO_QUBIT_CLIFFORD_COUNT;
    let mut counts = vec![0u32; TWO_QUBIT_CLIFFORD_COUNT];
    let mut rng = StreamRng::seed_from_u64(99);
    for _ in 0..draws {
        counts[index[&sample_two_qubit_clifford(&mut rng).literal()]] += 1;
    }
    let e = per_class as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dof = (TWO_QUBIT_CLIFFORD_COUNT - 1) as f64;
    // χ² with 11519 degrees of freedom has sd ≈ 152
    assert!((chi2 - dof).abs() < 5.0 * (2.0 * dof).sqrt(), "{chi2}");
}

#[test]
fn measurement_and_erasure_rates() {
    let (l, p, q) = (16, 0.2, 0.01);
    let n = 200;
    let mut meas = 0usize;
    let mut eras = 0usize;
    for seed in 0..n {
        let c = build_circuit(&CircuitSpec::new(l, Connectivity::AllToAll, p, seed)).unwrap();
        meas += c.measurement_count();
        let mut rng = StreamRng::seed_from_u64(seed);
        let noisy = inject_noise(&c, &NoisySpec { q }, &mut rng).unwrap();
        assert!(noisy.same_skeleton(&c));
        eras += noisy.erasure_count();
    }
    let bulk_sites = (3 * l * l) as f64;
    let mean_meas = meas as f64 / n as f64;
    let sd = (bulk_sites * p * (1.0 - p) / n as f64).sqrt();
    assert!((mean_meas - bulk_sites * p).abs() < 5.0 * sd, "{mean_meas}");
    let sites = (6 * l * l) as f64;
    let mean_eras = eras as f64 / n as f64;
    let sd = (sites * q * (1.0 - q) / n as f64).sqrt();
    assert!((mean_eras - sites * q).abs() < 5.0 * sd, "{mean_eras}");
}
