use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xebsim_core::compression::*;
use xebsim_core::oracle::{enumerate_pauli_records, enumerate_records, total_variation, DenseState};
use xebsim_core::rng::BitStream;
use xebsim_core::xeb::{random_stabilizer_group, InitialState};
use xebsim_core::{build_circuit, Circuit, CircuitSpec, Connectivity, PauliString};

fn circuit(l: usize, p: f64, seed: u64, conn: Connectivity) -> Circuit {
    build_circuit(&CircuitSpec::new(l, conn, p, seed)).unwrap()
}

fn small(l: usize, p: f64, seed: u64) -> Circuit {
    let mut spec = CircuitSpec::new(l, Connectivity::Chain1D, p, seed);
    spec.encoding_ratio = 1.0;
    spec.bulk_ratio = 1.0;
    build_circuit(&spec).unwrap()
}

#[test]
fn pbc_program_reproduces_the_record_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for seed in 0..60u64 {
        let l = [2, 4, 6][seed as usize % 3];
        let c = small(l, rng.gen_range(0.1..0.5), seed);
        if c.measurement_count() > 12 {
            continue;
        }
        let prog = to_pbc(&c).unwrap();
        let ps: Vec<PauliString> = prog.measurements.iter().map(|m| m.0.clone()).collect();
        for init in [DenseState::zero(l), DenseState::alternating_magic(l)] {
            let a = enumerate_records(&c, &init).unwrap();
            let b = enumerate_pauli_records(&ps, &init).unwrap();
            assert!(total_variation(&a, &b) < 1e-10, "seed {seed}");
        }
        checked += 1;
    }
    assert!(checked > 30);
}

#[test]
fn stabilizer_inputs_give_identical_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..80u64 {
        let l = [2, 4, 6, 8][seed as usize % 4];
        let conn = if seed % 3 == 0 { Connectivity::AllToAll } else { Connectivity::Chain1D };
        let c = circuit(l, rng.gen_range(0.05..0.5), seed, conn);
        let register = default_register(l);
        let g = random_stabilizer_group(register.len(), &mut rng);
        let (cc, cmp) = verify_stabilizer(&c, &register, &g, &mut BitStream::from_seed(seed)).unwrap();
        assert!(cmp.equal, "seed {seed}: {:?}", cmp.reason);
        assert!(cc.quantum_measurements.len() <= cc.k);
    }
}

#[test]
fn stabilizer_comparison_detects_a_corrupted_sign_map() {
    let mut found = false;
    for seed in 0..20u64 {
        let c = circuit(6, 0.3, seed, Connectivity::Chain1D);
        let register = default_register(6);
        let g = xebsim_core::GeneratorSet::all_zero(3);
        let cc = compress(&to_pbc(&c).unwrap(), &register, &mut BitStream::from_seed(0)).unwrap();
        let dec = decompose_to_gates(&cc);
        let raw = raw_distribution_stabilizer(&dec, &g).unwrap();
        let full = InitialState::Custom(embed_register_state(6, &register, &g).unwrap());
        let n_rand = xebsim_core::xeb::random_measurement_count(&c, &full).unwrap();
        let runner = xebsim_core::xeb::ShotRunner::new(&c, &full).unwrap();
        // tie two bits whose parity depends on a coin in the true map
        let sm = &cc.sign_map;
        let coin_diff = |i: usize, j: usize| (sm.num_raw..sm.width()).any(|c| sm.entry(i, c) != sm.entry(j, c));
        let m = sm.offset.len();
        let Some((i, j)) = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).find(|&(i, j)| coin_diff(i, j)) else {
            continue;
        };
        let mut bad = cc.clone();
        bad.sign_map.rows[j] = bad.sign_map.rows[i].clone();
        let cmp = compare_affine(&bad, &raw, n_rand, |m| runner.replay(m)).unwrap();
        assert!(!cmp.equal);
        found = true;
    }
    assert!(found);
}

#[test]
fn magic_inputs_match_dense_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for seed in 0..120u64 {
        let l = [2, 4, 6, 8][seed as usize % 4];
        let c = small(l, rng.gen_range(0.05..0.4), 100 + seed);
        if c.measurement_count() > 12 {
            continue;
        }
        let (_, tvd) = verify_magic(&c, &mut BitStream::from_seed(seed), 16).unwrap();
        assert!(tvd < 1e-10, "seed {seed}: {tvd}");
        checked += 1;
    }
    assert!(checked > 40);
}

#[test]
fn cases_do_not_depend_on_coins() {
    for seed in 0..40u64 {
        let c = circuit(8, 0.2, seed, Connectivity::Chain1D);
        let prog = to_pbc(&c).unwrap();
        let reg = default_register(8);
        let a = compress(&prog, &reg, &mut BitStream::from_seed(1)).unwrap();
        let b = compress(&prog, &reg, &mut BitStream::from_seed(2)).unwrap();
        assert_eq!(a.cases, b.cases);
        assert_eq!(a.quantum_measurements, b.quantum_measurements);
        assert_eq!(a.sign_map, b.sign_map);
    }
}

#[test]
fn gate_decomposition_matches_abstract_measurements() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..60 {
        let k = rng.gen_range(1..=6);
        let count = rng.gen_range(1..=k);
        let mut ps = Vec::new();
        while ps.len() < count {
            let letters: String = (0..k).map(|_| ['I', 'X', 'Y', 'Z'][rng.gen_range(0..4)]).collect();
            let p: PauliString = letters.parse().unwrap();
            if !p.is_identity_letters() {
                ps.push(p);
            }
        }
        let cc = CompressedCircuit {
            n: k,
            register: (0..k).collect(),
            k,
            quantum_measurements: ps.clone(),
            quantum_sources: (0..count).collect(),
            coin_flips: vec![],
            deterministic: vec![],
            cases: vec![Case::Quantum; count],
            sign_map: SignMap { num_raw: count, num_coins: 0, rows: vec![], offset: vec![] },
            truncation_signs: vec![1; count],
            coin_values: vec![],
        };
        let dec = decompose_to_gates(&cc);
        assert!(dec.single_qubit_gates() <= k * k);
        assert!(dec.cnot_count() <= 2 * k * k);
        let psi = DenseState::magic(k);
        let gate_level = raw_distribution_dense(&dec, &psi).unwrap();
        let abstract_level = enumerate_pauli_records(&ps, &psi).unwrap();
        assert!(total_variation(&gate_level, &abstract_level) < 1e-10);
    }
}

#[test]
fn compressed_resources_respect_the_register_bounds() {
    let mut total = 0usize;
    let n = 200;
    for seed in 0..n as u64 {
        let c = circuit(20, 0.15, seed, Connectivity::Chain1D);
        total += c.measurement_count();
        let cc = compress(&to_pbc(&c).unwrap(), &default_register(20), &mut BitStream::from_seed(seed)).unwrap();
        let rep = resource_report(&c, &cc);
        assert_eq!(rep.compressed.hardware_qubits, 10);
        assert!(rep.compressed.measurement_count <= 10);
        assert!(rep.compressed.single_qubit_gates <= 100);
        assert!(rep.compressed.two_qubit_gates <= 200);
        assert_eq!(rep.uncompressed.hardware_qubits, 20);
    }
    let mean = total as f64 / n as f64;
    assert!((mean - 180.0).abs() < 4.0, "{mean}");
}
