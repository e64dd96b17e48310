//! Randomised cross-checks between the stabilizer engines, the dense oracle
//! and the cross-entropy routes. Each function runs one seeded instance and
//! reports the first disagreement.

use rand::{Rng, SeedableRng};

use crate::circuit::{build_circuit, inject_noise, Circuit, CircuitSpec, Connectivity, NoisySpec};
use crate::compression::{
    compare_affine, compress, decompose_to_gates, default_register, embed_register_state, raw_distribution_stabilizer,
    resource_report, to_pbc, verify_magic, CompressedCircuit, ResourceReport,
};
use crate::clifford::{sample_two_qubit_clifford, CliffordGate, LocalClifford};
use crate::error::Result;
use crate::oracle::{exact_chi_dense, DenseState, TOL};
use crate::pauli::{Letter, PauliString};
use crate::rng::{mix_seed, BitStream, StreamRng};
use crate::stabilizer::{Forced, MixedStabilizerState};
use crate::tableau::Tableau;
use crate::xeb::{
    check_inequality, exact_chi, exact_chi_purified, random_measurement_count, random_stabilizer_group,
    InequalityReport, InitialState, ShotRunner,
};

fn random_pauli(n: usize, rng: &mut StreamRng) -> PauliString {
    loop {
        let letters: Vec<Letter> = (0..n).map(|_| Letter::from_bits(rng.gen(), rng.gen())).collect();
        let p = PauliString::from_letters(&letters);
        if !p.is_identity_letters() {
            return p.with_sign_bit(rng.gen());
        }
    }
}

fn random_gate(n: usize, rng: &mut StreamRng) -> CliffordGate {
    if n == 1 || rng.gen_bool(0.25) {
        let q = rng.gen_range(0..n);
        let u = match rng.gen_range(0..4) {
            0 => LocalClifford::hadamard(),
            1 => LocalClifford::phase_s(),
            2 => LocalClifford::phase_s_dag(),
            _ => LocalClifford::pauli(Letter::Y),
        };
        return CliffordGate::single(q, u);
    }
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    CliffordGate::two(a, b, sample_two_qubit_clifford(rng))
}

/// Drive the generator-list engine, the tableau and the dense oracle through
/// the same random sequence of gates, Pauli measurements (branch chosen at
/// random among possible outcomes), dephasings and erasures on `n ≤ 6`
/// qubits, comparing branch probabilities and states after every step.
pub fn engines_agree(seed: u64, n: usize, steps: usize) -> Result<std::result::Result<(), String>> {
    let mut rng = StreamRng::seed_from_u64(seed);
    let group = random_stabilizer_group(n, &mut rng);
    let mut gl = MixedStabilizerState::new(group.clone());
    let mut tab = Tableau::from_group(&group);
    let mut dense = DenseState::from_group(&group).into_mixed();
    for step in 0..steps {
        match rng.gen_range(0..10) {
            0..=4 => {
                let g = random_gate(n, &mut rng);
                gl.apply_gate(&g)?;
                tab.apply_gate(&g)?;
                dense.apply_gate(&g)?;
            }
            5..=7 => {
                let p = random_pauli(n, &mut rng);
                let peek = gl.peek(&p)?;
                let p0 = {
                    let mut d = dense.clone();
                    d.project(&p, 0)
                };
                let expected = match peek {
                    Some(0) => 1.0,
                    Some(_) => 0.0,
                    None => 0.5,
                };
                if (p0 - expected).abs() > TOL {
                    return Ok(Err(format!("step {step}: P(0) = {p0}, engine expects {expected}")));
                }
                let bit = peek.unwrap_or_else(|| rng.gen_range(0..2));
                match gl.measure_forced(&p, bit)? {
                    Forced::Accepted { deterministic } if deterministic == peek.is_some() => {}
                    other => return Ok(Err(format!("step {step}: generator engine returned {other:?}"))),
                }
                match tab.measure_forced(&p, bit)? {
                    Forced::Accepted { deterministic } if deterministic == peek.is_some() => {}
                    other => return Ok(Err(format!("step {step}: tableau returned {other:?}"))),
                }
                if tab.measure_forced(&p, bit ^ 1)? != Forced::Contradiction {
                    return Ok(Err(format!("step {step}: repeated measurement not deterministic")));
                }
                dense.project(&p, bit);
                dense.normalize();
            }
            8 => {
                let p = random_pauli(n, &mut rng);
                gl.dephase(&p)?;
                tab.dephase(&p)?;
                dense.dephase(&p);
            }
            _ => {
                let q = rng.gen_range(0..n);
                gl.erase(q)?;
                tab.erase(q);
                dense.erase(q);
            }
        }
        if let Err(e) = tab.check_invariants() {
            return Ok(Err(format!("step {step}: tableau invariant: {e}")));
        }
        let g = gl.group();
        if !tab.group().same_group(g) {
            return Ok(Err(format!("step {step}: tableau group differs\n{}\n{}", tab.group().dump(), g.dump())));
        }
        let dist = dense.distance(&DenseState::from_group(g));
        if dist > TOL {
            return Ok(Err(format!("step {step}: dense state differs by {dist}")));
        }
    }
    Ok(Ok(()))
}

/// A random small noisy/clean circuit pair and two random stabilizer states.
pub struct ChiInstance {
    pub noisy: Circuit,
    pub clean: Circuit,
    pub rho: InitialState,
    pub sigma: InitialState,
}

pub fn random_state(l: usize, rng: &mut StreamRng) -> InitialState {
    match rng.gen_range(0..4) {
        0 => InitialState::AllZero,
        1 => InitialState::MaximallyMixed,
        2 => InitialState::PlusAll,
        _ => InitialState::Custom(random_stabilizer_group(l, rng)),
    }
}

/// Circuits from the standard family with shortened stages so that small
/// instances stay within dense-enumeration budgets.
pub fn random_instance(seed: u64, l_choices: &[usize], stage_ratio: f64) -> Result<ChiInstance> {
    random_instance_with_rate(seed, l_choices, stage_ratio, None)
}

/// As [`random_instance`], with the erasure rate fixed when `q` is given.
pub fn random_instance_with_rate(seed: u64, l_choices: &[usize], stage_ratio: f64, q: Option<f64>) -> Result<ChiInstance> {
    let mut rng = StreamRng::seed_from_u64(seed);
    let l = l_choices[rng.gen_range(0..l_choices.len())];
    let conn = if rng.gen_bool(0.5) { Connectivity::Chain1D } else { Connectivity::AllToAll };
    let mut spec = CircuitSpec::new(l, conn, rng.gen_range(0.0..0.5), mix_seed(seed, 1));
    spec.encoding_ratio = stage_ratio;
    spec.bulk_ratio = stage_ratio;
    let clean = build_circuit(&spec)?;
    let drawn = if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..0.3) };
    let q = q.unwrap_or(drawn);
    let mut noise_rng = StreamRng::seed_from_u64(mix_seed(seed, 2));
    let noisy = inject_noise(&clean, &NoisySpec { q }, &mut noise_rng)?;
    let rho = random_state(l, &mut rng);
    let mut sigma = random_state(l, &mut rng);
    let mut guard = 0;
    while sigma == rho && guard < 8 {
        sigma = random_state(l, &mut rng);
        guard += 1;
    }
    Ok(ChiInstance { noisy, clean, rho, sigma })
}

/// Exact cross entropy by the doubled-copy tableau, the purified register
/// and dense enumeration; `None` when the dense route is over budget.
pub fn chi_routes(inst: &ChiInstance) -> Result<(f64, f64, Option<f64>)> {
    let l = inst.clean.l;
    let fast = exact_chi(&inst.noisy, &inst.clean, &inst.rho, &inst.sigma)?;
    let purified = exact_chi_purified(&inst.noisy, &inst.clean, &inst.rho, &inst.sigma)?;
    let dense = match exact_chi_dense(&inst.noisy, &inst.clean, &inst.rho.dense(l)?, &inst.sigma.dense(l)?) {
        Ok(v) => Some(v),
        Err(crate::error::Error::BudgetExceeded(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((fast.value(), purified.value(), dense))
}

/// One inequality audit instance with both sides computed exactly.
pub fn inequality_instance(seed: u64, l_choices: &[usize], q: Option<f64>) -> Result<InequalityReport> {
    let inst = random_instance_with_rate(seed, l_choices, 3.0, q)?;
    check_inequality(&inst.noisy, &inst.clean, &inst.rho, &inst.sigma)
}

/// Outcome of one compression audit instance.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressionCheck {
    pub l: usize,
    /// Exact equality of the record distributions for a stabilizer register input.
    pub stabilizer_equal: bool,
    pub reason: Option<String>,
    /// Whether a sign-map corruption was applied (negative controls only).
    pub corrupted: bool,
    pub resources: ResourceReport,
    /// Compressed row within `k = L/2`, `≤ k` measurements, `≤ k²` single-qubit and `≤ 2k²` CNOT gates.
    pub within_bounds: bool,
    /// TVD against dense enumeration for the magic-register input, on a shorter
    /// circuit from the same family.
    pub magic_tvd: f64,
    pub magic_measurements: usize,
}

pub fn within_compressed_bounds(l: usize, r: &ResourceReport) -> bool {
    let k = l / 2;
    let c = &r.compressed;
    c.hardware_qubits == k && c.measurement_count <= k && c.single_qubit_gates <= k * k && c.two_qubit_gates <= 2 * k * k
}

/// Tie record bit `j` to bit `i` for the first pair whose coin dependence
/// differs; this always changes the output distribution.
pub fn corrupt_sign_map(cc: &mut CompressedCircuit) -> bool {
    let sm = &cc.sign_map;
    let coin_diff = |i: usize, j: usize| (sm.num_raw..sm.width()).any(|c| sm.entry(i, c) != sm.entry(j, c));
    let m = sm.offset.len();
    let pair = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).find(|&(i, j)| coin_diff(i, j));
    match pair {
        Some((i, j)) => {
            cc.sign_map.rows[j] = cc.sign_map.rows[i].clone();
            true
        }
        None => false,
    }
}

/// Compress a random circuit with `L` drawn from `l_choices` and compare
/// exact record distributions against the uncompressed circuit, for a random
/// stabilizer register state and for the magic register state.
pub fn compression_instance(seed: u64, l_choices: &[usize], corrupt: bool) -> Result<CompressionCheck> {
    let mut rng = StreamRng::seed_from_u64(seed);
    let l = l_choices[rng.gen_range(0..l_choices.len())];
    let conn = if rng.gen_bool(0.5) { Connectivity::Chain1D } else { Connectivity::AllToAll };
    let c = build_circuit(&CircuitSpec::new(l, conn, rng.gen_range(0.05..0.5), mix_seed(seed, 1)))?;
    let register = default_register(l);
    let group_a = random_stabilizer_group(register.len(), &mut rng);

    let mut cc = compress(&to_pbc(&c)?, &register, &mut BitStream::from_seed(mix_seed(seed, 2)))?;
    let resources = resource_report(&c, &cc);
    let corrupted = corrupt && corrupt_sign_map(&mut cc);
    let dec = decompose_to_gates(&cc);
    let raw = raw_distribution_stabilizer(&dec, &group_a)?;
    let full = InitialState::Custom(embed_register_state(l, &register, &group_a)?);
    let n_rand = random_measurement_count(&c, &full)?;
    let runner = ShotRunner::new(&c, &full)?;
    let cmp = compare_affine(&cc, &raw, n_rand, |m| runner.replay(m))?;

    // the magic input is enumerated densely, so keep the circuit short
    let mut sub = 0;
    let short = loop {
        sub += 1;
        let mut spec = CircuitSpec::new(l, conn, rng.gen_range(0.05..0.4), mix_seed(seed, 2 + sub));
        spec.encoding_ratio = 1.0;
        spec.bulk_ratio = 1.0;
        let s = build_circuit(&spec)?;
        if s.measurement_count() <= MAGIC_MEASUREMENT_BUDGET {
            break s;
        }
    };
    let (mcc, magic_tvd) = verify_magic(&short, &mut BitStream::from_seed(mix_seed(seed, 3)), 16)?;
    let within_bounds = within_compressed_bounds(l, &resources) && within_compressed_bounds(l, &resource_report(&short, &mcc));
    Ok(CompressionCheck {
        l,
        stabilizer_equal: cmp.equal,
        reason: cmp.reason,
        corrupted,
        resources,
        within_bounds,
        magic_tvd,
        magic_measurements: short.measurement_count(),
    })
}

/// Largest source measurement count used for the dense magic-input comparison.
pub const MAGIC_MEASUREMENT_BUDGET: usize = 12;

/// One oracle workload: the lockstep engine run plus the exact χ routes on a
/// random small instance. Returns whether the dense χ route was in budget.
pub fn oracle_instance(seed: u64) -> Result<std::result::Result<bool, String>> {
    let n = 1 + (seed % 6) as usize;
    if let Err(e) = engines_agree(seed, n, 40)? {
        return Ok(Err(format!("engines (n = {n}): {e}")));
    }
    let inst = random_instance(mix_seed(seed, 9), &[2, 4, 6], 0.5)?;
    let (fast, purified, dense) = chi_routes(&inst)?;
    if fast != purified {
        return Ok(Err(format!("chi routes: doubled copy {fast} vs purified {purified}")));
    }
    match dense {
        Some(d) if (d - fast).abs() > TOL => Ok(Err(format!("chi routes: tableau {fast} vs dense {d}"))),
        Some(_) => Ok(Ok(true)),
        None => Ok(Ok(false)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engines_agree_on_a_few_workloads() {
        for seed in 0..30 {
            let n = 1 + (seed as usize % 6);
            engines_agree(seed, n, 40).unwrap().unwrap();
        }
    }

    #[test]
    fn instances_are_reproducible() {
        let a = random_instance(5, &[4, 6], 1.0).unwrap();
        let b = random_instance(5, &[4, 6], 1.0).unwrap();
        assert_eq!(a.noisy, b.noisy);
        assert_eq!(a.rho, b.rho);
    }

    #[test]
    fn compression_and_oracle_instances_pass() {
        for seed in 0..6 {
            let c = compression_instance(seed, &[2, 4, 6], false).unwrap();
            assert!(c.stabilizer_equal && c.within_bounds && c.magic_tvd < 1e-10, "{c:?}");
            assert!(oracle_instance(seed).unwrap().is_ok());
        }
    }
}
