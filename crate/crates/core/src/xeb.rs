//! Linear cross entropy between the measurement-record distributions of a
//! noisy circuit run on `ρ` and its clean counterpart run on `σ`:
//! `χ = Σ_m p^ρ_m p^σ_m / Σ_m (p^σ_m)²`.
//!
//! Three routes are provided and cross-checked in tests:
//! * sampling: draw records from `ρ` and replay them on `σ`, averaging the
//!   indicator that the record is possible under `σ`;
//! * [`exact_chi`]: a doubled-copy stabilizer simulation of `ρ ⊗ σ` that
//!   post-selects on equal outcomes (fast, used for sweeps);
//! * [`exact_chi_purified`]: one register qubit per measurement and the
//!   stabilizer trace-overlap formula on the register (generator lists).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Event};
use crate::clifford::CliffordGate;
use crate::error::{Error, Result};
use crate::group::{group_intersection_size, GeneratorSet};
use crate::oracle::DenseState;
use crate::pauli::{Letter, PauliString};
use crate::rng::{mix_seed, BitSource, BitStream};
use crate::stabilizer::{Forced, MixedStabilizerState};
use crate::tableau::{Draw, Outcome, Tableau};

/// Stabilizer initial states.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    AllZero,
    MaximallyMixed,
    PlusAll,
    Custom(GeneratorSet),
}

impl InitialState {
    pub fn group(&self, l: usize) -> Result<GeneratorSet> {
        Ok(match self {
            InitialState::AllZero => GeneratorSet::all_zero(l),
            InitialState::MaximallyMixed => GeneratorSet::empty(l),
            InitialState::PlusAll => GeneratorSet::all_plus(l),
            InitialState::Custom(g) => {
                if g.num_qubits() != l {
                    return Err(Error::DimensionMismatch { left: l, right: g.num_qubits() });
                }
                g.clone()
            }
        })
    }

    pub fn tableau(&self, l: usize) -> Result<Tableau> {
        Ok(match self {
            InitialState::AllZero => Tableau::all_zero(l),
            InitialState::MaximallyMixed => Tableau::maximally_mixed(l),
            InitialState::PlusAll => Tableau::all_plus(l),
            InitialState::Custom(g) => Tableau::from_group(&self.group(g.num_qubits())?),
        })
    }

    pub fn dense(&self, l: usize) -> Result<DenseState> {
        Ok(DenseState::from_group(&self.group(l)?))
    }

    pub fn name(&self) -> String {
        match self {
            InitialState::AllZero => "all_zero".into(),
            InitialState::MaximallyMixed => "maximally_mixed".into(),
            InitialState::PlusAll => "plus_all".into(),
            InitialState::Custom(g) => {
                let gens: Vec<String> = g.generators().iter().map(|p| p.to_string()).collect();
                format!("custom[{}]", gens.join(","))
            }
        }
    }
}

impl std::str::FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "all_zero" | "zero" => Ok(InitialState::AllZero),
            "maximally_mixed" | "mixed" => Ok(InitialState::MaximallyMixed),
            "plus_all" | "plus" => Ok(InitialState::PlusAll),
            _ => Err(Error::InvalidSpec(format!("unknown initial state {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementRecord {
    pub bits: Vec<u8>,
    pub circuit_id: u64,
    pub shot_id: u64,
}

fn check_pair(noisy: &Circuit, clean: &Circuit) -> Result<()> {
    if clean.has_erasures() {
        return Err(Error::NoisyCircuit);
    }
    if !noisy.same_skeleton(clean) {
        return Err(Error::SkeletonMismatch);
    }
    Ok(())
}

/// A circuit together with the tableau reached just before its first
/// measurement; everything up to that point is shot independent.
pub struct ShotRunner<'a> {
    circuit: &'a Circuit,
    prefix: Tableau,
    start: usize,
}

impl<'a> ShotRunner<'a> {
    pub fn new(circuit: &'a Circuit, initial: &InitialState) -> Result<Self> {
        let mut t = initial.tableau(circuit.l)?;
        let mut start = circuit.events.len();
        for (i, e) in circuit.events.iter().enumerate() {
            match e {
                Event::Gate { gate, .. } => t.apply_gate(gate)?,
                Event::Erase { qubit, .. } => t.erase(*qubit),
                Event::Measure { .. } => {
                    start = i;
                    break;
                }
            }
        }
        Ok(ShotRunner { circuit, prefix: t, start })
    }

    /// One trajectory; one bit of `bits` per random outcome.
    pub fn sample(&self, bits: &mut dyn BitSource) -> Vec<u8> {
        let mut t = self.prefix.clone();
        let mut rec = Vec::new();
        for e in &self.circuit.events[self.start..] {
            match e {
                Event::Gate { gate, .. } => t.apply_gate_unchecked(gate),
                Event::Erase { qubit, .. } => t.erase(*qubit),
                Event::Measure { qubit, .. } => {
                    let out = t.measure_z(*qubit, Draw::Random(&mut *bits));
                    rec.push(out.bit().expect("random draw cannot contradict"));
                }
            }
        }
        rec
    }

    /// Whether `record` has nonzero probability: replay with forced outcomes,
    /// stopping at the first contradiction.
    pub fn replay(&self, record: &[u8]) -> Result<bool> {
        let m = self.circuit.measurement_count();
        if record.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: record.len() });
        }
        let mut t = self.prefix.clone();
        let mut k = 0;
        for e in &self.circuit.events[self.start..] {
            match e {
                Event::Gate { gate, .. } => t.apply_gate_unchecked(gate),
                Event::Erase { qubit, .. } => t.erase(*qubit),
                Event::Measure { qubit, .. } => {
                    if t.measure_z(*qubit, Draw::Forced(record[k])) == Outcome::Contradiction {
                        return Ok(false);
                    }
                    k += 1;
                }
            }
        }
        Ok(true)
    }
}

/// Sample one measurement record of `noisy` on `rho`.
pub fn sample_record(noisy: &Circuit, rho: &InitialState, bits: &mut dyn BitSource) -> Result<Vec<u8>> {
    Ok(ShotRunner::new(noisy, rho)?.sample(bits))
}

/// `1` when `record` can occur on `sigma` under `clean`, else `0`.
pub fn replay_indicator(clean: &Circuit, sigma: &InitialState, record: &[u8]) -> Result<u8> {
    if clean.has_erasures() {
        return Err(Error::NoisyCircuit);
    }
    Ok(ShotRunner::new(clean, sigma)?.replay(record)? as u8)
}

/// Sample mean and standard error of the mean of 0/1 indicators, using the
/// unbiased (M-1) sample variance.
pub fn indicator_statistics(indicators: &[u8]) -> Result<(f64, f64)> {
    let m = indicators.len();
    if m < 2 {
        return Err(Error::Statistics(format!("need at least 2 shots, got {m}")));
    }
    let ones = indicators.iter().filter(|&&x| x != 0).count() as f64;
    let mf = m as f64;
    let mean = ones / mf;
    // Σ (x - mean)² = ones (1-mean)² + (M-ones) mean²
    let ss = ones * (1.0 - mean).powi(2) + (mf - ones) * mean * mean;
    let var = ss / (mf - 1.0);
    Ok((mean, (var / mf).sqrt()))
}

/// Monte Carlo estimate `(χ_i, ε_i)` from `shots` trajectories; shot `s`
/// draws its outcomes from the stream seeded by `mix_seed(seed, s)`.
pub fn estimate_chi(
    noisy: &Circuit,
    clean: &Circuit,
    rho: &InitialState,
    sigma: &InitialState,
    shots: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_pair(noisy, clean)?;
    if shots < 2 {
        return Err(Error::Statistics(format!("need at least 2 shots, got {shots}")));
    }
    let sampler = ShotRunner::new(noisy, rho)?;
    let replayer = ShotRunner::new(clean, sigma)?;
    let mut xs = Vec::with_capacity(shots);
    for s in 0..shots {
        let mut bits = BitStream::from_seed(mix_seed(seed, s as u64));
        let rec = sampler.sample(&mut bits);
        xs.push(replayer.replay(&rec)? as u8);
    }
    indicator_statistics(&xs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub per_circuit: Vec<(f64, f64)>,
    pub chi_bar: f64,
    /// `sqrt((1/N) Σ ε_i²)`.
    pub eps: f64,
    pub ci95: (f64, f64),
    /// Standard error of the mean of the `χ_i` across circuits (diagnostic).
    pub between_circuit_se: Option<f64>,
}

pub fn aggregate(per_circuit: &[(f64, f64)]) -> Result<ChiEstimate> {
    let n = per_circuit.len();
    if n == 0 {
        return Err(Error::Statistics("no circuits to aggregate".into()));
    }
    let nf = n as f64;
    let chi_bar = per_circuit.iter().map(|c| c.0).sum::<f64>() / nf;
    let eps = (per_circuit.iter().map(|c| c.1 * c.1).sum::<f64>() / nf).sqrt();
    let between_circuit_se = (n >= 2).then(|| {
        let v = per_circuit.iter().map(|c| (c.0 - chi_bar).powi(2)).sum::<f64>() / (nf - 1.0);
        (v / nf).sqrt()
    });
    Ok(ChiEstimate {
        per_circuit: per_circuit.to_vec(),
        chi_bar,
        eps,
        ci95: (chi_bar - 1.96 * eps, chi_bar + 1.96 * eps),
        between_circuit_se,
    })
}

/// An exact cross entropy: zero or a power of two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExactChi {
    Zero,
    /// `2^k` with `k ≤ 0`.
    Pow2(i64),
}

impl ExactChi {
    pub fn value(&self) -> f64 {
        match *self {
            ExactChi::Zero => 0.0,
            ExactChi::Pow2(k) => 2f64.powi(k as i32),
        }
    }
}

impl PartialOrd for ExactChi {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactChi {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (ExactChi::Zero, ExactChi::Zero) => Equal,
            (ExactChi::Zero, _) => Less,
            (_, ExactChi::Zero) => Greater,
            (ExactChi::Pow2(a), ExactChi::Pow2(b)) => a.cmp(b),
        }
    }
}

/// Number of measurements of `clean` on `sigma` whose outcome is random; it
/// does not depend on the outcomes drawn, so `Σ_m (p^σ_m)² = 2^{-N}`.
pub fn random_measurement_count(clean: &Circuit, sigma: &InitialState) -> Result<usize> {
    let mut t = sigma.tableau(clean.l)?;
    let mut count = 0;
    for e in &clean.events {
        match e {
            Event::Gate { gate, .. } => t.apply_gate(gate)?,
            Event::Erase { qubit, .. } => t.erase(*qubit),
            Event::Measure { qubit, .. } => {
                if t.measure_z(*qubit, Draw::Forced(0)).is_random() {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

fn shifted(gate: &CliffordGate, offset: usize) -> CliffordGate {
    use crate::clifford::Support;
    let support = match gate.support {
        Support::One(a) => Support::One(a + offset),
        Support::Two(a, b) => Support::Two(a + offset, b + offset),
    };
    CliffordGate { support, action: gate.action }
}

/// Exact `χ` by simulating `ρ ⊗ σ` on `2L` qubits: the noisy circuit acts on
/// the first copy and the clean one on the second. Each measurement is
/// replaced by post-selecting equal outcomes (parity `Z_q Z_{q+L} = +1`,
/// probability 1, 1/2 or 0) followed by dephasing `Z_q`, so the final weight
/// is `Σ_m p^ρ_m p^σ_m`.
pub fn exact_chi(noisy: &Circuit, clean: &Circuit, rho: &InitialState, sigma: &InitialState) -> Result<ExactChi> {
    check_pair(noisy, clean)?;
    let l = clean.l;
    let n_sigma = random_measurement_count(clean, sigma)? as i64;
    let mut t = Tableau::tensor(&rho.tableau(l)?, &sigma.tableau(l)?);
    let mut halvings: i64 = 0;
    for e in &noisy.events {
        match e {
            Event::Gate { gate, .. } => {
                gate.check_range(l)?;
                t.apply_gate_unchecked(gate);
                t.apply_gate_unchecked(&shifted(gate, l));
            }
            Event::Erase { qubit, .. } => t.erase(*qubit),
            Event::Measure { qubit, .. } => {
                let q = *qubit;
                match t.measure_sparse(&[(q, Letter::Z), (q + l, Letter::Z)], false, Draw::Forced(0)) {
                    Outcome::Contradiction => return Ok(ExactChi::Zero),
                    Outcome::Random(_) => halvings += 1,
                    Outcome::Deterministic(_) => {}
                }
                t.dephase_sparse(&[(q, Letter::Z)]);
            }
        }
    }
    Ok(ExactChi::Pow2(n_sigma - halvings))
}

/// Final joint stabilizer group on `L + N` qubits (register qubit `L + j`
/// records measurement `j`): controlled-NOT from the measured qubit onto a
/// fresh register, then Z-dephasing of the register.
pub fn purified_state(c: &Circuit, init: &InitialState) -> Result<MixedStabilizerState> {
    let l = c.l;
    let n_meas = c.measurement_count();
    let mut st = MixedStabilizerState::new(init.group(l)?);
    st.extend_with_zeros(n_meas);
    let n = l + n_meas;
    let mut j = 0;
    for e in &c.events {
        match e {
            Event::Gate { gate, .. } => st.apply_gate(gate)?,
            Event::Erase { qubit, .. } => st.erase(*qubit)?,
            Event::Measure { qubit, .. } => {
                let r = l + j;
                st.apply_gate(&CliffordGate::cnot(*qubit, r))?;
                st.dephase(&PauliString::single(n, r, Letter::Z))?;
                j += 1;
            }
        }
    }
    Ok(st)
}

/// Stabilizer group of the register (record) marginal.
pub fn register_group(c: &Circuit, init: &InitialState) -> Result<GeneratorSet> {
    let st = purified_state(c, init)?;
    let region: Vec<usize> = (c.l..c.l + c.measurement_count()).collect();
    st.reduced_group(&region)
}

/// Exact `χ = tr[ρ_R σ_R] / tr[σ_R²]` from the register marginals.
pub fn exact_chi_purified(
    noisy: &Circuit,
    clean: &Circuit,
    rho: &InitialState,
    sigma: &InitialState,
) -> Result<ExactChi> {
    check_pair(noisy, clean)?;
    let gr = register_group(noisy, rho)?;
    let gs = register_group(clean, sigma)?;
    chi_from_register_groups(&gr, &gs)
}

pub fn chi_from_register_groups(gr: &GeneratorSet, gs: &GeneratorSet) -> Result<ExactChi> {
    let inter = group_intersection_size(gr, gs)?;
    if inter.contradiction {
        return Ok(ExactChi::Zero);
    }
    Ok(ExactChi::Pow2(inter.log2_count as i64 - gs.len() as i64))
}

/// Exact record distribution of a stabilizer circuit by branching on every
/// random outcome (probabilities are dyadic and exact in `f64`).
pub fn stabilizer_record_distribution(
    c: &Circuit,
    init: &InitialState,
    max_random: usize,
) -> Result<BTreeMap<Vec<u8>, f64>> {
    let st = MixedStabilizerState::new(init.group(c.l)?);
    let mut out = BTreeMap::new();
    let mut budget = max_random;
    dfs_stab(c, 0, st, 0, &mut Vec::new(), &mut out, &mut budget)?;
    Ok(out)
}

fn dfs_stab(
    c: &Circuit,
    pos: usize,
    mut st: MixedStabilizerState,
    depth: i32,
    rec: &mut Vec<u8>,
    out: &mut BTreeMap<Vec<u8>, f64>,
    budget: &mut usize,
) -> Result<()> {
    let n = c.l;
    for i in pos..c.events.len() {
        match &c.events[i] {
            Event::Gate { gate, .. } => st.apply_gate(gate)?,
            Event::Erase { qubit, .. } => st.erase(*qubit)?,
            Event::Measure { qubit, .. } => {
                let z = PauliString::single(n, *qubit, Letter::Z);
                if let Some(bit) = st.peek(&z)? {
                    rec.push(bit);
                    continue;
                }
                if depth as usize >= *budget {
                    return Err(Error::BudgetExceeded(format!("more than {budget} random outcomes")));
                }
                let base = rec.len();
                for bit in 0..2u8 {
                    let mut branch = st.clone();
                    let f = branch.measure_forced(&z, bit)?;
                    debug_assert_eq!(f, Forced::Accepted { deterministic: false });
                    rec.push(bit);
                    dfs_stab(c, i + 1, branch, depth + 1, rec, out, budget)?;
                    rec.truncate(base);
                }
                // restore the deterministic bits recorded before this branch point
                return Ok(());
            }
        }
    }
    *out.entry(rec.clone()).or_insert(0.0) += 2f64.powi(-depth);
    Ok(())
}

/// A random stabilizer state on `n` qubits: random two-qubit Cliffords on
/// `|0…0⟩`, then `Z`-dephasing of a random number of qubits.
pub fn random_stabilizer_group<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> GeneratorSet {
    let mut st = MixedStabilizerState::all_zero(n);
    for _ in 0..3 * n {
        let gate = if n == 1 {
            CliffordGate::single(0, random_single_qubit(rng))
        } else {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            CliffordGate::two(a, b, crate::clifford::sample_two_qubit_clifford(rng))
        };
        st.apply_gate(&gate).expect("in range");
    }
    let k = rng.gen_range(0..=n);
    for _ in 0..k {
        let q = rng.gen_range(0..n);
        st.dephase(&PauliString::single(n, q, Letter::Z)).expect("in range");
    }
    st.into_group()
}

fn random_single_qubit<R: rand::Rng + ?Sized>(rng: &mut R) -> crate::clifford::LocalClifford {
    use crate::clifford::LocalClifford;
    match rng.gen_range(0..5) {
        0 => LocalClifford::hadamard(),
        1 => LocalClifford::phase_s(),
        2 => LocalClifford::pauli(Letter::X),
        3 => LocalClifford::pauli(Letter::Z),
        _ => LocalClifford::phase_s_dag(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: ExactChi,
    pub rhs: ExactChi,
    pub holds: bool,
}

/// `χ(C', ρ | C, σ) ≤ χ(C', σ | C, σ)` for stabilizer `ρ, σ` and a noisy
/// circuit obtained from the clean one by inserting erasures.
pub fn check_inequality(
    noisy: &Circuit,
    clean: &Circuit,
    rho: &InitialState,
    sigma: &InitialState,
) -> Result<InequalityReport> {
    let lhs = exact_chi(noisy, clean, rho, sigma)?;
    let rhs = exact_chi(noisy, clean, sigma, sigma)?;
    Ok(InequalityReport { lhs, rhs, holds: lhs <= rhs })
}

/// `χ(C', ρ₁ | C, σ) ≤ χ(C', ρ₂ | C, σ)` where `ρ₁` is `ρ₂` after the
/// dephasing channels `channels` (applied in order).
pub fn check_inequality_dephased(
    noisy: &Circuit,
    clean: &Circuit,
    rho1: &InitialState,
    rho2: &InitialState,
    channels: &[PauliString],
    sigma: &InitialState,
) -> Result<InequalityReport> {
    let l = clean.l;
    let mut derived = rho2.group(l)?;
    for p in channels {
        derived.dephase(p)?;
    }
    let target = rho1.group(l)?;
    let same = derived.same_group(&target);
    if !same {
        return Err(Error::Precondition("rho1 is not the declared dephasing of rho2".into()));
    }
    let lhs = exact_chi(noisy, clean, rho1, sigma)?;
    let rhs = exact_chi(noisy, clean, rho2, sigma)?;
    Ok(InequalityReport { lhs, rhs, holds: lhs <= rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::rng::ScriptedBits;

    fn single_measure() -> Circuit {
        Circuit::new(1, vec![Event::Measure { qubit: 0, layer: 0 }])
    }

    #[test]
    fn immediate_measurement_on_zero() {
        let c = single_measure();
        let rec = sample_record(&c, &InitialState::AllZero, &mut ScriptedBits::new(&[])).unwrap();
        assert_eq!(rec, vec![0]);
        assert_eq!(replay_indicator(&c, &InitialState::AllZero, &[1]).unwrap(), 0);
        assert_eq!(replay_indicator(&c, &InitialState::AllZero, &[0]).unwrap(), 1);
        assert!(replay_indicator(&c, &InitialState::AllZero, &[]).is_err());
    }

    #[test]
    fn indicator_statistics_examples() {
        assert_eq!(indicator_statistics(&[1; 10]).unwrap(), (1.0, 0.0));
        let mut xs = vec![0u8; 500];
        xs.extend(vec![1u8; 500]);
        let (m, e) = indicator_statistics(&xs).unwrap();
        assert_eq!(m, 0.5);
        assert!((e - (0.25f64 * 1000.0 / 999.0).sqrt() / 1000f64.sqrt()).abs() < 1e-15);
        assert!((e - 0.0158).abs() < 1e-4);
        assert!(indicator_statistics(&[1]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[(0.8, 0.01)]).unwrap();
        assert_eq!(a.chi_bar, 0.8);
        assert_eq!(a.eps, 0.01);
        assert!((a.ci95.0 - 0.7804).abs() < 1e-12 && (a.ci95.1 - 0.8196).abs() < 1e-12);
        let b = aggregate(&[(1.0, 0.0), (0.0, 0.0)]).unwrap();
        assert_eq!((b.chi_bar, b.eps), (0.5, 0.0));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn exact_chi_trivial_cases() {
        let c = single_measure();
        let mm = InitialState::MaximallyMixed;
        let z = InitialState::AllZero;
        assert_eq!(exact_chi(&c, &c, &z, &z).unwrap(), ExactChi::Pow2(0));
        assert_eq!(exact_chi(&c, &c, &mm, &z).unwrap(), ExactChi::Pow2(-1));
        assert_eq!(exact_chi_purified(&c, &c, &mm, &z).unwrap(), ExactChi::Pow2(-1));
        let empty = Circuit::new(2, vec![]);
        assert_eq!(exact_chi(&empty, &empty, &mm, &z).unwrap(), ExactChi::Pow2(0));
        assert_eq!(exact_chi_purified(&empty, &empty, &mm, &z).unwrap(), ExactChi::Pow2(0));
    }

    #[test]
    fn exact_chi_rejects_noisy_clean_side() {
        let c = Circuit::new(1, vec![Event::Erase { qubit: 0, layer: 0 }]);
        assert!(matches!(
            exact_chi(&c, &c, &InitialState::AllZero, &InitialState::AllZero),
            Err(Error::NoisyCircuit)
        ));
    }
}
