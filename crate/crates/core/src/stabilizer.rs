//! Mixed stabilizer states stored as signed generator lists.
//!
//! The state on `n` qubits with generators `g_1..g_d` is
//! `2^{-n} Σ_{g ∈ ⟨g_1..g_d⟩} g`. This engine favours clarity; the bit-sliced
//! [`crate::tableau::Tableau`] is used on the hot paths and is cross-checked
//! against it.

use crate::clifford::CliffordGate;
use crate::error::{Error, Result};
use crate::group::{GeneratorSet, Membership};
use crate::pauli::{Letter, PauliString};
use crate::rng::BitSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementOutcome {
    /// 0 for the `+1` eigenvalue, 1 for `-1`.
    pub bit: u8,
    pub deterministic: bool,
}

/// Result of projecting onto a prescribed outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Forced {
    /// The outcome was possible; `deterministic` tells whether it had
    /// probability one (otherwise one half).
    Accepted { deterministic: bool },
    /// The outcome has probability zero; the state is left unchanged.
    Contradiction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedStabilizerState {
    group: GeneratorSet,
}

impl MixedStabilizerState {
    pub fn new(group: GeneratorSet) -> Self {
        MixedStabilizerState { group }
    }

    pub fn all_zero(n: usize) -> Self {
        Self::new(GeneratorSet::all_zero(n))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self::new(GeneratorSet::empty(n))
    }

    pub fn num_qubits(&self) -> usize {
        self.group.num_qubits()
    }

    pub fn group(&self) -> &GeneratorSet {
        &self.group
    }

    pub fn into_group(self) -> GeneratorSet {
        self.group
    }

    pub fn rank(&self) -> usize {
        self.group.len()
    }

    pub fn is_pure(&self) -> bool {
        self.group.len() == self.num_qubits()
    }

    pub fn apply_gate(&mut self, gate: &CliffordGate) -> Result<()> {
        gate.check_range(self.num_qubits())?;
        for g in self.group.generators_mut() {
            gate.conjugate(g);
        }
        Ok(())
    }

    fn check_pauli(&self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.num_qubits() {
            return Err(Error::DimensionMismatch { left: self.num_qubits(), right: p.num_qubits() });
        }
        if !p.is_hermitian() {
            return Err(Error::NonHermitian { phase: p.phase() });
        }
        Ok(())
    }

    /// Whether measuring `p` is deterministic, and if so its outcome bit.
    pub fn peek(&self, p: &PauliString) -> Result<Option<u8>> {
        self.check_pauli(p)?;
        if !self.group.commutes_with_all(p) {
            return Ok(None);
        }
        Ok(match self.group.membership(p)? {
            Membership::NotMember => None,
            Membership::Member(s) => Some((s < 0) as u8),
        })
    }

    /// Project onto outcome `bit` of `p` after the caller established that the
    /// outcome is random.
    fn collapse(&mut self, p: &PauliString, bit: u8) {
        let signed = p.clone().with_sign_bit(p.sign_bit() ^ (bit == 1));
        let gens = self.group.generators_mut();
        let anti: Vec<usize> =
            (0..gens.len()).filter(|&i| gens[i].anticommutes_unchecked(p)).collect();
        match anti.split_first() {
            Some((&first, rest)) => {
                let pivot = gens[first].clone();
                for &i in rest {
                    gens[i].mul_assign_unchecked(&pivot);
                }
                gens[first] = signed;
            }
            None => gens.push(signed),
        }
    }

    /// Measure the Hermitian Pauli `p` (its sign is honoured: measuring `-P`
    /// flips the bit relative to `P`).
    pub fn measure<B: BitSource + ?Sized>(
        &mut self,
        p: &PauliString,
        bits: &mut B,
    ) -> Result<MeasurementOutcome> {
        if let Some(bit) = self.peek(p)? {
            return Ok(MeasurementOutcome { bit, deterministic: true });
        }
        let bit = bits.next_bit() as u8;
        self.collapse(p, bit);
        Ok(MeasurementOutcome { bit, deterministic: false })
    }

    pub fn measure_forced(&mut self, p: &PauliString, bit: u8) -> Result<Forced> {
        match self.peek(p)? {
            Some(b) if b == bit => Ok(Forced::Accepted { deterministic: true }),
            Some(_) => Ok(Forced::Contradiction),
            None => {
                self.collapse(p, bit);
                Ok(Forced::Accepted { deterministic: false })
            }
        }
    }

    pub fn measure_z<B: BitSource + ?Sized>(&mut self, q: usize, bits: &mut B) -> Result<MeasurementOutcome> {
        self.check_qubit(q)?;
        self.measure(&PauliString::single(self.num_qubits(), q, Letter::Z), bits)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits() {
            return Err(Error::QubitOutOfRange { qubit: q, n: self.num_qubits() });
        }
        Ok(())
    }

    /// The channel `ρ ↦ ½ρ + ½ PρP`.
    pub fn dephase(&mut self, p: &PauliString) -> Result<()> {
        self.check_pauli(p)?;
        self.group.dephase(p)?;
        Ok(())
    }

    /// Replace qubit `q` by the maximally mixed state.
    pub fn erase(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let n = self.num_qubits();
        self.group.dephase(&PauliString::single(n, q, Letter::Z))?;
        self.group.dephase(&PauliString::single(n, q, Letter::X))?;
        Ok(())
    }

    pub fn reduced_group(&self, region: &[usize]) -> Result<GeneratorSet> {
        self.group.reduced(region)
    }

    /// Append qubits in `|0⟩`.
    pub fn extend_with_zeros(&mut self, extra: usize) {
        let n = self.num_qubits();
        let m = n + extra;
        let positions: Vec<usize> = (0..n).collect();
        let mut gens: Vec<PauliString> =
            self.group.generators().iter().map(|g| g.embed(m, &positions).unwrap()).collect();
        for q in n..m {
            gens.push(PauliString::single(m, q, Letter::Z));
        }
        self.group = GeneratorSet::new_unchecked(m, gens);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{BitStream, ScriptedBits};

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn hadamard_on_zero() {
        let mut st = MixedStabilizerState::all_zero(1);
        st.apply_gate(&CliffordGate::h(0)).unwrap();
        assert_eq!(st.group().generators(), &[p("+X")]);
    }

    #[test]
    fn deterministic_and_random_measurement() {
        let mut st = MixedStabilizerState::all_zero(1);
        let mut bits = ScriptedBits::new(&[true]);
        let out = st.measure(&p("Z"), &mut bits).unwrap();
        assert_eq!(out, MeasurementOutcome { bit: 0, deterministic: true });
        assert_eq!(bits.consumed(), 0);
        let out = st.measure(&p("X"), &mut bits).unwrap();
        assert_eq!(out, MeasurementOutcome { bit: 1, deterministic: false });
        assert_eq!(st.group().generators(), &[p("-X")]);
    }

    #[test]
    fn random_outcome_is_fair() {
        let mut bits = BitStream::from_seed(11);
        let mut ones = 0;
        for _ in 0..10_000 {
            let mut st = MixedStabilizerState::all_zero(1);
            ones += st.measure(&p("X"), &mut bits).unwrap().bit as usize;
        }
        let f = ones as f64 / 10_000.0;
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn measurement_on_mixed_state_augments() {
        let mut st = MixedStabilizerState::maximally_mixed(2);
        let mut bits = ScriptedBits::new(&[false]);
        st.measure(&p("ZZ"), &mut bits).unwrap();
        assert_eq!(st.rank(), 1);
        assert_eq!(st.peek(&p("ZZ")).unwrap(), Some(0));
        assert_eq!(st.measure_forced(&p("ZZ"), 1).unwrap(), Forced::Contradiction);
    }

    #[test]
    fn erase_examples() {
        let mut st = MixedStabilizerState::all_zero(1);
        st.erase(0).unwrap();
        assert_eq!(st.rank(), 0);
        let mut bell = MixedStabilizerState::new(GeneratorSet::from_literals(&["XX", "ZZ"]).unwrap());
        bell.erase(0).unwrap();
        assert_eq!(bell.rank(), 0);
    }

    #[test]
    fn negative_sign_flips_outcome() {
        let mut st = MixedStabilizerState::all_zero(1);
        assert_eq!(st.peek(&p("-Z")).unwrap(), Some(1));
        assert!(st.measure(&p("+iZ"), &mut ScriptedBits::new(&[])).is_err());
    }
}
