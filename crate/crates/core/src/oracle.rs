//! Dense state-vector and density-matrix reference engine for small systems.
//!
//! Everything here is brute force: Paulis act on explicit amplitude arrays,
//! gates are explicit 2x2 / 4x4 unitaries and measurement records are
//! enumerated branch by branch. Qubit `k` is bit `k` of a basis index.

use std::collections::BTreeMap;

use num_complex::Complex64 as C;

use crate::circuit::{Circuit, Event};
use crate::clifford::{CliffordGate, LocalClifford, Support};
use crate::error::{Error, Result};
use crate::group::GeneratorSet;
use crate::pauli::{Letter, PauliString};

pub const MAX_PURE_QUBITS: usize = 14;
pub const MAX_MIXED_QUBITS: usize = 7;
pub const MAX_BRANCH_MEASUREMENTS: usize = 20;
pub const TOL: f64 = 1e-10;
/// Branches with probability below this are treated as impossible.
const PRUNE: f64 = 1e-13;

/// Exact distribution over measurement records (bit vectors in event order).
pub type RecordDistribution = BTreeMap<Vec<u8>, f64>;

/// `P|b⟩ = coeff · |b ⊕ x⟩` for basis index `b`.
#[inline]
fn pauli_action(x: usize, z: usize, base_phase: u32, b: usize) -> (usize, C) {
    let k = (base_phase + 2 * ((z & b).count_ones() & 1)) & 3;
    (b ^ x, I_POW[k as usize])
}

const I_POW: [C; 4] = [C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(-1.0, 0.0), C::new(0.0, -1.0)];

fn pauli_masks(p: &PauliString) -> (usize, usize, u32) {
    let mut x = 0usize;
    let mut z = 0usize;
    let mut y = 0u32;
    for q in 0..p.num_qubits() {
        let (xb, zb) = p.letter(q).bits();
        if xb {
            x |= 1 << q;
        }
        if zb {
            z |= 1 << q;
        }
        if xb && zb {
            y += 1;
        }
    }
    // letter(x,z) = i^{xz} X^x Z^z, and X^x Z^z |b⟩ = (-1)^{z·b} |b⊕x⟩
    (x, z, (p.phase() as u32 + y) & 3)
}

/// `P v` for a state vector on `p.num_qubits()` qubits.
pub fn apply_pauli_vec(p: &PauliString, v: &[C]) -> Vec<C> {
    let (x, z, ph) = pauli_masks(p);
    let mut out = vec![C::new(0.0, 0.0); v.len()];
    for (b, &a) in v.iter().enumerate() {
        let (t, c) = pauli_action(x, z, ph, b);
        out[t] += c * a;
    }
    out
}

/// Dense `2^n × 2^n` matrix of a Pauli string (row-major).
pub fn pauli_matrix(p: &PauliString) -> Vec<C> {
    let n = p.num_qubits();
    let d = 1usize << n;
    let (x, z, ph) = pauli_masks(p);
    let mut m = vec![C::new(0.0, 0.0); d * d];
    for b in 0..d {
        let (t, c) = pauli_action(x, z, ph, b);
        m[t * d + b] = c;
    }
    m
}

pub fn matmul(a: &[C], b: &[C], d: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

fn norm_sqr(v: &[C]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// A `2^k`-dimensional unitary (k = 1, 2) realising a local Clifford up to
/// global phase, row-major with local qubit 0 as the low bit.
pub fn clifford_unitary(c: &LocalClifford) -> Vec<C> {
    let k = c.arity();
    let d = 1usize << k;
    let images = c.images();
    // U|0..0⟩ is stabilized by the images of the Z_j
    let mut v0 = None;
    for b in 0..d {
        let mut v = vec![C::new(0.0, 0.0); d];
        v[b] = C::new(1.0, 0.0);
        for j in 0..k {
            let pv = apply_pauli_vec(&images[2 * j + 1], &v);
            v = v.iter().zip(&pv).map(|(a, b)| (a + b) * 0.5).collect();
        }
        let nrm = norm_sqr(&v);
        if nrm > 1e-6 {
            let s = 1.0 / nrm.sqrt();
            v0 = Some(v.into_iter().map(|a| a * s).collect::<Vec<_>>());
            break;
        }
    }
    let v0 = v0.expect("stabilizer projector annihilated every basis state");
    let mut u = vec![C::new(0.0, 0.0); d * d];
    for b in 0..d {
        let mut col = v0.clone();
        for j in 0..k {
            if (b >> j) & 1 == 1 {
                col = apply_pauli_vec(&images[2 * j], &col);
            }
        }
        for (r, a) in col.into_iter().enumerate() {
            u[r * d + b] = a;
        }
    }
    u
}

/// Apply a `2^k` local matrix on `qubits` of an `n`-qubit vector.
fn apply_local(v: &mut [C], u: &[C], qubits: &[usize]) {
    let k = qubits.len();
    let d = 1usize << k;
    let mask: usize = qubits.iter().map(|&q| 1 << q).sum();
    let mut inp = [C::new(0.0, 0.0); 4];
    for base in 0..v.len() {
        if base & mask != 0 {
            continue;
        }
        let idx = |loc: usize| -> usize {
            let mut i = base;
            for (j, &q) in qubits.iter().enumerate() {
                if (loc >> j) & 1 == 1 {
                    i |= 1 << q;
                }
            }
            i
        };
        for (loc, slot) in inp.iter_mut().enumerate().take(d) {
            *slot = v[idx(loc)];
        }
        for r in 0..d {
            let mut acc = C::new(0.0, 0.0);
            for c in 0..d {
                acc += u[r * d + c] * inp[c];
            }
            v[idx(r)] = acc;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DenseState {
    Pure { n: usize, amps: Vec<C> },
    /// Row-major density matrix; entry `(i, j)` lives at `i + (j << n)` so
    /// the ket index occupies the low `n` bits.
    Mixed { n: usize, rho: Vec<C> },
}

impl DenseState {
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![C::new(0.0, 0.0); 1 << n];
        amps[0] = C::new(1.0, 0.0);
        DenseState::Pure { n, amps }
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C>) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(Error::LengthMismatch { expected: 1 << n, got: amps.len() });
        }
        Ok(DenseState::Pure { n, amps })
    }

    /// Product state from single-qubit amplitudes `(a0, a1)`.
    pub fn product(qubits: &[(C, C)]) -> Self {
        let n = qubits.len();
        let mut amps = vec![C::new(1.0, 0.0); 1 << n];
        for (b, a) in amps.iter_mut().enumerate() {
            for (q, &(a0, a1)) in qubits.iter().enumerate() {
                *a *= if (b >> q) & 1 == 1 { a1 } else { a0 };
            }
        }
        DenseState::Pure { n, amps }
    }

    /// `(|0⟩ + e^{iπ/4}|1⟩)/√2`.
    pub fn t_amplitudes() -> (C, C) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (C::new(s, 0.0), C::from_polar(s, std::f64::consts::FRAC_PI_4))
    }

    /// `|0⟩` on even qubits and `|T⟩` on odd qubits.
    pub fn alternating_magic(n: usize) -> Self {
        let zero = (C::new(1.0, 0.0), C::new(0.0, 0.0));
        let t = Self::t_amplitudes();
        let qs: Vec<(C, C)> = (0..n).map(|q| if q % 2 == 1 { t } else { zero }).collect();
        Self::product(&qs)
    }

    pub fn magic(n: usize) -> Self {
        Self::product(&vec![Self::t_amplitudes(); n])
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        let mut rho = vec![C::new(0.0, 0.0); d * d];
        for i in 0..d {
            rho[i + (i << n)] = C::new(1.0 / d as f64, 0.0);
        }
        DenseState::Mixed { n, rho }
    }

    /// `2^{-n} Σ_{g ∈ S} g` as a density matrix.
    pub fn from_group_mixed(g: &GeneratorSet) -> Self {
        let n = g.num_qubits();
        let mut st = Self::maximally_mixed(n);
        for gen in g.generators() {
            if let DenseState::Mixed { rho, .. } = &mut st {
                // ρ ← (1 + g) ρ
                let grho = left_pauli(gen, rho, n);
                for (a, b) in rho.iter_mut().zip(grho) {
                    *a += b;
                }
            }
        }
        st
    }

    /// The pure stabilizer state of a full-rank group.
    pub fn from_group_pure(g: &GeneratorSet) -> Result<Self> {
        let n = g.num_qubits();
        if g.len() != n {
            return Err(Error::Precondition("group is not full rank".into()));
        }
        for b in 0..1usize << n {
            let mut v = vec![C::new(0.0, 0.0); 1 << n];
            v[b] = C::new(1.0, 0.0);
            for gen in g.generators() {
                let pv = apply_pauli_vec(gen, &v);
                v = v.iter().zip(&pv).map(|(a, b)| (a + b) * 0.5).collect();
            }
            let nrm = norm_sqr(&v);
            if nrm > 1e-6 {
                let s = 1.0 / nrm.sqrt();
                return Ok(DenseState::Pure { n, amps: v.into_iter().map(|a| a * s).collect() });
            }
        }
        unreachable!("a full-rank stabilizer group fixes a state")
    }

    /// Pure state when the group has full rank, otherwise a density matrix.
    pub fn from_group(g: &GeneratorSet) -> Self {
        if g.len() == g.num_qubits() {
            Self::from_group_pure(g).unwrap()
        } else {
            Self::from_group_mixed(g)
        }
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            DenseState::Pure { n, .. } | DenseState::Mixed { n, .. } => *n,
        }
    }

    pub fn into_mixed(self) -> Self {
        match self {
            DenseState::Pure { n, amps } => {
                let d = 1usize << n;
                let mut rho = vec![C::new(0.0, 0.0); d * d];
                for i in 0..d {
                    for j in 0..d {
                        rho[i + (j << n)] = amps[i] * amps[j].conj();
                    }
                }
                DenseState::Mixed { n, rho }
            }
            m => m,
        }
    }

    /// Density matrix in row-major `(i, j) ↦ i·d + j` order.
    pub fn density_matrix(&self) -> Vec<C> {
        let n = self.num_qubits();
        let d = 1usize << n;
        let mixed = self.clone().into_mixed();
        let DenseState::Mixed { rho, .. } = mixed else { unreachable!() };
        let mut out = vec![C::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = rho[i + (j << n)];
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        match self {
            DenseState::Pure { amps, .. } => norm_sqr(amps),
            DenseState::Mixed { n, rho } => (0..1usize << n).map(|i| rho[i + (i << n)].re).sum(),
        }
    }

    pub fn normalize(&mut self) {
        let t = self.trace();
        match self {
            DenseState::Pure { amps, .. } => {
                let s = 1.0 / t.sqrt();
                amps.iter_mut().for_each(|a| *a *= s);
            }
            DenseState::Mixed { rho, .. } => rho.iter_mut().for_each(|a| *a /= t),
        }
    }

    pub fn apply_unitary(&mut self, u: &[C], qubits: &[usize]) {
        match self {
            DenseState::Pure { amps, .. } => apply_local(amps, u, qubits),
            DenseState::Mixed { n, rho } => {
                apply_local(rho, u, qubits);
                let conj: Vec<C> = u.iter().map(|a| a.conj()).collect();
                let bra: Vec<usize> = qubits.iter().map(|&q| q + *n).collect();
                apply_local(rho, &conj, &bra);
            }
        }
    }

    pub fn apply_gate(&mut self, gate: &CliffordGate) -> Result<()> {
        gate.check_range(self.num_qubits())?;
        let u = clifford_unitary(&gate.action);
        let qs = match gate.support {
            Support::One(a) => vec![a],
            Support::Two(a, b) => vec![a, b],
        };
        self.apply_unitary(&u, &qs);
        Ok(())
    }

    /// Unnormalized projection onto outcome `bit` of `p`; returns the branch
    /// probability relative to the current trace.
    pub fn project(&mut self, p: &PauliString, bit: u8) -> f64 {
        let before = self.trace();
        let s = if bit == 0 { 1.0 } else { -1.0 };
        match self {
            DenseState::Pure { amps, .. } => {
                let pv = apply_pauli_vec(p, amps);
                for (a, b) in amps.iter_mut().zip(pv) {
                    *a = (*a + b * s) * 0.5;
                }
            }
            DenseState::Mixed { n, rho } => {
                // Π ρ Π with Π = (1 + sP)/2
                let n = *n;
                let left = left_pauli(p, rho, n);
                for (a, b) in rho.iter_mut().zip(left) {
                    *a = (*a + b * s) * 0.5;
                }
                let right = right_pauli(p, rho, n);
                for (a, b) in rho.iter_mut().zip(right) {
                    *a = (*a + b * s) * 0.5;
                }
            }
        }
        self.trace() / before
    }

    /// `ρ ↦ ½ρ + ½PρP` (converts to mixed mode).
    pub fn dephase(&mut self, p: &PauliString) {
        let st = std::mem::replace(self, DenseState::zero(0)).into_mixed();
        let DenseState::Mixed { n, mut rho } = st else { unreachable!() };
        let prp = right_pauli(p, &left_pauli(p, &rho, n), n);
        for (a, b) in rho.iter_mut().zip(prp) {
            *a = (*a + b) * 0.5;
        }
        *self = DenseState::Mixed { n, rho };
    }

    /// Replace qubit `q` by the maximally mixed state.
    pub fn erase(&mut self, q: usize) {
        let n = self.num_qubits();
        self.dephase(&PauliString::single(n, q, Letter::Z));
        self.dephase(&PauliString::single(n, q, Letter::X));
    }

    /// `⟨P⟩` (real for Hermitian `P`).
    pub fn expectation(&self, p: &PauliString) -> f64 {
        match self {
            DenseState::Pure { amps, .. } => {
                let pv = apply_pauli_vec(p, amps);
                amps.iter().zip(pv).map(|(a, b)| (a.conj() * b).re).sum()
            }
            DenseState::Mixed { n, rho } => {
                let prho = left_pauli(p, rho, *n);
                (0..1usize << n).map(|i| prho[i + (i << n)].re).sum()
            }
        }
    }

    /// Maximum entrywise difference between density matrices.
    pub fn distance(&self, other: &DenseState) -> f64 {
        let a = self.density_matrix();
        let b = other.density_matrix();
        a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    pub fn trace_overlap(&self, other: &DenseState) -> f64 {
        let a = self.density_matrix();
        let b = other.density_matrix();
        let d = 1usize << self.num_qubits();
        let mut t = C::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                t += a[i * d + j] * b[j * d + i];
            }
        }
        t.re
    }

    /// Reduced density matrix on `region` (in that order), as a mixed state.
    pub fn partial_trace_keep(&self, region: &[usize]) -> DenseState {
        let n = self.num_qubits();
        let full = self.density_matrix();
        let d = 1usize << n;
        let k = region.len();
        let dk = 1usize << k;
        let mut rho = vec![C::new(0.0, 0.0); dk * dk];
        let outside: Vec<usize> = (0..n).filter(|q| !region.contains(q)).collect();
        let compose = |loc: usize, env: usize| -> usize {
            let mut i = 0;
            for (j, &q) in region.iter().enumerate() {
                if (loc >> j) & 1 == 1 {
                    i |= 1 << q;
                }
            }
            for (j, &q) in outside.iter().enumerate() {
                if (env >> j) & 1 == 1 {
                    i |= 1 << q;
                }
            }
            i
        };
        for a in 0..dk {
            for b in 0..dk {
                let mut acc = C::new(0.0, 0.0);
                for e in 0..1usize << outside.len() {
                    acc += full[compose(a, e) * d + compose(b, e)];
                }
                rho[a + (b << k)] = acc;
            }
        }
        DenseState::Mixed { n: k, rho }
    }
}

fn left_pauli(p: &PauliString, rho: &[C], n: usize) -> Vec<C> {
    // (P ρ)_{ij}: P acts on the ket index (low n bits)
    let (x, z, ph) = pauli_masks(p);
    let d = 1usize << n;
    let mut out = vec![C::new(0.0, 0.0); rho.len()];
    for j in 0..d {
        for i in 0..d {
            let (t, c) = pauli_action(x, z, ph, i);
            out[t + (j << n)] += c * rho[i + (j << n)];
        }
    }
    out
}

fn right_pauli(p: &PauliString, rho: &[C], n: usize) -> Vec<C> {
    // (ρ P)_{ij} = Σ_k ρ_{ik} P_{kj}; P_{kj} = c when k = j ⊕ x
    let (x, z, ph) = pauli_masks(p);
    let d = 1usize << n;
    let mut out = vec![C::new(0.0, 0.0); rho.len()];
    for j in 0..d {
        let (k, c) = pauli_action(x, z, ph, j);
        for i in 0..d {
            out[i + (j << n)] += rho[i + (k << n)] * c;
        }
    }
    out
}

fn check_budget(c: &Circuit, st: &DenseState) -> Result<()> {
    let m = c.measurement_count();
    if m > MAX_BRANCH_MEASUREMENTS {
        return Err(Error::BudgetExceeded(format!("{m} measurements > {MAX_BRANCH_MEASUREMENTS}")));
    }
    let n = st.num_qubits();
    let mixed = matches!(st, DenseState::Mixed { .. }) || c.has_erasures();
    let cap = if mixed { MAX_MIXED_QUBITS } else { MAX_PURE_QUBITS };
    if n > cap {
        return Err(Error::BudgetExceeded(format!("{n} qubits > {cap}")));
    }
    if n != c.l {
        return Err(Error::DimensionMismatch { left: c.l, right: n });
    }
    Ok(())
}

fn dfs_circuit(c: &Circuit, pos: usize, st: DenseState, prob: f64, rec: &mut Vec<u8>, out: &mut RecordDistribution) {
    let mut st = st;
    let n = st.num_qubits();
    for i in pos..c.events.len() {
        match &c.events[i] {
            Event::Gate { gate, .. } => st.apply_gate(gate).unwrap(),
            Event::Erase { qubit, .. } => st.erase(*qubit),
            Event::Measure { qubit, .. } => {
                let z = PauliString::single(n, *qubit, Letter::Z);
                for bit in 0..2u8 {
                    let mut branch = st.clone();
                    let pb = branch.project(&z, bit);
                    if pb * prob > PRUNE {
                        branch.normalize();
                        rec.push(bit);
                        dfs_circuit(c, i + 1, branch, prob * pb, rec, out);
                        rec.pop();
                    }
                }
                return;
            }
        }
    }
    *out.entry(rec.clone()).or_insert(0.0) += prob;
}

/// Exact record distribution of `c` on `initial` by branch enumeration.
pub fn enumerate_records(c: &Circuit, initial: &DenseState) -> Result<RecordDistribution> {
    check_budget(c, initial)?;
    let mut out = RecordDistribution::new();
    dfs_circuit(c, 0, initial.clone(), 1.0, &mut Vec::new(), &mut out);
    Ok(out)
}

fn dfs_paulis(ps: &[PauliString], st: DenseState, prob: f64, rec: &mut Vec<u8>, out: &mut RecordDistribution) {
    let Some((p, rest)) = ps.split_first() else {
        *out.entry(rec.clone()).or_insert(0.0) += prob;
        return;
    };
    for bit in 0..2u8 {
        let mut branch = st.clone();
        let pb = branch.project(p, bit);
        if pb * prob > PRUNE {
            branch.normalize();
            rec.push(bit);
            dfs_paulis(rest, branch, prob * pb, rec, out);
            rec.pop();
        }
    }
}

/// Record distribution of measuring the Hermitian Paulis `ps` in order.
pub fn enumerate_pauli_records(ps: &[PauliString], initial: &DenseState) -> Result<RecordDistribution> {
    if ps.len() > MAX_BRANCH_MEASUREMENTS {
        return Err(Error::BudgetExceeded(format!("{} measurements", ps.len())));
    }
    let mut out = RecordDistribution::new();
    dfs_paulis(ps, initial.clone(), 1.0, &mut Vec::new(), &mut out);
    Ok(out)
}

/// `Σ_m p^ρ_m p^σ_m / Σ_m (p^σ_m)²` evaluated from enumerated distributions.
pub fn exact_chi_dense(noisy: &Circuit, clean: &Circuit, rho: &DenseState, sigma: &DenseState) -> Result<f64> {
    let pr = enumerate_records(noisy, rho)?;
    let ps = enumerate_records(clean, sigma)?;
    Ok(chi_from_distributions(&pr, &ps))
}

pub fn chi_from_distributions(pr: &RecordDistribution, ps: &RecordDistribution) -> f64 {
    let num: f64 = pr.iter().map(|(m, p)| p * ps.get(m).copied().unwrap_or(0.0)).sum();
    let den: f64 = ps.values().map(|p| p * p).sum();
    num / den
}

pub fn total_variation(a: &RecordDistribution, b: &RecordDistribution) -> f64 {
    let mut keys: Vec<&Vec<u8>> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}
