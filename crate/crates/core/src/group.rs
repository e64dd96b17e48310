//! Signed stabilizer groups given by independent commuting generators.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::pauli::{full_mask, words_for, PauliString};

/// Data carried alongside echelon rows and combined by XOR whenever rows are
/// multiplied together.
pub trait RowPayload: Clone {
    fn xor_assign(&mut self, other: &Self);
}

impl RowPayload for () {
    fn xor_assign(&mut self, _other: &Self) {}
}

impl RowPayload for Vec<u64> {
    fn xor_assign(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a ^= b;
        }
    }
}

pub(crate) fn bitset_with(len: usize, bit: usize) -> Vec<u64> {
    let mut v = vec![0u64; words_for(len.max(1))];
    v[bit >> 6] |= 1 << (bit & 63);
    v
}

pub(crate) fn bitset_get(v: &[u64], bit: usize) -> bool {
    (v[bit >> 6] >> (bit & 63)) & 1 == 1
}

/// Incremental reduced row-echelon form over the symplectic coordinates of
/// mutually commuting Pauli strings, tracking exact phases.
///
/// Only columns selected by `mask` (a qubit mask applied to both the x and z
/// blocks) are used as pivots. Rows are kept fully reduced: no row has a bit
/// at another row's pivot.
#[derive(Clone, Debug)]
pub struct Echelon<T: RowPayload = ()> {
    n: usize,
    mask: Vec<u64>,
    rows: Vec<PauliString>,
    payloads: Vec<T>,
    pivots: Vec<usize>,
}

/// Outcome of inserting a row into an [`Echelon`].
#[derive(Clone, Debug)]
pub enum Inserted<T> {
    /// The row was independent on the masked columns and became a pivot row.
    Pivot,
    /// The row reduced to zero on the masked columns; the residual (with its
    /// accumulated payload) is returned.
    Reduced(PauliString, T),
}

impl<T: RowPayload> Echelon<T> {
    pub fn new(n: usize) -> Self {
        Self::with_mask(n, full_mask(n))
    }

    pub fn with_mask(n: usize, mask: Vec<u64>) -> Self {
        Echelon { n, mask, rows: Vec::new(), payloads: Vec::new(), pivots: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[PauliString] {
        &self.rows
    }

    pub fn payloads(&self) -> &[T] {
        &self.payloads
    }

    /// Multiply `p` by pivot rows until it has no bit on any pivot column.
    /// The product is accumulated on the right: `p ← p · row`.
    pub fn reduce(&self, p: &mut PauliString, payload: &mut T) {
        for ((row, pl), &piv) in self.rows.iter().zip(&self.payloads).zip(&self.pivots) {
            if p.sym_bit(piv) {
                p.mul_assign_unchecked(row);
                payload.xor_assign(pl);
            }
        }
    }

    pub fn insert(&mut self, mut p: PauliString, mut payload: T) -> Inserted<T> {
        debug_assert_eq!(p.num_qubits(), self.n);
        self.reduce(&mut p, &mut payload);
        match p.lowest_sym_bit_masked(&self.mask) {
            None => Inserted::Reduced(p, payload),
            Some(piv) => {
                for i in 0..self.rows.len() {
                    if self.rows[i].sym_bit(piv) {
                        self.rows[i].mul_assign_unchecked(&p);
                        self.payloads[i].xor_assign(&payload);
                    }
                }
                self.rows.push(p);
                self.payloads.push(payload);
                self.pivots.push(piv);
                Inserted::Pivot
            }
        }
    }
}

/// Result of a signed membership query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    NotMember,
    /// `p = sign · g` for some element `g` of the group.
    Member(i8),
}

/// Size of the intersection of two signed stabilizer groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Intersection {
    /// log2 of the number of signed elements common to both groups.
    pub log2_count: usize,
    /// Some Pauli appears in both groups with opposite signs.
    pub contradiction: bool,
}

impl Intersection {
    /// `tr[ρ_a ρ_b]` as a power of two, `None` when it vanishes.
    pub fn log2_trace_overlap(&self, n: usize) -> Option<i64> {
        if self.contradiction {
            None
        } else {
            Some(self.log2_count as i64 - n as i64)
        }
    }

    pub fn trace_overlap(&self, n: usize) -> f64 {
        self.log2_trace_overlap(n).map_or(0.0, |e| 2f64.powi(e as i32))
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorSet {
    n: usize,
    generators: Vec<PauliString>,
    echelon: OnceLock<Echelon>,
}

impl PartialEq for GeneratorSet {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.generators == other.generators
    }
}

impl GeneratorSet {
    /// Validated constructor: every generator must be Hermitian, pairwise
    /// commuting and independent of the others.
    pub fn new(n: usize, generators: Vec<PauliString>) -> Result<Self> {
        for g in &generators {
            if g.num_qubits() != n {
                return Err(Error::DimensionMismatch { left: n, right: g.num_qubits() });
            }
            if !g.is_hermitian() {
                return Err(Error::NonHermitian { phase: g.phase() });
            }
        }
        for i in 0..generators.len() {
            for j in 0..i {
                if generators[i].anticommutes_unchecked(&generators[j]) {
                    return Err(Error::NonCommuting(j, i));
                }
            }
        }
        let mut ech = Echelon::new(n);
        for (i, g) in generators.iter().enumerate() {
            if let Inserted::Reduced(..) = ech.insert(g.clone(), ()) {
                return Err(Error::Dependent(i));
            }
        }
        let set = GeneratorSet { n, generators, echelon: OnceLock::new() };
        let _ = set.echelon.set(ech);
        Ok(set)
    }

    /// Caller guarantees the generator invariants.
    pub(crate) fn new_unchecked(n: usize, generators: Vec<PauliString>) -> Self {
        GeneratorSet { n, generators, echelon: OnceLock::new() }
    }

    pub fn empty(n: usize) -> Self {
        Self::new_unchecked(n, Vec::new())
    }

    /// `⟨+Z_0, …, +Z_{n-1}⟩`.
    pub fn all_zero(n: usize) -> Self {
        let gens = (0..n).map(|q| PauliString::single(n, q, crate::pauli::Letter::Z)).collect();
        Self::new_unchecked(n, gens)
    }

    /// `⟨+X_0, …, +X_{n-1}⟩`.
    pub fn all_plus(n: usize) -> Self {
        let gens = (0..n).map(|q| PauliString::single(n, q, crate::pauli::Letter::X)).collect();
        Self::new_unchecked(n, gens)
    }

    pub fn from_literals(literals: &[&str]) -> Result<Self> {
        let gens = literals.iter().map(|s| s.parse()).collect::<Result<Vec<PauliString>>>()?;
        let n = gens.first().map_or(0, |g| g.num_qubits());
        Self::new(n, gens)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn into_generators(self) -> Vec<PauliString> {
        self.generators
    }

    pub(crate) fn generators_mut(&mut self) -> &mut Vec<PauliString> {
        self.echelon = OnceLock::new();
        &mut self.generators
    }

    pub(crate) fn echelon(&self) -> &Echelon {
        self.echelon.get_or_init(|| {
            let mut ech = Echelon::new(self.n);
            for g in &self.generators {
                ech.insert(g.clone(), ());
            }
            ech
        })
    }

    fn check_dim(&self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch { left: self.n, right: p.num_qubits() });
        }
        Ok(())
    }

    pub fn membership(&self, p: &PauliString) -> Result<Membership> {
        self.check_dim(p)?;
        if !p.is_hermitian() {
            return Err(Error::NonHermitian { phase: p.phase() });
        }
        let mut r = p.clone();
        self.echelon().reduce(&mut r, &mut ());
        if !r.is_identity_letters() {
            return Ok(Membership::NotMember);
        }
        // p · R = i^k I with R a group element, hence p = i^k R
        Ok(match r.phase() {
            0 => Membership::Member(1),
            2 => Membership::Member(-1),
            k => unreachable!("product of commuting Hermitian Paulis has phase i^{k}"),
        })
    }

    /// True when `±p` lies in the group.
    pub fn contains_unsigned(&self, p: &PauliString) -> Result<bool> {
        self.check_dim(p)?;
        let mut r = p.clone();
        self.echelon().reduce(&mut r, &mut ());
        Ok(r.is_identity_letters())
    }

    /// Equality of the generated signed groups (generator lists may differ).
    pub fn same_group(&self, other: &GeneratorSet) -> bool {
        self.n == other.n
            && self.len() == other.len()
            && other.generators.iter().all(|g| matches!(self.membership(g), Ok(Membership::Member(1))))
    }

    pub fn commutes_with_all(&self, p: &PauliString) -> bool {
        self.generators.iter().all(|g| !g.anticommutes_unchecked(p))
    }

    /// Generators of the subgroup commuting with `p`, obtained by multiplying
    /// every anticommuting generator by the first anticommuting one and then
    /// dropping it. Returns `false` (and leaves the set untouched) when every
    /// generator already commutes with `p`.
    pub fn dephase(&mut self, p: &PauliString) -> Result<bool> {
        self.check_dim(p)?;
        let anti: Vec<usize> = (0..self.generators.len())
            .filter(|&i| self.generators[i].anticommutes_unchecked(p))
            .collect();
        let Some((&first, rest)) = anti.split_first() else {
            return Ok(false);
        };
        let pivot = self.generators[first].clone();
        let gens = self.generators_mut();
        for &i in rest {
            gens[i].mul_assign_unchecked(&pivot);
        }
        gens.remove(first);
        Ok(true)
    }

    /// Stabilizer group of the reduced state on `region` (in the given order):
    /// the elements supported inside the region, restricted to it.
    pub fn reduced(&self, region: &[usize]) -> Result<GeneratorSet> {
        let mut inside = vec![0u64; words_for(self.n)];
        for &q in region {
            if q >= self.n {
                return Err(Error::QubitOutOfRange { qubit: q, n: self.n });
            }
            inside[q >> 6] |= 1 << (q & 63);
        }
        let full = full_mask(self.n);
        let outside: Vec<u64> = full.iter().zip(&inside).map(|(f, i)| f & !i).collect();
        let mut ech: Echelon = Echelon::with_mask(self.n, outside);
        let mut local = Vec::new();
        for g in &self.generators {
            if let Inserted::Reduced(r, ()) = ech.insert(g.clone(), ()) {
                local.push(r);
            }
        }
        // local rows may still carry bits on pivot-free outside columns only if
        // they were reducible, which cannot happen; they are supported on the region
        let restricted = local.iter().map(|r| r.restrict(region)).collect();
        Ok(GeneratorSet::new_unchecked(region.len(), restricted))
    }

    /// Render as one Pauli literal per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for g in &self.generators {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }
}

/// `|S_a ∩ S_b|` for two signed stabilizer groups on the same qubits.
pub fn group_intersection_size(a: &GeneratorSet, b: &GeneratorSet) -> Result<Intersection> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { left: a.n, right: b.n });
    }
    let da = a.len();
    let total = da + b.len();
    // Elimination tracking which inputs make up each row; the phases are
    // recomputed from the combinations since a- and b-generators need not commute.
    let mut pivots: Vec<(PauliString, Vec<u64>, usize)> = Vec::new();
    let mut kernel: Vec<Vec<u64>> = Vec::new();
    for (idx, g) in a.generators.iter().chain(&b.generators).enumerate() {
        let mut r = g.clone();
        let mut combo = bitset_with(total, idx);
        for (row, c, piv) in &pivots {
            if r.sym_bit(*piv) {
                r.mul_assign_unchecked(row);
                combo.xor_assign(c);
            }
        }
        match r.lowest_sym_bit() {
            None => kernel.push(combo),
            Some(piv) => {
                for (row, c, _) in pivots.iter_mut() {
                    if row.sym_bit(piv) {
                        row.mul_assign_unchecked(&r);
                        c.xor_assign(&combo);
                    }
                }
                pivots.push((r, combo, piv));
            }
        }
    }
    let mut contradiction = false;
    for combo in &kernel {
        let mut ga = PauliString::identity(a.n);
        let mut gb = PauliString::identity(a.n);
        for i in 0..total {
            if bitset_get(combo, i) {
                if i < da {
                    ga.mul_assign_unchecked(&a.generators[i]);
                } else {
                    gb.mul_assign_unchecked(&b.generators[i - da]);
                }
            }
        }
        debug_assert!(ga.same_letters(&gb));
        if ga.phase() != gb.phase() {
            contradiction = true;
            break;
        }
    }
    let dim = kernel.len();
    Ok(Intersection {
        log2_count: if contradiction { dim - 1 } else { dim },
        contradiction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn membership_examples() {
        let g = GeneratorSet::from_literals(&["+ZI", "+IZ"]).unwrap();
        assert_eq!(g.membership(&p("ZZ")).unwrap(), Membership::Member(1));
        let g = GeneratorSet::from_literals(&["+Z"]).unwrap();
        assert_eq!(g.membership(&p("X")).unwrap(), Membership::NotMember);
        let g = GeneratorSet::from_literals(&["-ZI", "+IZ"]).unwrap();
        assert_eq!(g.membership(&p("ZZ")).unwrap(), Membership::Member(-1));
        assert_eq!(g.membership(&p("-ZZ")).unwrap(), Membership::Member(1));
    }

    #[test]
    fn membership_with_y_phases() {
        // XX · ZZ = -YY
        let g = GeneratorSet::from_literals(&["+XX", "+ZZ"]).unwrap();
        assert_eq!(g.membership(&p("YY")).unwrap(), Membership::Member(-1));
        assert!(g.membership(&p("+iXX")).is_err());
    }

    #[test]
    fn validation() {
        assert!(matches!(GeneratorSet::from_literals(&["X", "Z"]), Err(Error::NonCommuting(0, 1))));
        assert!(matches!(
            GeneratorSet::from_literals(&["XX", "ZZ", "-YY"]),
            Err(Error::Dependent(2))
        ));
        assert!(matches!(GeneratorSet::from_literals(&["+iX"]), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn intersection_examples() {
        let a = GeneratorSet::all_zero(3);
        let r = group_intersection_size(&a, &a).unwrap();
        assert_eq!(r, Intersection { log2_count: 3, contradiction: false });
        let a = GeneratorSet::from_literals(&["+Z"]).unwrap();
        let b = GeneratorSet::from_literals(&["-Z"]).unwrap();
        let r = group_intersection_size(&a, &b).unwrap();
        assert!(r.contradiction);
        assert_eq!(r.trace_overlap(1), 0.0);
    }

    #[test]
    fn dephase_examples() {
        let mut g = GeneratorSet::from_literals(&["+X"]).unwrap();
        assert!(g.dephase(&p("Z")).unwrap());
        assert!(g.is_empty());
        let mut g = GeneratorSet::from_literals(&["+Z"]).unwrap();
        assert!(!g.dephase(&p("Z")).unwrap());
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn reduced_examples() {
        let g = GeneratorSet::from_literals(&["+ZI", "+IZ"]).unwrap();
        let r = g.reduced(&[1]).unwrap();
        assert_eq!(r.generators(), &[p("+Z")]);
        let bell = GeneratorSet::from_literals(&["XX", "ZZ"]).unwrap();
        assert!(bell.reduced(&[0]).unwrap().is_empty());
    }
}
