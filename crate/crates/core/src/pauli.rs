//! Bit-packed Pauli strings.
//!
//! A Pauli string on `n` qubits is stored as two packed bit-vectors `x` and `z`
//! plus a phase exponent `k` so that the operator is `i^k ⊗_q P_q`, where the
//! per-qubit letter is `I` for `(0,0)`, `X` for `(1,0)`, `Z` for `(0,1)` and `Y`
//! for `(1,1)`. With this convention every letter is Hermitian, so a string is
//! Hermitian exactly when `k ∈ {0, 2}`.
//!
//! Textual literal: an optional sign (`+`/`-`) followed by one of `IXYZ` per
//! qubit, character `k` being qubit `k` (e.g. `-XIZY`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    #[inline]
    pub fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    #[inline]
    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'I' | '_' | '.' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }
}

#[inline]
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Phase exponent (mod 4) picked up by the word-parallel product of two
/// letter blocks, i.e. `P(x1,z1) · P(x2,z2) = i^g P(x1^x2, z1^z2)` summed over
/// the bits of one word.
#[inline]
pub(crate) fn product_phase_word(x1: u64, z1: u64, x2: u64, z2: u64) -> u32 {
    let a_x = x1 & !z1;
    let a_y = x1 & z1;
    let a_z = !x1 & z1;
    let b_x = x2 & !z2;
    let b_y = x2 & z2;
    let b_z = !x2 & z2;
    let plus = (a_x & b_y) | (a_y & b_z) | (a_z & b_x);
    let minus = (a_x & b_z) | (a_y & b_x) | (a_z & b_y);
    // minus contributes -1 ≡ +3 (mod 4)
    plus.count_ones() + 3 * minus.count_ones()
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString { n, x: vec![0; w], z: vec![0; w], phase: 0 }
    }

    /// A single-letter operator `letter` on `qubit`.
    pub fn single(n: usize, qubit: usize, letter: Letter) -> Self {
        let mut p = Self::identity(n);
        p.set_letter(qubit, letter);
        p
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut p = Self::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set_letter(q, l);
        }
        p
    }

    /// Build from sparse `(qubit, letter)` pairs.
    pub fn from_sparse(n: usize, terms: &[(usize, Letter)]) -> Result<Self> {
        let mut p = Self::identity(n);
        for &(q, l) in terms {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            p.set_letter(q, l);
        }
        Ok(p)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn phase(&self) -> u8 {
        self.phase
    }

    #[inline]
    pub fn set_phase(&mut self, phase: u8) {
        self.phase = phase & 3;
    }

    #[inline]
    pub fn is_hermitian(&self) -> bool {
        self.phase & 1 == 0
    }

    /// `Some(+1)` or `Some(-1)` for Hermitian strings.
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    /// Sign bit of a Hermitian string: `true` for `-1`.
    #[inline]
    pub fn sign_bit(&self) -> bool {
        self.phase == 2
    }

    pub fn negate(&mut self) {
        self.phase = (self.phase + 2) & 3;
    }

    pub fn negated(mut self) -> Self {
        self.negate();
        self
    }

    pub fn with_sign_bit(mut self, negative: bool) -> Self {
        self.phase = if negative { 2 } else { 0 };
        self
    }

    #[inline]
    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    #[inline]
    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    #[inline]
    pub fn x_bit(&self, q: usize) -> bool {
        (self.x[q >> 6] >> (q & 63)) & 1 == 1
    }

    #[inline]
    pub fn z_bit(&self, q: usize) -> bool {
        (self.z[q >> 6] >> (q & 63)) & 1 == 1
    }

    #[inline]
    pub fn letter(&self, q: usize) -> Letter {
        Letter::from_bits(self.x_bit(q), self.z_bit(q))
    }

    #[inline]
    pub fn set_letter(&mut self, q: usize, letter: Letter) {
        let (xb, zb) = letter.bits();
        let m = 1u64 << (q & 63);
        let w = q >> 6;
        if xb {
            self.x[w] |= m;
        } else {
            self.x[w] &= !m;
        }
        if zb {
            self.z[w] |= m;
        } else {
            self.z[w] &= !m;
        }
    }

    /// True when every letter is `I` (the phase is ignored).
    pub fn is_identity_letters(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(a, b)| (a | b).count_ones() as usize).sum()
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, (a, b)) in self.x.iter().zip(&self.z).enumerate() {
            let mut m = a | b;
            while m != 0 {
                let t = m.trailing_zeros() as usize;
                out.push(wi * 64 + t);
                m &= m - 1;
            }
        }
        out
    }

    /// Same letters (phases may differ).
    pub fn same_letters(&self, other: &PauliString) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    fn check_dim(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    /// Exact product `self · other`.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        self.check_dim(other)?;
        let mut out = self.clone();
        out.mul_assign_unchecked(other);
        Ok(out)
    }

    /// `self ← self · other` without a dimension check.
    #[inline]
    pub(crate) fn mul_assign_unchecked(&mut self, other: &PauliString) {
        let mut acc = self.phase as u32 + other.phase as u32;
        for i in 0..self.x.len() {
            acc += product_phase_word(self.x[i], self.z[i], other.x[i], other.z[i]);
            self.x[i] ^= other.x[i];
            self.z[i] ^= other.z[i];
        }
        self.phase = (acc & 3) as u8;
    }

    pub fn mul_assign(&mut self, other: &PauliString) -> Result<()> {
        self.check_dim(other)?;
        self.mul_assign_unchecked(other);
        Ok(())
    }

    #[inline]
    pub(crate) fn anticommutes_unchecked(&self, other: &PauliString) -> bool {
        let mut acc = 0u64;
        for i in 0..self.x.len() {
            acc ^= (self.x[i] & other.z[i]) ^ (self.z[i] & other.x[i]);
        }
        acc.count_ones() & 1 == 1
    }

    /// Symplectic commutation test; the phase plays no role.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_dim(other)?;
        Ok(!self.anticommutes_unchecked(other))
    }

    /// Restrict to the listed qubits (in that order), keeping the phase.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut out = PauliString::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            out.set_letter(i, self.letter(q));
        }
        out.phase = self.phase;
        out
    }

    /// Embed into `n` qubits placing qubit `i` of `self` on `positions[i]`.
    pub fn embed(&self, n: usize, positions: &[usize]) -> Result<PauliString> {
        if positions.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: positions.len() });
        }
        let mut out = PauliString::identity(n);
        for (i, &q) in positions.iter().enumerate() {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            out.set_letter(q, self.letter(i));
        }
        out.phase = self.phase;
        Ok(out)
    }

    /// Bit `pos` of the `2n`-long symplectic vector (x bits first, then z bits).
    #[inline]
    pub(crate) fn sym_bit(&self, pos: usize) -> bool {
        if pos < self.n {
            self.x_bit(pos)
        } else {
            self.z_bit(pos - self.n)
        }
    }

    /// Lowest set position of the symplectic vector restricted to qubits in `mask`
    /// (x block first, then z block).
    pub(crate) fn lowest_sym_bit_masked(&self, mask: &[u64]) -> Option<usize> {
        for (i, (&w, &m)) in self.x.iter().zip(mask).enumerate() {
            let v = w & m;
            if v != 0 {
                return Some(i * 64 + v.trailing_zeros() as usize);
            }
        }
        for (i, (&w, &m)) in self.z.iter().zip(mask).enumerate() {
            let v = w & m;
            if v != 0 {
                return Some(self.n + i * 64 + v.trailing_zeros() as usize);
            }
        }
        None
    }

    pub(crate) fn lowest_sym_bit(&self) -> Option<usize> {
        let full = full_mask(self.n);
        self.lowest_sym_bit_masked(&full)
    }
}

pub(crate) fn full_mask(n: usize) -> Vec<u64> {
    let w = words_for(n);
    let mut m = vec![u64::MAX; w];
    if n % 64 != 0 {
        m[w - 1] = (1u64 << (n % 64)) - 1;
    }
    m
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for q in 0..self.n {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else {
            (0, s)
        };
        let letters = body
            .chars()
            .map(|c| {
                Letter::from_char(c).ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("invalid Pauli character {c:?} in {s:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = PauliString::from_letters(&letters);
        p.phase = phase;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn xz_is_minus_i_y() {
        let r = p("XI").mul(&p("ZI")).unwrap();
        assert_eq!(r.phase(), 3);
        assert!(r.same_letters(&p("YI")));
    }

    #[test]
    fn identity_is_neutral() {
        let a = p("-XYZI");
        assert_eq!(a.mul(&PauliString::identity(4)).unwrap(), a);
        assert_eq!(PauliString::identity(4).mul(&a).unwrap(), a);
    }

    #[test]
    fn single_qubit_table() {
        // XY = iZ, YZ = iX, ZX = iY and the reverses.
        assert_eq!(p("X").mul(&p("Y")).unwrap(), p("+iZ"));
        assert_eq!(p("Y").mul(&p("Z")).unwrap(), p("+iX"));
        assert_eq!(p("Z").mul(&p("X")).unwrap(), p("+iY"));
        assert_eq!(p("Y").mul(&p("X")).unwrap(), p("-iZ"));
        assert_eq!(p("Y").mul(&p("Y")).unwrap(), p("I"));
    }

    #[test]
    fn commutation_basics() {
        assert!(!p("X").commutes(&p("Z")).unwrap());
        assert!(p("XX").commutes(&p("ZZ")).unwrap());
        assert!(p("-XX").commutes(&p("+iZZ")).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(p("XX").mul(&p("X")), Err(Error::DimensionMismatch { .. })));
        assert!(p("XX").commutes(&p("X")).is_err());
    }

    #[test]
    fn literal_round_trip() {
        for s in ["+XIZY", "-ZZ", "+iX", "-iYY", "+"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert_eq!(p("XZ").to_string(), "+XZ");
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn wide_strings_cross_words() {
        let n = 130;
        let mut a = PauliString::identity(n);
        a.set_letter(0, Letter::X);
        a.set_letter(129, Letter::Z);
        let b = PauliString::single(n, 129, Letter::X);
        assert!(!a.commutes(&b).unwrap());
        assert_eq!(a.support(), vec![0, 129]);
        let c = a.mul(&b).unwrap();
        assert_eq!(c.letter(129), Letter::Y);
        assert_eq!(c.phase(), 1); // Z X = iY
    }
}
