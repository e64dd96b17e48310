//! Bit-sliced stabilizer tableau for mixed states.
//!
//! The tableau holds a full symplectic basis of `2n` rows: destabilizers
//! `D_0..D_{n-1}` (rows `0..n`) and stabilizer slots `S_0..S_{n-1}` (rows
//! `n..2n`). `D_i` anticommutes with `S_i` and commutes with every other row.
//! A pair is *active* when `S_i` is a generator of the state's stabilizer group;
//! an inactive pair is a logical pair whose two rows are not in the group.
//! The state is `2^{-n} Σ_{g ∈ ⟨S_i : i active⟩} g`.
//!
//! Storage is column major: for each qubit a packed column of x bits and of z
//! bits over the `2n` rows, so gates touch `O(n/64)` words per qubit.

use crate::clifford::{CliffordGate, Support};
use crate::error::{Error, Result};
use crate::group::GeneratorSet;
use crate::pauli::{Letter, PauliString};
use crate::rng::BitSource;
use crate::stabilizer::Forced;

/// How a measurement outcome is chosen when it is not deterministic.
pub enum Draw<'a> {
    Random(&'a mut dyn BitSource),
    Forced(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Deterministic(u8),
    Random(u8),
    /// A forced outcome of probability zero; the state is unchanged.
    Contradiction,
}

impl Outcome {
    pub fn bit(&self) -> Option<u8> {
        match *self {
            Outcome::Deterministic(b) | Outcome::Random(b) => Some(b),
            Outcome::Contradiction => None,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, Outcome::Random(_))
    }
}

#[inline]
fn prefix_xor(mut t: u64) -> u64 {
    t ^= t << 1;
    t ^= t << 2;
    t ^= t << 4;
    t ^= t << 8;
    t ^= t << 16;
    t ^= t << 32;
    t
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tableau {
    n: usize,
    w: usize,
    xs: Vec<u64>,
    zs: Vec<u64>,
    sign: Vec<u64>,
    /// Row mask of active stabilizer slots.
    active: Vec<u64>,
    /// Row mask of both rows of every inactive pair.
    logical: Vec<u64>,
}

impl Tableau {
    fn blank(n: usize) -> Self {
        let w = (2 * n).div_ceil(64).max(1);
        Tableau {
            n,
            w,
            xs: vec![0; n * w],
            zs: vec![0; n * w],
            sign: vec![0; w],
            active: vec![0; w],
            logical: vec![0; w],
        }
    }

    #[inline]
    fn set_bit(v: &mut [u64], r: usize, on: bool) {
        let m = 1u64 << (r & 63);
        if on {
            v[r >> 6] |= m;
        } else {
            v[r >> 6] &= !m;
        }
    }

    #[inline]
    fn get_bit(v: &[u64], r: usize) -> bool {
        (v[r >> 6] >> (r & 63)) & 1 == 1
    }

    #[inline]
    fn xbit(&self, q: usize, r: usize) -> bool {
        Self::get_bit(&self.xs[q * self.w..(q + 1) * self.w], r)
    }

    #[inline]
    fn zbit(&self, q: usize, r: usize) -> bool {
        Self::get_bit(&self.zs[q * self.w..(q + 1) * self.w], r)
    }

    fn set_row_letter(&mut self, q: usize, r: usize, l: Letter) {
        let (x, z) = l.bits();
        let w = self.w;
        Self::set_bit(&mut self.xs[q * w..(q + 1) * w], r, x);
        Self::set_bit(&mut self.zs[q * w..(q + 1) * w], r, z);
    }

    fn set_pair_active(&mut self, i: usize, on: bool) {
        let n = self.n;
        Self::set_bit(&mut self.active, n + i, on);
        Self::set_bit(&mut self.logical, i, !on);
        Self::set_bit(&mut self.logical, n + i, !on);
    }

    /// Standard basis pairs `D_i = X_i`, `S_i = Z_i`, all active or all inactive.
    fn computational(n: usize, active: bool) -> Self {
        let mut t = Self::blank(n);
        for q in 0..n {
            t.set_row_letter(q, q, Letter::X);
            t.set_row_letter(q, n + q, Letter::Z);
            t.set_pair_active(q, active);
        }
        t
    }

    pub fn all_zero(n: usize) -> Self {
        Self::computational(n, true)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self::computational(n, false)
    }

    pub fn all_plus(n: usize) -> Self {
        let mut t = Self::blank(n);
        for q in 0..n {
            t.set_row_letter(q, q, Letter::Z);
            t.set_row_letter(q, n + q, Letter::X);
            t.set_pair_active(q, true);
        }
        t
    }

    /// Build from a validated generator set by completing it to a symplectic
    /// basis.
    pub fn from_group(group: &GeneratorSet) -> Self {
        let n = group.num_qubits();
        let d = group.len();
        let mut pool: Vec<PauliString> = group.generators().to_vec();
        for q in 0..n {
            pool.push(PauliString::single(n, q, Letter::X));
            pool.push(PauliString::single(n, q, Letter::Z));
        }
        // (destabilizer, stabilizer, active)
        let mut pairs: Vec<(PauliString, PauliString, bool)> = Vec::with_capacity(n);
        let mut i = 0;
        while i < pool.len() {
            let u = pool[i].clone();
            if u.is_identity_letters() {
                i += 1;
                continue;
            }
            let Some(j) = (i + 1..pool.len()).find(|&j| pool[j].anticommutes_unchecked(&u)) else {
                unreachable!("symplectic completion ran out of partners");
            };
            let v = pool[j].clone();
            for k in i + 1..pool.len() {
                if k == j {
                    continue;
                }
                let anti_u = pool[k].anticommutes_unchecked(&u);
                let anti_v = pool[k].anticommutes_unchecked(&v);
                if anti_v {
                    pool[k].mul_assign_unchecked(&u);
                }
                if anti_u {
                    pool[k].mul_assign_unchecked(&v);
                }
                if k >= d {
                    // signs of non-generator rows carry no meaning
                    pool[k].set_phase(0);
                }
            }
            pool[j] = PauliString::identity(n);
            let v = v.with_sign_bit(false);
            if i < d {
                pairs.push((v, u, true));
            } else {
                pairs.push((u.with_sign_bit(false), v, false));
            }
            i += 1;
        }
        debug_assert_eq!(pairs.len(), n);
        let mut t = Self::blank(n);
        for (k, (dst, stab, act)) in pairs.into_iter().enumerate() {
            t.load_row(k, &dst);
            t.load_row(n + k, &stab);
            t.set_pair_active(k, act);
        }
        t
    }

    fn load_row(&mut self, r: usize, p: &PauliString) {
        for q in 0..self.n {
            self.set_row_letter(q, r, p.letter(q));
        }
        Self::set_bit(&mut self.sign, r, p.sign_bit());
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.active.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Row `r` as a signed Pauli string.
    pub fn row(&self, r: usize) -> PauliString {
        let mut p = PauliString::identity(self.n);
        for q in 0..self.n {
            p.set_letter(q, Letter::from_bits(self.xbit(q, r), self.zbit(q, r)));
        }
        p.with_sign_bit(Self::get_bit(&self.sign, r))
    }

    /// Generators of the stabilizer group (active slots in pair order).
    pub fn group(&self) -> GeneratorSet {
        let gens = (0..self.n)
            .filter(|&i| Self::get_bit(&self.active, self.n + i))
            .map(|i| self.row(self.n + i))
            .collect();
        GeneratorSet::new_unchecked(self.n, gens)
    }

    /// Tensor product `a ⊗ b` with `a` on the first qubits.
    pub fn tensor(a: &Tableau, b: &Tableau) -> Tableau {
        let n = a.n + b.n;
        let mut t = Self::blank(n);
        for (src, off) in [(a, 0usize), (b, a.n)] {
            for i in 0..src.n {
                for (sr, dr) in [(i, off + i), (src.n + i, n + off + i)] {
                    for q in 0..src.n {
                        let l = Letter::from_bits(src.xbit(q, sr), src.zbit(q, sr));
                        t.set_row_letter(off + q, dr, l);
                    }
                    Self::set_bit(&mut t.sign, dr, Self::get_bit(&src.sign, sr));
                }
                t.set_pair_active(off + i, Self::get_bit(&src.active, src.n + i));
            }
        }
        t
    }

    pub fn apply_gate(&mut self, gate: &CliffordGate) -> Result<()> {
        gate.check_range(self.n)?;
        self.apply_gate_unchecked(gate);
        Ok(())
    }

    #[inline]
    pub fn apply_gate_unchecked(&mut self, gate: &CliffordGate) {
        let w = self.w;
        let lin = gate.action.linear_masks();
        let anf = gate.action.sign_anf();
        match gate.support {
            Support::One(a) => {
                for k in 0..w {
                    let inp = [self.xs[a * w + k], self.zs[a * w + k]];
                    let mut out = [0u64; 2];
                    for (o, &m) in out.iter_mut().zip(&lin) {
                        for (i, &v) in inp.iter().enumerate() {
                            if (m >> i) & 1 == 1 {
                                *o ^= v;
                            }
                        }
                    }
                    let mut s = 0u64;
                    let mut mons = anf;
                    while mons != 0 {
                        let sub = mons.trailing_zeros() as usize;
                        mons &= mons - 1;
                        let mut term = u64::MAX;
                        for (i, &v) in inp.iter().enumerate() {
                            if (sub >> i) & 1 == 1 {
                                term &= v;
                            }
                        }
                        s ^= term;
                    }
                    self.xs[a * w + k] = out[0];
                    self.zs[a * w + k] = out[1];
                    self.sign[k] ^= s;
                }
            }
            Support::Two(a, b) => {
                for k in 0..w {
                    let inp = [
                        self.xs[a * w + k],
                        self.zs[a * w + k],
                        self.xs[b * w + k],
                        self.zs[b * w + k],
                    ];
                    let mut out = [0u64; 4];
                    for (o, &m) in out.iter_mut().zip(&lin) {
                        for (i, &v) in inp.iter().enumerate() {
                            if (m >> i) & 1 == 1 {
                                *o ^= v;
                            }
                        }
                    }
                    let mut s = 0u64;
                    let mut mons = anf;
                    while mons != 0 {
                        let sub = mons.trailing_zeros() as usize;
                        mons &= mons - 1;
                        let mut term = u64::MAX;
                        for (i, &v) in inp.iter().enumerate() {
                            if (sub >> i) & 1 == 1 {
                                term &= v;
                            }
                        }
                        s ^= term;
                    }
                    self.xs[a * w + k] = out[0];
                    self.zs[a * w + k] = out[1];
                    self.xs[b * w + k] = out[2];
                    self.zs[b * w + k] = out[3];
                    self.sign[k] ^= s;
                }
            }
        }
        // rows beyond 2n stay zero: every output is a XOR/AND of zero bits there
    }

    /// Rows anticommuting with the sparse Pauli `terms`.
    fn anti_mask(&self, terms: &[(usize, Letter)]) -> Vec<u64> {
        let w = self.w;
        let mut m = vec![0u64; w];
        for &(q, l) in terms {
            let xc = &self.xs[q * w..(q + 1) * w];
            let zc = &self.zs[q * w..(q + 1) * w];
            match l {
                Letter::I => {}
                Letter::X => m.iter_mut().zip(zc).for_each(|(a, b)| *a ^= b),
                Letter::Z => m.iter_mut().zip(xc).for_each(|(a, b)| *a ^= b),
                Letter::Y => {
                    m.iter_mut().zip(xc.iter().zip(zc)).for_each(|(a, (x, z))| *a ^= x ^ z)
                }
            }
        }
        m
    }

    fn first_set(mask: &[u64]) -> Option<usize> {
        mask.iter()
            .enumerate()
            .find(|(_, &v)| v != 0)
            .map(|(i, v)| i * 64 + v.trailing_zeros() as usize)
    }

    /// `r ← r · row_p` for every row `r` in `targets` (which must commute with
    /// row `p`), with exact sign tracking.
    fn rowmul_masked(&mut self, targets: &[u64], p: usize) {
        let w = self.w;
        let (pw, pb) = (p >> 6, p & 63);
        let mut c0 = vec![0u64; w];
        let mut c1 = vec![0u64; w];
        for q in 0..self.n {
            let base = q * w;
            let xp = (self.xs[base + pw] >> pb) & 1 == 1;
            let zp = (self.zs[base + pw] >> pb) & 1 == 1;
            if !xp && !zp {
                continue;
            }
            for k in 0..w {
                let m = targets[k];
                if m == 0 {
                    continue;
                }
                let xr = self.xs[base + k];
                let zr = self.zs[base + k];
                // phase of (row letter) · (pivot letter)
                let (plus, minus) = match (xp, zp) {
                    (true, false) => (zr & !xr, xr & zr),
                    (true, true) => (xr & !zr, !xr & zr),
                    _ => (xr & zr, xr & !zr),
                };
                let plus = plus & m;
                let minus = minus & m;
                c1[k] ^= c0[k] & plus;
                c0[k] ^= plus;
                c0[k] ^= minus;
                c1[k] ^= c0[k] & minus;
                if xp {
                    self.xs[base + k] ^= m;
                }
                if zp {
                    self.zs[base + k] ^= m;
                }
            }
        }
        let sp = if Self::get_bit(&self.sign, p) { u64::MAX } else { 0 };
        for k in 0..w {
            debug_assert_eq!(c0[k] & targets[k], 0, "row product is not Hermitian");
            self.sign[k] ^= (c1[k] ^ sp) & targets[k];
        }
    }

    fn copy_row(&mut self, src: usize, dst: usize) {
        let w = self.w;
        for q in 0..self.n {
            let x = self.xbit(q, src);
            let z = self.zbit(q, src);
            Self::set_bit(&mut self.xs[q * w..(q + 1) * w], dst, x);
            Self::set_bit(&mut self.zs[q * w..(q + 1) * w], dst, z);
        }
        let s = Self::get_bit(&self.sign, src);
        Self::set_bit(&mut self.sign, dst, s);
    }

    fn set_row_sparse(&mut self, r: usize, terms: &[(usize, Letter)], negative: bool) {
        let w = self.w;
        for q in 0..self.n {
            Self::set_bit(&mut self.xs[q * w..(q + 1) * w], r, false);
            Self::set_bit(&mut self.zs[q * w..(q + 1) * w], r, false);
        }
        for &(q, l) in terms {
            self.set_row_letter(q, r, l);
        }
        Self::set_bit(&mut self.sign, r, negative);
    }

    /// Sign bit of the product of the rows in `rows` (all pairwise commuting),
    /// returned as the phase exponent mod 4 relative to the plain letters.
    fn product_phase(&self, rows: &[u64]) -> u32 {
        let w = self.w;
        let mut total: u32 = 0;
        for k in 0..w {
            total += 2 * (self.sign[k] & rows[k]).count_ones();
        }
        for q in 0..self.n {
            let base = q * w;
            let mut xz = 0u32;
            let mut pairs = 0u32;
            let mut carry = 0u64;
            let mut xpar = 0u32;
            let mut zpar = 0u32;
            for k in 0..w {
                let xt = self.xs[base + k] & rows[k];
                let zt = self.zs[base + k] & rows[k];
                if xt == 0 && zt == 0 {
                    continue;
                }
                xz += (xt & zt).count_ones();
                let excl = prefix_xor(zt) ^ zt ^ carry;
                pairs += (excl & xt).count_ones();
                if zt.count_ones() & 1 == 1 {
                    carry = !carry;
                }
                xpar += xt.count_ones();
                zpar += zt.count_ones();
            }
            let xl = xpar & 1;
            let zl = zpar & 1;
            total += xz + 2 * (pairs & 1) + 3 * (xl & zl);
        }
        total & 3
    }

    /// Measure `(-1)^negative · ⊗ terms` (qubits distinct).
    pub fn measure_sparse(&mut self, terms: &[(usize, Letter)], negative: bool, draw: Draw<'_>) -> Outcome {
        let n = self.n;
        let anti = self.anti_mask(terms);
        let act: Vec<u64> = anti.iter().zip(&self.active).map(|(a, b)| a & b).collect();
        if let Some(p) = Self::first_set(&act) {
            let bit = match draw {
                Draw::Random(src) => src.next_bit() as u8,
                Draw::Forced(b) => b,
            };
            let partner = p - n;
            let mut targets = anti;
            Self::set_bit(&mut targets, p, false);
            Self::set_bit(&mut targets, partner, false);
            self.rowmul_masked(&targets, p);
            self.copy_row(p, partner);
            self.set_row_sparse(p, terms, negative ^ (bit == 1));
            return Outcome::Random(bit);
        }
        let log: Vec<u64> = anti.iter().zip(&self.logical).map(|(a, b)| a & b).collect();
        if let Some(a) = Self::first_set(&log) {
            let bit = match draw {
                Draw::Random(src) => src.next_bit() as u8,
                Draw::Forced(b) => b,
            };
            let j = if a < n { a } else { a - n };
            let mut targets = anti;
            Self::set_bit(&mut targets, j, false);
            Self::set_bit(&mut targets, n + j, false);
            self.rowmul_masked(&targets, a);
            if a != j {
                self.copy_row(a, j);
            }
            self.set_row_sparse(n + j, terms, negative ^ (bit == 1));
            self.set_pair_active(j, true);
            return Outcome::Random(bit);
        }
        // deterministic: the operator is ± the product of S_i over active pairs
        // whose destabilizer anticommutes with it
        let mut rows = vec![0u64; self.w];
        for i in 0..n {
            if Self::get_bit(&anti, i) {
                debug_assert!(Self::get_bit(&self.active, n + i));
                Self::set_bit(&mut rows, n + i, true);
            }
        }
        let phase = self.product_phase(&rows);
        debug_assert_eq!(phase & 1, 0);
        let bit = (negative as u8) ^ ((phase >> 1) as u8 & 1);
        match draw {
            Draw::Forced(b) if b != bit => Outcome::Contradiction,
            _ => Outcome::Deterministic(bit),
        }
    }

    /// The channel `ρ ↦ ½ρ + ½PρP` for `P = ⊗ terms`.
    pub fn dephase_sparse(&mut self, terms: &[(usize, Letter)]) {
        let n = self.n;
        let anti = self.anti_mask(terms);
        let act: Vec<u64> = anti.iter().zip(&self.active).map(|(a, b)| a & b).collect();
        if let Some(p) = Self::first_set(&act) {
            let partner = p - n;
            let mut targets = anti;
            Self::set_bit(&mut targets, p, false);
            Self::set_bit(&mut targets, partner, false);
            self.rowmul_masked(&targets, p);
            self.copy_row(p, partner);
            self.set_row_sparse(p, terms, false);
            self.set_pair_active(partner, false);
        }
    }

    pub fn measure_z(&mut self, q: usize, draw: Draw<'_>) -> Outcome {
        self.measure_sparse(&[(q, Letter::Z)], false, draw)
    }

    pub fn erase(&mut self, q: usize) {
        self.dephase_sparse(&[(q, Letter::Z)]);
        self.dephase_sparse(&[(q, Letter::X)]);
    }

    fn sparse_of(&self, p: &PauliString) -> Result<(Vec<(usize, Letter)>, bool)> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch { left: self.n, right: p.num_qubits() });
        }
        if !p.is_hermitian() {
            return Err(Error::NonHermitian { phase: p.phase() });
        }
        let terms = p.support().into_iter().map(|q| (q, p.letter(q))).collect();
        Ok((terms, p.sign_bit()))
    }

    pub fn measure(&mut self, p: &PauliString, bits: &mut dyn BitSource) -> Result<Outcome> {
        let (terms, neg) = self.sparse_of(p)?;
        Ok(self.measure_sparse(&terms, neg, Draw::Random(bits)))
    }

    pub fn measure_forced(&mut self, p: &PauliString, bit: u8) -> Result<Forced> {
        let (terms, neg) = self.sparse_of(p)?;
        Ok(match self.measure_sparse(&terms, neg, Draw::Forced(bit)) {
            Outcome::Contradiction => Forced::Contradiction,
            Outcome::Deterministic(_) => Forced::Accepted { deterministic: true },
            Outcome::Random(_) => Forced::Accepted { deterministic: false },
        })
    }

    pub fn dephase(&mut self, p: &PauliString) -> Result<()> {
        let (terms, _) = self.sparse_of(p)?;
        self.dephase_sparse(&terms);
        Ok(())
    }

    /// Check the symplectic-basis invariants (debug and test helper).
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.n;
        let rows: Vec<PauliString> = (0..2 * n).map(|r| self.row(r)).collect();
        for i in 0..2 * n {
            for j in 0..i {
                let anti = rows[i].anticommutes_unchecked(&rows[j]);
                let partners = i == j + n;
                if anti != partners {
                    return Err(format!("rows {j} and {i}: anticommute={anti}"));
                }
            }
        }
        Ok(())
    }
}
