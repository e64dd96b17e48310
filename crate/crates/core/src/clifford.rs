//! One- and two-qubit Clifford gates given by their action on Pauli operators,
//! plus the uniformly sampled two-qubit Clifford group.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliString};

/// Local index encoding of a Pauli on the gate support:
/// `x_a | z_a << 1 | x_b << 2 | z_b << 3`.
#[inline]
pub(crate) fn local_index(la: Letter, lb: Letter) -> usize {
    let (xa, za) = la.bits();
    let (xb, zb) = lb.bits();
    xa as usize | (za as usize) << 1 | (xb as usize) << 2 | (zb as usize) << 3
}

#[inline]
pub(crate) fn index_letters(idx: usize) -> (Letter, Letter) {
    (
        Letter::from_bits(idx & 1 != 0, idx & 2 != 0),
        Letter::from_bits(idx & 4 != 0, idx & 8 != 0),
    )
}

fn local_from_index(arity: usize, idx: usize, phase: u8) -> PauliString {
    let (la, lb) = index_letters(idx);
    let mut p = PauliString::identity(arity);
    p.set_letter(0, la);
    if arity == 2 {
        p.set_letter(1, lb);
    }
    p.set_phase(phase);
    p
}

fn index_of_local(p: &PauliString) -> usize {
    let lb = if p.num_qubits() == 2 { p.letter(1) } else { Letter::I };
    local_index(p.letter(0), lb)
}

/// A Clifford unitary on one or two qubits, modulo global phase, stored as the
/// conjugation table `P ↦ U P U†` over all local Pauli letters.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocalClifford {
    arity: u8,
    /// `(output index, phase exponent)` for every local input index.
    table: [(u8, u8); 16],
    /// For each output bit (same encoding as the index), the set of input bits
    /// it is the XOR of.
    lin: [u8; 4],
    /// Algebraic normal form of the sign-flip function of the input bits: bit
    /// `s` set means the monomial `AND_{i ∈ s} input_i` is present.
    anf: u16,
}

impl LocalClifford {
    fn from_table(arity: u8, table: [(u8, u8); 16]) -> Self {
        let inputs = 2 * arity as usize;
        let mut lin = [0u8; 4];
        for (k, l) in lin.iter_mut().enumerate().take(inputs) {
            for i in 0..inputs {
                if (table[1 << i].0 >> k) & 1 == 1 {
                    *l |= 1 << i;
                }
            }
        }
        let count = 1usize << inputs;
        let mut a = [0u8; 16];
        for (idx, v) in a.iter_mut().enumerate().take(count) {
            *v = (table[idx].1 == 2) as u8;
        }
        for i in 0..inputs {
            for s in 0..count {
                if s & (1 << i) != 0 {
                    a[s] ^= a[s ^ (1 << i)];
                }
            }
        }
        let mut anf = 0u16;
        for (s, &v) in a.iter().enumerate().take(count) {
            if v == 1 {
                anf |= 1 << s;
            }
        }
        LocalClifford { arity, table, lin, anf }
    }

    #[inline]
    pub(crate) fn linear_masks(&self) -> [u8; 4] {
        self.lin
    }

    #[inline]
    pub(crate) fn sign_anf(&self) -> u16 {
        self.anf
    }
}

impl LocalClifford {
    /// Build from the images of `X_a, Z_a` (and `X_b, Z_b` for two qubits).
    pub fn from_images(images: &[PauliString]) -> Result<Self> {
        let arity = match images.len() {
            2 => 1,
            4 => 2,
            k => return Err(Error::InvalidClifford(format!("expected 2 or 4 images, got {k}"))),
        };
        for im in images {
            if im.num_qubits() != arity {
                return Err(Error::InvalidClifford(format!("image {im} does not act on {arity} qubit(s)")));
            }
            if !im.is_hermitian() {
                return Err(Error::InvalidClifford(format!("image {im} is not Hermitian")));
            }
        }
        // symplectic condition: X_k/Z_k anticommute, all other pairs commute
        for i in 0..images.len() {
            for j in 0..i {
                let should_anti = i / 2 == j / 2;
                let anti = !images[i].commutes(&images[j])?;
                if anti != should_anti {
                    return Err(Error::InvalidClifford(format!(
                        "images {} and {} violate the commutation relations",
                        images[j], images[i]
                    )));
                }
            }
        }
        let mut table = [(0u8, 0u8); 16];
        let count = 1usize << (2 * arity);
        for (idx, slot) in table.iter_mut().enumerate().take(count) {
            let (la, lb) = index_letters(idx);
            // letter(x,z) = i^{xz} X^x Z^z
            let mut acc = PauliString::identity(arity);
            let mut phase = 0u8;
            for (k, l) in [la, lb].iter().enumerate().take(arity) {
                let (x, z) = l.bits();
                if x && z {
                    phase += 1;
                }
                if x {
                    acc.mul_assign_unchecked(&images[2 * k]);
                }
                if z {
                    acc.mul_assign_unchecked(&images[2 * k + 1]);
                }
            }
            let ph = (acc.phase() + phase) & 3;
            if ph & 1 != 0 {
                return Err(Error::InvalidClifford("image of a Hermitian Pauli is not Hermitian".into()));
            }
            *slot = (index_of_local(&acc) as u8, ph);
        }
        Ok(Self::from_table(arity as u8, table))
    }

    pub fn from_literals(images: &[&str]) -> Result<Self> {
        let ims = images.iter().map(|s| s.parse()).collect::<Result<Vec<PauliString>>>()?;
        Self::from_images(&ims)
    }

    #[inline]
    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    /// `U P U†` for the local input index, as `(output index, phase)`.
    #[inline]
    pub fn lookup(&self, idx: usize) -> (usize, u8) {
        let (o, ph) = self.table[idx];
        (o as usize, ph)
    }

    /// Images of `X_a, Z_a[, X_b, Z_b]` as signed local Pauli strings.
    pub fn images(&self) -> Vec<PauliString> {
        let arity = self.arity();
        [1usize, 2, 4, 8]
            .iter()
            .take(2 * arity)
            .map(|&i| {
                let (o, ph) = self.lookup(i);
                local_from_index(arity, o, ph)
            })
            .collect()
    }

    /// Conjugate an arbitrary local Pauli string.
    pub fn conjugate_local(&self, p: &PauliString) -> PauliString {
        let (o, ph) = self.lookup(index_of_local(p));
        local_from_index(self.arity(), o, (ph + p.phase()) & 3)
    }

    pub fn identity(arity: usize) -> Self {
        let mut table = [(0u8, 0u8); 16];
        for (i, t) in table.iter_mut().enumerate().take(1 << (2 * arity)) {
            *t = (i as u8, 0);
        }
        Self::from_table(arity as u8, table)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.arity())
    }

    /// `U† P U` as a Clifford.
    pub fn inverse(&self) -> Self {
        let count = 1usize << (2 * self.arity());
        let mut table = [(0u8, 0u8); 16];
        for i in 0..count {
            let (o, ph) = self.table[i];
            // U P_i U† = i^ph P_o  ⇒  U† P_o U = i^{-ph} P_i
            table[o as usize] = (i as u8, (4 - ph) & 3);
        }
        Self::from_table(self.arity, table)
    }

    /// The Clifford `V U` (apply `self` first, then `next`).
    pub fn then(&self, next: &LocalClifford) -> Self {
        assert_eq!(self.arity, next.arity);
        let count = 1usize << (2 * self.arity());
        let mut table = [(0u8, 0u8); 16];
        for (i, slot) in table.iter_mut().enumerate().take(count) {
            let (o1, p1) = self.table[i];
            let (o2, p2) = next.table[o1 as usize];
            *slot = (o2, (p1 + p2) & 3);
        }
        Self::from_table(self.arity, table)
    }

    /// Compact text form: signed images of `X_a, Z_a[, X_b, Z_b]`, e.g.
    /// `+XX+ZI+IX+ZZ` for a CNOT.
    pub fn literal(&self) -> String {
        let mut s = String::new();
        for im in self.images() {
            s.push(if im.sign_bit() { '-' } else { '+' });
            for q in 0..self.arity() {
                s.push(im.letter(q).as_char());
            }
        }
        s
    }

    pub fn parse_literal(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.trim().chars().collect();
        let arity = match chars.len() {
            4 => 1,
            12 => 2,
            k => {
                return Err(Error::Parse { line: 0, msg: format!("gate literal {s:?} has length {k}") })
            }
        };
        let chunk = arity + 1;
        let images = chars
            .chunks(chunk)
            .map(|c| {
                let text: String = c.iter().collect();
                if !(c[0] == '+' || c[0] == '-') {
                    return Err(Error::Parse { line: 0, msg: format!("missing sign in {text:?}") });
                }
                text.parse::<PauliString>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_images(&images)
    }

    pub fn hadamard() -> Self {
        Self::from_literals(&["+Z", "+X"]).unwrap()
    }

    pub fn phase_s() -> Self {
        Self::from_literals(&["+Y", "+Z"]).unwrap()
    }

    pub fn phase_s_dag() -> Self {
        Self::from_literals(&["-Y", "+Z"]).unwrap()
    }

    pub fn pauli(letter: Letter) -> Self {
        let imgs: [&str; 2] = match letter {
            Letter::I => ["+X", "+Z"],
            Letter::X => ["+X", "-Z"],
            Letter::Y => ["-X", "-Z"],
            Letter::Z => ["-X", "+Z"],
        };
        Self::from_literals(&imgs).unwrap()
    }

    /// CNOT with control on the first support qubit.
    pub fn cnot() -> Self {
        Self::from_literals(&["+XX", "+ZI", "+IX", "+ZZ"]).unwrap()
    }

    /// CNOT with control on the second support qubit.
    pub fn cnot_reversed() -> Self {
        Self::from_literals(&["+XI", "+ZZ", "+XX", "+IZ"]).unwrap()
    }

    pub fn cz() -> Self {
        Self::from_literals(&["+XZ", "+ZI", "+ZX", "+IZ"]).unwrap()
    }

    pub fn swap() -> Self {
        Self::from_literals(&["+IX", "+IZ", "+XI", "+ZI"]).unwrap()
    }

    /// Tensor product of two single-qubit Cliffords.
    pub fn tensor(a: &LocalClifford, b: &LocalClifford) -> Self {
        assert!(a.arity() == 1 && b.arity() == 1);
        let mut images = Vec::new();
        for im in a.images() {
            images.push(im.embed(2, &[0]).unwrap());
        }
        for im in b.images() {
            images.push(im.embed(2, &[1]).unwrap());
        }
        Self::from_images(&images).unwrap()
    }
}

impl fmt::Debug for LocalClifford {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LocalClifford({})", self.literal())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Support {
    One(usize),
    Two(usize, usize),
}

impl Support {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Support::One(a) => vec![a],
            Support::Two(a, b) => vec![a, b],
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Support::One(_) => 1,
            Support::Two(..) => 2,
        }
    }

    pub fn max_qubit(&self) -> usize {
        match *self {
            Support::One(a) => a,
            Support::Two(a, b) => a.max(b),
        }
    }
}

/// A Clifford gate placed on specific qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CliffordGate {
    pub support: Support,
    pub action: LocalClifford,
}

impl CliffordGate {
    pub fn new(support: Support, action: LocalClifford) -> Result<Self> {
        if support.arity() != action.arity() {
            return Err(Error::InvalidClifford(format!(
                "support of size {} for a {}-qubit action",
                support.arity(),
                action.arity()
            )));
        }
        if let Support::Two(a, b) = support {
            if a == b {
                return Err(Error::InvalidClifford(format!("repeated qubit {a}")));
            }
        }
        Ok(CliffordGate { support, action })
    }

    pub fn single(q: usize, action: LocalClifford) -> Self {
        Self::new(Support::One(q), action).unwrap()
    }

    pub fn two(a: usize, b: usize, action: LocalClifford) -> Self {
        Self::new(Support::Two(a, b), action).unwrap()
    }

    pub fn h(q: usize) -> Self {
        Self::single(q, LocalClifford::hadamard())
    }

    pub fn s(q: usize) -> Self {
        Self::single(q, LocalClifford::phase_s())
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self::two(control, target, LocalClifford::cnot())
    }

    pub fn inverse(&self) -> Self {
        CliffordGate { support: self.support, action: self.action.inverse() }
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        let m = self.support.max_qubit();
        if m >= n {
            return Err(Error::QubitOutOfRange { qubit: m, n });
        }
        Ok(())
    }

    /// `p ← U p U†` in place.
    #[inline]
    pub fn conjugate(&self, p: &mut PauliString) {
        match self.support {
            Support::One(a) => {
                let idx = local_index(p.letter(a), Letter::I);
                let (o, ph) = self.action.lookup(idx);
                let (la, _) = index_letters(o);
                p.set_letter(a, la);
                p.set_phase(p.phase() + ph);
            }
            Support::Two(a, b) => {
                let idx = local_index(p.letter(a), p.letter(b));
                let (o, ph) = self.action.lookup(idx);
                let (la, lb) = index_letters(o);
                p.set_letter(a, la);
                p.set_letter(b, lb);
                p.set_phase(p.phase() + ph);
            }
        }
    }
}

/// All 11520 two-qubit Cliffords (modulo global phase), generated from
/// `{H⊗I, I⊗H, S⊗I, I⊗S, CNOT}` by breadth-first search.
pub fn two_qubit_clifford_table() -> &'static [LocalClifford] {
    static TABLE: OnceLock<Vec<LocalClifford>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let id1 = LocalClifford::identity(1);
        let gens = [
            LocalClifford::tensor(&LocalClifford::hadamard(), &id1),
            LocalClifford::tensor(&id1, &LocalClifford::hadamard()),
            LocalClifford::tensor(&LocalClifford::phase_s(), &id1),
            LocalClifford::tensor(&id1, &LocalClifford::phase_s()),
            LocalClifford::cnot(),
        ];
        let start = LocalClifford::identity(2);
        let mut seen: HashMap<LocalClifford, ()> = HashMap::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(start, ());
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            order.push(c);
            for g in &gens {
                let next = c.then(g);
                if seen.insert(next, ()).is_none() {
                    queue.push_back(next);
                }
            }
        }
        order
    })
}

pub const TWO_QUBIT_CLIFFORD_COUNT: usize = 11520;

/// Uniformly random two-qubit Clifford.
pub fn sample_two_qubit_clifford<R: Rng + ?Sized>(rng: &mut R) -> LocalClifford {
    let table = two_qubit_clifford_table();
    table[rng.gen_range(0..table.len())]
}
