//! Compression of a monitored Clifford circuit acting on `|ψ_A⟩ ⊗ |0_B⟩`
//! into at most `|A|` Pauli measurements on `A`, coin flips, and an affine
//! F2 post-processing map.
//!
//! Every operator carries its sign as an affine function of the variables
//! introduced so far (raw quantum outcomes and coins), so the case taken for
//! each measurement and the emitted operators never depend on outcomes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::circuit::{Circuit, Event};
use crate::clifford::{CliffordGate, LocalClifford};
use crate::error::{Error, Result};
use crate::group::{Echelon, GeneratorSet, Inserted};
use crate::oracle::{enumerate_records, total_variation, DenseState};
use crate::xeb::{random_measurement_count, stabilizer_record_distribution, InitialState, ShotRunner};
use crate::pauli::{words_for, Letter, PauliString};
use crate::rng::BitSource;

/// Ordered multi-qubit Pauli measurements equivalent to a clean circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct PbcProgram {
    pub n: usize,
    /// Back-propagated observable (signed, Hermitian) and its source index.
    pub measurements: Vec<(PauliString, usize)>,
}

/// Conjugate each measured `Z_q` back through the gates preceding it.
pub fn to_pbc(c: &Circuit) -> Result<PbcProgram> {
    if c.has_erasures() {
        return Err(Error::NoisyCircuit);
    }
    let mut gates: Vec<CliffordGate> = Vec::new();
    let mut measurements = Vec::with_capacity(c.measurement_count());
    for e in &c.events {
        match e {
            Event::Gate { gate, .. } => {
                gate.check_range(c.l)?;
                gates.push(gate.inverse());
            }
            Event::Measure { qubit, .. } => {
                let mut p = PauliString::single(c.l, *qubit, Letter::Z);
                for g in gates.iter().rev() {
                    g.conjugate(&mut p);
                }
                let idx = measurements.len();
                measurements.push((p, idx));
            }
            Event::Erase { .. } => unreachable!(),
        }
    }
    Ok(PbcProgram { n: c.l, measurements })
}

/// Odd-index qubits, the magic positions of the alternating input.
pub fn default_register(l: usize) -> Vec<usize> {
    (1..l).step_by(2).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Case {
    Deterministic,
    Coin,
    Quantum,
}

impl Case {
    fn as_char(self) -> char {
        match self {
            Case::Deterministic => 'a',
            Case::Coin => 'b',
            Case::Quantum => 'c',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'a' => Some(Case::Deterministic),
            'b' => Some(Case::Coin),
            'c' => Some(Case::Quantum),
            _ => None,
        }
    }
}

/// `record = offset ⊕ M · [raw bits ; coin bits]`, one row per source
/// measurement; row bitsets have `num_raw + num_coins` columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignMap {
    pub num_raw: usize,
    pub num_coins: usize,
    pub rows: Vec<Vec<u64>>,
    pub offset: Vec<u8>,
}

impl SignMap {
    pub fn width(&self) -> usize {
        self.num_raw + self.num_coins
    }

    pub fn entry(&self, row: usize, col: usize) -> bool {
        (self.rows[row][col >> 6] >> (col & 63)) & 1 == 1
    }

    pub fn apply(&self, raw: &[u8], coins: &[u8]) -> Result<Vec<u8>> {
        if raw.len() != self.num_raw {
            return Err(Error::LengthMismatch { expected: self.num_raw, got: raw.len() });
        }
        if coins.len() != self.num_coins {
            return Err(Error::LengthMismatch { expected: self.num_coins, got: coins.len() });
        }
        let v = pack(raw.iter().chain(coins).copied(), self.width());
        Ok(self
            .rows
            .iter()
            .zip(&self.offset)
            .map(|(row, &o)| o ^ parity(row, &v))
            .collect())
    }
}

fn pack(bits: impl Iterator<Item = u8>, len: usize) -> Vec<u64> {
    let mut v = vec![0u64; words_for(len.max(1))];
    for (i, b) in bits.enumerate() {
        if b & 1 == 1 {
            v[i >> 6] |= 1 << (i & 63);
        }
    }
    v
}

fn parity(a: &[u64], b: &[u64]) -> u8 {
    (a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum::<u32>() & 1) as u8
}

fn xor_into(a: &mut [u64], b: &[u64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}

fn set_bit(v: &mut [u64], i: usize) {
    v[i >> 6] ^= 1 << (i & 63);
}

fn get_bit(v: &[u64], i: usize) -> bool {
    (v[i >> 6] >> (i & 63)) & 1 == 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedCircuit {
    /// Qubit count of the source circuit.
    pub n: usize,
    /// The register `A` (source qubit indices, in local order).
    pub register: Vec<usize>,
    pub k: usize,
    /// Unsigned Pauli strings on the `k` local qubits.
    pub quantum_measurements: Vec<PauliString>,
    /// Source index of each quantum measurement.
    pub quantum_sources: Vec<usize>,
    pub coin_flips: Vec<usize>,
    pub deterministic: Vec<usize>,
    pub cases: Vec<Case>,
    pub sign_map: SignMap,
    /// `±1` constant sign of each truncated operator.
    pub truncation_signs: Vec<i8>,
    /// Coins drawn during compression, in program order.
    pub coin_values: Vec<u8>,
}

#[derive(Clone, Copy)]
enum Var {
    Raw(usize),
    Coin(usize),
}

/// Run the three-case loop. `register` is `A`; its complement is assumed to
/// start in `|0⟩`. One coin is drawn from `coins` per coin-flip case.
pub fn compress(prog: &PbcProgram, register: &[usize], coins: &mut dyn BitSource) -> Result<CompressedCircuit> {
    let n = prog.n;
    let mut in_a = vec![false; n];
    for &q in register {
        if q >= n {
            return Err(Error::QubitOutOfRange { qubit: q, n });
        }
        if in_a[q] {
            return Err(Error::Precondition(format!("qubit {q} listed twice in the register")));
        }
        in_a[q] = true;
    }
    let m = prog.measurements.len();
    let dw = words_for(m.max(1));
    let mut ops: Vec<(PauliString, Vec<u64>)> = Vec::with_capacity(m);
    for (i, (p, src)) in prog.measurements.iter().enumerate() {
        if *src != i {
            return Err(Error::Precondition("program measurements out of source order".into()));
        }
        if p.num_qubits() != n {
            return Err(Error::DimensionMismatch { left: n, right: p.num_qubits() });
        }
        if !p.is_hermitian() {
            return Err(Error::NonHermitian { phase: p.phase() });
        }
        ops.push((p.clone(), vec![0u64; dw]));
    }

    let mut gens: Vec<(PauliString, Vec<u64>)> = Vec::new();
    let mut ech: Echelon<Vec<u64>> = Echelon::new(n);
    for b in (0..n).filter(|&q| !in_a[q]) {
        let z = PauliString::single(n, b, Letter::Z);
        gens.push((z.clone(), vec![0u64; dw]));
        ech.insert(z, vec![0u64; dw]);
    }

    let mut vars: Vec<Var> = Vec::new();
    let mut cases = Vec::with_capacity(m);
    let mut rec_dep: Vec<Vec<u64>> = Vec::with_capacity(m);
    let mut rec_off: Vec<u8> = Vec::with_capacity(m);
    let mut quantum_measurements = Vec::new();
    let mut quantum_sources = Vec::new();
    let mut coin_flips = Vec::new();
    let mut deterministic = Vec::new();
    let mut truncation_signs = Vec::new();
    let mut coin_values = Vec::new();

    for j in 0..m {
        let (p, dep_p) = ops[j].clone();
        if let Some(qi) = gens.iter().position(|(g, _)| g.anticommutes_unchecked(&p)) {
            let (q, dep_q) = gens[qi].clone();
            let z = vars.len();
            vars.push(Var::Coin(coin_flips.len()));
            coin_flips.push(j);
            coin_values.push(coins.next_bit() as u8);
            let mut d = vec![0u64; dw];
            set_bit(&mut d, z);
            rec_dep.push(d);
            rec_off.push(0);
            cases.push(Case::Coin);
            // V = (Q + sP)/√2 with s = (-1)^z; R ↦ V R V
            let mut shared = dep_p.clone();
            xor_into(&mut shared, &dep_q);
            set_bit(&mut shared, z);
            for (r, dep_r) in ops[j + 1..].iter_mut() {
                let aq = r.anticommutes_unchecked(&q);
                let ap = r.anticommutes_unchecked(&p);
                match (aq, ap) {
                    (false, false) => {}
                    (true, true) => r.negate(),
                    (false, true) => {
                        r.mul_assign_unchecked(&q);
                        r.mul_assign_unchecked(&p);
                        xor_into(dep_r, &shared);
                    }
                    (true, false) => {
                        r.mul_assign_unchecked(&p);
                        r.mul_assign_unchecked(&q);
                        xor_into(dep_r, &shared);
                    }
                }
                debug_assert!(r.is_hermitian());
            }
            continue;
        }
        let mut residual = p.clone();
        let mut dep = dep_p.clone();
        ech.reduce(&mut residual, &mut dep);
        if residual.is_identity_letters() {
            // p · Π rows = ±1, so the outcome is fixed by the sign of the product
            rec_dep.push(dep);
            rec_off.push(residual.sign_bit() as u8);
            deterministic.push(j);
            cases.push(Case::Deterministic);
            continue;
        }
        // commutes with the whole group and is independent of it
        for b in (0..n).filter(|&q| !in_a[q]) {
            if p.x_bit(b) {
                return Err(Error::Precondition(format!(
                    "measurement {j} acts with X or Y on qubit {b} outside the register"
                )));
            }
        }
        let r = vars.len();
        vars.push(Var::Raw(quantum_measurements.len()));
        let truncated = p.restrict(register).with_sign_bit(false);
        quantum_measurements.push(truncated);
        quantum_sources.push(j);
        let c = p.sign_bit();
        truncation_signs.push(if c { -1 } else { 1 });
        let mut d = dep_p.clone();
        set_bit(&mut d, r);
        rec_dep.push(d);
        rec_off.push(c as u8);
        cases.push(Case::Quantum);
        // (-1)^{m_j} P = (-1)^{r} |P|
        let stored = p.with_sign_bit(false);
        let mut dg = vec![0u64; dw];
        set_bit(&mut dg, r);
        gens.push((stored.clone(), dg.clone()));
        match ech.insert(stored, dg) {
            Inserted::Pivot => {}
            Inserted::Reduced(..) => unreachable!("independent element reduced to zero"),
        }
    }

    let num_raw = quantum_measurements.len();
    let num_coins = coin_flips.len();
    let width = num_raw + num_coins;
    let rows = rec_dep
        .iter()
        .map(|d| {
            let mut row = vec![0u64; words_for(width.max(1))];
            for (v, kind) in vars.iter().enumerate() {
                if get_bit(d, v) {
                    let col = match *kind {
                        Var::Raw(i) => i,
                        Var::Coin(i) => num_raw + i,
                    };
                    set_bit(&mut row, col);
                }
            }
            row
        })
        .collect();
    Ok(CompressedCircuit {
        n,
        register: register.to_vec(),
        k: register.len(),
        quantum_measurements,
        quantum_sources,
        coin_flips,
        deterministic,
        cases,
        sign_map: SignMap { num_raw, num_coins, rows, offset: rec_off },
        truncation_signs,
        coin_values,
    })
}

/// Corrected record in source measurement order.
pub fn postprocess(raw: &[u8], coins: &[u8], cc: &CompressedCircuit) -> Result<Vec<u8>> {
    cc.sign_map.apply(raw, coins)
}

impl CompressedCircuit {
    pub fn num_source_measurements(&self) -> usize {
        self.cases.len()
    }

    /// Post-process with the coins drawn during compression.
    pub fn postprocess_drawn(&self, raw: &[u8]) -> Result<Vec<u8>> {
        postprocess(raw, &self.coin_values, self)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let reg: Vec<String> = self.register.iter().map(|q| q.to_string()).collect();
        let _ = writeln!(s, "n={} k={} register={}", self.n, self.k, reg.join(","));
        let _ = writeln!(s, "[CASES]");
        let _ = writeln!(s, "{}", self.cases.iter().map(|c| c.as_char()).collect::<String>());
        let _ = writeln!(s, "[MEAS]");
        for (p, src) in self.quantum_measurements.iter().zip(&self.quantum_sources) {
            let lit: String = (0..self.k).map(|q| p.letter(q).as_char()).collect();
            let _ = writeln!(s, "{src} {lit}");
        }
        let _ = writeln!(s, "[COINS]");
        for (src, v) in self.coin_flips.iter().zip(&self.coin_values) {
            let _ = writeln!(s, "{src} {v}");
        }
        let _ = writeln!(s, "[SIGNMAP]");
        let w = self.sign_map.width();
        for (r, off) in self.sign_map.offset.iter().enumerate() {
            let bits: String = (0..w).map(|c| if self.sign_map.entry(r, c) { '1' } else { '0' }).collect();
            let _ = writeln!(s, "{bits} {off}");
        }
        let _ = writeln!(s, "[ETA]");
        let eta: Vec<String> = self.truncation_signs.iter().map(|e| if *e < 0 { "-1" } else { "+1" }.into()).collect();
        let _ = writeln!(s, "{}", eta.join(" "));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
        let mut n = None;
        let mut k = None;
        let mut register = Vec::new();
        for field in header.split_whitespace() {
            let (key, val) = field.split_once('=').ok_or_else(|| perr(ln, "bad header field"))?;
            match key {
                "n" => n = Some(val.parse::<usize>().map_err(|_| perr(ln, "bad n"))?),
                "k" => k = Some(val.parse::<usize>().map_err(|_| perr(ln, "bad k"))?),
                "register" => {
                    if !val.is_empty() {
                        for q in val.split(',') {
                            register.push(q.parse::<usize>().map_err(|_| perr(ln, "bad register"))?);
                        }
                    }
                }
                _ => return Err(perr(ln, "unknown header field")),
            }
        }
        let n = n.ok_or_else(|| perr(ln, "missing n"))?;
        let k = k.ok_or_else(|| perr(ln, "missing k"))?;
        if register.len() != k {
            return Err(perr(ln, "register length differs from k"));
        }
        let mut section = "";
        let mut cases = Vec::new();
        let mut quantum_measurements = Vec::new();
        let mut quantum_sources = Vec::new();
        let mut coin_flips = Vec::new();
        let mut coin_values = Vec::new();
        let mut rows_txt: Vec<(usize, String, u8)> = Vec::new();
        let mut truncation_signs = Vec::new();
        for (ln, line) in lines {
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[CASES]" | "[MEAS]" | "[COINS]" | "[SIGNMAP]" | "[ETA]" => line,
                    _ => return Err(perr(ln, "unknown section")),
                };
                continue;
            }
            match section {
                "[CASES]" => {
                    for ch in line.chars() {
                        cases.push(Case::from_char(ch).ok_or_else(|| perr(ln, "bad case"))?);
                    }
                }
                "[MEAS]" => {
                    let (src, lit) = line.split_once(' ').ok_or_else(|| perr(ln, "bad measurement"))?;
                    quantum_sources.push(src.parse::<usize>().map_err(|_| perr(ln, "bad source"))?);
                    let letters: Option<Vec<Letter>> = lit.chars().map(Letter::from_char).collect();
                    let letters = letters.ok_or_else(|| perr(ln, "bad letter"))?;
                    if letters.len() != k {
                        return Err(perr(ln, "measurement length differs from k"));
                    }
                    quantum_measurements.push(PauliString::from_letters(&letters));
                }
                "[COINS]" => {
                    let (src, v) = line.split_once(' ').ok_or_else(|| perr(ln, "bad coin"))?;
                    coin_flips.push(src.parse::<usize>().map_err(|_| perr(ln, "bad source"))?);
                    coin_values.push(v.parse::<u8>().map_err(|_| perr(ln, "bad coin value"))?);
                }
                "[SIGNMAP]" => {
                    let (bits, off) = line.rsplit_once(' ').unwrap_or((line, ""));
                    let (bits, off) = if off.is_empty() { ("", bits) } else { (bits, off) };
                    let off = off.parse::<u8>().map_err(|_| perr(ln, "bad offset"))?;
                    rows_txt.push((ln, bits.to_string(), off));
                }
                "[ETA]" => {
                    for t in line.split_whitespace() {
                        truncation_signs.push(match t {
                            "+1" | "1" => 1,
                            "-1" => -1,
                            _ => return Err(perr(ln, "bad sign")),
                        });
                    }
                }
                _ => return Err(perr(ln, "content outside a section")),
            }
        }
        let num_raw = quantum_measurements.len();
        let num_coins = coin_flips.len();
        let width = num_raw + num_coins;
        let mut rows = Vec::new();
        let mut offset = Vec::new();
        for (ln, bits, off) in rows_txt {
            if bits.len() != width || off > 1 {
                return Err(perr(ln, "sign map row has the wrong width"));
            }
            rows.push(pack(bits.bytes().map(|b| (b == b'1') as u8), width));
            offset.push(off);
        }
        if rows.len() != cases.len() || truncation_signs.len() != num_raw {
            return Err(perr(0, "inconsistent section lengths"));
        }
        let deterministic = (0..cases.len()).filter(|&i| cases[i] == Case::Deterministic).collect();
        Ok(CompressedCircuit {
            n,
            register,
            k,
            quantum_measurements,
            quantum_sources,
            coin_flips,
            deterministic,
            cases,
            sign_map: SignMap { num_raw, num_coins, rows, offset },
            truncation_signs,
            coin_values,
        })
    }
}

/// Gate-level form on `k` qubits. The `i`-th measured `Z` outcome `z_i`
/// gives raw bit `z_i ⊕ flips[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposed {
    pub circuit: Circuit,
    pub flips: Vec<u8>,
}

impl Decomposed {
    pub fn single_qubit_gates(&self) -> usize {
        self.circuit.gate_count() - self.circuit.two_qubit_gate_count()
    }

    pub fn cnot_count(&self) -> usize {
        self.circuit.two_qubit_gate_count()
    }
}

fn to_z(letter: Letter) -> Option<LocalClifford> {
    match letter {
        Letter::I | Letter::Z => None,
        Letter::X => Some(LocalClifford::hadamard()),
        Letter::Y => Some(LocalClifford::phase_s_dag().then(&LocalClifford::hadamard())),
    }
}

/// Each measurement is rotated to single-qubit `Z`s (one gate per `X`/`Y`
/// letter), folded onto its last qubit by a CNOT chain and measured. The
/// rotation is kept for the next measurement, which is conjugated by it.
pub fn decompose_to_gates(cc: &CompressedCircuit) -> Decomposed {
    let k = cc.k;
    let mut applied: Vec<CliffordGate> = Vec::new();
    let mut events = Vec::new();
    let mut flips = Vec::with_capacity(cc.quantum_measurements.len());
    let push_gate = |g: CliffordGate, applied: &mut Vec<CliffordGate>, events: &mut Vec<Event>| {
        applied.push(g);
        events.push(Event::Gate { gate: g, layer: events.len() });
    };
    for p in &cc.quantum_measurements {
        let mut cur = p.clone();
        for g in &applied {
            g.conjugate(&mut cur);
        }
        let support = cur.support();
        for &q in &support {
            if let Some(u) = to_z(cur.letter(q)) {
                let g = CliffordGate::single(q, u);
                g.conjugate(&mut cur);
                push_gate(g, &mut applied, &mut events);
            }
        }
        for w in support.windows(2) {
            let g = CliffordGate::cnot(w[0], w[1]);
            g.conjugate(&mut cur);
            push_gate(g, &mut applied, &mut events);
        }
        let target = *support.last().expect("quantum measurements are never the identity");
        debug_assert_eq!(cur.support(), vec![target]);
        debug_assert_eq!(cur.letter(target), Letter::Z);
        flips.push(cur.sign_bit() as u8);
        events.push(Event::Measure { qubit: target, layer: events.len() });
    }
    Decomposed { circuit: Circuit::new(k, events), flips }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Resources {
    pub hardware_qubits: usize,
    pub depth: usize,
    pub two_qubit_gates: usize,
    pub single_qubit_gates: usize,
    pub measurement_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ResourceReport {
    pub uncompressed: Resources,
    pub compressed: Resources,
}

pub fn resources_of(c: &Circuit) -> Resources {
    Resources {
        hardware_qubits: c.l,
        depth: c.asap_depth(),
        two_qubit_gates: c.two_qubit_gate_count(),
        single_qubit_gates: c.gate_count() - c.two_qubit_gate_count(),
        measurement_count: c.measurement_count(),
    }
}

pub fn resource_report(original: &Circuit, cc: &CompressedCircuit) -> ResourceReport {
    let dec = decompose_to_gates(cc);
    let mut compressed = resources_of(&dec.circuit);
    compressed.hardware_qubits = cc.k;
    ResourceReport { uncompressed: resources_of(original), compressed }
}

/// F2 row space kept in reduced echelon form, used to canonicalise cosets.
#[derive(Clone, Debug, Default)]
struct F2Span {
    rows: Vec<(usize, Vec<u64>)>,
}

impl F2Span {
    fn reduce(&self, v: &mut [u64]) {
        for (piv, row) in &self.rows {
            if get_bit(v, *piv) {
                xor_into(v, row);
            }
        }
    }

    fn insert(&mut self, mut v: Vec<u64>) -> bool {
        self.reduce(&mut v);
        let Some(piv) = first_bit(&v) else { return false };
        for (_, row) in self.rows.iter_mut() {
            if get_bit(row, piv) {
                xor_into(row, &v);
            }
        }
        self.rows.push((piv, v));
        true
    }
}

fn first_bit(v: &[u64]) -> Option<usize> {
    v.iter().enumerate().find(|(_, w)| **w != 0).map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

fn unpack(v: &[u64], len: usize) -> Vec<u8> {
    (0..len).map(|i| get_bit(v, i) as u8).collect()
}

/// Exact distribution of post-processed records given the raw-outcome
/// distribution of the quantum measurements and uniform coins. Fails when
/// the coin span exceeds `max_coin_rank` bits.
pub fn expand_record_distribution(
    cc: &CompressedCircuit,
    raw: &BTreeMap<Vec<u8>, f64>,
    max_coin_rank: usize,
) -> Result<BTreeMap<Vec<u8>, f64>> {
    let m = cc.num_source_measurements();
    let zero_raw = vec![0u8; cc.sign_map.num_raw];
    let mut span = F2Span::default();
    let mut basis = Vec::new();
    for i in 0..cc.sign_map.num_coins {
        let mut coins = vec![0u8; cc.sign_map.num_coins];
        coins[i] = 1;
        let mut col = cc.sign_map.apply(&zero_raw, &coins)?;
        for (c, o) in col.iter_mut().zip(&cc.sign_map.offset) {
            *c ^= o;
        }
        let v = pack(col.iter().copied(), m);
        if span.insert(v.clone()) {
            basis.push(v);
        }
    }
    if basis.len() > max_coin_rank {
        return Err(Error::BudgetExceeded(format!("coin span of dimension {}", basis.len())));
    }
    let weight = 2f64.powi(-(basis.len() as i32));
    let zero_coins = vec![0u8; cc.sign_map.num_coins];
    let mut out = BTreeMap::new();
    for (r, p) in raw {
        let base = pack(cc.sign_map.apply(r, &zero_coins)?.into_iter(), m);
        for mask in 0u64..(1u64 << basis.len()) {
            let mut v = base.clone();
            for (i, b) in basis.iter().enumerate() {
                if (mask >> i) & 1 == 1 {
                    xor_into(&mut v, b);
                }
            }
            *out.entry(unpack(&v, m)).or_insert(0.0) += p * weight;
        }
    }
    Ok(out)
}

/// Result of comparing the compressed execution against the source circuit
/// for a stabilizer input.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineComparison {
    pub equal: bool,
    pub cosets: usize,
    pub coin_rank: usize,
    pub reason: Option<String>,
}

/// Exact distribution equality for stabilizer inputs without enumerating
/// records. `raw` is the exact raw-outcome distribution of the quantum
/// measurements; `in_support` decides whether a record is possible for the
/// source circuit, whose records are uniform over an affine subspace of
/// dimension `source_random` (the number of random outcomes).
pub fn compare_affine(
    cc: &CompressedCircuit,
    raw: &BTreeMap<Vec<u8>, f64>,
    source_random: usize,
    mut in_support: impl FnMut(&[u8]) -> Result<bool>,
) -> Result<AffineComparison> {
    let m = cc.num_source_measurements();
    let zero_raw = vec![0u8; cc.sign_map.num_raw];
    let mut span = F2Span::default();
    let mut basis = Vec::new();
    for i in 0..cc.sign_map.num_coins {
        let mut coins = vec![0u8; cc.sign_map.num_coins];
        coins[i] = 1;
        let mut col = cc.sign_map.apply(&zero_raw, &coins)?;
        for (c, o) in col.iter_mut().zip(&cc.sign_map.offset) {
            *c ^= o;
        }
        let v = pack(col.iter().copied(), m);
        if span.insert(v.clone()) {
            basis.push(v);
        }
    }
    let rank = basis.len();
    let zero_coins = vec![0u8; cc.sign_map.num_coins];
    let mut cosets: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for (r, p) in raw {
        if *p == 0.0 {
            continue;
        }
        let mut v = pack(cc.sign_map.apply(r, &zero_coins)?.into_iter(), m);
        span.reduce(&mut v);
        *cosets.entry(v).or_insert(0.0) += p;
    }
    let fail = |reason: String| AffineComparison { equal: false, cosets: cosets.len(), coin_rank: rank, reason: Some(reason) };
    let total: f64 = cosets.values().sum();
    if total != 1.0 {
        return Ok(fail(format!("raw distribution has mass {total}")));
    }
    let expected = 2f64.powi(rank as i32 - source_random as i32);
    for (rep, w) in &cosets {
        if *w != expected {
            return Ok(fail(format!("coset weight {w}, expected {expected}")));
        }
        let x = unpack(rep, m);
        if !in_support(&x)? {
            return Ok(fail("coset representative impossible for the source circuit".into()));
        }
        for d in &basis {
            let mut y = rep.clone();
            xor_into(&mut y, d);
            if !in_support(&unpack(&y, m))? {
                return Ok(fail("coset direction leaves the source support".into()));
            }
        }
    }
    Ok(AffineComparison { equal: true, cosets: cosets.len(), coin_rank: rank, reason: None })
}

/// Full source input: `group_a` placed on `register`, `|0⟩` elsewhere.
pub fn embed_register_state(n: usize, register: &[usize], group_a: &GeneratorSet) -> Result<GeneratorSet> {
    if group_a.num_qubits() != register.len() {
        return Err(Error::DimensionMismatch { left: register.len(), right: group_a.num_qubits() });
    }
    let mut gens = Vec::with_capacity(n);
    for g in group_a.generators() {
        gens.push(g.embed(n, register)?);
    }
    for b in (0..n).filter(|q| !register.contains(q)) {
        gens.push(PauliString::single(n, b, Letter::Z));
    }
    GeneratorSet::new(n, gens)
}

/// Exact raw-outcome distribution of the gate-level compressed circuit on a
/// stabilizer register state.
pub fn raw_distribution_stabilizer(dec: &Decomposed, group_a: &GeneratorSet) -> Result<BTreeMap<Vec<u8>, f64>> {
    let init = InitialState::Custom(group_a.clone());
    let z = stabilizer_record_distribution(&dec.circuit, &init, dec.flips.len())?;
    Ok(apply_flips(z, &dec.flips))
}

/// Exact raw-outcome distribution of the gate-level compressed circuit on a
/// dense register state.
pub fn raw_distribution_dense(dec: &Decomposed, psi_a: &DenseState) -> Result<BTreeMap<Vec<u8>, f64>> {
    Ok(apply_flips(enumerate_records(&dec.circuit, psi_a)?, &dec.flips))
}

fn apply_flips(d: BTreeMap<Vec<u8>, f64>, flips: &[u8]) -> BTreeMap<Vec<u8>, f64> {
    d.into_iter()
        .map(|(mut r, p)| {
            for (b, f) in r.iter_mut().zip(flips) {
                *b ^= f;
            }
            (r, p)
        })
        .collect()
}

/// Compress `c` with `group_a` on `register` and compare exact distributions
/// against the tableau engine run on the uncompressed circuit.
pub fn verify_stabilizer(
    c: &Circuit,
    register: &[usize],
    group_a: &GeneratorSet,
    coins: &mut dyn BitSource,
) -> Result<(CompressedCircuit, AffineComparison)> {
    let cc = compress(&to_pbc(c)?, register, coins)?;
    let dec = decompose_to_gates(&cc);
    let raw = raw_distribution_stabilizer(&dec, group_a)?;
    let full = InitialState::Custom(embed_register_state(c.l, register, group_a)?);
    let n_rand = random_measurement_count(c, &full)?;
    let runner = ShotRunner::new(c, &full)?;
    let cmp = compare_affine(&cc, &raw, n_rand, |m| runner.replay(m))?;
    Ok((cc, cmp))
}

/// Total variation distance between the uncompressed circuit on the
/// alternating `|0⟩|T⟩` input and the compressed execution on `|T⟩^k`,
/// both by dense branch enumeration.
pub fn verify_magic(c: &Circuit, coins: &mut dyn BitSource, max_coin_rank: usize) -> Result<(CompressedCircuit, f64)> {
    let register = default_register(c.l);
    let cc = compress(&to_pbc(c)?, &register, coins)?;
    let dec = decompose_to_gates(&cc);
    let raw = raw_distribution_dense(&dec, &DenseState::magic(cc.k))?;
    let compressed = expand_record_distribution(&cc, &raw, max_coin_rank)?;
    let source = enumerate_records(c, &DenseState::alternating_magic(c.l))?;
    Ok((cc, total_variation(&compressed, &source)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ScriptedBits;

    fn prog(lits: &[&str]) -> PbcProgram {
        let ms: Vec<(PauliString, usize)> = lits.iter().enumerate().map(|(i, s)| (s.parse().unwrap(), i)).collect();
        PbcProgram { n: ms[0].0.num_qubits(), measurements: ms }
    }

    #[test]
    fn hadamard_then_measure_gives_x() {
        let c = Circuit::new(
            2,
            vec![
                Event::Gate { gate: CliffordGate::h(1), layer: 0 },
                Event::Measure { qubit: 1, layer: 0 },
            ],
        );
        let p = to_pbc(&c).unwrap();
        assert_eq!(p.measurements, vec![("+IX".parse().unwrap(), 0)]);
        assert!(to_pbc(&Circuit::new(2, vec![])).unwrap().measurements.is_empty());
        let noisy = Circuit::new(2, vec![Event::Erase { qubit: 0, layer: 0 }]);
        assert!(to_pbc(&noisy).is_err());
    }

    #[test]
    fn all_in_zero_group_is_deterministic() {
        let pr = prog(&["+ZI", "-ZI", "+ZZ"]);
        let cc = compress(&pr, &[], &mut ScriptedBits::new(&[])).unwrap();
        assert_eq!(cc.cases, vec![Case::Deterministic; 3]);
        assert!(cc.quantum_measurements.is_empty());
        assert_eq!(postprocess(&[], &[], &cc).unwrap(), vec![0, 1, 0]);
    }

    #[test]
    fn x_on_zero_qubit_is_a_coin() {
        let pr = prog(&["+XI", "+XI", "-XI"]);
        let cc = compress(&pr, &[1], &mut ScriptedBits::new(&[true])).unwrap();
        assert_eq!(cc.cases, vec![Case::Coin, Case::Deterministic, Case::Deterministic]);
        assert_eq!(cc.coin_flips, vec![0]);
        assert_eq!(cc.coin_values, vec![1]);
        assert_eq!(postprocess(&[], &[1], &cc).unwrap(), vec![1, 1, 0]);
        assert_eq!(postprocess(&[], &[0], &cc).unwrap(), vec![0, 0, 1]);
        assert!(postprocess(&[0], &[0], &cc).is_err());
    }

    #[test]
    fn register_measurement_is_quantum_and_repeats_deterministically() {
        let pr = prog(&["+IX", "-ZX", "+IZ"]);
        let cc = compress(&pr, &[1], &mut ScriptedBits::new(&[false])).unwrap();
        assert_eq!(cc.cases, vec![Case::Quantum, Case::Deterministic, Case::Coin]);
        assert_eq!(cc.quantum_measurements, vec!["+X".parse().unwrap()]);
        assert_eq!(cc.truncation_signs, vec![1]);
        assert_eq!(postprocess(&[1], &[0], &cc).unwrap(), vec![1, 0, 0]);
        assert_eq!(postprocess(&[0], &[1], &cc).unwrap(), vec![0, 1, 1]);
    }

    #[test]
    fn text_round_trip() {
        let pr = prog(&["+IXZY", "+ZIZZ", "-XXII", "+IZIY", "+YYYY"]);
        let cc = compress(&pr, &[1, 3], &mut crate::rng::BitStream::from_seed(4)).unwrap();
        assert!(!cc.coin_flips.is_empty() && !cc.quantum_measurements.is_empty());
        let back = CompressedCircuit::from_text(&cc.to_text()).unwrap();
        assert_eq!(back, cc);
    }

    #[test]
    fn decomposition_of_xx() {
        let pr = prog(&["+IXIX"]);
        let cc = compress(&pr, &[1, 3], &mut ScriptedBits::new(&[])).unwrap();
        let d = decompose_to_gates(&cc);
        assert_eq!(d.single_qubit_gates(), 2);
        assert_eq!(d.cnot_count(), 1);
        assert_eq!(d.circuit.measurement_count(), 1);
        let z = prog(&["+IZ"]);
        let cc = compress(&z, &[1], &mut ScriptedBits::new(&[])).unwrap();
        let d = decompose_to_gates(&cc);
        assert_eq!(d.circuit.gate_count(), 0);
        assert_eq!(d.flips, vec![0]);
    }
}
