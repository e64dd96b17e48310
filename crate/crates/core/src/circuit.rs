//! Random monitored Clifford circuits: a measurement-free encoding stage
//! followed by bulk layers of gates and probabilistic Z measurements, plus
//! erasure noise injection and a line-oriented text format.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{sample_two_qubit_clifford, CliffordGate, LocalClifford, Support};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Chain1D,
    AllToAll,
}

impl Connectivity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Connectivity::Chain1D => "chain1d",
            Connectivity::AllToAll => "all_to_all",
        }
    }
}

impl std::str::FromStr for Connectivity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "chain1d" | "1d" | "chain" => Ok(Connectivity::Chain1D),
            "alltoall" | "a2a" => Ok(Connectivity::AllToAll),
            _ => Err(Error::InvalidSpec(format!("unknown connectivity {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub l: usize,
    pub connectivity: Connectivity,
    pub p: f64,
    pub encoding_ratio: f64,
    pub bulk_ratio: f64,
    pub seed: u64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl CircuitSpec {
    pub fn new(l: usize, connectivity: Connectivity, p: f64, seed: u64) -> Self {
        CircuitSpec { l, connectivity, p, encoding_ratio: 3.0, bulk_ratio: 3.0, seed, boundary: Boundary::Open }
    }

    /// `round(encoding_ratio · L)`, ties away from zero.
    pub fn encoding_layers(&self) -> usize {
        (self.encoding_ratio * self.l as f64).round() as usize
    }

    /// `round(bulk_ratio · L)`, ties away from zero.
    pub fn bulk_layers(&self) -> usize {
        (self.bulk_ratio * self.l as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.l % 2 != 0 {
            return Err(Error::InvalidSpec(format!("L must be positive and even, got {}", self.l)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidSpec(format!("measurement rate {} outside [0,1]", self.p)));
        }
        for (name, r) in [("encoding_ratio", self.encoding_ratio), ("bulk_ratio", self.bulk_ratio)] {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    Gate { gate: CliffordGate, layer: usize },
    Measure { qubit: usize, layer: usize },
    Erase { qubit: usize, layer: usize },
}

impl Event {
    pub fn layer(&self) -> usize {
        match *self {
            Event::Gate { layer, .. } | Event::Measure { layer, .. } | Event::Erase { layer, .. } => layer,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Event::Gate { .. } => 0,
            Event::Erase { .. } => 1,
            Event::Measure { .. } => 2,
        }
    }
}

/// Ordered events on `L` qubits. Within a layer, gates come first, then
/// erasures, then measurements.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Circuit {
    pub l: usize,
    pub events: Vec<Event>,
    /// Index of the first bulk event; every event before it belongs to the
    /// encoding stage.
    pub stage_boundary: usize,
    pub num_layers: usize,
}

/// Pairs of qubits acted on by unitary layer `t`.
pub fn layer_pairs<R: Rng>(spec: &CircuitSpec, t: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let l = spec.l;
    match spec.connectivity {
        Connectivity::Chain1D => {
            if t % 2 == 0 {
                (0..l / 2).map(|i| (2 * i, 2 * i + 1)).collect()
            } else {
                match spec.boundary {
                    Boundary::Open => (0..l / 2 - 1).map(|i| (2 * i + 1, 2 * i + 2)).collect(),
                    Boundary::Periodic => (0..l / 2).map(|i| (2 * i + 1, (2 * i + 2) % l)).collect(),
                }
            }
        }
        Connectivity::AllToAll => {
            let mut perm: Vec<usize> = (0..l).collect();
            perm.shuffle(rng);
            perm.chunks(2).map(|c| (c[0], c[1])).collect()
        }
    }
}

/// Generate the circuit for `spec`; a pure function of the spec and its seed.
pub fn build_circuit(spec: &CircuitSpec) -> Result<Circuit> {
    spec.validate()?;
    let mut rng: StreamRng = stream(spec.seed);
    let t_enc = spec.encoding_layers();
    let t_bulk = spec.bulk_layers();
    let mut events = Vec::new();
    let mut stage_boundary = 0;
    for t in 0..t_enc + t_bulk {
        if t == t_enc {
            stage_boundary = events.len();
        }
        for (a, b) in layer_pairs(spec, t, &mut rng) {
            let action = sample_two_qubit_clifford(&mut rng);
            events.push(Event::Gate { gate: CliffordGate::two(a, b, action), layer: t });
        }
        if t >= t_enc {
            for q in 0..spec.l {
                if rng.gen::<f64>() < spec.p {
                    events.push(Event::Measure { qubit: q, layer: t });
                }
            }
        }
    }
    if t_bulk == 0 {
        stage_boundary = events.len();
    }
    Ok(Circuit { l: spec.l, events, stage_boundary, num_layers: t_enc + t_bulk })
}

impl Circuit {
    pub fn new(l: usize, events: Vec<Event>) -> Self {
        let num_layers = events.iter().map(|e| e.layer() + 1).max().unwrap_or(0);
        Circuit { l, events, stage_boundary: 0, num_layers }
    }

    pub fn measurement_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Measure { .. })).count()
    }

    pub fn erasure_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Erase { .. })).count()
    }

    pub fn gate_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Gate { .. })).count()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Gate { gate, .. } if gate.support.arity() == 2))
            .count()
    }

    /// Number of leading layers that form the encoding stage.
    pub fn encoding_layers(&self) -> usize {
        self.events.get(self.stage_boundary).map_or(self.num_layers, |e| e.layer())
    }

    pub fn has_erasures(&self) -> bool {
        self.erasure_count() > 0
    }

    /// The same circuit with every erasure removed.
    pub fn without_erasures(&self) -> Circuit {
        let mut boundary = self.stage_boundary;
        let mut events = Vec::with_capacity(self.events.len());
        for (i, e) in self.events.iter().enumerate() {
            if matches!(e, Event::Erase { .. }) {
                if i < self.stage_boundary {
                    boundary -= 1;
                }
            } else {
                events.push(*e);
            }
        }
        Circuit { l: self.l, events, stage_boundary: boundary, num_layers: self.num_layers }
    }

    /// Noisy and clean circuits agree once erasures are dropped.
    pub fn same_skeleton(&self, clean: &Circuit) -> bool {
        self.l == clean.l
            && self.events.iter().filter(|e| !matches!(e, Event::Erase { .. })).eq(clean
                .events
                .iter()
                .filter(|e| !matches!(e, Event::Erase { .. })))
    }

    /// Layer-by-layer ASAP depth counting every gate and measurement as one
    /// time step on its qubits.
    pub fn asap_depth(&self) -> usize {
        let mut ready = vec![0usize; self.l];
        let mut depth = 0;
        for e in &self.events {
            let qs = match e {
                Event::Gate { gate, .. } => gate.support.qubits(),
                Event::Measure { qubit, .. } | Event::Erase { qubit, .. } => vec![*qubit],
            };
            let start = qs.iter().map(|&q| ready[q]).max().unwrap_or(0);
            for &q in &qs {
                ready[q] = start + 1;
            }
            depth = depth.max(start + 1);
        }
        depth
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "L={} stage_boundary={} layers={}", self.l, self.stage_boundary, self.num_layers).unwrap();
        for e in &self.events {
            match e {
                Event::Gate { gate, layer } => match gate.support {
                    Support::One(a) => writeln!(s, "G {layer} {a} {}", gate.action.literal()),
                    Support::Two(a, b) => writeln!(s, "G {layer} {a} {b} {}", gate.action.literal()),
                }
                .unwrap(),
                Event::Measure { qubit, layer } => writeln!(s, "M {layer} {qubit}").unwrap(),
                Event::Erase { qubit, layer } => writeln!(s, "E {layer} {qubit}").unwrap(),
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty circuit file".into() })?;
        let mut l = None;
        let mut boundary = None;
        let mut layers = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: 1, msg: format!("bad header token {tok:?}") })?;
            let v: usize =
                v.parse().map_err(|_| Error::Parse { line: 1, msg: format!("bad number in {tok:?}") })?;
            match k {
                "L" => l = Some(v),
                "stage_boundary" => boundary = Some(v),
                "layers" => layers = Some(v),
                _ => return Err(Error::Parse { line: 1, msg: format!("unknown header key {k:?}") }),
            }
        }
        let l = l.ok_or(Error::Parse { line: 1, msg: "missing L".into() })?;
        let mut events = Vec::new();
        for (i, line) in lines {
            let ln = i + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad integer {s:?}") })
            };
            let check = |q: usize| -> Result<usize> {
                if q >= l {
                    Err(Error::Parse { line: ln, msg: format!("qubit {q} out of range") })
                } else {
                    Ok(q)
                }
            };
            let ev = match toks.as_slice() {
                ["G", t, a, b, lit] => {
                    let action = LocalClifford::parse_literal(lit)
                        .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
                    let gate = CliffordGate::new(Support::Two(check(num(a)?)?, check(num(b)?)?), action)
                        .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
                    Event::Gate { gate, layer: num(t)? }
                }
                ["G", t, a, lit] => {
                    let action = LocalClifford::parse_literal(lit)
                        .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
                    let gate = CliffordGate::new(Support::One(check(num(a)?)?), action)
                        .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
                    Event::Gate { gate, layer: num(t)? }
                }
                ["M", t, q] => Event::Measure { qubit: check(num(q)?)?, layer: num(t)? },
                ["E", t, q] => Event::Erase { qubit: check(num(q)?)?, layer: num(t)? },
                _ => return Err(Error::Parse { line: ln, msg: format!("unrecognized event {line:?}") }),
            };
            events.push(ev);
        }
        let stage_boundary = boundary.unwrap_or(0);
        if stage_boundary > events.len() {
            return Err(Error::Parse { line: 1, msg: "stage boundary beyond the last event".into() });
        }
        let num_layers =
            layers.unwrap_or_else(|| events.iter().map(|e| e.layer() + 1).max().unwrap_or(0));
        Ok(Circuit { l, events, stage_boundary, num_layers })
    }
}

/// Erasure rate applied on top of a clean circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisySpec {
    pub q: f64,
}

/// Insert an erasure after unitary layer `t` on qubit `j` independently with
/// probability `q`, for every layer (both stages) and qubit. Locations are
/// visited layer-major, qubit-minor, one uniform draw each.
pub fn inject_noise<R: Rng>(c: &Circuit, noise: &NoisySpec, rng: &mut R) -> Result<Circuit> {
    if !(0.0..=1.0).contains(&noise.q) {
        return Err(Error::InvalidSpec(format!("erasure rate {} outside [0,1]", noise.q)));
    }
    if noise.q == 0.0 {
        return Ok(c.clone());
    }
    debug_assert!(c.events.windows(2).all(|w| (w[0].layer(), w[0].rank()) <= (w[1].layer(), w[1].rank())));
    let t_enc = c.encoding_layers();
    let mut events = Vec::with_capacity(c.events.len() + 8);
    let mut i = 0;
    for t in 0..c.num_layers {
        while i < c.events.len() && c.events[i].layer() == t && c.events[i].rank() == 0 {
            events.push(c.events[i]);
            i += 1;
        }
        for q in 0..c.l {
            if rng.gen::<f64>() < noise.q {
                events.push(Event::Erase { qubit: q, layer: t });
            }
        }
        while i < c.events.len() && c.events[i].layer() == t {
            events.push(c.events[i]);
            i += 1;
        }
    }
    events.extend_from_slice(&c.events[i..]);
    let stage_boundary = events.iter().position(|e| e.layer() >= t_enc).unwrap_or(events.len());
    Ok(Circuit { l: c.l, events, stage_boundary, num_layers: c.num_layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn noiseless_small_circuit_shape() {
        let spec = CircuitSpec { boundary: Boundary::Periodic, ..CircuitSpec::new(4, Connectivity::Chain1D, 0.0, 1) };
        let c = build_circuit(&spec).unwrap();
        assert_eq!(c.measurement_count(), 0);
        assert_eq!(c.num_layers, 24);
        assert_eq!(c.gate_count(), 48);
        let open = build_circuit(&CircuitSpec::new(4, Connectivity::Chain1D, 0.0, 1)).unwrap();
        assert_eq!(open.gate_count(), 12 * 2 + 12);
    }

    #[test]
    fn brickwork_and_matching_have_disjoint_pairs() {
        for conn in [Connectivity::Chain1D, Connectivity::AllToAll] {
            let c = build_circuit(&CircuitSpec::new(10, conn, 0.2, 5)).unwrap();
            for t in 0..c.num_layers {
                let mut used = vec![false; 10];
                for e in c.events.iter().filter(|e| e.layer() == t) {
                    if let Event::Gate { gate, .. } = e {
                        for q in gate.support.qubits() {
                            assert!(!used[q]);
                            used[q] = true;
                        }
                    }
                }
                if conn == Connectivity::AllToAll {
                    assert!(used.iter().all(|&u| u));
                }
            }
        }
    }

    #[test]
    fn encoding_stage_is_unitary() {
        let c = build_circuit(&CircuitSpec::new(8, Connectivity::Chain1D, 0.5, 9)).unwrap();
        assert!(c.events[..c.stage_boundary].iter().all(|e| matches!(e, Event::Gate { .. })));
        assert_eq!(c.events[c.stage_boundary].layer(), 24);
    }

    #[test]
    fn deterministic_and_round_trip() {
        let spec = CircuitSpec::new(6, Connectivity::AllToAll, 0.3, 42);
        let a = build_circuit(&spec).unwrap();
        let b = build_circuit(&spec).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let noisy = inject_noise(&a, &NoisySpec { q: 0.05 }, &mut stream(3)).unwrap();
        assert!(noisy.has_erasures());
        for c in [&a, &noisy] {
            let back = Circuit::from_text(&c.to_text()).unwrap();
            assert_eq!(&back, c);
        }
        assert!(noisy.same_skeleton(&a));
        assert_eq!(noisy.without_erasures(), a);
    }

    #[test]
    fn full_noise_covers_every_location() {
        let c = build_circuit(&CircuitSpec::new(4, Connectivity::Chain1D, 0.3, 2)).unwrap();
        let noisy = inject_noise(&c, &NoisySpec { q: 1.0 }, &mut stream(0)).unwrap();
        assert_eq!(noisy.erasure_count(), 4 * 24);
        let zero = inject_noise(&c, &NoisySpec { q: 0.0 }, &mut stream(0)).unwrap();
        assert_eq!(zero, c);
    }

    #[test]
    fn invalid_specs() {
        assert!(build_circuit(&CircuitSpec::new(5, Connectivity::Chain1D, 0.1, 0)).is_err());
        assert!(build_circuit(&CircuitSpec::new(4, Connectivity::Chain1D, 1.5, 0)).is_err());
    }
}
