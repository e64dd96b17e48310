pub mod audit;
pub mod circuit;
pub mod clifford;
pub mod compression;
pub mod error;
pub mod group;
pub mod oracle;
pub mod pauli;
pub mod rng;
pub mod stabilizer;
pub mod tableau;
pub mod xeb;

pub use circuit::{build_circuit, inject_noise, Boundary, Circuit, CircuitSpec, Connectivity, Event, NoisySpec};
pub use clifford::{CliffordGate, LocalClifford, Support};
pub use error::{Error, Result};
pub use group::{group_intersection_size, GeneratorSet, Intersection, Membership};
pub use pauli::{Letter, PauliString};
pub use stabilizer::{Forced, MeasurementOutcome, MixedStabilizerState};
pub use tableau::{Draw, Outcome, Tableau};
