//! Campaign configuration, read from TOML. Every field has a default except
//! the connectivity and the `L` and `p` lists.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use xebsim_core::xeb::InitialState;
use xebsim_core::{Boundary, CircuitSpec, Connectivity};

use crate::error::{CliError, Result};

/// Stabilizer initial states selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    AllZero,
    MaximallyMixed,
    PlusAll,
}

impl StateKind {
    pub fn initial_state(self) -> InitialState {
        match self {
            StateKind::AllZero => InitialState::AllZero,
            StateKind::MaximallyMixed => InitialState::MaximallyMixed,
            StateKind::PlusAll => InitialState::PlusAll,
        }
    }
}

impl std::str::FromStr for StateKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<InitialState>().map_err(|e| CliError::Config(e.to_string()))? {
            InitialState::AllZero => Ok(StateKind::AllZero),
            InitialState::MaximallyMixed => Ok(StateKind::MaximallyMixed),
            InitialState::PlusAll => Ok(StateKind::PlusAll),
            InitialState::Custom(_) => Err(CliError::Config(format!("unsupported state {s:?}"))),
        }
    }
}

fn ser_conn<S: Serializer>(c: &Connectivity, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(c.as_str())
}

fn de_conn<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Connectivity, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn d_circuits() -> usize {
    1000
}
fn d_shots() -> usize {
    1000
}
fn d_rho() -> StateKind {
    StateKind::MaximallyMixed
}
fn d_sigma() -> StateKind {
    StateKind::AllZero
}
fn d_ratio() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(serialize_with = "ser_conn", deserialize_with = "de_conn")]
    pub connectivity: Connectivity,
    #[serde(rename = "L_list")]
    pub l_list: Vec<usize>,
    pub p_list: Vec<f64>,
    /// Erasure rate on the sampled circuit.
    #[serde(default)]
    pub q: f64,
    #[serde(default = "d_circuits")]
    pub n_circuits: usize,
    #[serde(default = "d_shots")]
    pub n_shots: usize,
    #[serde(default = "d_rho")]
    pub rho: StateKind,
    #[serde(default = "d_sigma")]
    pub sigma: StateKind,
    #[serde(default = "d_ratio")]
    pub encoding_ratio: f64,
    #[serde(default = "d_ratio")]
    pub bulk_ratio: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_count: Option<usize>,
}

impl CampaignConfig {
    pub fn new(connectivity: Connectivity, l_list: Vec<usize>, p_list: Vec<f64>) -> Self {
        CampaignConfig {
            connectivity,
            l_list,
            p_list,
            q: 0.0,
            n_circuits: d_circuits(),
            n_shots: d_shots(),
            rho: d_rho(),
            sigma: d_sigma(),
            encoding_ratio: d_ratio(),
            bulk_ratio: d_ratio(),
            boundary: Boundary::Open,
            master_seed: 0,
            output_path: None,
            worker_count: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: CampaignConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        CampaignConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.l_list.is_empty() || self.p_list.is_empty() {
            return bad("L_list and p_list must be nonempty".into());
        }
        if let Some(l) = self.l_list.iter().find(|&&l| l == 0 || l % 2 == 1) {
            return bad(format!("L must be positive and even, got {l}"));
        }
        if let Some(p) = self.p_list.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("p must lie in [0, 1], got {p}"));
        }
        let mut ls = std::collections::HashSet::new();
        let mut ps = std::collections::HashSet::new();
        if !self.l_list.iter().all(|l| ls.insert(*l)) || !self.p_list.iter().all(|p| ps.insert(p.to_bits())) {
            return bad("L_list and p_list must not repeat values".into());
        }
        if !(0.0..=1.0).contains(&self.q) {
            return bad(format!("q must lie in [0, 1], got {}", self.q));
        }
        if self.n_circuits == 0 {
            return bad("n_circuits must be positive".into());
        }
        if self.n_shots < 2 {
            return bad("n_shots must be at least 2".into());
        }
        if self.worker_count == Some(0) {
            return bad("worker_count must be positive".into());
        }
        for (name, r) in [("encoding_ratio", self.encoding_ratio), ("bulk_ratio", self.bulk_ratio)] {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("{name} must be positive, got {r}"));
            }
        }
        Ok(())
    }

    pub fn circuit_spec(&self, l: usize, p: f64, seed: u64) -> CircuitSpec {
        let mut s = CircuitSpec::new(l, self.connectivity, p, seed);
        s.encoding_ratio = self.encoding_ratio;
        s.bulk_ratio = self.bulk_ratio;
        s.boundary = self.boundary;
        s
    }

    /// Hash of everything that determines the results; the output path and
    /// worker count are excluded.
    pub fn hash(&self, mode: &str) -> String {
        let mut c = self.clone();
        c.output_path = None;
        c.worker_count = None;
        let mut h = Sha256::new();
        h.update(mode.as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(&c).expect("config serializes"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cells(&self) -> Vec<(usize, f64)> {
        self.l_list.iter().flat_map(|&l| self.p_list.iter().map(move |&p| (l, p))).collect()
    }
}
