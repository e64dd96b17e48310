//! Append-only JSON-lines result file plus a manifest, both in one
//! directory. A cell is complete once its line is in the results file; the
//! manifest mirrors that and pins the configuration hash.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use xebsim_collapse::{Row, SweepData};

use crate::config::CampaignConfig;
use crate::error::{CliError, Result};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Shot sampling against the clean replay.
    Sampled,
    /// Exact cross entropy per circuit.
    Exact,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Sampled => "sampled",
            Estimator::Exact => "exact",
        }
    }
}

/// Aggregated result of one `(L, p)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub estimator: Estimator,
    pub n_circuits: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_shots: Option<usize>,
    pub chi_bar: f64,
    pub eps: f64,
    pub ci95: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub between_circuit_se: Option<f64>,
    /// Per-circuit estimates in circuit order.
    pub chi: Vec<f64>,
    /// Per-circuit standard errors (sampled estimator only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_i: Option<Vec<f64>>,
}

fn cell_key(l: usize, p: f64) -> String {
    format!("L={l},p={p}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub estimator: Estimator,
    pub config_hash: String,
    pub config: CampaignConfig,
    /// Completion per cell, keyed `L=..,p=..`.
    pub completed: BTreeMap<String, bool>,
}

pub struct ResultStore {
    dir: PathBuf,
    manifest: Manifest,
    records: Vec<CellRecord>,
}

impl ResultStore {
    /// Create the store, or resume it if `dir` already holds one for the
    /// same configuration. A torn last line is discarded.
    pub fn open(dir: &Path, config: &CampaignConfig, estimator: Estimator) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let hash = config.hash(estimator.as_str());
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            let old: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
            if old.config_hash != hash {
                return Err(CliError::Config(format!(
                    "{} holds a campaign with a different configuration (hash {} vs {})",
                    dir.display(),
                    old.config_hash,
                    hash
                )));
            }
        }
        let results_path = dir.join(RESULTS_FILE);
        let mut records = Vec::new();
        if results_path.exists() {
            let mut good_len = 0u64;
            let reader = BufReader::new(File::open(&results_path)?);
            for line in reader.split(b'\n') {
                let line = line?;
                match serde_json::from_slice::<CellRecord>(&line) {
                    Ok(r) => {
                        records.push(r);
                        good_len += line.len() as u64 + 1;
                    }
                    Err(_) => break,
                }
            }
            let f = OpenOptions::new().write(true).open(&results_path)?;
            if f.metadata()?.len() != good_len {
                log::warn!("discarding a partial trailing line in {}", results_path.display());
                f.set_len(good_len)?;
            }
        }
        let cells = config.cells();
        for r in &records {
            if !cells.iter().any(|&(l, p)| l == r.l && p == r.p) {
                return Err(CliError::Config(format!("stored cell L={} p={} is not in the configuration", r.l, r.p)));
            }
        }
        let completed = cells
            .iter()
            .map(|&(l, p)| (cell_key(l, p), records.iter().any(|r| r.l == l && r.p == p)))
            .collect();
        let manifest = Manifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            estimator,
            config_hash: hash,
            config: config.clone(),
            completed,
        };
        let store = ResultStore { dir: dir.to_path_buf(), manifest, records };
        store.write_manifest()?;
        Ok(store)
    }

    fn write_manifest(&self) -> Result<()> {
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        std::fs::rename(tmp, self.dir.join(MANIFEST_FILE))?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn records(&self) -> &[CellRecord] {
        &self.records
    }

    pub fn is_done(&self, l: usize, p: f64) -> bool {
        self.manifest.completed.get(&cell_key(l, p)).copied().unwrap_or(false)
    }

    pub fn append(&mut self, record: CellRecord) -> Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.dir.join(RESULTS_FILE))?;
        let mut line = serde_json::to_vec(&record)?;
        line.push(b'\n');
        f.write_all(&line)?;
        f.sync_data()?;
        self.manifest.completed.insert(cell_key(record.l, record.p), true);
        self.records.push(record);
        self.write_manifest()
    }

    pub fn sweep_data(&self) -> Result<SweepData> {
        let rows: Vec<Row> = self
            .records
            .iter()
            .map(|r| Row { l: r.l as u32, p: r.p, chi_bar: r.chi_bar, eps: r.eps })
            .collect();
        Ok(SweepData::from_rows(&rows)?)
    }

    /// Write the `(L, p, chi_bar, eps)` projection next to the results.
    pub fn write_sweep_csv(&self) -> Result<PathBuf> {
        let path = self.dir.join(SWEEP_FILE);
        self.sweep_data()?.write_csv(File::create(&path)?)?;
        Ok(path)
    }
}
