use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use xebsim_core::rng::{mix_seed, stream};
use xebsim_core::xeb::{aggregate, estimate_chi, exact_chi};
use xebsim_core::{build_circuit, inject_noise, Circuit, NoisySpec};

use crate::config::CampaignConfig;
use crate::error::{CliError, Result};
use crate::store::{CellRecord, Estimator, ResultStore};

/// Seed of the `i`-th circuit of cell `(L, p)`. Independent of the other
/// cells, so lists can grow without changing existing results.
pub fn circuit_seed(master: u64, l: usize, p: f64, i: usize) -> u64 {
    mix_seed(mix_seed(mix_seed(master, l as u64), p.to_bits()), i as u64)
}

const NOISE_STREAM: u64 = 1;
const SHOT_STREAM: u64 = 2;

/// The clean circuit and its noisy counterpart for one circuit seed.
pub fn circuit_pair(config: &CampaignConfig, l: usize, p: f64, seed: u64) -> Result<(Circuit, Circuit)> {
    let clean = build_circuit(&config.circuit_spec(l, p, seed))?;
    let noisy = inject_noise(&clean, &NoisySpec { q: config.q }, &mut stream(mix_seed(seed, NOISE_STREAM)))?;
    Ok((noisy, clean))
}

/// Per-circuit `(χ_i, ε_i)` for one cell, in circuit order.
pub fn cell_estimates(config: &CampaignConfig, estimator: Estimator, l: usize, p: f64) -> Result<Vec<(f64, f64)>> {
    let rho = config.rho.initial_state();
    let sigma = config.sigma.initial_state();
    (0..config.n_circuits)
        .into_par_iter()
        .map(|i| {
            let seed = circuit_seed(config.master_seed, l, p, i);
            let (noisy, clean) = circuit_pair(config, l, p, seed)?;
            Ok(match estimator {
                Estimator::Sampled => {
                    estimate_chi(&noisy, &clean, &rho, &sigma, config.n_shots, mix_seed(seed, SHOT_STREAM))?
                }
                Estimator::Exact => (exact_chi(&noisy, &clean, &rho, &sigma)?.value(), 0.0),
            })
        })
        .collect()
}

pub fn cell_record(config: &CampaignConfig, estimator: Estimator, l: usize, p: f64, per: &[(f64, f64)]) -> Result<CellRecord> {
    let agg = aggregate(per)?;
    let chi: Vec<f64> = per.iter().map(|c| c.0).collect();
    Ok(match estimator {
        Estimator::Sampled => CellRecord {
            l,
            p,
            estimator,
            n_circuits: per.len(),
            n_shots: Some(config.n_shots),
            chi_bar: agg.chi_bar,
            eps: agg.eps,
            ci95: agg.ci95,
            between_circuit_se: agg.between_circuit_se,
            chi,
            eps_i: Some(per.iter().map(|c| c.1).collect()),
        },
        Estimator::Exact => {
            // no shot noise: the error bar is the spread across circuits
            let eps = agg.between_circuit_se.unwrap_or(0.0);
            CellRecord {
                l,
                p,
                estimator,
                n_circuits: per.len(),
                n_shots: None,
                chi_bar: agg.chi_bar,
                eps,
                ci95: (agg.chi_bar - 1.96 * eps, agg.chi_bar + 1.96 * eps),
                between_circuit_se: agg.between_circuit_se,
                chi,
                eps_i: None,
            }
        }
    })
}

fn pool(config: &CampaignConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.worker_count {
        b = b.num_threads(w);
    }
    b.build().map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

/// Run (or resume) every cell of the campaign in configuration order,
/// appending one line per completed cell.
pub fn run_campaign(config: &CampaignConfig, estimator: Estimator, dir: &Path) -> Result<ResultStore> {
    config.validate()?;
    let mut store = ResultStore::open(dir, config, estimator)?;
    let pool = pool(config)?;
    let cells = config.cells();
    let pending = cells.iter().filter(|&&(l, p)| !store.is_done(l, p)).count();
    log::info!(
        "{} estimator: {} cells ({} pending), {} circuits per cell, output {}",
        estimator.as_str(),
        cells.len(),
        pending,
        config.n_circuits,
        dir.display()
    );
    for (l, p) in cells {
        if store.is_done(l, p) {
            continue;
        }
        let t = Instant::now();
        let per = pool.install(|| cell_estimates(config, estimator, l, p))?;
        let rec = cell_record(config, estimator, l, p, &per)?;
        let secs = t.elapsed().as_secs_f64().max(1e-9);
        let rate = per.len() as f64 / secs;
        match estimator {
            Estimator::Sampled => log::info!(
                "L={l} p={p}: chi_bar={:.4} eps={:.4} ({:.1} circuits/s, {:.0} shots/s)",
                rec.chi_bar,
                rec.eps,
                rate,
                rate * config.n_shots as f64
            ),
            Estimator::Exact => {
                log::info!("L={l} p={p}: chi_bar={:.4} eps={:.4} ({:.1} circuits/s)", rec.chi_bar, rec.eps, rate)
            }
        }
        store.append(rec)?;
    }
    store.write_sweep_csv()?;
    Ok(store)
}
