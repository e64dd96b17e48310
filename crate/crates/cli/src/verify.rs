//! Randomized audits run by `xebsim verify`. Instance `i` of an audit uses
//! seed `mix_seed(seed, i)`, so reports are reproducible.

use rayon::prelude::*;
use serde::Serialize;

use xebsim_core::audit::{compression_instance, inequality_instance, oracle_instance};
use xebsim_core::rng::{mix_seed, stream};
use xebsim_core::xeb::{
    aggregate, estimate_chi, exact_chi, random_measurement_count, stabilizer_record_distribution, InitialState,
};
use xebsim_core::{build_circuit, inject_noise, Circuit, CircuitSpec, Connectivity, NoisySpec};

use crate::error::Result;

/// Largest TVD accepted for the magic-register comparison.
pub const MAGIC_TVD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    pub passed: bool,
    /// First few failure descriptions.
    pub details: Vec<String>,
    pub notes: Vec<String>,
}

impl AuditReport {
    fn from_outcomes(name: &str, outcomes: Vec<Option<String>>, notes: Vec<String>) -> Self {
        let failures = outcomes.iter().filter(|o| o.is_some()).count();
        AuditReport {
            name: name.to_string(),
            instances: outcomes.len(),
            failures,
            passed: failures == 0,
            details: outcomes.into_iter().flatten().take(10).collect(),
            notes,
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {} ({} instances, {} failures)",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.instances,
            self.failures
        );
        for n in &self.notes {
            s += &format!("\n  {n}");
        }
        for d in &self.details {
            s += &format!("\n  failure: {d}");
        }
        s
    }
}

/// Compression equivalence and resource bounds on random circuits with `L`
/// drawn from `l_choices`. With `corrupt`, each sign map is tampered with
/// before the comparison, so the audit is expected to fail.
pub fn compression_audit(budget: usize, seed: u64, l_choices: &[usize], corrupt: bool) -> Result<AuditReport> {
    let checks = (0..budget)
        .into_par_iter()
        .map(|i| compression_instance(mix_seed(seed, i as u64), l_choices, corrupt).map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;
    let corrupted = checks.iter().filter(|c| c.corrupted).count();
    let worst_tvd = checks.iter().map(|c| c.magic_tvd).fold(0.0, f64::max);
    let outcomes = checks
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if !c.stabilizer_equal {
                Some(format!("instance {i} (L={}): distributions differ: {}", c.l, c.reason.clone().unwrap_or_default()))
            } else if !c.within_bounds {
                Some(format!("instance {i} (L={}): resources {:?} exceed the compressed bounds", c.l, c.resources.compressed))
            } else if !(c.magic_tvd <= MAGIC_TVD_TOL) {
                Some(format!("instance {i} (L={}): magic-input TVD {:e}", c.l, c.magic_tvd))
            } else {
                None
            }
        })
        .collect();
    let mut notes = vec![format!("largest magic-input TVD {worst_tvd:e}")];
    if corrupt {
        notes.push(format!("sign map corrupted in {corrupted} instances"));
    }
    Ok(AuditReport::from_outcomes(
        if corrupt { "compression (corrupted sign maps)" } else { "compression" },
        outcomes,
        notes,
    ))
}

/// `χ(C', ρ | C, σ) ≤ χ(C', σ | C, σ)` on random instances, both sides exact.
pub fn inequality_audit(budget: usize, seed: u64, l_choices: &[usize], q: Option<f64>) -> Result<AuditReport> {
    let reports = (0..budget)
        .into_par_iter()
        .map(|i| inequality_instance(mix_seed(seed, i as u64), l_choices, q).map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;
    let strict = reports.iter().filter(|r| r.lhs < r.rhs).count();
    let outcomes = reports
        .iter()
        .enumerate()
        .map(|(i, r)| (!r.holds).then(|| format!("instance {i}: {} > {}", r.lhs.value(), r.rhs.value())))
        .collect();
    Ok(AuditReport::from_outcomes("inequality", outcomes, vec![format!("{strict} instances hold strictly")]))
}

/// Stabilizer engines against the dense oracle on random workloads.
pub fn oracle_audit(budget: usize, seed: u64) -> Result<AuditReport> {
    let results = (0..budget)
        .into_par_iter()
        .map(|i| oracle_instance(mix_seed(seed, i as u64)).map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;
    let dense = results.iter().filter(|r| matches!(r, Ok(true))).count();
    let outcomes = results.into_iter().enumerate().map(|(i, r)| r.err().map(|e| format!("instance {i}: {e}"))).collect();
    Ok(AuditReport::from_outcomes("oracle", outcomes, vec![format!("dense cross entropy checked on {dense} instances")]))
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimatorAudit {
    pub repetitions: usize,
    /// Repetitions with `|χ̄ - χ_exact| ≤ 3ε`.
    pub within: usize,
    pub exact_mean: f64,
    pub circuits: usize,
    pub identity_failures: usize,
}

impl EstimatorAudit {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.repetitions as f64
    }
}

/// The fixed circuits used by the estimator audit: `L = 4`, 1D, `p = 0.25`,
/// 2% erasures on the sampled side.
pub fn estimator_circuits(seed: u64, count: usize) -> Result<Vec<(Circuit, Circuit)>> {
    (0..count)
        .map(|j| {
            let s = mix_seed(seed, 1_000_000 + j as u64);
            let clean = build_circuit(&CircuitSpec::new(4, Connectivity::Chain1D, 0.25, s))?;
            let noisy = inject_noise(&clean, &NoisySpec { q: 0.02 }, &mut stream(mix_seed(s, 1)))?;
            Ok((noisy, clean))
        })
        .collect()
}

/// `Σ_m (p^σ_m)² = 2^{-N_rand}` checked by exact enumeration.
pub fn denominator_identity(clean: &Circuit, sigma: &InitialState) -> Result<bool> {
    let dist = stabilizer_record_distribution(clean, sigma, 24)?;
    let sum: f64 = dist.values().map(|p| p * p).sum();
    let n = random_measurement_count(clean, sigma)?;
    Ok(sum == (-(n as f64)).exp2())
}

/// Repeat the sampled pipeline on fixed circuits and count how often the
/// aggregate lands within `3ε` of the exact mean.
pub fn estimator_audit(repetitions: usize, seed: u64, circuits: usize, shots: usize) -> Result<EstimatorAudit> {
    let pairs = estimator_circuits(seed, circuits)?;
    let rho = InitialState::MaximallyMixed;
    let sigma = InitialState::AllZero;
    let mut exact = 0.0;
    let mut identity_failures = 0;
    for (noisy, clean) in &pairs {
        exact += exact_chi(noisy, clean, &rho, &sigma)?.value();
        for s in [&sigma, &rho] {
            if !denominator_identity(clean, s)? {
                identity_failures += 1;
            }
        }
    }
    let exact_mean = exact / pairs.len() as f64;
    let within = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let rs = mix_seed(seed, r as u64);
            let per = pairs
                .iter()
                .enumerate()
                .map(|(j, (noisy, clean))| estimate_chi(noisy, clean, &rho, &sigma, shots, mix_seed(rs, j as u64)))
                .collect::<xebsim_core::Result<Vec<_>>>()?;
            let agg = aggregate(&per)?;
            Ok(((agg.chi_bar - exact_mean).abs() <= 3.0 * agg.eps) as usize)
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(EstimatorAudit { repetitions, within, exact_mean, circuits: pairs.len(), identity_failures })
}

impl From<&EstimatorAudit> for AuditReport {
    fn from(a: &EstimatorAudit) -> Self {
        let passed = a.fraction() >= 0.99 && a.identity_failures == 0;
        AuditReport {
            name: "estimator".into(),
            instances: a.repetitions,
            failures: a.repetitions - a.within,
            passed,
            details: vec![],
            notes: vec![
                format!("{} / {} repetitions within 3 eps of the exact mean {:.6}", a.within, a.repetitions, a.exact_mean),
                format!("denominator identity failed on {} of {} circuit-state pairs", a.identity_failures, 2 * a.circuits),
            ],
        }
    }
}
