//! Reproduction recipes: a campaign, an analysis of its sweep and target
//! ranges for the analysed quantities.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use xebsim_collapse::{fit, fit_p_c, CollapseFit, SearchSpec, SweepData};

use crate::campaign::run_campaign;
use crate::config::CampaignConfig;
use crate::error::{CliError, Result};
use crate::stats::{linear_fit, LinearFit};
use crate::store::Estimator;

pub const BUILTIN: &[(&str, &str)] = &[
    ("1d-noiseless-collapse", include_str!("../recipes/1d-noiseless-collapse.toml")),
    ("a2a-noiseless-collapse", include_str!("../recipes/a2a-noiseless-collapse.toml")),
    ("1d-noisy-collapse", include_str!("../recipes/1d-noisy-collapse.toml")),
    ("noisy-rho-eq-sigma-scaling", include_str!("../recipes/noisy-rho-eq-sigma-scaling.toml")),
    ("a2a-noisy-collapse", include_str!("../recipes/a2a-noisy-collapse.toml")),
];

fn d_grid() -> usize {
    61
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    /// Collapse fit of the sweep; `ν` is held fixed when `fixed_nu` is set.
    Collapse {
        p_c_bounds: (f64, f64),
        nu_bounds: (f64, f64),
        #[serde(default)]
        fixed_nu: Option<f64>,
        #[serde(default = "d_grid")]
        grid: usize,
    },
    /// Linear fit of `ln χ̄` against `L²` at each `p`.
    Decay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub quantity: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub name: String,
    pub description: String,
    pub estimator: Estimator,
    pub runtime_budget_s: f64,
    /// Reported but never gating.
    #[serde(default)]
    pub informational: bool,
    pub campaign: CampaignConfig,
    pub analysis: Analysis,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

impl Recipe {
    pub fn from_toml(text: &str) -> Result<Self> {
        let r: Recipe = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        r.campaign.validate()?;
        Ok(r)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| CliError::Config(format!("unknown recipe {name:?}")))?;
        Recipe::from_toml(text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Finished over its runtime budget.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub quantity: String,
    pub measured: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub p: f64,
    pub sizes: Vec<usize>,
    pub log_chi: Vec<f64>,
    pub fit: Option<LinearFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeOutcome {
    pub name: String,
    pub status: Status,
    pub informational: bool,
    pub elapsed_s: f64,
    pub quantities: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub fit: Option<CollapseFit>,
    pub decay: Vec<DecayFit>,
}

impl RecipeOutcome {
    pub fn table(&self) -> String {
        let mut s = format!("recipe {}: {:?}{} in {:.1} s\n", self.name, self.status, if self.informational { " (informational)" } else { "" }, self.elapsed_s);
        s += &format!("  {:<24} {:>12} {:>10} {:>10}  result\n", "quantity", "measured", "min", "max");
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        for c in &self.checks {
            s += &format!(
                "  {:<24} {:>12} {:>10} {:>10}  {}\n",
                c.quantity,
                f(c.measured),
                f(c.min),
                f(c.max),
                if c.pass { "ok" } else { "FAIL" }
            );
        }
        for (k, v) in &self.quantities {
            if !self.checks.iter().any(|c| &c.quantity == k) {
                s += &format!("  {k:<24} {v:>12.4}\n");
            }
        }
        s
    }
}

/// Fit the collapse and collect the reported quantities.
pub fn collapse_quantities(
    data: &SweepData,
    p_c_bounds: (f64, f64),
    nu_bounds: (f64, f64),
    fixed_nu: Option<f64>,
    grid: usize,
) -> Result<(CollapseFit, BTreeMap<String, f64>)> {
    let mut spec = SearchSpec::new(p_c_bounds, nu_bounds);
    spec.grid = (grid, grid);
    let f = match fixed_nu {
        Some(nu) => fit_p_c(data, nu, &spec)?,
        None => fit(data, &spec)?,
    };
    let mut q = BTreeMap::new();
    q.insert("p_c".to_string(), f.p_c);
    q.insert("nu".to_string(), f.nu);
    q.insert("cost".to_string(), f.cost);
    q.insert("cost_per_term".to_string(), f.cost / f.terms.max(1) as f64);
    if let Some(d) = f.delta_p_c {
        q.insert("delta_p_c".to_string(), d);
    }
    if let Some(d) = f.delta_nu {
        q.insert("delta_nu".to_string(), d);
    }
    Ok((f, q))
}

/// Least-squares fit of `ln χ̄` against `L²` for each `p` of the sweep.
pub fn decay_fits(data: &SweepData) -> Vec<DecayFit> {
    let mut ps: Vec<f64> = data.series.iter().flat_map(|s| s.p.iter().copied()).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    ps.into_iter()
        .map(|p| {
            let mut sizes = Vec::new();
            let mut log_chi = Vec::new();
            for s in &data.series {
                if let Some(i) = s.p.iter().position(|&v| v == p) {
                    sizes.push(s.l as usize);
                    log_chi.push(s.chi[i].ln());
                }
            }
            let x: Vec<f64> = sizes.iter().map(|&l| (l * l) as f64).collect();
            let fit = if log_chi.iter().all(|v| v.is_finite()) { linear_fit(&x, &log_chi) } else { None };
            DecayFit { p, sizes, log_chi, fit }
        })
        .collect()
}

pub fn decay_quantities(fits: &[DecayFit]) -> BTreeMap<String, f64> {
    let mut q = BTreeMap::new();
    for d in fits {
        if let Some(f) = d.fit {
            q.insert(format!("r_squared@p={}", d.p), f.r_squared);
            q.insert(format!("slope@p={}", d.p), f.slope);
        }
    }
    q
}

pub fn check_expectations(expect: &[Expectation], quantities: &BTreeMap<String, f64>) -> Vec<Check> {
    expect
        .iter()
        .map(|e| {
            let measured = quantities.get(&e.quantity).copied();
            let pass = measured.is_some_and(|v| e.min.map_or(true, |m| v >= m) && e.max.map_or(true, |m| v <= m));
            Check { quantity: e.quantity.clone(), measured, min: e.min, max: e.max, pass }
        })
        .collect()
}

/// Run the campaign (resuming whatever `dir` already holds), analyse it and
/// write `fit.json`, `rescaled.csv`, `cost_surface.csv` and `outcome.json`.
pub fn run_recipe(recipe: &Recipe, dir: &Path, worker_count: Option<usize>) -> Result<RecipeOutcome> {
    let t = Instant::now();
    let mut config = recipe.campaign.clone();
    if worker_count.is_some() {
        config.worker_count = worker_count;
    }
    let store = run_campaign(&config, recipe.estimator, dir)?;
    let data = store.sweep_data()?;
    let (fit, decay, quantities) = match &recipe.analysis {
        Analysis::Collapse { p_c_bounds, nu_bounds, fixed_nu, grid } => {
            let (f, q) = collapse_quantities(&data, *p_c_bounds, *nu_bounds, *fixed_nu, *grid)?;
            std::fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&f)? + "\n")?;
            f.write_rescaled_csv(&data, File::create(dir.join("rescaled.csv"))?)?;
            if let Some(s) = &f.surface {
                s.write_csv(File::create(dir.join("cost_surface.csv"))?)?;
            }
            (Some(f), vec![], q)
        }
        Analysis::Decay => {
            let d = decay_fits(&data);
            let q = decay_quantities(&d);
            (None, d, q)
        }
    };
    let checks = check_expectations(&recipe.expect, &quantities);
    let elapsed_s = t.elapsed().as_secs_f64();
    let status = if elapsed_s > recipe.runtime_budget_s {
        Status::Inconclusive
    } else if checks.iter().all(|c| c.pass) {
        Status::Pass
    } else {
        Status::Fail
    };
    let outcome = RecipeOutcome {
        name: recipe.name.clone(),
        status,
        informational: recipe.informational,
        elapsed_s,
        quantities,
        checks,
        fit,
        decay,
    };
    std::fs::write(dir.join("outcome.json"), serde_json::to_string_pretty(&outcome)? + "\n")?;
    Ok(outcome)
}
