use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cost::rescale;
use crate::data::{Row, SweepData};
use crate::error::{CollapseError, Result};

/// Data drawn from `χ = F(L^{1/ν}(p - p_c)) + noise` with the sigmoid
/// `F(q) = (1 - tanh(q)) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub nu: f64,
    pub p_c: f64,
    pub sizes: Vec<u32>,
    pub p_values: Vec<f64>,
    /// Standard deviation of the Gaussian noise added to every cell.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            nu: 1.3,
            p_c: 0.16,
            sizes: vec![16, 32, 64, 128],
            p_values: (0..=12).map(|i| 0.10 + 0.01 * i as f64).collect(),
            noise: 1e-3,
        }
    }
}

pub fn scaling_function(q: f64) -> f64 {
    0.5 * (1.0 - q.tanh())
}

pub fn synthetic_sweep(spec: &SyntheticSpec, seed: u64) -> Result<SweepData> {
    let normal = Normal::new(0.0, spec.noise)
        .map_err(|e| CollapseError::Parameters(format!("noise level {}: {e}", spec.noise)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &l in &spec.sizes {
        for &p in &spec.p_values {
            let q = rescale(l as f64, p, spec.p_c, spec.nu)?;
            let chi_bar = scaling_function(q) + normal.sample(&mut rng);
            rows.push(Row { l, p, chi_bar, eps: spec.noise });
        }
    }
    SweepData::from_rows(&rows)
}
