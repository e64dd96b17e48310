use serde::{Deserialize, Serialize};

use crate::data::SweepData;
use crate::error::{CollapseError, Result};
use crate::pchip::Pchip;

/// `L^{1/ν} (p - p_c)`.
pub fn rescale(l: f64, p: f64, p_c: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) || !(l > 0.0) {
        return Err(CollapseError::Parameters(format!("need L > 0 and nu > 0, got L = {l}, nu = {nu}")));
    }
    Ok(l.powf(1.0 / nu) * (p - p_c))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    None,
    /// Each residual divided by the variance of the data point it compares.
    InverseVariance,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cost {
    pub value: f64,
    /// Number of residuals summed.
    pub terms: usize,
    /// Ordered pairs of sizes whose windows share no knot.
    pub empty_pairs: usize,
}

/// Rescaled abscissae of every series.
pub fn rescaled(data: &SweepData, p_c: f64, nu: f64) -> Result<Vec<Vec<f64>>> {
    data.series
        .iter()
        .map(|s| s.p.iter().map(|&p| rescale(s.l as f64, p, p_c, nu)).collect())
        .collect()
}

/// Sum over ordered pairs of distinct sizes `(L, L')` and over the knots `q`
/// of `L'` inside the rescaled range of `L` of `(f_L(q) - χ_{L'}(q))²`,
/// where `f_L` interpolates the rescaled `L` series.
pub fn collapse_cost(data: &SweepData, p_c: f64, nu: f64, weighting: Weighting) -> Result<Cost> {
    if data.series.len() < 2 {
        return Err(CollapseError::Input("need at least two system sizes".into()));
    }
    let qs = rescaled(data, p_c, nu)?;
    let mut fs = Vec::with_capacity(qs.len());
    for (s, q) in data.series.iter().zip(&qs) {
        if s.p.len() < 2 {
            return Err(CollapseError::Input(format!("series L = {} has fewer than two points", s.l)));
        }
        fs.push(Pchip::new(q, &s.chi)?);
    }
    let mut value = 0.0;
    let mut terms = 0;
    let mut empty_pairs = 0;
    for (a, f) in fs.iter().enumerate() {
        let (lo, hi) = f.domain();
        for (b, other) in data.series.iter().enumerate() {
            if a == b {
                continue;
            }
            let mut any = false;
            for (i, &q) in qs[b].iter().enumerate() {
                if q < lo || q > hi {
                    continue;
                }
                any = true;
                let r = f.eval(q) - other.chi[i];
                let w = match weighting {
                    Weighting::None => 1.0,
                    Weighting::InverseVariance if other.eps[i] > 0.0 => 1.0 / (other.eps[i] * other.eps[i]),
                    Weighting::InverseVariance => 1.0,
                };
                value += w * r * r;
                terms += 1;
            }
            if !any {
                empty_pairs += 1;
            }
        }
    }
    Ok(Cost { value, terms, empty_pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Row;

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale(16.0, 0.3, 0.3, 1.7).unwrap(), 0.0);
        assert!((rescale(16.0, 0.17, 0.16, 1.0).unwrap() - 0.16).abs() < 1e-15);
        assert!((rescale(16.0, 0.17, 0.16, 2.0).unwrap() - 0.04).abs() < 1e-15);
        assert!(rescale(16.0, 0.2, 0.1, 0.0).is_err());
        assert!(rescale(16.0, 0.2, 0.1, -1.0).is_err());
    }

    #[test]
    fn shared_curve_has_zero_cost() {
        // the same points in q for two sizes when p_c = 0, ν = 1
        let mut rows = Vec::new();
        for (l, ps) in [(10u32, [0.01, 0.02, 0.03]), (20u32, [0.005, 0.01, 0.015])] {
            for p in ps {
                let q = l as f64 * p;
                rows.push(Row { l, p, chi_bar: 1.0 - q * q, eps: 0.0 });
            }
        }
        let d = SweepData::from_rows(&rows).unwrap();
        let c = collapse_cost(&d, 0.0, 1.0, Weighting::None).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.terms, 6);
    }

    #[test]
    fn disjoint_windows_are_vacuous() {
        let rows = vec![
            Row { l: 10, p: 0.0, chi_bar: 1.0, eps: 0.0 },
            Row { l: 10, p: 0.1, chi_bar: 0.5, eps: 0.0 },
            Row { l: 20, p: 0.5, chi_bar: 0.1, eps: 0.0 },
            Row { l: 20, p: 0.6, chi_bar: 0.0, eps: 0.0 },
        ];
        let d = SweepData::from_rows(&rows).unwrap();
        let c = collapse_cost(&d, 0.0, 1.0, Weighting::None).unwrap();
        assert_eq!((c.value, c.terms, c.empty_pairs), (0.0, 0, 2));
    }
}
