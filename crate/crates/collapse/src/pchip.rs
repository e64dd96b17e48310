//! Monotone piecewise cubic Hermite interpolation.
//!
//! Interior slopes are the weighted harmonic mean of the adjacent secants
//! (zero at local extrema and flat secants); end slopes use the one-sided
//! three-point formula, limited so the end interval stays monotone.

use crate::error::{CollapseError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if sign(d) != sign(m0) {
        0.0
    } else if sign(m0) != sign(m1) && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(CollapseError::Input(format!("{} abscissae but {} values", n, y.len())));
        }
        if n < 2 {
            return Err(CollapseError::Input("need at least two points".into()));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(CollapseError::Input("non-finite point".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CollapseError::Input("abscissae must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                let (m0, m1) = (m[k - 1], m[k]);
                if m0 == 0.0 || m1 == 0.0 || sign(m0) != sign(m1) {
                    continue;
                }
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / m0 + w2 / m1);
            }
            d[0] = edge_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Pchip { x: x.to_vec(), y: y.to_vec(), d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    /// Value at `t`; outside the domain the end cubic is extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        // interval k with x[k] ≤ t < x[k+1], clamped to the end intervals
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        if s == 0.0 {
            return self.y[k];
        }
        if s == 1.0 {
            return self.y[k + 1];
        }
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_are_linear() {
        let f = Pchip::new(&[0.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(f.eval(0.5), 1.5);
        assert_eq!(f.eval(2.0), 3.0);
    }

    #[test]
    fn reproduces_knots_and_stays_monotone() {
        let x = [0.0, 0.3, 1.0, 1.1, 2.5, 4.0];
        let y = [1.0, 0.9, 0.9, 0.4, 0.1, 0.0];
        let f = Pchip::new(&x, &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(f.eval(*a), *b);
        }
        let mut prev = f.eval(0.0);
        for i in 1..=4000 {
            let v = f.eval(4.0 * i as f64 / 4000.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Pchip::new(&[0.0], &[1.0]).is_err());
        assert!(Pchip::new(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(Pchip::new(&[1.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(Pchip::new(&[0.0, 1.0], &[f64::NAN, 2.0]).is_err());
    }
}
