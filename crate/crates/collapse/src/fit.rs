use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cost::{collapse_cost, rescaled, Weighting};
use crate::data::SweepData;
use crate::error::{CollapseError, Result};

/// Search box and optimizer settings. Bounds are always explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub p_c_bounds: (f64, f64),
    pub nu_bounds: (f64, f64),
    /// Grid points along p_c and ν.
    pub grid: (usize, usize),
    /// Nelder–Mead stops once the simplex diameter drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub eta: f64,
    pub weighting: Weighting,
}

impl SearchSpec {
    pub fn new(p_c_bounds: (f64, f64), nu_bounds: (f64, f64)) -> Self {
        SearchSpec {
            p_c_bounds,
            nu_bounds,
            grid: (61, 61),
            tolerance: 1e-4,
            max_iterations: 5000,
            eta: 0.1,
            weighting: Weighting::None,
        }
    }

    fn validate(&self, data: &SweepData) -> Result<()> {
        let (a, b) = self.p_c_bounds;
        let (c, d) = self.nu_bounds;
        if !(a < b) || !(c < d) || !(c > 0.0) || ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(CollapseError::Parameters(format!(
                "invalid bounds p_c in [{a}, {b}], nu in [{c}, {d}]"
            )));
        }
        let (lo, hi) = data.p_range();
        if a < lo || b > hi {
            return Err(CollapseError::Parameters(format!(
                "p_c bounds [{a}, {b}] leave the data range [{lo}, {hi}]"
            )));
        }
        if self.grid.0 < 2 || self.grid.1 < 2 {
            return Err(CollapseError::Parameters("grid needs at least 2 points per axis".into()));
        }
        if !(self.tolerance > 0.0) || !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(CollapseError::Parameters("tolerance must be positive and eta in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSurface {
    pub p_c: Vec<f64>,
    pub nu: Vec<f64>,
    /// `cost[i][j]` at `(p_c[i], nu[j])`.
    pub cost: Vec<Vec<f64>>,
}

impl CostSurface {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["p_c", "nu", "cost"])?;
        for (i, p) in self.p_c.iter().enumerate() {
            for (j, n) in self.nu.iter().enumerate() {
                w.write_record([p.to_string(), n.to_string(), self.cost[i][j].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Widths of the minimum on either side; `None` where the log-ratio is not positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Widths {
    pub minus: Option<f64>,
    pub plus: Option<f64>,
}

impl Widths {
    pub fn max(&self) -> Option<f64> {
        match (self.minus, self.plus) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub p_c: f64,
    pub nu: f64,
    pub delta_p_c: Option<f64>,
    pub delta_nu: Option<f64>,
    pub cost: f64,
    pub eta: f64,
    pub p_c_widths: Widths,
    pub nu_widths: Widths,
    /// Residuals summed at the optimum.
    pub terms: usize,
    /// Ordered size pairs with no overlap at the optimum.
    pub empty_pairs: usize,
    pub iterations: usize,
    /// Human-readable warnings (undefined widths, optimum on a bound, ...).
    pub flags: Vec<String>,
    #[serde(skip)]
    pub surface: Option<CostSurface>,
}

impl CollapseFit {
    /// `(q, chi, L)` rows of the data rescaled at the optimum.
    pub fn write_rescaled_csv<W: Write>(&self, data: &SweepData, writer: W) -> Result<()> {
        let qs = rescaled(data, self.p_c, self.nu)?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["q", "chi", "L"])?;
        for (s, q) in data.series.iter().zip(&qs) {
            for (qi, c) in q.iter().zip(&s.chi) {
                w.write_record([qi.to_string(), c.to_string(), s.l.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Minimize `f` over the plane from the simplex `start`; returns the best
/// vertex, its value and the number of iterations.
pub fn nelder_mead<F: FnMut([f64; 2]) -> f64>(
    mut f: F,
    start: [[f64; 2]; 3],
    tolerance: f64,
    max_iterations: usize,
) -> ([f64; 2], f64, usize) {
    let mut pts: Vec<([f64; 2], f64)> = start.iter().map(|&x| (x, f(x))).collect();
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let mut it = 0;
    while it < max_iterations {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diam = (0..3)
            .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
            .map(|(i, j)| ((pts[i].0[0] - pts[j].0[0]).powi(2) + (pts[i].0[1] - pts[j].0[1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        if diam < tolerance {
            break;
        }
        it += 1;
        let centroid = lerp(pts[0].0, pts[1].0, 0.5);
        let worst = pts[2];
        let xr = lerp(centroid, worst.0, -1.0);
        let fr = f(xr);
        if fr < pts[0].1 {
            let xe = lerp(centroid, worst.0, -2.0);
            let fe = f(xe);
            pts[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[1].1 {
            pts[2] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = lerp(centroid, xr, 0.5);
            (x, f(x))
        } else {
            let x = lerp(centroid, worst.0, 0.5);
            (x, f(x))
        };
        if fc < worst.1.min(fr) {
            pts[2] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = pts[0].0;
        for v in pts.iter_mut().skip(1) {
            let x = lerp(best, v.0, 0.5);
            *v = (x, f(x));
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    (pts[0].0, pts[0].1, it)
}

fn widths(center: f64, eta: f64, r_star: f64, mut cost_at: impl FnMut(f64) -> Option<f64>) -> Widths {
    let mut side = |x: f64| {
        let r = cost_at(x)?;
        if !(r_star > 0.0) || !(r > r_star) || !r.is_finite() {
            return None;
        }
        Some(eta * center.abs() / (2.0 * (r / r_star).ln()).sqrt())
    };
    Widths { minus: side(center * (1.0 - eta)), plus: side(center * (1.0 + eta)) }
}

/// Grid search over the bounds, Nelder–Mead polish from the best cell, then
/// the η-level widths of the minimum along each axis.
pub fn fit(data: &SweepData, spec: &SearchSpec) -> Result<CollapseFit> {
    spec.validate(data)?;
    // surfaces the degenerate-series errors before the search swallows them
    collapse_cost(data, spec.p_c_bounds.0, spec.nu_bounds.0, spec.weighting)?;
    let raw = |p_c: f64, nu: f64| collapse_cost(data, p_c, nu, spec.weighting).map(|c| c.value).ok();
    let (pl, ph) = spec.p_c_bounds;
    let (nl, nh) = spec.nu_bounds;
    let inside = |x: [f64; 2]| x[0] >= pl && x[0] <= ph && x[1] >= nl && x[1] <= nh;
    let bounded = |x: [f64; 2]| if inside(x) { raw(x[0], x[1]).unwrap_or(f64::INFINITY) } else { f64::INFINITY };

    let ps = linspace(pl, ph, spec.grid.0);
    let ns = linspace(nl, nh, spec.grid.1);
    let mut cost = vec![vec![0.0; ns.len()]; ps.len()];
    let mut best = (0, 0, f64::INFINITY);
    for (i, &p) in ps.iter().enumerate() {
        for (j, &n) in ns.iter().enumerate() {
            let c = bounded([p, n]);
            cost[i][j] = c;
            if c < best.2 {
                best = (i, j, c);
            }
        }
    }
    if !best.2.is_finite() {
        return Err(CollapseError::Input("cost is undefined everywhere on the grid".into()));
    }
    let mut flags = Vec::new();
    if cost.iter().flatten().all(|&c| c == 0.0) {
        flags.push("cost surface is flat at zero".to_string());
    }
    let dp = ps[1] - ps[0];
    let dn = ns[1] - ns[0];
    let x0 = [ps[best.0], ns[best.1]];
    // step into the box so that every start vertex is finite where possible
    let sp = if x0[0] + dp <= ph { dp } else { -dp };
    let sn = if x0[1] + dn <= nh { dn } else { -dn };
    let (x, r_star, iterations) =
        nelder_mead(bounded, [x0, [x0[0] + sp, x0[1]], [x0[0], x0[1] + sn]], spec.tolerance, spec.max_iterations);
    let (p_c, nu) = (x[0], x[1]);
    let at_opt = collapse_cost(data, p_c, nu, spec.weighting)?;

    let nu_widths = widths(nu, spec.eta, r_star, |n| raw(p_c, n));
    let p_c_widths = widths(p_c, spec.eta, r_star, |p| raw(p, nu));
    if r_star == 0.0 {
        flags.push("minimum cost is zero; widths undefined".to_string());
    } else {
        if nu_widths.max().is_none() {
            flags.push("nu width undefined: no displaced cost exceeds the minimum".to_string());
        }
        if p_c_widths.max().is_none() {
            flags.push("p_c width undefined: no displaced cost exceeds the minimum".to_string());
        }
    }
    let edge = |v: f64, lo: f64, hi: f64, d: f64| (v - lo) < 0.5 * d || (hi - v) < 0.5 * d;
    if edge(p_c, pl, ph, dp) {
        flags.push("p_c optimum lies on the search boundary".to_string());
    }
    if edge(nu, nl, nh, dn) {
        flags.push("nu optimum lies on the search boundary".to_string());
    }
    if at_opt.empty_pairs > 0 {
        flags.push(format!("{} size pairs do not overlap at the optimum", at_opt.empty_pairs));
    }
    Ok(CollapseFit {
        p_c,
        nu,
        delta_p_c: p_c_widths.max(),
        delta_nu: nu_widths.max(),
        cost: r_star,
        eta: spec.eta,
        p_c_widths,
        nu_widths,
        terms: at_opt.terms,
        empty_pairs: at_opt.empty_pairs,
        iterations,
        flags,
        surface: Some(CostSurface { p_c: ps, nu: ns, cost }),
    })
}

/// Fit `p_c` with `ν` held at `nu`: grid over the `p_c` bounds, then a
/// golden-section search on the bracket around the best grid point.
pub fn fit_p_c(data: &SweepData, nu: f64, spec: &SearchSpec) -> Result<CollapseFit> {
    spec.validate(data)?;
    if !(nu > 0.0) {
        return Err(CollapseError::Parameters(format!("nu must be positive, got {nu}")));
    }
    collapse_cost(data, spec.p_c_bounds.0, nu, spec.weighting)?;
    let raw = |p_c: f64| collapse_cost(data, p_c, nu, spec.weighting).map(|c| c.value).ok();
    let (pl, ph) = spec.p_c_bounds;
    let ps = linspace(pl, ph, spec.grid.0);
    let costs: Vec<f64> = ps.iter().map(|&p| raw(p).unwrap_or(f64::INFINITY)).collect();
    let best = (0..ps.len()).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap();
    if !costs[best].is_finite() {
        return Err(CollapseError::Input("cost is undefined everywhere on the grid".into()));
    }
    let (mut a, mut b) = (ps[best.saturating_sub(1)], ps[(best + 1).min(ps.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |x: f64| raw(x).unwrap_or(f64::INFINITY);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while b - a > spec.tolerance && iterations < spec.max_iterations {
        iterations += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (mut p_c, mut r_star) = if fc < fd { (c, fc) } else { (d, fd) };
    if costs[best] < r_star {
        p_c = ps[best];
        r_star = costs[best];
    }
    let at_opt = collapse_cost(data, p_c, nu, spec.weighting)?;
    let p_c_widths = widths(p_c, spec.eta, r_star, raw);
    let mut flags = Vec::new();
    if p_c_widths.max().is_none() {
        flags.push("p_c width undefined: no displaced cost exceeds the minimum".to_string());
    }
    let dp = ps[1] - ps[0];
    if (p_c - pl) < 0.5 * dp || (ph - p_c) < 0.5 * dp {
        flags.push("p_c optimum lies on the search boundary".to_string());
    }
    if at_opt.empty_pairs > 0 {
        flags.push(format!("{} size pairs do not overlap at the optimum", at_opt.empty_pairs));
    }
    Ok(CollapseFit {
        p_c,
        nu,
        delta_p_c: p_c_widths.max(),
        delta_nu: None,
        cost: r_star,
        eta: spec.eta,
        p_c_widths,
        nu_widths: Widths { minus: None, plus: None },
        terms: at_opt.terms,
        empty_pairs: at_opt.empty_pairs,
        iterations,
        flags,
        surface: Some(CostSurface { p_c: ps, nu: vec![nu], cost: costs.iter().map(|&c| vec![c]).collect() }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: [f64; 2]| (x[0] - 0.3).powi(2) + 10.0 * (x[1] + 1.2).powi(2) + 2.0;
        let (x, v, _) = nelder_mead(f, [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]], 1e-9, 10_000);
        assert!((x[0] - 0.3).abs() < 1e-8 && (x[1] + 1.2).abs() < 1e-8);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn widths_follow_log_ratio() {
        // R(x) = 1 + (x - 1)² around x* = 1
        let w = widths(1.0, 0.1, 1.0, |x| Some(1.0 + (x - 1.0) * (x - 1.0)));
        let expect = 0.1 / (2.0 * 1.01f64.ln()).sqrt();
        assert!((w.plus.unwrap() - expect).abs() < 1e-12);
        assert!((w.minus.unwrap() - expect).abs() < 1e-12);
        let flat = widths(1.0, 0.1, 0.0, |_| Some(1.0));
        assert_eq!(flat.max(), None);
    }

    #[test]
    fn fixed_nu_fit_recovers_planted_p_c() {
        let d = crate::synthetic::synthetic_sweep(&crate::synthetic::SyntheticSpec::default(), 5).unwrap();
        let f = fit_p_c(&d, 1.3, &SearchSpec::new((0.12, 0.2), (0.8, 2.0))).unwrap();
        assert!((f.p_c - 0.16).abs() < 0.002, "{}", f.p_c);
        assert_eq!(f.nu, 1.3);
        assert!(f.delta_p_c.is_some() && f.delta_nu.is_none());
    }
}
