use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CollapseError, Result};

/// One `(L, p)` cell of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(rename = "L")]
    pub l: u32,
    pub p: f64,
    pub chi_bar: f64,
    pub eps: f64,
}

/// All cells of one system size, sorted by `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub l: u32,
    pub p: Vec<f64>,
    pub chi: Vec<f64>,
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepData {
    pub series: Vec<Series>,
}

impl SweepData {
    /// Group rows by `L` (ascending) and sort each group by `p`.
    pub fn from_rows(rows: &[Row]) -> Result<Self> {
        let mut rows = rows.to_vec();
        for r in &rows {
            if !(r.p.is_finite() && r.chi_bar.is_finite() && r.eps.is_finite()) {
                return Err(CollapseError::Input(format!("non-finite value in row {r:?}")));
            }
            if r.l == 0 {
                return Err(CollapseError::Input("L must be positive".into()));
            }
        }
        rows.sort_by(|a, b| a.l.cmp(&b.l).then(a.p.total_cmp(&b.p)));
        let mut series: Vec<Series> = Vec::new();
        for r in rows {
            match series.last_mut() {
                Some(s) if s.l == r.l => {
                    if *s.p.last().unwrap() == r.p {
                        return Err(CollapseError::Input(format!("duplicate p = {} for L = {}", r.p, r.l)));
                    }
                    s.p.push(r.p);
                    s.chi.push(r.chi_bar);
                    s.eps.push(r.eps);
                }
                _ => series.push(Series { l: r.l, p: vec![r.p], chi: vec![r.chi_bar], eps: vec![r.eps] }),
            }
        }
        Ok(SweepData { series })
    }

    pub fn rows(&self) -> Vec<Row> {
        self.series
            .iter()
            .flat_map(|s| {
                (0..s.p.len()).map(move |i| Row { l: s.l, p: s.p[i], chi_bar: s.chi[i], eps: s.eps[i] })
            })
            .collect()
    }

    pub fn sizes(&self) -> Vec<u32> {
        self.series.iter().map(|s| s.l).collect()
    }

    pub fn p_range(&self) -> (f64, f64) {
        let lo = self.series.iter().map(|s| s.p[0]).fold(f64::INFINITY, f64::min);
        let hi = self.series.iter().map(|s| *s.p.last().unwrap()).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Keep only the listed sizes and the cells with `p` in `[lo, hi]`.
    pub fn restrict(&self, sizes: Option<&[u32]>, p_window: Option<(f64, f64)>) -> Result<Self> {
        let rows: Vec<Row> = self
            .rows()
            .into_iter()
            .filter(|r| sizes.map_or(true, |s| s.contains(&r.l)))
            .filter(|r| p_window.map_or(true, |(lo, hi)| r.p >= lo && r.p <= hi))
            .collect();
        SweepData::from_rows(&rows)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows: std::result::Result<Vec<Row>, csv::Error> = rdr.deserialize().collect();
        SweepData::from_rows(&rows?)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        SweepData::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in self.rows() {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_groups_by_size() {
        let text = "L,p,chi_bar,eps\n32,0.2,0.5,0.01\n16,0.2,0.6,0.01\n16,0.1,0.9,0.02\n32,0.1,0.95,0.02\n";
        let d = SweepData::read_csv(text.as_bytes()).unwrap();
        assert_eq!(d.sizes(), vec![16, 32]);
        assert_eq!(d.series[0].p, vec![0.1, 0.2]);
        assert_eq!(d.series[0].chi, vec![0.9, 0.6]);
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        assert_eq!(SweepData::read_csv(out.as_slice()).unwrap(), d);
    }

    #[test]
    fn rejects_duplicates_and_nan() {
        let dup = "L,p,chi_bar,eps\n16,0.1,0.9,0\n16,0.1,0.8,0\n";
        assert!(SweepData::read_csv(dup.as_bytes()).is_err());
        let nan = "L,p,chi_bar,eps\n16,0.1,NaN,0\n";
        assert!(SweepData::read_csv(nan.as_bytes()).is_err());
    }
}
