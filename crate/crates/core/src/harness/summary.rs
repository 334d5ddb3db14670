//! Aggregation of `summary.csv` into median tables and growth slopes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use super::run::{read_summary, SummaryRow};
use crate::error::{Error, Result};
use crate::stats::{log_log_slope, median, quantile};

#[derive(Clone, Debug, PartialEq)]
pub struct GroupStats {
    pub n: usize,
    pub r: usize,
    pub t: usize,
    pub algorithm: String,
    pub count: usize,
    pub failed: usize,
    pub median_max_norm: f64,
    pub q25_max_norm: f64,
    pub q75_max_norm: f64,
    pub median_ratio: f64,
}

/// Log-log slope of median max norm against `T` for one `(n, r, algorithm)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeRow {
    pub n: usize,
    pub r: usize,
    pub algorithm: String,
    pub slope: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryReport {
    pub groups: Vec<GroupStats>,
    pub slopes: Vec<SlopeRow>,
}

impl SummaryReport {
    pub fn group(&self, n: usize, r: usize, t: usize, algorithm: &str) -> Option<&GroupStats> {
        self.groups
            .iter()
            .find(|g| g.n == n && g.r == r && g.t == t && g.algorithm == algorithm)
    }

    pub fn slope(&self, n: usize, r: usize, algorithm: &str) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.n == n && s.r == r && s.algorithm == algorithm)
            .map(|s| s.slope)
    }
}

impl fmt::Display for SummaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>6} {:>6} {:>9} {:>9} {:>6} {:>12} {:>12} {:>12} {:>12}",
            "n", "r", "T", "algorithm", "trials", "median_max", "q25", "q75", "median_ratio"
        )?;
        for g in &self.groups {
            writeln!(
                f,
                "{:>6} {:>6} {:>9} {:>9} {:>6} {:>12.5} {:>12.5} {:>12.5} {:>12.5}",
                g.n,
                g.r,
                g.t,
                g.algorithm,
                g.count,
                g.median_max_norm,
                g.q25_max_norm,
                g.q75_max_norm,
                g.median_ratio
            )?;
        }
        if !self.slopes.is_empty() {
            writeln!(f)?;
            writeln!(
                f,
                "{:>6} {:>6} {:>9} {:>8} {:>10}",
                "n", "r", "algorithm", "points", "slope_vs_T"
            )?;
            for s in &self.slopes {
                writeln!(
                    f,
                    "{:>6} {:>6} {:>9} {:>8} {:>10.4}",
                    s.n, s.r, s.algorithm, s.points, s.slope
                )?;
            }
        }
        Ok(())
    }
}

/// Groups rows by `(n, r, T, algorithm)`; failed rows are counted but not aggregated.
pub fn summarize_rows(rows: &[SummaryRow]) -> Result<SummaryReport> {
    if rows.is_empty() {
        return Err(Error::EmptyData("summary has no rows".into()));
    }
    let mut grouped: BTreeMap<(usize, usize, String, usize), (Vec<f64>, Vec<f64>, usize)> =
        BTreeMap::new();
    for row in rows {
        let e = grouped
            .entry((row.n, row.r, row.algorithm.clone(), row.t))
            .or_default();
        if row.is_ok() {
            e.0.push(row.max_running_norm);
            e.1.push(row.ratio_to_theory);
        } else {
            e.2 += 1;
        }
    }
    let groups: Vec<GroupStats> = grouped
        .into_iter()
        .map(
            |((n, r, algorithm, t), (norms, ratios, failed))| GroupStats {
                n,
                r,
                t,
                algorithm,
                count: norms.len(),
                failed,
                median_max_norm: median(&norms),
                q25_max_norm: quantile(&norms, 0.25),
                q75_max_norm: quantile(&norms, 0.75),
                median_ratio: median(&ratios),
            },
        )
        .collect();

    let mut series: BTreeMap<(usize, usize, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for g in groups.iter().filter(|g| g.count > 0) {
        let e = series.entry((g.n, g.r, g.algorithm.clone())).or_default();
        e.0.push(g.t as f64);
        e.1.push(g.median_max_norm);
    }
    let slopes = series
        .into_iter()
        .filter(|(_, (ts, _))| ts.len() >= 2)
        .map(|((n, r, algorithm), (ts, ms))| SlopeRow {
            n,
            r,
            algorithm,
            slope: log_log_slope(&ts, &ms),
            points: ts.len(),
        })
        .collect();
    Ok(SummaryReport { groups, slopes })
}

pub fn summarize(path: &Path) -> Result<SummaryReport> {
    summarize_rows(&read_summary(path)?)
}
