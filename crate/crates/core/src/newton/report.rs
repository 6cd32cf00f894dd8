//! Per-parameter results of a sweep and their CSV form.

use std::fmt::Write as _;
use std::time::Duration;

/// One parameter combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// 1-based little-endian ordinal.
    pub p: usize,
    /// 1-based multi-index.
    pub index: Vec<usize>,
    pub rel_residual: f64,
    /// 1-based cluster number (0 for methods without clusters).
    pub cluster: usize,
    pub method: String,
}

#[derive(Debug, Clone, Default)]
pub struct NewtonReport {
    pub rows: Vec<ReportRow>,
    /// Newton steps spent on anchor (or, for the baseline, on all) problems.
    pub anchor_steps: usize,
    /// Matrix-equation Newton steps, one per cluster unless a second step ran.
    pub cluster_steps: usize,
    /// Inner solver iterations per cluster step.
    pub solver_iterations: Vec<usize>,
    /// 1-based cluster numbers whose inner solve did not converge.
    pub flagged_clusters: Vec<usize>,
    /// Rank of each cluster block after the update.
    pub ranks: Vec<usize>,
    /// Elapsed time; informational only and never written to files.
    pub wall_time: Duration,
}

impl NewtonReport {
    pub fn total_steps(&self) -> usize {
        self.anchor_steps + self.cluster_steps
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_residual).fold(0.0, f64::max)
    }

    pub fn mean_residual(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.rel_residual).sum::<f64>() / self.rows.len() as f64
    }

    /// `p,i1,i2[,i3,i4],rel_residual,cluster,method`, one row per ordinal.
    pub fn to_csv(&self) -> String {
        let dims = self.rows.first().map_or(2, |r| r.index.len());
        let mut out = String::from("p");
        for k in 1..=dims {
            write!(out, ",i{k}").unwrap();
        }
        out.push_str(",rel_residual,cluster,method\n");
        for r in &self.rows {
            write!(out, "{}", r.p).unwrap();
            for i in &r.index {
                write!(out, ",{i}").unwrap();
            }
            writeln!(out, ",{:.6e},{},{}", r.rel_residual, r.cluster, r.method).unwrap();
        }
        out
    }
}
