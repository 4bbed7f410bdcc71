//! Summary tables with statistics as rows,
//! estimators as columns.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::runner::{Estimator, EstimatorSummary, SimSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// MLE, J, WJ.
    Estimators,
    /// J, WJ, D, SS.
    Comparison,
}

impl Layout {
    pub fn columns(self) -> &'static [Estimator] {
        match self {
            Layout::Estimators => &[Estimator::Mle, Estimator::Jackknife, Estimator::Weighted],
            Layout::Comparison => &[Estimator::Jackknife, Estimator::Weighted, Estimator::Double, Estimator::SplitSample],
        }
    }
}

pub const STATISTIC_ROWS: [&str; 5] = ["Bias (mean)", "Bias (median)", "Std. dev.", "5-95 percentile", "Rejection (5%)"];

fn stat(r: &EstimatorSummary, row: usize) -> f64 {
    match row {
        0 => r.bias_mean,
        1 => r.bias_median,
        2 => r.std_dev,
        3 => r.p5_p95_range,
        _ => r.rejection_rate,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub csv: String,
    pub text: String,
}

/// Columns are the layout's estimators present in `summary`; with none
/// present only the header is emitted.
pub fn emit_table(summary: &SimSummary, layout: Layout) -> Table {
    let cols: Vec<&EstimatorSummary> = layout.columns().iter().filter_map(|&e| summary.row(e)).collect();
    let mut header = vec!["statistic".to_string()];
    header.extend(cols.iter().map(|c| c.estimator.label().to_string()));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    let mut cells: Vec<Vec<String>> = vec![header.clone()];
    if !cols.is_empty() {
        for (i, name) in STATISTIC_ROWS.iter().enumerate() {
            let mut rec = vec![name.to_string()];
            rec.extend(cols.iter().map(|c| stat(c, i).to_string()));
            w.write_record(&rec).expect("in-memory write");
            let mut shown = vec![name.to_string()];
            shown.extend(cols.iter().map(|c| format!("{:.3}", stat(c, i))));
            cells.push(shown);
        }
    }
    let csv = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");

    let widths: Vec<usize> = (0..header.len()).map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut text = String::new();
    let _ = writeln!(text, "{} (N = {}, {} reps)", summary.label, summary.n_nodes, summary.n_reps);
    for r in &cells {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        text.push_str(line.trim_end());
        text.push('\n');
    }
    let _ = writeln!(
        text,
        "mean density {:.3}, mean connected {:.1}",
        summary.mean_density, summary.mean_connected
    );
    Table { csv, text }
}
