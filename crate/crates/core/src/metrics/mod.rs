//! Evaluation metrics, rank statistics and exploratory summaries.

pub mod confusion;
pub mod eda;
pub mod mann_whitney;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use confusion::{confusion_and_metrics, EvalReport};
pub use eda::{eda_report, EdaReport};
pub use mann_whitney::{mann_whitney_u, mann_whitney_u_with, PValueMethod, RankTestResult};

use crate::preprocess::{derive_response, CaseRecord};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("labels and predictions must be 0 or 1")]
    NonBinary,
    #[error("both samples must be nonempty")]
    EmptySample,
    #[error("input contains NaN")]
    NonFinite,
    #[error("{0}")]
    Unsupported(&'static str),
}

/// 1-based midranks of `values` plus the tie term `sum(t^3 - t)` over tie
/// groups of size `t`.
pub(crate) fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    (ranks, tie_term)
}

/// Spearman correlation with midranks. `None` when lengths differ, fewer
/// than two points are given, or either input is constant.
pub fn rank_correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, _) = midranks(x);
    let (ry, _) = midranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHistogram {
    pub counts: BTreeMap<u32, usize>,
    /// Share of counted records with more than two reports.
    pub positive_share: Option<f64>,
    /// Records skipped because report_count was missing.
    pub missing: usize,
}

pub fn report_count_histogram(records: &[CaseRecord]) -> ReportHistogram {
    let mut counts = BTreeMap::new();
    let mut missing = 0;
    let mut positives = 0usize;
    for r in records {
        match r.report_count {
            Some(k) => {
                *counts.entry(k).or_insert(0) += 1;
                if derive_response(k).unwrap_or(0) == 1 {
                    positives += 1;
                }
            }
            None => missing += 1,
        }
    }
    let total: usize = counts.values().sum();
    ReportHistogram {
        counts,
        positive_share: (total > 0).then(|| positives as f64 / total as f64),
        missing,
    }
}
