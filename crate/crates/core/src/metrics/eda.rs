//! Exploratory summary of a case extract: report-count distribution,
//! assessment scores by reporter occupation with pairwise rank tests, and
//! rank correlations of each model variable with the response.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{mann_whitney_u, rank_correlation, report_count_histogram, RankTestResult, ReportHistogram};
use crate::preprocess::{derive_response, CaseRecord, ReporterOccupation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub reporter: ReporterOccupation,
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub first: ReporterOccupation,
    pub second: ReporterOccupation,
    pub result: RankTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: String,
    pub n: usize,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaReport {
    pub n_records: usize,
    pub histogram: ReportHistogram,
    pub reporter_scores: Vec<GroupStats>,
    pub pairwise_tests: Vec<PairTest>,
    pub correlations: Vec<FeatureCorrelation>,
    pub warnings: Vec<String>,
}

fn mean_sd(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.len() > 1).then(|| {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    });
    (mean, sd)
}

pub fn eda_report(records: &[CaseRecord]) -> EdaReport {
    let mut warnings = Vec::new();
    if records.is_empty() {
        warnings.push("no records".to_string());
    }

    let mut groups: Vec<(ReporterOccupation, Vec<f64>)> = Vec::new();
    for occ in ReporterOccupation::ALL {
        let scores: Vec<f64> = records
            .iter()
            .filter(|r| r.reporter_occupation == occ)
            .filter_map(|r| r.tipvda_score.map(f64::from))
            .collect();
        if !scores.is_empty() {
            groups.push((occ, scores));
        }
    }
    let reporter_scores = groups
        .iter()
        .map(|(occ, s)| {
            let (mean, sd) = mean_sd(s);
            GroupStats { reporter: *occ, n: s.len(), mean, sd }
        })
        .collect();
    let mut pairwise_tests = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            if let Ok(result) = mann_whitney_u(&groups[i].1, &groups[j].1) {
                pairwise_tests.push(PairTest {
                    first: groups[i].0,
                    second: groups[j].0,
                    result,
                });
            }
        }
    }

    EdaReport {
        n_records: records.len(),
        histogram: report_count_histogram(records),
        reporter_scores,
        pairwise_tests,
        correlations: correlations(records),
        warnings,
    }
}

fn correlate(records: &[CaseRecord], name: String, value: impl Fn(&CaseRecord) -> Option<f64>) -> FeatureCorrelation {
    let (x, y): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| {
            let label = derive_response(r.report_count?).ok()?;
            Some((value(r)?, f64::from(label)))
        })
        .unzip();
    FeatureCorrelation {
        feature: name,
        n: x.len(),
        rho: rank_correlation(&x, &y),
    }
}

fn correlations(records: &[CaseRecord]) -> Vec<FeatureCorrelation> {
    let mut out = vec![
        correlate(records, "tipvda_score".into(), |r| r.tipvda_score.map(f64::from)),
        correlate(records, "dv_duration_months".into(), |r| r.dv_duration_months.map(f64::from)),
    ];
    type Getter = fn(&CaseRecord) -> Option<&str>;
    let categorical: [(&str, Getter); 4] = [
        ("maimed", |r| r.maimed.as_deref()),
        ("occupation", |r| r.occupation.as_deref()),
        ("education", |r| r.education.as_deref()),
        ("district", |r| r.district.as_deref()),
    ];
    for (name, get) in categorical {
        let levels: BTreeSet<&str> = records.iter().filter_map(get).collect();
        for level in levels {
            out.push(correlate(records, format!("{name}={level}"), |r| {
                get(r).map(|v| f64::from(u8::from(v == level)))
            }));
        }
    }
    out
}

impl fmt::Display for EdaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records: {}", self.n_records)?;
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        writeln!(f, "\nReports per victim in the year")?;
        for (k, c) in &self.histogram.counts {
            writeln!(f, "  {k:>3}  {c:>7}")?;
        }
        if let Some(s) = self.histogram.positive_share {
            writeln!(f, "  more than twice: {:.1}%", 100.0 * s)?;
        }
        writeln!(f, "\nAssessment score by reporter occupation")?;
        for g in &self.reporter_scores {
            let sd = g.sd.map(|s| format!("{s:.2}")).unwrap_or_else(|| "-".into());
            writeln!(f, "  {:<16}n={:<6} mean={:.2} ({sd})", g.reporter.as_str(), g.n, g.mean)?;
        }
        writeln!(f, "\nMann-Whitney U (two-sided)")?;
        for t in &self.pairwise_tests {
            writeln!(
                f,
                "  {:<14} vs {:<14} U={:<10.1} z={:>7.2} p={:.3e}",
                t.first.as_str(),
                t.second.as_str(),
                t.result.u_statistic,
                t.result.z,
                t.result.p_value
            )?;
        }
        writeln!(f, "\nSpearman correlation with response")?;
        for c in &self.correlations {
            let rho = c.rho.map(|r| format!("{r:>7.3}")).unwrap_or_else(|| "undefined".into());
            writeln!(f, "  {:<36}{rho}", c.feature)?;
        }
        Ok(())
    }
}
