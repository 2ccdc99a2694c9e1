use std::fmt;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Confusion matrix and the four headline metrics. A metric whose
/// denominator is zero is `None` (serialized as `null`), never 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> EvalReport {
        let n = tp + fp + tn + fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        EvalReport {
            n,
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, n),
            precision,
            recall,
            f1,
        }
    }
}

pub fn confusion_and_metrics(labels: &[u8], predictions: &[u8]) -> Result<EvalReport, MetricsError> {
    if labels.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch(labels.len(), predictions.len()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fn_ += 1,
            _ => return Err(MetricsError::NonBinary),
        }
    }
    Ok(EvalReport::from_counts(tp, fp, tn, fn_))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| match v {
            Some(x) => format!("{:>9.1}%", 100.0 * x),
            None => format!("{:>10}", "undefined"),
        };
        writeln!(f, "{:<12}{}", "Accuracy", pct(self.accuracy))?;
        writeln!(f, "{:<12}{}", "Recall", pct(self.recall))?;
        writeln!(f, "{:<12}{}", "Precision", pct(self.precision))?;
        writeln!(f, "{:<12}{}", "F1-measure", pct(self.f1))?;
        writeln!(f)?;
        writeln!(f, "{:<12}{:>10}{:>10}", "", "pred 1", "pred 0")?;
        writeln!(f, "{:<12}{:>10}{:>10}", "actual 1", self.tp, self.fn_)?;
        writeln!(f, "{:<12}{:>10}{:>10}", "actual 0", self.fp, self.tn)?;
        write!(f, "{:<12}{:>10}", "n", self.n)
    }
}
