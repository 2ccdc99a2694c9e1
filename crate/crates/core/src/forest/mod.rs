//! Decision trees, random forests and the balanced two-level ensemble.

pub mod ensemble;
pub mod seed;
pub mod split;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{
    balanced_resample, train_ensemble, EnsembleConfig, EnsembleModel, ForestModel, FORMAT_VERSION,
};
pub use split::{best_split, gini_impurity, SplitSpec};
pub use tree::{build_tree, Node, Tree, TreeParams};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("class {0} has no rows; balanced resampling needs both classes")]
    MissingClass(u8),
    #[error("invalid ensemble configuration: {0}")]
    InvalidConfig(String),
    #[error("row does not match model schema: {0}")]
    SchemaMismatch(String),
    #[error("malformed model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    Low,
    Elevated,
    High,
}

impl RiskLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskLevel::Low => "low",
            RiskLevel::Elevated => "elevated",
            RiskLevel::High => "high",
        }
    }
}

/// Lower bounds of the `elevated` and `high` bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBands {
    pub elevated: f64,
    pub high: f64,
}

impl Default for RiskBands {
    fn default() -> Self {
        RiskBands {
            elevated: 0.33,
            high: 0.67,
        }
    }
}

impl RiskBands {
    pub fn validate(&self) -> Result<(), String> {
        if 0.0 <= self.elevated && self.elevated <= self.high && self.high <= 1.0 {
            Ok(())
        } else {
            Err(format!(
                "risk bands must satisfy 0 <= elevated ({}) <= high ({}) <= 1",
                self.elevated, self.high
            ))
        }
    }

    pub fn level(&self, prob: f64) -> RiskLevel {
        if prob >= self.high {
            RiskLevel::High
        } else if prob >= self.elevated {
            RiskLevel::Elevated
        } else {
            RiskLevel::Low
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: u8,
    pub risk_level: RiskLevel,
}

/// Label is 1 iff `prob >= threshold`; the band comes from `bands`.
pub fn classify(prob: f64, threshold: f64, bands: &RiskBands) -> Classification {
    Classification {
        label: (prob >= threshold) as u8,
        risk_level: bands.level(prob),
    }
}
