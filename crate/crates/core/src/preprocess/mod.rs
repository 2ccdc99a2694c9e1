//! Raw case records to model-ready feature frames.
//!
//! Steps, in order: drop records missing any model variable, derive the
//! binary response from the yearly report count, cut the two integer
//! variables into near-equal tertiles, and fold rare categorical levels
//! into `OTHER`. A fitted [`Schema`] replays the same encoding on unseen
//! data.

pub mod binning;
pub mod csvio;
pub mod levels;
pub mod record;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binning::{tertile_bin, BinEdges, Tertiles};
pub use csvio::{read_records, write_records, ReadOutcome, RowError, CSV_FIELDS};
pub use levels::{group_rare_levels, LevelMapping, DEFAULT_RARE_THRESHOLD, OTHER};
pub use record::{AgeBand, CaseRecord, Gender, ReporterOccupation};

/// Largest level set a categorical feature may carry; tree splits store
/// level subsets as 64-bit masks.
pub const MAX_LEVELS: usize = 64;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("report_count must be at least 1, got {0}")]
    InvalidReportCount(u32),
    #[error("case {case_id}: invalid {field}: {reason}")]
    InvalidField {
        case_id: String,
        field: &'static str,
        reason: String,
    },
    #[error("bad CSV header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("feature `{0}` is not part of the prior schema")]
    FeatureNotInSchema(String),
    #[error("missing value for `{0}`")]
    MissingValue(String),
    #[error("feature `{feature}` has {count} levels, more than the supported {MAX_LEVELS}")]
    TooManyLevels { feature: String, count: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 1 when the victim was reported more than twice in the year.
pub fn derive_response(report_count: u32) -> Result<u8, PreprocessError> {
    match report_count {
        0 => Err(PreprocessError::InvalidReportCount(0)),
        1 | 2 => Ok(0),
        _ => Ok(1),
    }
}

/// Columns that can enter the design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    TipvdaScore,
    DvDurationMonths,
    Maimed,
    Occupation,
    Education,
    District,
    Village,
    VictimGender,
    AgeBand,
    LowMidIncome,
    DisabilityOrMentalIllness,
    ReporterOccupation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical,
    BinnedOrdinal,
}

enum RawValue<'a> {
    Int(u32),
    Level(std::borrow::Cow<'a, str>),
}

impl Feature {
    pub const ALL: [Feature; 12] = [
        Feature::TipvdaScore,
        Feature::DvDurationMonths,
        Feature::Maimed,
        Feature::Occupation,
        Feature::Education,
        Feature::District,
        Feature::Village,
        Feature::VictimGender,
        Feature::AgeBand,
        Feature::LowMidIncome,
        Feature::DisabilityOrMentalIllness,
        Feature::ReporterOccupation,
    ];

    /// The six variables used by the repeat-victimization model.
    pub const MODEL_DEFAULT: [Feature; 6] = [
        Feature::TipvdaScore,
        Feature::DvDurationMonths,
        Feature::Maimed,
        Feature::Occupation,
        Feature::Education,
        Feature::District,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::TipvdaScore => "tipvda_score",
            Feature::DvDurationMonths => "dv_duration_months",
            Feature::Maimed => "maimed",
            Feature::Occupation => "occupation",
            Feature::Education => "education",
            Feature::District => "district",
            Feature::Village => "village",
            Feature::VictimGender => "victim_gender",
            Feature::AgeBand => "age_band",
            Feature::LowMidIncome => "low_mid_income",
            Feature::DisabilityOrMentalIllness => "disability_or_mental_illness",
            Feature::ReporterOccupation => "reporter_occupation",
        }
    }

    pub fn kind(self) -> FeatureKind {
        match self {
            Feature::TipvdaScore | Feature::DvDurationMonths => FeatureKind::BinnedOrdinal,
            _ => FeatureKind::Categorical,
        }
    }

    fn raw(self, r: &CaseRecord) -> Option<RawValue<'_>> {
        use std::borrow::Cow::{Borrowed, Owned};
        let flag = |b: bool| RawValue::Level(Borrowed(if b { "1" } else { "0" }));
        Some(match self {
            Feature::TipvdaScore => RawValue::Int(r.tipvda_score?),
            Feature::DvDurationMonths => RawValue::Int(r.dv_duration_months?),
            Feature::Maimed => RawValue::Level(Borrowed(r.maimed.as_deref()?)),
            Feature::Occupation => RawValue::Level(Borrowed(r.occupation.as_deref()?)),
            Feature::Education => RawValue::Level(Borrowed(r.education.as_deref()?)),
            Feature::District => RawValue::Level(Borrowed(r.district.as_deref()?)),
            Feature::Village => RawValue::Level(Borrowed(r.village.as_deref()?)),
            Feature::VictimGender => RawValue::Level(Owned(r.victim_gender.to_string())),
            Feature::AgeBand => RawValue::Level(Borrowed(AgeBand::of(r.victim_age).as_str())),
            Feature::LowMidIncome => flag(r.low_mid_income),
            Feature::DisabilityOrMentalIllness => flag(r.disability_or_mental_illness),
            Feature::ReporterOccupation => {
                RawValue::Level(Borrowed(r.reporter_occupation.as_str()))
            }
        })
    }

    pub fn is_present(self, r: &CaseRecord) -> bool {
        self.raw(r).is_some()
    }
}

impl FromStr for Feature {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| PreprocessError::UnknownFeature(s.to_string()))
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Keeps records whose response input and every listed model variable are
/// present. Order is preserved.
pub fn drop_missing(records: &[CaseRecord], features: &[Feature]) -> Vec<CaseRecord> {
    records
        .iter()
        .filter(|r| r.report_count.is_some() && features.iter().all(|f| f.is_present(r)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub feature: Feature,
    pub kind: FeatureKind,
    pub levels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_edges: Option<BinEdges>,
}

impl FeatureSchema {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    fn encode_value(&self, value: RawValue<'_>) -> u16 {
        match value {
            RawValue::Int(v) => {
                let edges = self.bin_edges.as_ref().expect("binned feature carries edges");
                edges.assign(v) as u16
            }
            RawValue::Level(l) => {
                let idx = self.levels.iter().position(|x| *x == *l).unwrap_or_else(|| {
                    self.levels
                        .iter()
                        .position(|x| x == OTHER)
                        .expect("categorical schema carries OTHER")
                });
                idx as u16
            }
        }
    }
}

/// Ordered encoding recipe for every model feature.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSchema>,
}

impl Schema {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_list(&self) -> Vec<Feature> {
        self.features.iter().map(|f| f.feature).collect()
    }

    pub fn position(&self, feature: Feature) -> Option<usize> {
        self.features.iter().position(|f| f.feature == feature)
    }

    /// Encodes one record. Unseen categorical levels become `OTHER`.
    pub fn encode(&self, record: &CaseRecord) -> Result<Vec<u16>, PreprocessError> {
        self.features
            .iter()
            .map(|fs| {
                let raw = fs
                    .feature
                    .raw(record)
                    .ok_or_else(|| PreprocessError::MissingValue(fs.feature.name().to_string()))?;
                Ok(fs.encode_value(raw))
            })
            .collect()
    }

    /// Checks that an encoded row fits this schema, naming the first bad feature.
    pub fn check_row(&self, row: &[u16]) -> Result<(), String> {
        if row.len() != self.features.len() {
            return Err(format!(
                "row has {} values, schema has {} features",
                row.len(),
                self.features.len()
            ));
        }
        for (fs, &v) in self.features.iter().zip(row) {
            if v as usize >= fs.n_levels() {
                return Err(format!(
                    "{}: level index {v} outside 0..{}",
                    fs.feature,
                    fs.n_levels()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub schema: Schema,
    pub case_ids: Vec<String>,
    pub rows: Vec<Vec<u16>>,
    pub labels: Vec<u8>,
}

impl FeatureFrame {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Sub-frame with the given rows (duplicates allowed), same schema.
    pub fn select(&self, indices: &[usize]) -> FeatureFrame {
        FeatureFrame {
            schema: self.schema.clone(),
            case_ids: indices.iter().map(|&i| self.case_ids[i].clone()).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameConfig {
    pub features: Vec<Feature>,
    pub rare_threshold: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            features: Feature::MODEL_DEFAULT.to_vec(),
            rare_threshold: DEFAULT_RARE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameBuild {
    pub frame: FeatureFrame,
    pub dropped: usize,
    pub warnings: Vec<String>,
}

/// Builds a feature frame. With `prior = None` the encoding is fitted on
/// `records`; otherwise the prior schema is replayed.
pub fn build_frame(
    records: &[CaseRecord],
    config: &FrameConfig,
    prior: Option<&Schema>,
) -> Result<FrameBuild, PreprocessError> {
    let mut warnings = Vec::new();
    let features = match prior {
        Some(schema) => {
            let known = schema.feature_list();
            if let Some(f) = config.features.iter().find(|f| !known.contains(f)) {
                return Err(PreprocessError::FeatureNotInSchema(f.name().to_string()));
            }
            known
        }
        None => config.features.clone(),
    };
    let kept = drop_missing(records, &features);
    let dropped = records.len() - kept.len();
    if dropped > 0 {
        warnings.push(format!("dropped {dropped} records with missing model variables"));
    }
    if kept.is_empty() {
        warnings.push("no records left after removing missing values".to_string());
        for w in &warnings {
            log::warn!("{w}");
        }
        return Ok(FrameBuild {
            frame: FeatureFrame {
                schema: prior.cloned().unwrap_or_default(),
                ..FeatureFrame::default()
            },
            dropped,
            warnings,
        });
    }

    let schema = match prior {
        Some(s) => s.clone(),
        None => fit_schema(&kept, &features, config.rare_threshold, &mut warnings)?,
    };
    let labels = kept
        .iter()
        .map(|r| derive_response(r.report_count.expect("filtered by drop_missing")))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = kept
        .iter()
        .map(|r| schema.encode(r))
        .collect::<Result<Vec<_>, _>>()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FrameBuild {
        frame: FeatureFrame {
            schema,
            case_ids: kept.iter().map(|r| r.case_id.clone()).collect(),
            rows,
            labels,
        },
        dropped,
        warnings,
    })
}

fn fit_schema(
    records: &[CaseRecord],
    features: &[Feature],
    rare_threshold: f64,
    warnings: &mut Vec<String>,
) -> Result<Schema, PreprocessError> {
    let mut out = Vec::with_capacity(features.len());
    for &feature in features {
        let fs = match feature.kind() {
            FeatureKind::BinnedOrdinal => {
                let values: Vec<u32> = records
                    .iter()
                    .map(|r| match feature.raw(r) {
                        Some(RawValue::Int(v)) => v,
                        _ => unreachable!("binned features are integer-valued and present"),
                    })
                    .collect();
                let t = tertile_bin(&values).expect("records are nonempty");
                if t.degenerate {
                    warnings.push(format!(
                        "{feature}: only {} bin(s) possible, too few distinct values",
                        t.edges.n_bins()
                    ));
                }
                FeatureSchema {
                    feature,
                    kind: FeatureKind::BinnedOrdinal,
                    levels: t.edges.labels(),
                    bin_edges: Some(t.edges),
                }
            }
            FeatureKind::Categorical => {
                let column: Vec<String> = records
                    .iter()
                    .map(|r| match feature.raw(r) {
                        Some(RawValue::Level(l)) => l.into_owned(),
                        _ => unreachable!("categorical features are present"),
                    })
                    .collect();
                let (mapping, _) = group_rare_levels(&column, rare_threshold);
                let levels = mapping.kept_levels();
                if levels.len() > MAX_LEVELS {
                    return Err(PreprocessError::TooManyLevels {
                        feature: feature.name().to_string(),
                        count: levels.len(),
                    });
                }
                FeatureSchema {
                    feature,
                    kind: FeatureKind::Categorical,
                    levels,
                    bin_edges: None,
                }
            }
        };
        out.push(fs);
    }
    Ok(Schema { features: out })
}

#[cfg(test)]
mod tests {
    use super::record::sample_record;
    use super::*;

    #[test]
    fn response_examples() {
        assert_eq!(derive_response(3).unwrap(), 1);
        assert_eq!(derive_response(2).unwrap(), 0);
        assert_eq!(derive_response(7).unwrap(), 1);
        assert_eq!(derive_response(1).unwrap(), 0);
        assert!(derive_response(0).is_err());
    }

    #[test]
    fn response_exhaustive_1_to_100() {
        for k in 1..=100 {
            assert_eq!(derive_response(k).unwrap() == 1, k >= 3, "k={k}");
        }
    }

    #[test]
    fn drop_missing_filters_and_keeps_order() {
        let mut recs: Vec<CaseRecord> = (0..5).map(|i| sample_record(&format!("c{i}"))).collect();
        recs[1].education = None;
        recs[3].education = None;
        let kept = drop_missing(&recs, &Feature::MODEL_DEFAULT);
        let ids: Vec<_> = kept.iter().map(|r| r.case_id.as_str()).collect();
        assert_eq!(ids, ["c0", "c2", "c4"]);

        let all: Vec<CaseRecord> = (0..3).map(|i| sample_record(&format!("c{i}"))).collect();
        assert_eq!(drop_missing(&all, &Feature::MODEL_DEFAULT), all);
    }

    #[test]
    fn drop_missing_requires_report_count() {
        let mut r = sample_record("a");
        r.report_count = None;
        assert!(drop_missing(&[r], &Feature::MODEL_DEFAULT).is_empty());
    }

    fn varied_records(n: usize) -> Vec<CaseRecord> {
        (0..n)
            .map(|i| {
                let mut r = sample_record(&format!("c{i}"));
                r.tipvda_score = Some((i % 5) as u32);
                r.dv_duration_months = Some((i * 7 % 40) as u32);
                r.report_count = Some(if i % 10 == 0 { 4 } else { 1 });
                r.district = Some(if i == 0 { "RARE".into() } else { format!("D{}", i % 3) });
                r
            })
            .collect()
    }

    #[test]
    fn fit_then_replay_maps_rare_district_to_other() {
        let recs = varied_records(60);
        let fit = build_frame(&recs, &FrameConfig::default(), None).unwrap();
        assert_eq!(fit.frame.n_features(), 6);
        assert_eq!(fit.frame.positives(), 6);
        let d = fit.frame.schema.position(Feature::District).unwrap();
        let levels = &fit.frame.schema.features[d].levels;
        assert_eq!(levels, &["D0", "D1", "D2", OTHER]);
        assert_eq!(levels[fit.frame.rows[0][d] as usize], OTHER);

        let replay = build_frame(&recs[..1], &FrameConfig::default(), Some(&fit.frame.schema)).unwrap();
        assert_eq!(replay.frame.rows[0], fit.frame.rows[0]);
    }

    #[test]
    fn replay_reproduces_fit_bins_exactly() {
        let recs = varied_records(90);
        let fit = build_frame(&recs, &FrameConfig::default(), None).unwrap();
        let replay = build_frame(&recs, &FrameConfig::default(), Some(&fit.frame.schema)).unwrap();
        assert_eq!(
            serde_json::to_vec(&fit.frame).unwrap(),
            serde_json::to_vec(&replay.frame).unwrap()
        );
    }

    #[test]
    fn replay_rejects_feature_missing_from_prior() {
        let recs = varied_records(20);
        let fit = build_frame(&recs, &FrameConfig::default(), None).unwrap();
        let mut cfg = FrameConfig::default();
        cfg.features.push(Feature::VictimGender);
        match build_frame(&recs, &cfg, Some(&fit.frame.schema)) {
            Err(PreprocessError::FeatureNotInSchema(f)) => assert_eq!(f, "victim_gender"),
            other => panic!("expected FeatureNotInSchema, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_gives_empty_frame_and_warning() {
        let out = build_frame(&[], &FrameConfig::default(), None).unwrap();
        assert!(out.frame.is_empty());
        assert!(out.frame.schema.is_empty());
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn degenerate_binning_is_flagged() {
        let mut recs = varied_records(30);
        for r in &mut recs {
            r.tipvda_score = Some(4);
        }
        let out = build_frame(&recs, &FrameConfig::default(), None).unwrap();
        assert!(out.warnings.iter().any(|w| w.contains("tipvda_score")));
        let t = out.frame.schema.position(Feature::TipvdaScore).unwrap();
        assert_eq!(out.frame.schema.features[t].n_levels(), 1);
    }

    #[test]
    fn encode_reports_missing_field() {
        let recs = varied_records(20);
        let fit = build_frame(&recs, &FrameConfig::default(), None).unwrap();
        let mut r = sample_record("x");
        r.maimed = None;
        match fit.frame.schema.encode(&r) {
            Err(PreprocessError::MissingValue(f)) => assert_eq!(f, "maimed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn feature_names_parse() {
        for f in Feature::ALL {
            assert_eq!(f.name().parse::<Feature>().unwrap(), f);
        }
    }
}
