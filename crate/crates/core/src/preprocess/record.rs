use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PreprocessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            other => Err(format!("expected `male` or `female`, got `{other}`")),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

/// Occupation of the frontline person who filled in the danger assessment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReporterOccupation {
    SocialWorker,
    HospitalStaff,
    Police,
    Other,
}

impl ReporterOccupation {
    pub const ALL: [ReporterOccupation; 4] = [
        ReporterOccupation::SocialWorker,
        ReporterOccupation::HospitalStaff,
        ReporterOccupation::Police,
        ReporterOccupation::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReporterOccupation::SocialWorker => "social_worker",
            ReporterOccupation::HospitalStaff => "hospital_staff",
            ReporterOccupation::Police => "police",
            ReporterOccupation::Other => "other",
        }
    }
}

impl FromStr for ReporterOccupation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReporterOccupation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                format!("expected one of social_worker, hospital_staff, police, other; got `{s}`")
            })
    }
}

impl fmt::Display for ReporterOccupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One reported case. Model variables are optional because raw extracts
/// contain gaps; [`super::drop_missing`] removes incomplete rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub report_count: Option<u32>,
    pub tipvda_score: Option<u32>,
    pub dv_duration_months: Option<u32>,
    pub maimed: Option<String>,
    pub occupation: Option<String>,
    pub education: Option<String>,
    pub district: Option<String>,
    pub village: Option<String>,
    pub victim_gender: Gender,
    pub victim_age: u32,
    pub low_mid_income: bool,
    pub disability_or_mental_illness: bool,
    pub reporter_occupation: ReporterOccupation,
    pub case_type_raw: String,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

impl CaseRecord {
    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let bad = |field: &'static str, reason: String| PreprocessError::InvalidField {
            case_id: self.case_id.clone(),
            field,
            reason,
        };
        if self.case_id.is_empty() {
            return Err(bad("case_id", "must not be empty".into()));
        }
        if self.report_count == Some(0) {
            return Err(bad("report_count", "must be at least 1".into()));
        }
        if let Some(lat) = self.latitude {
            if !(-90.0..=90.0).contains(&lat) {
                return Err(bad("latitude", format!("{lat} outside [-90, 90]")));
            }
        }
        if let Some(lon) = self.longitude {
            if !(-180.0..=180.0).contains(&lon) {
                return Err(bad("longitude", format!("{lon} outside [-180, 180]")));
            }
        }
        if self.latitude.is_some() != self.longitude.is_some() {
            return Err(bad("latitude", "latitude and longitude must be given together".into()));
        }
        Ok(())
    }

    pub fn coordinates(&self) -> Option<(f64, f64)> {
        Some((self.latitude?, self.longitude?))
    }
}

/// Age bands used by the map views: 0-18, 19-64, 65+.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeBand {
    Minor,
    Adult,
    Senior,
}

impl AgeBand {
    pub const ALL: [AgeBand; 3] = [AgeBand::Minor, AgeBand::Adult, AgeBand::Senior];

    pub fn of(age: u32) -> AgeBand {
        match age {
            0..=18 => AgeBand::Minor,
            19..=64 => AgeBand::Adult,
            _ => AgeBand::Senior,
        }
    }

    pub fn range(self) -> (u32, u32) {
        match self {
            AgeBand::Minor => (0, 18),
            AgeBand::Adult => (19, 64),
            AgeBand::Senior => (65, 95),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBand::Minor => "0-18",
            AgeBand::Adult => "19-64",
            AgeBand::Senior => "65+",
        }
    }
}

#[cfg(test)]
pub(crate) fn sample_record(id: &str) -> CaseRecord {
    CaseRecord {
        case_id: id.to_string(),
        report_count: Some(1),
        tipvda_score: Some(3),
        dv_duration_months: Some(12),
        maimed: Some("bruise".into()),
        occupation: Some("service".into()),
        education: Some("college".into()),
        district: Some("D01".into()),
        village: Some("V001".into()),
        victim_gender: Gender::Female,
        victim_age: 34,
        low_mid_income: false,
        disability_or_mental_illness: false,
        reporter_occupation: ReporterOccupation::SocialWorker,
        case_type_raw: "marital violence".into(),
        latitude: Some(25.05),
        longitude: Some(121.55),
    }
}
