//! Scoring request parsing with per-field error messages.

use std::collections::BTreeMap;

use dvrisk_core::preprocess::{CaseRecord, Feature, Gender, ReporterOccupation};
use serde::Serialize;
use serde_json::{Map, Value};

/// Field name to problem description.
pub type FieldErrors = BTreeMap<String, String>;

const FIELDS: [&str; 16] = [
    "case_id",
    "tipvda_score",
    "dv_duration_months",
    "maimed",
    "occupation",
    "education",
    "district",
    "village",
    "victim_gender",
    "victim_age",
    "low_mid_income",
    "disability_or_mental_illness",
    "reporter_occupation",
    "case_type_raw",
    "latitude",
    "longitude",
];

const MAX_AGE: u64 = 120;

/// The request field a model feature reads.
pub fn source_field(feature: Feature) -> &'static str {
    match feature {
        Feature::AgeBand => "victim_age",
        f => f.name(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreResponse {
    pub probability: f64,
    pub label: u8,
    pub risk_level: &'static str,
    pub model_version: String,
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    errors: FieldErrors,
}

impl Fields<'_> {
    fn fail(&mut self, key: &str, msg: impl Into<String>) {
        self.errors.insert(key.to_string(), msg.into());
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.obj.get(key).filter(|v| !v.is_null())
    }

    fn uint(&mut self, key: &str, max: u64) -> Option<u32> {
        let v = self.get(key)?;
        match v.as_u64() {
            Some(x) if x <= max => Some(x as u32),
            _ => {
                self.fail(key, format!("must be an integer between 0 and {max}"));
                None
            }
        }
    }

    fn text(&mut self, key: &str) -> Option<String> {
        match self.get(key)? {
            Value::String(s) if !s.trim().is_empty() => Some(s.clone()),
            _ => {
                self.fail(key, "must be a nonempty string");
                None
            }
        }
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        match self.get(key)? {
            Value::Bool(b) => Some(*b),
            Value::Number(n) if n.as_u64() == Some(0) => Some(false),
            Value::Number(n) if n.as_u64() == Some(1) => Some(true),
            _ => {
                self.fail(key, "must be true/false or 0/1");
                None
            }
        }
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&mut self, key: &str) -> Option<T> {
        let s = match self.get(key)? {
            Value::String(s) => s.clone(),
            _ => {
                self.fail(key, "must be a string");
                return None;
            }
        };
        s.parse().map_err(|e| self.fail(key, e)).ok()
    }

    fn coord(&mut self, key: &str, limit: f64) -> Option<f64> {
        match self.get(key)?.as_f64() {
            Some(x) if x.abs() <= limit => Some(x),
            _ => {
                self.fail(key, format!("must be a number within ±{limit}"));
                None
            }
        }
    }
}

/// Validates a scoring request. Fields read by `required` features must be
/// present; the rest are optional and type-checked when given. Unused
/// fields that are absent get neutral defaults, which the model ignores.
pub fn parse_request(body: &[u8], required: &[Feature]) -> Result<CaseRecord, FieldErrors> {
    let value: Value = serde_json::from_slice(body).map_err(|e| {
        FieldErrors::from([("body".to_string(), format!("not valid JSON: {e}"))])
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| FieldErrors::from([("body".to_string(), "must be a JSON object".to_string())]))?;
    let mut f = Fields {
        obj,
        errors: FieldErrors::new(),
    };
    for key in obj.keys() {
        if key == "report_count" {
            f.fail(key, "is the outcome being predicted and must not be supplied");
        } else if !FIELDS.contains(&key.as_str()) {
            f.fail(key, "unknown field");
        }
    }
    for feature in required {
        let key = source_field(*feature);
        if f.get(key).is_none() {
            f.fail(key, "required by the loaded model");
        }
    }

    let case_id = f.text("case_id").unwrap_or_else(|| "request".to_string());
    let tipvda_score = f.uint("tipvda_score", u64::from(u32::MAX));
    let dv_duration_months = f.uint("dv_duration_months", u64::from(u32::MAX));
    let maimed = f.text("maimed");
    let occupation = f.text("occupation");
    let education = f.text("education");
    let district = f.text("district");
    let village = f.text("village");
    let victim_gender = f.parsed::<Gender>("victim_gender");
    let victim_age = f.uint("victim_age", MAX_AGE);
    let low_mid_income = f.flag("low_mid_income");
    let disability = f.flag("disability_or_mental_illness");
    let reporter = f.parsed::<ReporterOccupation>("reporter_occupation");
    let case_type_raw = f.text("case_type_raw");
    let latitude = f.coord("latitude", 90.0);
    let longitude = f.coord("longitude", 180.0);
    if latitude.is_some() != longitude.is_some() && !f.errors.contains_key("latitude") && !f.errors.contains_key("longitude") {
        let missing = if latitude.is_none() { "latitude" } else { "longitude" };
        f.fail(missing, "latitude and longitude must be given together");
    }
    if !f.errors.is_empty() {
        return Err(f.errors);
    }
    Ok(CaseRecord {
        case_id,
        report_count: None,
        tipvda_score,
        dv_duration_months,
        maimed,
        occupation,
        education,
        district,
        village,
        victim_gender: victim_gender.unwrap_or(Gender::Female),
        victim_age: victim_age.unwrap_or(30),
        low_mid_income: low_mid_income.unwrap_or(false),
        disability_or_mental_illness: disability.unwrap_or(false),
        reporter_occupation: reporter.unwrap_or(ReporterOccupation::Other),
        case_type_raw: case_type_raw.unwrap_or_default(),
        latitude,
        longitude,
    })
}
