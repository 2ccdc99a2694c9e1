//! Map pipeline: case-type classification, location resolution, per-village
//! and per-district aggregation, and GeoJSON export.

pub mod aggregate;
pub mod boundaries;
pub mod export;
pub mod geocode;
pub mod table1;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{
    aggregate, AggregateBundle, AggregateContext, AggregateSet, DistrictAggregate, Tally, VillageAggregate,
};
pub use boundaries::{Boundaries, VillageBoundary};
pub use export::export_geojson;
pub use geocode::{FileGeocoder, GeocodeError, GeocoderClient};
pub use table1::{table1_summary, Table1Row};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid boundaries: {0}")]
    Boundaries(String),
    #[error("no boundary for village `{0}`")]
    MissingBoundary(String),
    #[error("invalid case type mapping: {0}")]
    Mapping(String),
    #[error("unknown case type `{0}`; valid: IPV, child_adolescent, elderly, intersibling_other")]
    UnknownCaseType(String),
    #[error(transparent)]
    Geocode(#[from] GeocodeError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The four general case categories shown on the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseType {
    #[serde(rename = "IPV")]
    Ipv,
    #[serde(rename = "child_adolescent")]
    ChildAdolescent,
    #[serde(rename = "elderly")]
    Elderly,
    #[serde(rename = "intersibling_other")]
    IntersiblingOther,
}

impl CaseType {
    pub const ALL: [CaseType; 4] = [
        CaseType::Ipv,
        CaseType::ChildAdolescent,
        CaseType::Elderly,
        CaseType::IntersiblingOther,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseType::Ipv => "IPV",
            CaseType::ChildAdolescent => "child_adolescent",
            CaseType::Elderly => "elderly",
            CaseType::IntersiblingOther => "intersibling_other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for CaseType {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, GeoError> {
        CaseType::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| GeoError::UnknownCaseType(s.to_string()))
    }
}

impl fmt::Display for CaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const DEFAULT_MAPPING: &str = include_str!("../../data/case_type_mapping.csv");

/// Raw case-type strings to categories, loaded from a `raw,category` CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseTypeMapping(BTreeMap<String, CaseType>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseTypeMatch {
    pub category: CaseType,
    /// False when the raw string was empty or unmapped and the fallback
    /// category was used.
    pub matched: bool,
}

impl CaseTypeMapping {
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, GeoError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "raw" || &headers[1] != "category" {
            return Err(GeoError::Mapping("header must be `raw,category`".into()));
        }
        let mut map = BTreeMap::new();
        for row in rdr.records() {
            let row = row?;
            let category: CaseType = row[1].trim().parse()?;
            if map.insert(row[0].to_string(), category).is_some() {
                return Err(GeoError::Mapping(format!("duplicate raw label `{}`", &row[0])));
            }
        }
        Ok(CaseTypeMapping(map))
    }

    pub fn builtin() -> Self {
        CaseTypeMapping::from_csv(DEFAULT_MAPPING.as_bytes()).expect("bundled mapping is valid")
    }

    pub fn labels(&self, category: CaseType) -> Vec<&str> {
        self.0
            .iter()
            .filter(|(_, c)| **c == category)
            .map(|(raw, _)| raw.as_str())
            .collect()
    }
}

impl Default for CaseTypeMapping {
    fn default() -> Self {
        CaseTypeMapping::builtin()
    }
}

/// Exact-match lookup; empty or unmapped strings fall back to
/// `intersibling_other` with `matched = false`.
pub fn classify_case_type(raw: &str, mapping: &CaseTypeMapping) -> CaseTypeMatch {
    match mapping.0.get(raw) {
        Some(&category) => CaseTypeMatch { category, matched: true },
        None => CaseTypeMatch {
            category: CaseType::IntersiblingOther,
            matched: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapped_label_resolves() {
        let m = CaseTypeMapping::builtin();
        assert_eq!(
            classify_case_type("marital violence", &m),
            CaseTypeMatch { category: CaseType::Ipv, matched: true }
        );
        assert_eq!(classify_case_type("elder neglect", &m).category, CaseType::Elderly);
    }

    #[test]
    fn unmapped_and_empty_fall_back() {
        let m = CaseTypeMapping::builtin();
        for raw in ["something unusual", ""] {
            let c = classify_case_type(raw, &m);
            assert_eq!(c.category, CaseType::IntersiblingOther);
            assert!(!c.matched);
        }
    }

    #[test]
    fn mapping_rejects_bad_category_and_duplicates() {
        assert!(CaseTypeMapping::from_csv("raw,category\nx,spouse\n".as_bytes()).is_err());
        assert!(CaseTypeMapping::from_csv("raw,category\nx,IPV\nx,elderly\n".as_bytes()).is_err());
        assert!(CaseTypeMapping::from_csv("label,kind\nx,IPV\n".as_bytes()).is_err());
    }

    #[test]
    fn every_category_has_builtin_labels() {
        let m = CaseTypeMapping::builtin();
        for c in CaseType::ALL {
            assert!(!m.labels(c).is_empty(), "{c}");
            assert_eq!(c.as_str().parse::<CaseType>().unwrap(), c);
        }
    }
}
