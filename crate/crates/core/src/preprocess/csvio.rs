//! CSV ingestion and emission for [`CaseRecord`].
//!
//! The header must contain exactly the record field names (any order).
//! Booleans are `0`/`1`; a missing value is the empty string.

use std::io::{Read, Write};
use std::str::FromStr;

use super::record::{CaseRecord, Gender, ReporterOccupation};
use super::PreprocessError;

pub const CSV_FIELDS: [&str; 17] = [
    "case_id",
    "report_count",
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

/// A row that failed to parse. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ReadOutcome {
    pub records: Vec<CaseRecord>,
    pub skipped: Vec<RowError>,
}

pub fn read_records<R: Read>(reader: R, lenient: bool) -> Result<ReadOutcome, PreprocessError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = [0usize; CSV_FIELDS.len()];
    for (slot, name) in columns.iter_mut().zip(CSV_FIELDS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| PreprocessError::Header(format!("missing column `{name}`")))?;
    }
    if let Some(extra) = headers.iter().find(|h| !CSV_FIELDS.contains(&h.trim())) {
        return Err(PreprocessError::Header(format!("unexpected column `{extra}`")));
    }

    let mut out = ReadOutcome::default();
    for (i, row) in rdr.records().enumerate() {
        let line = row
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map(|p| p.line())
            .unwrap_or(i as u64 + 2);
        let parsed = row
            .map_err(|e| e.to_string())
            .and_then(|row| parse_row(&row, &columns));
        match parsed {
            Ok(rec) => out.records.push(rec),
            Err(message) if lenient => {
                log::warn!("skipping malformed row at line {line}: {message}");
                out.skipped.push(RowError { line, message });
            }
            Err(message) => return Err(PreprocessError::Row { line, message }),
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, columns: &[usize]) -> Result<CaseRecord, String> {
    let cell = |i: usize| row.get(columns[i]).unwrap_or("").trim();
    let text = |i: usize| {
        let v = cell(i);
        (!v.is_empty()).then(|| v.to_string())
    };
    let rec = CaseRecord {
        case_id: cell(0).to_string(),
        report_count: optional(cell(1), CSV_FIELDS[1])?,
        tipvda_score: optional(cell(2), CSV_FIELDS[2])?,
        dv_duration_months: optional(cell(3), CSV_FIELDS[3])?,
        maimed: text(4),
        occupation: text(5),
        education: text(6),
        district: text(7),
        village: text(8),
        victim_gender: required::<Gender>(cell(9), CSV_FIELDS[9])?,
        victim_age: required(cell(10), CSV_FIELDS[10])?,
        low_mid_income: flag(cell(11), CSV_FIELDS[11])?,
        disability_or_mental_illness: flag(cell(12), CSV_FIELDS[12])?,
        reporter_occupation: required::<ReporterOccupation>(cell(13), CSV_FIELDS[13])?,
        case_type_raw: cell(14).to_string(),
        latitude: optional(cell(15), CSV_FIELDS[15])?,
        longitude: optional(cell(16), CSV_FIELDS[16])?,
    };
    rec.validate().map_err(|e| e.to_string())?;
    Ok(rec)
}

fn optional<T: FromStr>(v: &str, field: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    if v.is_empty() {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|e| format!("{field}: {e}"))
}

fn required<T: FromStr>(v: &str, field: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    if v.is_empty() {
        return Err(format!("{field}: required value is missing"));
    }
    v.parse().map_err(|e| format!("{field}: {e}"))
}

fn flag(v: &str, field: &str) -> Result<bool, String> {
    match v {
        "0" => Ok(false),
        "1" => Ok(true),
        "" => Err(format!("{field}: required value is missing")),
        other => Err(format!("{field}: expected 0 or 1, got `{other}`")),
    }
}

pub fn write_records<W: Write>(writer: W, records: &[CaseRecord]) -> Result<(), PreprocessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_FIELDS)?;
    let num = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
    let coord = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let bit = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in records {
        wtr.write_record([
            r.case_id.clone(),
            num(r.report_count),
            num(r.tipvda_score),
            num(r.dv_duration_months),
            r.maimed.clone().unwrap_or_default(),
            r.occupation.clone().unwrap_or_default(),
            r.education.clone().unwrap_or_default(),
            r.district.clone().unwrap_or_default(),
            r.village.clone().unwrap_or_default(),
            r.victim_gender.to_string(),
            r.victim_age.to_string(),
            bit(r.low_mid_income),
            bit(r.disability_or_mental_illness),
            r.reporter_occupation.to_string(),
            r.case_type_raw.clone(),
            coord(r.latitude),
            coord(r.longitude),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
