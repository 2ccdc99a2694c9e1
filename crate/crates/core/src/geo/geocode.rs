//! Address geocoding behind a trait so a real service can be swapped in.
//! The bundled implementation reads a fixed `address,lat,lon` table.

use std::collections::HashMap;
use std::io::Read;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeocodeError {
    #[error("address table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub trait GeocoderClient: Send + Sync {
    /// `(lat, lon)` for the address, or `None` when it cannot be resolved.
    fn resolve(&self, address: &str) -> Option<(f64, f64)>;
}

#[derive(Debug, Clone, Default)]
pub struct FileGeocoder {
    table: HashMap<String, (f64, f64)>,
}

impl FileGeocoder {
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, GeocodeError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let h = rdr.headers()?.clone();
        if h.iter().collect::<Vec<_>>() != ["address", "lat", "lon"] {
            return Err(GeocodeError::Table("header must be `address,lat,lon`".into()));
        }
        let mut table = HashMap::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let parse = |k: usize| {
                row[k]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| GeocodeError::Table(format!("row {}: bad coordinate `{}`", i + 2, &row[k])))
            };
            table.insert(normalize(&row[0]), (parse(1)?, parse(2)?));
        }
        Ok(FileGeocoder { table })
    }

    pub fn insert(&mut self, address: &str, lat: f64, lon: f64) {
        self.table.insert(normalize(address), (lat, lon));
    }
}

fn normalize(address: &str) -> String {
    address.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl GeocoderClient for FileGeocoder {
    fn resolve(&self, address: &str) -> Option<(f64, f64)> {
        self.table.get(&normalize(address)).copied()
    }
}

/// Reads a `case_id,address` side table.
pub fn read_addresses<R: Read>(reader: R) -> Result<HashMap<String, String>, GeocodeError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let h = rdr.headers()?.clone();
    if h.iter().collect::<Vec<_>>() != ["case_id", "address"] {
        return Err(GeocodeError::Table("header must be `case_id,address`".into()));
    }
    let mut out = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        out.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(out)
}
