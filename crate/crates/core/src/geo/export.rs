//! Choropleth export. Output is byte-stable: features are sorted by
//! village id, property keys are sorted, and coordinates are rounded to six
//! decimals.

use serde_json::{json, Value};

use super::aggregate::AggregateSet;
use super::boundaries::Boundaries;
use super::GeoError;

pub fn export_geojson(set: &AggregateSet, boundaries: &Boundaries) -> Result<String, GeoError> {
    let mut villages: Vec<_> = set.villages.iter().collect();
    villages.sort_by(|a, b| a.village_id.cmp(&b.village_id));
    let features = villages
        .into_iter()
        .map(|v| {
            let shape = boundaries
                .get(&v.village_id)
                .ok_or_else(|| GeoError::MissingBoundary(v.village_id.clone()))?;
            let mut properties = serde_json::to_value(v)?;
            properties["category"] = json!(set.category.map_or("all", |c| c.as_str()));
            Ok(json!({
                "type": "Feature",
                "properties": properties,
                "geometry": shape.geometry_json(),
            }))
        })
        .collect::<Result<Vec<Value>, GeoError>>()?;
    Ok(serde_json::to_string(&json!({"type": "FeatureCollection", "features": features}))?)
}
