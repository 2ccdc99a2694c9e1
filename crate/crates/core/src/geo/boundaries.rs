//! Village boundary polygons: GeoJSON loading, point lookup, and the
//! synthetic grid used with generated data.

use std::collections::HashMap;

use serde_json::{json, Value};

use super::GeoError;

/// A ring of `[lon, lat]` vertices. Closing vertex optional.
pub type Ring = Vec<[f64; 2]>;

/// Outer ring followed by zero or more holes.
pub type Polygon = Vec<Ring>;

#[derive(Debug, Clone, PartialEq)]
pub struct VillageBoundary {
    pub village_id: String,
    pub district_id: String,
    pub polygons: Vec<Polygon>,
    bbox: [f64; 4],
}

impl VillageBoundary {
    pub fn new(village_id: String, district_id: String, polygons: Vec<Polygon>) -> Result<Self, GeoError> {
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for poly in &polygons {
            let outer = poly
                .first()
                .filter(|r| r.len() >= 3)
                .ok_or_else(|| GeoError::Boundaries(format!("village `{village_id}` has a degenerate polygon")))?;
            for &[x, y] in outer {
                if !x.is_finite() || !y.is_finite() {
                    return Err(GeoError::Boundaries(format!("village `{village_id}` has a non-finite vertex")));
                }
                bbox = [bbox[0].min(x), bbox[1].min(y), bbox[2].max(x), bbox[3].max(y)];
            }
        }
        if polygons.is_empty() {
            return Err(GeoError::Boundaries(format!("village `{village_id}` has no geometry")));
        }
        Ok(VillageBoundary {
            village_id,
            district_id,
            polygons,
            bbox,
        })
    }

    /// `[min_lon, min_lat, max_lon, max_lat]`.
    pub fn bbox(&self) -> [f64; 4] {
        self.bbox
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let b = self.bbox;
        if lon < b[0] || lon > b[2] || lat < b[1] || lat > b[3] {
            return false;
        }
        self.polygons.iter().any(|poly| {
            in_ring(&poly[0], lon, lat) && !poly[1..].iter().any(|hole| in_ring(hole, lon, lat))
        })
    }

    pub fn geometry_json(&self) -> Value {
        let round = |v: f64| (v * 1e6).round() / 1e6;
        let poly_json = |poly: &Polygon| -> Value {
            poly.iter()
                .map(|ring| {
                    let mut pts: Vec<Value> = ring.iter().map(|&[x, y]| json!([round(x), round(y)])).collect();
                    if ring.first() != ring.last() {
                        pts.push(pts[0].clone());
                    }
                    Value::Array(pts)
                })
                .collect()
        };
        if self.polygons.len() == 1 {
            json!({"type": "Polygon", "coordinates": poly_json(&self.polygons[0])})
        } else {
            let polys: Vec<Value> = self.polygons.iter().map(poly_json).collect();
            json!({"type": "MultiPolygon", "coordinates": polys})
        }
    }
}

/// Even-odd ray casting. Points exactly on an edge may land on either side.
fn in_ring(ring: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = ring[i];
        let [xj, yj] = ring[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Boundaries {
    villages: Vec<VillageBoundary>,
    index: HashMap<String, usize>,
}

impl Boundaries {
    pub fn new(mut villages: Vec<VillageBoundary>) -> Result<Self, GeoError> {
        villages.sort_by(|a, b| a.village_id.cmp(&b.village_id));
        let mut index = HashMap::with_capacity(villages.len());
        for (i, v) in villages.iter().enumerate() {
            if index.insert(v.village_id.clone(), i).is_some() {
                return Err(GeoError::Boundaries(format!("duplicate village `{}`", v.village_id)));
            }
        }
        Ok(Boundaries { villages, index })
    }

    /// Reads a FeatureCollection whose features carry `village_id` and
    /// `district_id` properties and Polygon or MultiPolygon geometry.
    pub fn from_geojson(text: &str) -> Result<Self, GeoError> {
        let doc: Value = serde_json::from_str(text)?;
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| GeoError::Boundaries("expected a FeatureCollection".into()))?;
        let mut villages = Vec::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            let prop = |k: &str| {
                f.pointer(&format!("/properties/{k}"))
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| GeoError::Boundaries(format!("feature {i}: missing string property `{k}`")))
            };
            let village_id = prop("village_id")?;
            let district_id = prop("district_id")?;
            let geom = f
                .get("geometry")
                .ok_or_else(|| GeoError::Boundaries(format!("feature {i}: missing geometry")))?;
            let coords = geom.get("coordinates").cloned().unwrap_or(Value::Null);
            let polygons = match geom.get("type").and_then(Value::as_str) {
                Some("Polygon") => vec![serde_json::from_value::<Polygon>(coords)?],
                Some("MultiPolygon") => serde_json::from_value::<Vec<Polygon>>(coords)?,
                other => {
                    return Err(GeoError::Boundaries(format!(
                        "feature {i}: unsupported geometry type {other:?}"
                    )))
                }
            };
            villages.push(VillageBoundary::new(village_id, district_id, polygons)?);
        }
        Boundaries::new(villages)
    }

    pub fn to_geojson(&self) -> String {
        let features: Vec<Value> = self
            .villages
            .iter()
            .map(|v| {
                json!({
                    "type": "Feature",
                    "properties": {"village_id": v.village_id, "district_id": v.district_id},
                    "geometry": v.geometry_json(),
                })
            })
            .collect();
        serde_json::to_string(&json!({"type": "FeatureCollection", "features": features}))
            .expect("geojson serializes")
    }

    /// Villages sorted by id.
    pub fn villages(&self) -> &[VillageBoundary] {
        &self.villages
    }

    pub fn len(&self) -> usize {
        self.villages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.villages.is_empty()
    }

    pub fn position(&self, village_id: &str) -> Option<usize> {
        self.index.get(village_id).copied()
    }

    pub fn get(&self, village_id: &str) -> Option<&VillageBoundary> {
        self.position(village_id).map(|i| &self.villages[i])
    }

    /// First village (in id order) containing the point.
    pub fn locate(&self, lon: f64, lat: f64) -> Option<usize> {
        self.villages.iter().position(|v| v.contains(lon, lat))
    }

    /// Sorted distinct district ids.
    pub fn districts(&self) -> Vec<&str> {
        let mut d: Vec<&str> = self.villages.iter().map(|v| v.district_id.as_str()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Twelve districts of 38 square villages each, laid out on a 24 by 19
    /// grid over the Taipei area. District `k` (0-based) owns grid columns
    /// `2k` and `2k + 1`.
    pub fn synthetic() -> Boundaries {
        let villages = (0..SYNTH_DISTRICTS)
            .flat_map(|d| {
                (0..2).flat_map(move |c| {
                    (0..SYNTH_ROWS).map(move |r| {
                        let col = 2 * d + c;
                        let x0 = SYNTH_ORIGIN[0] + col as f64 * SYNTH_STEP[0];
                        let y0 = SYNTH_ORIGIN[1] + r as f64 * SYNTH_STEP[1];
                        let (x1, y1) = (x0 + SYNTH_STEP[0], y0 + SYNTH_STEP[1]);
                        let r6 = |v: f64| (v * 1e6).round() / 1e6;
                        let (x0, y0, x1, y1) = (r6(x0), r6(y0), r6(x1), r6(y1));
                        let idx = d * 2 * SYNTH_ROWS + c * SYNTH_ROWS + r + 1;
                        VillageBoundary::new(
                            format!("V{idx:03}"),
                            format!("D{:02}", d + 1),
                            vec![vec![vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]],
                        )
                        .expect("grid cell is valid")
                    })
                })
            })
            .collect();
        Boundaries::new(villages).expect("grid ids are unique")
    }
}

pub const SYNTH_DISTRICTS: usize = 12;
pub const SYNTH_ROWS: usize = 19;
const SYNTH_ORIGIN: [f64; 2] = [121.45, 24.97];
const SYNTH_STEP: [f64; 2] = [0.01, 0.0125];
