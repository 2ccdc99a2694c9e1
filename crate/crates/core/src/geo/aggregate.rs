//! Per-village and per-district tallies of cases.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::boundaries::Boundaries;
use super::geocode::GeocoderClient;
use super::{classify_case_type, CaseType, CaseTypeMapping};
use crate::forest::{EnsembleModel, RiskLevel};
use crate::preprocess::{AgeBand, CaseRecord, Gender};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub total: u64,
    pub ipv: u64,
    pub child_adolescent: u64,
    pub elderly: u64,
    pub intersibling_other: u64,
    pub male: u64,
    pub female: u64,
    pub age_0_18: u64,
    pub age_19_64: u64,
    pub age_65_plus: u64,
    pub low_mid_income: u64,
    pub disability_or_mental_illness: u64,
    /// Cases scored in the high band; `None` when no model was supplied.
    pub predicted_high_risk: Option<u64>,
}

impl Tally {
    pub fn add(&mut self, record: &CaseRecord, category: CaseType, high_risk: Option<bool>) {
        self.total += 1;
        *match category {
            CaseType::Ipv => &mut self.ipv,
            CaseType::ChildAdolescent => &mut self.child_adolescent,
            CaseType::Elderly => &mut self.elderly,
            CaseType::IntersiblingOther => &mut self.intersibling_other,
        } += 1;
        match record.victim_gender {
            Gender::Male => self.male += 1,
            Gender::Female => self.female += 1,
        }
        *match AgeBand::of(record.victim_age) {
            AgeBand::Minor => &mut self.age_0_18,
            AgeBand::Adult => &mut self.age_19_64,
            AgeBand::Senior => &mut self.age_65_plus,
        } += 1;
        self.low_mid_income += u64::from(record.low_mid_income);
        self.disability_or_mental_illness += u64::from(record.disability_or_mental_illness);
        if let Some(h) = high_risk {
            *self.predicted_high_risk.get_or_insert(0) += u64::from(h);
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.total += other.total;
        self.ipv += other.ipv;
        self.child_adolescent += other.child_adolescent;
        self.elderly += other.elderly;
        self.intersibling_other += other.intersibling_other;
        self.male += other.male;
        self.female += other.female;
        self.age_0_18 += other.age_0_18;
        self.age_19_64 += other.age_19_64;
        self.age_65_plus += other.age_65_plus;
        self.low_mid_income += other.low_mid_income;
        self.disability_or_mental_illness += other.disability_or_mental_illness;
        self.predicted_high_risk = match (self.predicted_high_risk, other.predicted_high_risk) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0) + b.unwrap_or(0)),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VillageAggregate {
    pub village_id: String,
    pub district_id: String,
    #[serde(flatten)]
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictAggregate {
    pub district_id: String,
    pub n_villages: usize,
    #[serde(flatten)]
    pub tally: Tally,
}

/// Aggregates for one view (all cases, or one category).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSet {
    pub category: Option<CaseType>,
    /// One entry per boundary village, sorted by id; villages with no cases
    /// carry zero tallies.
    pub villages: Vec<VillageAggregate>,
    pub unlocated: Tally,
}

impl AggregateSet {
    pub fn districts(&self) -> Vec<DistrictAggregate> {
        let mut map: BTreeMap<&str, DistrictAggregate> = BTreeMap::new();
        for v in &self.villages {
            let d = map.entry(&v.district_id).or_insert_with(|| DistrictAggregate {
                district_id: v.district_id.clone(),
                n_villages: 0,
                tally: Tally::default(),
            });
            d.n_villages += 1;
            d.tally.merge(&v.tally);
        }
        map.into_values().collect()
    }

    pub fn district(&self, district_id: &str) -> Option<DistrictAggregate> {
        self.districts().into_iter().find(|d| d.district_id == district_id)
    }

    pub fn located_total(&self) -> u64 {
        self.villages.iter().map(|v| v.tally.total).sum()
    }
}

/// How records were placed, for the run log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LocationStats {
    pub by_village_id: u64,
    pub by_coordinates: u64,
    pub by_address: u64,
    pub unlocated: u64,
    pub category_fallbacks: u64,
    pub unscored: u64,
}

/// The aggregates file: every view the map serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateBundle {
    pub all: AggregateSet,
    pub by_category: BTreeMap<CaseType, AggregateSet>,
    pub stats: LocationStats,
}

impl AggregateBundle {
    pub fn view(&self, category: Option<CaseType>) -> &AggregateSet {
        match category {
            None => &self.all,
            Some(c) => &self.by_category[&c],
        }
    }
}

pub struct AggregateContext<'a> {
    pub boundaries: &'a Boundaries,
    pub mapping: &'a CaseTypeMapping,
    pub geocoder: Option<&'a dyn GeocoderClient>,
    /// `case_id` to street address.
    pub addresses: Option<&'a HashMap<String, String>>,
    pub model: Option<&'a EnsembleModel>,
}

enum Placement {
    Village(usize),
    Coordinates(usize),
    Address(usize),
    Unlocated,
}

impl Placement {
    fn index(&self) -> Option<usize> {
        match *self {
            Placement::Village(i) | Placement::Coordinates(i) | Placement::Address(i) => Some(i),
            Placement::Unlocated => None,
        }
    }
}

/// Village id first, then coordinates, then the address table through the
/// geocoder. A village id missing from the boundaries falls through.
fn place(record: &CaseRecord, ctx: &AggregateContext<'_>) -> Placement {
    let b = ctx.boundaries;
    if let Some(i) = record.village.as_deref().and_then(|v| b.position(v)) {
        return Placement::Village(i);
    }
    if let Some((lat, lon)) = record.coordinates() {
        if let Some(i) = b.locate(lon, lat) {
            return Placement::Coordinates(i);
        }
    }
    let geocoded = ctx
        .addresses
        .and_then(|a| a.get(&record.case_id))
        .zip(ctx.geocoder)
        .and_then(|(addr, g)| g.resolve(addr))
        .and_then(|(lat, lon)| b.locate(lon, lat));
    match geocoded {
        Some(i) => Placement::Address(i),
        None => Placement::Unlocated,
    }
}

fn empty_set(boundaries: &Boundaries, category: Option<CaseType>) -> AggregateSet {
    AggregateSet {
        category,
        villages: boundaries
            .villages()
            .iter()
            .map(|v| VillageAggregate {
                village_id: v.village_id.clone(),
                district_id: v.district_id.clone(),
                tally: Tally::default(),
            })
            .collect(),
        unlocated: Tally::default(),
    }
}

/// Builds the all-cases view and one view per category in a single pass.
pub fn aggregate(records: &[CaseRecord], ctx: &AggregateContext<'_>) -> AggregateBundle {
    let mut all = empty_set(ctx.boundaries, None);
    let mut by_category: BTreeMap<CaseType, AggregateSet> = CaseType::ALL
        .into_iter()
        .map(|c| (c, empty_set(ctx.boundaries, Some(c))))
        .collect();
    let mut stats = LocationStats::default();

    for record in records {
        let m = classify_case_type(&record.case_type_raw, ctx.mapping);
        stats.category_fallbacks += u64::from(!m.matched);
        let high_risk = ctx.model.map(|model| match model.predict_record(record) {
            Ok(p) => model.classify(p).risk_level == RiskLevel::High,
            Err(_) => {
                stats.unscored += 1;
                false
            }
        });
        let placement = place(record, ctx);
        match placement {
            Placement::Village(_) => stats.by_village_id += 1,
            Placement::Coordinates(_) => stats.by_coordinates += 1,
            Placement::Address(_) => stats.by_address += 1,
            Placement::Unlocated => stats.unlocated += 1,
        }
        let cat_set = by_category.get_mut(&m.category).expect("all categories present");
        for set in [&mut all, cat_set] {
            let tally = match placement.index() {
                Some(i) => &mut set.villages[i].tally,
                None => &mut set.unlocated,
            };
            tally.add(record, m.category, high_risk);
        }
    }
    if stats.category_fallbacks > 0 {
        log::warn!(
            "{} records had unmapped case types and were counted as intersibling_other",
            stats.category_fallbacks
        );
    }
    AggregateBundle { all, by_category, stats }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::FileGeocoder;
    use crate::preprocess::record::sample_record;
    use proptest::prelude::*;

    fn ctx<'a>(b: &'a Boundaries, m: &'a CaseTypeMapping) -> AggregateContext<'a> {
        AggregateContext {
            boundaries: b,
            mapping: m,
            geocoder: None,
            addresses: None,
            model: None,
        }
    }

    fn centre(b: &Boundaries, id: &str) -> (f64, f64) {
        let bb = b.get(id).unwrap().bbox();
        ((bb[1] + bb[3]) / 2.0, (bb[0] + bb[2]) / 2.0)
    }

    #[test]
    fn resolution_order() {
        let b = Boundaries::synthetic();
        let m = CaseTypeMapping::builtin();
        let mut by_id = sample_record("a");
        by_id.village = Some("V002".into());
        by_id.case_type_raw = "elder abuse".into();
        let mut by_point = sample_record("b");
        by_point.village = Some("NOWHERE".into());
        let (lat, lon) = centre(&b, "V040");
        (by_point.latitude, by_point.longitude) = (Some(lat), Some(lon));
        let mut by_addr = sample_record("c");
        by_addr.village = None;
        (by_addr.latitude, by_addr.longitude) = (None, None);
        let mut lost = sample_record("d");
        lost.village = None;
        (lost.latitude, lost.longitude) = (None, None);
        lost.case_type_raw = "unheard of".into();

        let mut geocoder = FileGeocoder::default();
        let (lat, lon) = centre(&b, "V456");
        geocoder.insert("1 Road", lat, lon);
        let addresses = HashMap::from([("c".to_string(), "1 road".to_string())]);
        let c = AggregateContext {
            geocoder: Some(&geocoder),
            addresses: Some(&addresses),
            ..ctx(&b, &m)
        };
        let bundle = aggregate(&[by_id, by_point, by_addr, lost], &c);
        let all = &bundle.all;
        let get = |id: &str| all.villages[b.position(id).unwrap()].tally.total;
        assert_eq!((get("V002"), get("V040"), get("V456")), (1, 1, 1));
        assert_eq!(all.unlocated.total, 1);
        assert_eq!(bundle.stats.category_fallbacks, 1);
        assert_eq!(bundle.view(Some(CaseType::Elderly)).located_total(), 1);
        assert_eq!(bundle.all.villages[b.position("V040").unwrap()].district_id, "D02");
        assert_eq!(all.unlocated.predicted_high_risk, None);
    }

    #[test]
    fn empty_input_gives_zero_tallies() {
        let b = Boundaries::synthetic();
        let m = CaseTypeMapping::builtin();
        let bundle = aggregate(&[], &ctx(&b, &m));
        assert_eq!(bundle.all.villages.len(), 456);
        assert_eq!(bundle.all.located_total(), 0);
        assert_eq!(bundle.all.districts().len(), 12);
    }

    proptest! {
        #[test]
        fn views_and_districts_are_additive(
            cases in prop::collection::vec((0usize..470, 0usize..4, any::<bool>(), 0u32..95), 0..200)
        ) {
            let b = Boundaries::synthetic();
            let m = CaseTypeMapping::builtin();
            let raws = ["dating violence", "child abuse", "elder abuse", "sibling violence"];
            let records: Vec<CaseRecord> = cases.iter().enumerate().map(|(i, &(v, t, f, age))| {
                let mut r = sample_record(&i.to_string());
                r.village = Some(format!("V{:03}", v + 1));
                r.case_type_raw = raws[t].into();
                r.victim_gender = if f { Gender::Female } else { Gender::Male };
                r.victim_age = age;
                r
            }).collect();
            let bundle = aggregate(&records, &ctx(&b, &m));
            let mut districts = Tally::default();
            for d in bundle.all.districts() {
                districts.merge(&d.tally);
            }
            let mut villages = Tally::default();
            for v in &bundle.all.villages {
                villages.merge(&v.tally);
            }
            prop_assert_eq!(districts, villages);
            let mut sum = Tally::default();
            for c in CaseType::ALL {
                let s = bundle.view(Some(c));
                let u = &bundle.all.unlocated;
                let expected = [
                    villages.ipv + u.ipv,
                    villages.child_adolescent + u.child_adolescent,
                    villages.elderly + u.elderly,
                    villages.intersibling_other + u.intersibling_other,
                ][c.index()];
                prop_assert_eq!(s.located_total() + s.unlocated.total, expected);
                for v in &s.villages { sum.merge(&v.tally); }
            }
            prop_assert_eq!(sum, villages);
            prop_assert_eq!(villages.total + bundle.all.unlocated.total, records.len() as u64);
            prop_assert_eq!(villages.male + villages.female, villages.total);
            prop_assert_eq!(villages.age_0_18 + villages.age_19_64 + villages.age_65_plus, villages.total);
        }
    }
}
