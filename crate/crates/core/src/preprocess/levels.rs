use std::collections::BTreeMap;

/// Name of the level that absorbs rare and unseen categories.
pub const OTHER: &str = "OTHER";

pub const DEFAULT_RARE_THRESHOLD: f64 = 0.05;

/// Level mapping produced by [`group_rare_levels`]. Levels absent from the
/// map replay to [`OTHER`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMapping(pub BTreeMap<String, String>);

impl LevelMapping {
    pub fn apply<'a>(&'a self, level: &str) -> &'a str {
        self.0.get(level).map(String::as_str).unwrap_or(OTHER)
    }

    /// Distinct target levels, sorted, with [`OTHER`] always last.
    pub fn kept_levels(&self) -> Vec<String> {
        let mut kept: Vec<String> = self
            .0
            .values()
            .filter(|v| v.as_str() != OTHER)
            .cloned()
            .collect();
        kept.sort();
        kept.dedup();
        kept.push(OTHER.to_string());
        kept
    }
}

/// Folds every level whose relative frequency is below `threshold` into
/// [`OTHER`]. Returns the mapping (for replay) and the recoded column.
pub fn group_rare_levels<S: AsRef<str>>(column: &[S], threshold: f64) -> (LevelMapping, Vec<String>) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in column {
        *counts.entry(v.as_ref()).or_default() += 1;
    }
    let n = column.len() as f64;
    let mut map: BTreeMap<String, String> = counts
        .into_iter()
        .map(|(level, c)| {
            let target = if level != OTHER && (c as f64) / n >= threshold {
                level
            } else {
                OTHER
            };
            (level.to_string(), target.to_string())
        })
        .collect();
    map.insert(OTHER.to_string(), OTHER.to_string());
    let mapping = LevelMapping(map);
    let recoded = column
        .iter()
        .map(|v| mapping.apply(v.as_ref()).to_string())
        .collect();
    (mapping, recoded)
}
