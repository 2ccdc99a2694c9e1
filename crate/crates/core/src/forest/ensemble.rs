//! Balanced-resampling two-level ensemble.
//!
//! Each outer round draws one class-balanced resample of the training
//! frame. Every inner repeat trains a full random forest on that same
//! resample with its own tree randomness. The ensemble score is the plain
//! mean over all `outer_rounds * inner_repeats` forest probabilities.

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::seed::{derive_seed, stream_rng, FOREST_STREAM, RESAMPLE_STREAM, TREE_STREAM};
use super::tree::{build_tree, Tree, TreeParams};
use super::{classify, Classification, ForestError, RiskBands};
use crate::preprocess::{CaseRecord, FeatureFrame, Schema};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub outer_rounds: usize,
    pub inner_repeats: usize,
    pub trees_per_forest: usize,
    pub per_class_sample: usize,
    /// Features tried per node; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Each tree sees a bootstrap of the forest's training rows.
    pub bootstrap: bool,
    pub master_seed: u64,
    pub threshold: f64,
    pub bands: RiskBands,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig::desk_scale()
    }
}

impl EnsembleConfig {
    /// 200 outer rounds x 50 inner forests x 200 trees, 500 per class.
    pub fn paper_scale() -> Self {
        EnsembleConfig {
            outer_rounds: 200,
            inner_repeats: 50,
            trees_per_forest: 200,
            per_class_sample: 500,
            ..EnsembleConfig::desk_scale()
        }
    }

    pub fn desk_scale() -> Self {
        EnsembleConfig {
            outer_rounds: 20,
            inner_repeats: 5,
            trees_per_forest: 50,
            per_class_sample: 200,
            mtry: None,
            max_depth: 12,
            min_leaf: 5,
            bootstrap: true,
            master_seed: 20170924,
            threshold: 0.5,
            bands: RiskBands::default(),
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        let bad = |m: String| Err(ForestError::InvalidConfig(m));
        for (name, v) in [
            ("outer_rounds", self.outer_rounds),
            ("inner_repeats", self.inner_repeats),
            ("trees_per_forest", self.trees_per_forest),
            ("per_class_sample", self.per_class_sample),
            ("min_leaf", self.min_leaf),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if n_features == 0 {
            return bad("frame has no features".into());
        }
        let mtry = self.resolved_mtry(n_features);
        if mtry == 0 || mtry > n_features {
            return bad(format!("mtry must be in 1..={n_features}, got {mtry}"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        self.bands.validate().map_err(ForestError::InvalidConfig)
    }

    /// Sets one field from its text form. `mtry = auto` restores the default.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ForestError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ForestError> {
            v.parse()
                .map_err(|_| ForestError::InvalidConfig(format!("{key}: cannot parse `{v}`")))
        }
        let v = value.trim();
        match key {
            "outer_rounds" => self.outer_rounds = num(key, v)?,
            "inner_repeats" => self.inner_repeats = num(key, v)?,
            "trees_per_forest" => self.trees_per_forest = num(key, v)?,
            "per_class_sample" => self.per_class_sample = num(key, v)?,
            "mtry" => self.mtry = if v == "auto" { None } else { Some(num(key, v)?) },
            "max_depth" => self.max_depth = num(key, v)?,
            "min_leaf" => self.min_leaf = num(key, v)?,
            "bootstrap" => self.bootstrap = num(key, v)?,
            "master_seed" | "seed" => self.master_seed = num(key, v)?,
            "threshold" => self.threshold = num(key, v)?,
            "elevated_band" => self.bands.elevated = num(key, v)?,
            "high_band" => self.bands.high = num(key, v)?,
            _ => return Err(ForestError::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
    }

    fn tree_params(&self, n_features: usize) -> TreeParams {
        TreeParams {
            mtry: self.resolved_mtry(n_features),
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_trees: usize,
    pub mtry: usize,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn predict(&self, row: &[u16]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Draws `per_class` row indices with replacement from each class.
/// Class-0 indices come first.
pub fn balanced_resample<R: Rng>(
    frame: &FeatureFrame,
    per_class: usize,
    rng: &mut R,
) -> Result<Vec<usize>, ForestError> {
    let (mut neg, mut pos) = (Vec::new(), Vec::new());
    for (i, &y) in frame.labels.iter().enumerate() {
        if y == 1 { pos.push(i) } else { neg.push(i) }
    }
    if neg.is_empty() {
        return Err(ForestError::MissingClass(0));
    }
    if pos.is_empty() {
        return Err(ForestError::MissingClass(1));
    }
    let mut out = Vec::with_capacity(2 * per_class);
    for class in [&neg, &pos] {
        out.extend((0..per_class).map(|_| *class.choose(rng).expect("class is nonempty")));
    }
    Ok(out)
}

/// Immutable trained ensemble plus everything needed to score raw records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    format_version: u32,
    config: EnsembleConfig,
    schema: Schema,
    /// Outer-round major: forest `o * inner_repeats + i`.
    forests: Vec<ForestModel>,
}

fn train_forest(
    frame: &FeatureFrame,
    sample: &[usize],
    config: &EnsembleConfig,
    outer: usize,
    inner: usize,
) -> ForestModel {
    let params = config.tree_params(frame.n_features());
    let trees = (0..config.trees_per_forest)
        .map(|t| {
            let mut rng = stream_rng(
                config.master_seed,
                &[TREE_STREAM, outer as u64, inner as u64, t as u64],
            );
            if config.bootstrap {
                let rows: Vec<usize> = (0..sample.len())
                    .map(|_| sample[rng.random_range(0..sample.len())])
                    .collect();
                build_tree(frame, &rows, &params, &mut rng)
            } else {
                build_tree(frame, sample, &params, &mut rng)
            }
        })
        .collect();
    ForestModel {
        n_trees: config.trees_per_forest,
        mtry: params.mtry,
        seed: derive_seed(config.master_seed, &[FOREST_STREAM, outer as u64, inner as u64]),
        trees,
    }
}

/// Trains the two-level ensemble. Work is spread over the current rayon
/// pool; the result does not depend on the number of threads.
pub fn train_ensemble(frame: &FeatureFrame, config: &EnsembleConfig) -> Result<EnsembleModel, ForestError> {
    config.validate(frame.n_features())?;
    let samples = (0..config.outer_rounds)
        .map(|o| {
            let mut rng = stream_rng(config.master_seed, &[RESAMPLE_STREAM, o as u64]);
            balanced_resample(frame, config.per_class_sample, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..config.outer_rounds)
        .flat_map(|o| (0..config.inner_repeats).map(move |i| (o, i)))
        .collect();
    let forests = jobs
        .par_iter()
        .map(|&(o, i)| train_forest(frame, &samples[o], config, o, i))
        .collect();
    Ok(EnsembleModel {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        schema: frame.schema.clone(),
        forests,
    })
}

impl EnsembleModel {
    /// Assembles a model from already-trained forests.
    pub fn from_parts(
        config: EnsembleConfig,
        schema: Schema,
        forests: Vec<ForestModel>,
    ) -> Result<EnsembleModel, ForestError> {
        let expected = config.outer_rounds * config.inner_repeats;
        if forests.len() != expected || forests.iter().any(|f| f.trees.is_empty()) {
            return Err(ForestError::InvalidConfig(format!(
                "expected {expected} nonempty forests, got {}",
                forests.len()
            )));
        }
        Ok(EnsembleModel {
            format_version: FORMAT_VERSION,
            config,
            schema,
            forests,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn forests(&self) -> &[ForestModel] {
        &self.forests
    }

    pub fn n_trees(&self) -> usize {
        self.forests.iter().map(|f| f.trees.len()).sum()
    }

    /// Mean of the member forests' probabilities for an encoded row.
    pub fn predict_proba(&self, row: &[u16]) -> Result<f64, ForestError> {
        self.schema.check_row(row).map_err(ForestError::SchemaMismatch)?;
        let sum: f64 = self.forests.iter().map(|f| f.predict(row)).sum();
        Ok((sum / self.forests.len() as f64).clamp(0.0, 1.0))
    }

    pub fn predict_record(&self, record: &CaseRecord) -> Result<f64, ForestError> {
        let row = self
            .schema
            .encode(record)
            .map_err(|e| ForestError::SchemaMismatch(e.to_string()))?;
        self.predict_proba(&row)
    }

    pub fn classify(&self, prob: f64) -> Classification {
        classify(prob, self.config.threshold, &self.config.bands)
    }

    pub fn predict_frame(&self, frame: &FeatureFrame) -> Result<Vec<f64>, ForestError> {
        frame.rows.iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("model serialization cannot fail")
    }

    pub fn from_json(bytes: &[u8]) -> Result<EnsembleModel, ForestError> {
        let model: EnsembleModel =
            serde_json::from_slice(bytes).map_err(|e| ForestError::Format(e.to_string()))?;
        if model.format_version != FORMAT_VERSION {
            return Err(ForestError::Format(format!(
                "unsupported format_version {}, expected {FORMAT_VERSION}",
                model.format_version
            )));
        }
        let n = model.schema.len();
        for (fi, forest) in model.forests.iter().enumerate() {
            for tree in &forest.trees {
                for node in tree.nodes() {
                    if let super::tree::Node::Split { feature, .. } = node {
                        if *feature as usize >= n {
                            return Err(ForestError::Format(format!(
                                "forest {fi} splits on feature {feature}, schema has {n}"
                            )));
                        }
                    }
                }
            }
        }
        EnsembleModel::from_parts(model.config, model.schema, model.forests)
    }

    /// Short content hash of the serialized model.
    pub fn version(&self) -> String {
        hex::encode(&Sha256::digest(self.to_json())[..8])
    }
}
