//! Holdout split, training and evaluation glued together.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::seed::{stream_rng, HOLDOUT_STREAM};
use crate::forest::{train_ensemble, EnsembleConfig, EnsembleModel, ForestError};
use crate::metrics::{confusion_and_metrics, EvalReport, MetricsError};
use crate::preprocess::FeatureFrame;
use crate::synthgen::quotas;

pub const DEFAULT_HOLDOUT: usize = 500;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("holdout of {holdout} leaves no training rows out of {total}")]
    HoldoutTooLarge { holdout: usize, total: usize },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Sorted row indices of each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Draws `size` rows uniformly without replacement, or per class in
/// proportion to class sizes when `stratified` is set.
pub fn holdout_split(labels: &[u8], size: usize, seed: u64, stratified: bool) -> Result<HoldoutSplit, PipelineError> {
    let n = labels.len();
    if size >= n {
        return Err(PipelineError::HoldoutTooLarge { holdout: size, total: n });
    }
    let mut rng = stream_rng(seed, &[HOLDOUT_STREAM]);
    let mut holdout = if stratified {
        let groups: Vec<Vec<usize>> = [0u8, 1]
            .iter()
            .map(|&c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect();
        let sizes: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
        let mut out = Vec::with_capacity(size);
        for (mut g, q) in groups.into_iter().zip(quotas(&sizes, size)) {
            g.shuffle(&mut rng);
            out.extend_from_slice(&g[..q]);
        }
        out
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(size);
        all
    };
    holdout.sort_unstable();
    let mut in_holdout = vec![false; n];
    for &i in &holdout {
        in_holdout[i] = true;
    }
    let train = (0..n).filter(|&i| !in_holdout[i]).collect();
    Ok(HoldoutSplit { train, holdout })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutScore {
    pub case_id: String,
    pub label: u8,
    pub probability: f64,
    pub predicted: u8,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EnsembleModel,
    pub split: HoldoutSplit,
    pub report: EvalReport,
    pub scores: Vec<HoldoutScore>,
}

pub fn evaluate(model: &EnsembleModel, frame: &FeatureFrame) -> Result<(EvalReport, Vec<HoldoutScore>), PipelineError> {
    let probs = model.predict_frame(frame)?;
    let preds: Vec<u8> = probs.iter().map(|&p| model.classify(p).label).collect();
    let report = confusion_and_metrics(&frame.labels, &preds)?;
    let scores = frame
        .case_ids
        .iter()
        .zip(&frame.labels)
        .zip(probs.iter().zip(&preds))
        .map(|((id, &label), (&probability, &predicted))| HoldoutScore {
            case_id: id.clone(),
            label,
            probability,
            predicted,
        })
        .collect();
    Ok((report, scores))
}

/// Splits off the holdout using the ensemble's master seed, trains on the
/// rest and scores the holdout.
pub fn train_and_evaluate(
    frame: &FeatureFrame,
    config: &EnsembleConfig,
    holdout: usize,
    stratified: bool,
) -> Result<TrainOutcome, PipelineError> {
    let split = holdout_split(&frame.labels, holdout, config.master_seed, stratified)?;
    let model = train_ensemble(&frame.select(&split.train), config)?;
    let (report, scores) = evaluate(&model, &frame.select(&split.holdout))?;
    Ok(TrainOutcome { model, split, report, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn too_large_holdout_rejected() {
        assert!(matches!(
            holdout_split(&[0, 1, 0], 3, 1, false),
            Err(PipelineError::HoldoutTooLarge { .. })
        ));
    }

    #[test]
    fn stratified_keeps_class_shares() {
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 25 == 0)).collect();
        let s = holdout_split(&labels, 500, 7, true).unwrap();
        let pos = s.holdout.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(pos, 20);
    }

    proptest! {
        #[test]
        fn split_partitions_rows(n in 2usize..300, frac in 0.0f64..1.0, seed in any::<u64>(), strat in any::<bool>()) {
            let labels: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
            let size = ((n - 1) as f64 * frac) as usize;
            let s = holdout_split(&labels, size, seed, strat).unwrap();
            prop_assert_eq!(s.holdout.len(), size);
            let mut all: Vec<usize> = s.train.iter().chain(&s.holdout).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(&s, &holdout_split(&labels, size, seed, strat).unwrap());
        }
    }
}
