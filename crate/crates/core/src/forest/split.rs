//! Gini impurity and categorical subset splits for binary labels.

use crate::preprocess::FeatureFrame;

/// Searched exhaustively up to this many levels present at a node; beyond
/// it levels are ordered by positive rate and only prefix cuts are tried,
/// which is optimal for Gini with a binary outcome.
pub const EXHAUSTIVE_MAX_LEVELS: usize = 8;

const MIN_GAIN: f64 = 1e-12;

/// `1 - p0^2 - p1^2`. `None` for empty input.
pub fn gini_impurity(labels: &[u8]) -> Option<f64> {
    if labels.is_empty() {
        return None;
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Some(gini_from_counts(labels.len(), pos))
}

#[inline]
pub(crate) fn gini_from_counts(n: usize, pos: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub feature: usize,
    /// Bit `l` set means level `l` goes left.
    pub left_mask: u64,
    /// Size-weighted mean Gini of the two children.
    pub child_impurity: f64,
}

#[inline]
fn weighted(n: usize, n_left: usize, pos_left: usize, pos_total: usize) -> f64 {
    let n_right = n - n_left;
    let pos_right = pos_total - pos_left;
    (n_left as f64 * gini_from_counts(n_left, pos_left)
        + n_right as f64 * gini_from_counts(n_right, pos_right))
        / n as f64
}

/// Best (feature, level subset) over `candidates`, or `None` when no split
/// lowers the node's impurity. Earlier candidates win exact ties.
pub fn best_split(frame: &FeatureFrame, rows: &[usize], candidates: &[usize]) -> Option<SplitSpec> {
    if rows.len() < 2 {
        return None;
    }
    let n = rows.len();
    let pos_total = rows.iter().filter(|&&r| frame.labels[r] == 1).count();
    let parent = gini_from_counts(n, pos_total);
    if parent == 0.0 {
        return None;
    }

    let mut best: Option<SplitSpec> = None;
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for &f in candidates {
        let n_levels = frame.schema.features[f].n_levels();
        counts.clear();
        counts.resize(n_levels, (0, 0));
        for &r in rows {
            let c = &mut counts[frame.rows[r][f] as usize];
            c.0 += 1;
            c.1 += frame.labels[r] as usize;
        }
        let present: Vec<usize> = (0..n_levels).filter(|&l| counts[l].0 > 0).collect();
        if present.len() < 2 {
            continue;
        }
        let candidate = if present.len() <= EXHAUSTIVE_MAX_LEVELS {
            exhaustive(&counts, &present, n, pos_total)
        } else {
            ordered(&counts, &present, n, pos_total)
        };
        let (left_mask, child_impurity) = candidate;
        if best.is_none_or(|b| child_impurity < b.child_impurity) {
            best = Some(SplitSpec {
                feature: f,
                left_mask,
                child_impurity,
            });
        }
    }
    best.filter(|b| parent - b.child_impurity > MIN_GAIN)
}

/// All bipartitions of the present levels, with the first present level
/// pinned to the left side so mirrored partitions are visited once.
fn exhaustive(counts: &[(usize, usize)], present: &[usize], n: usize, pos: usize) -> (u64, f64) {
    let k = present.len();
    let mut best = (0u64, f64::INFINITY);
    for m in 0..(1u64 << (k - 1)) - 1 {
        let mut mask = 1u64 << present[0];
        let (mut nl, mut pl) = counts[present[0]];
        for (j, &lvl) in present[1..].iter().enumerate() {
            if m >> j & 1 == 1 {
                mask |= 1 << lvl;
                nl += counts[lvl].0;
                pl += counts[lvl].1;
            }
        }
        let g = weighted(n, nl, pl, pos);
        if g < best.1 {
            best = (mask, g);
        }
    }
    best
}

fn ordered(counts: &[(usize, usize)], present: &[usize], n: usize, pos: usize) -> (u64, f64) {
    let mut order = present.to_vec();
    // rate_a < rate_b  <=>  pos_a * n_b < pos_b * n_a
    order.sort_by(|&a, &b| {
        (counts[a].1 * counts[b].0)
            .cmp(&(counts[b].1 * counts[a].0))
            .then(a.cmp(&b))
    });
    let mut best = (0u64, f64::INFINITY);
    let (mut mask, mut nl, mut pl) = (0u64, 0, 0);
    for &lvl in &order[..order.len() - 1] {
        mask |= 1 << lvl;
        nl += counts[lvl].0;
        pl += counts[lvl].1;
        let g = weighted(n, nl, pl, pos);
        if g < best.1 {
            best = (mask, g);
        }
    }
    best
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::preprocess::{Feature, FeatureFrame, FeatureKind, FeatureSchema, Schema};
    use proptest::prelude::*;

    pub(crate) fn frame(levels: &[usize], rows: Vec<Vec<u16>>, labels: Vec<u8>) -> FeatureFrame {
        let features = levels
            .iter()
            .zip(Feature::ALL.iter().skip(2))
            .map(|(&k, &feature)| FeatureSchema {
                feature,
                kind: FeatureKind::Categorical,
                levels: (0..k).map(|l| format!("L{l}")).collect(),
                bin_edges: None,
            })
            .collect();
        FeatureFrame {
            schema: Schema { features },
            case_ids: (0..rows.len()).map(|i| i.to_string()).collect(),
            rows,
            labels,
        }
    }

    /// Independent oracle: every nonempty proper subset of the feature's
    /// full level set, child impurity computed from raw label vectors.
    pub(crate) fn brute_force(frame: &FeatureFrame, rows: &[usize], f: usize) -> Option<f64> {
        let k = frame.schema.features[f].n_levels();
        let mut best: Option<f64> = None;
        for mask in 1..(1u64 << k) - 1 {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &r in rows {
                if mask >> frame.rows[r][f] & 1 == 1 {
                    left.push(frame.labels[r]);
                } else {
                    right.push(frame.labels[r]);
                }
            }
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let g = (left.len() as f64 * gini_impurity(&left).unwrap()
                + right.len() as f64 * gini_impurity(&right).unwrap())
                / rows.len() as f64;
            best = Some(best.map_or(g, |b: f64| b.min(g)));
        }
        best
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[1, 1, 1]), Some(0.0));
        assert_eq!(gini_impurity(&[1, 0]), Some(0.5));
        assert!((gini_impurity(&[1, 1, 0, 0, 0]).unwrap() - 0.48).abs() < 1e-15);
        assert_eq!(gini_impurity(&[]), None);
    }

    #[test]
    fn perfect_binary_separator() {
        let f = frame(&[2], vec![vec![0], vec![0], vec![1], vec![1]], vec![1, 1, 0, 0]);
        let s = best_split(&f, &[0, 1, 2, 3], &[0]).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.child_impurity, 0.0);
        assert_eq!(s.left_mask, 0b01);
    }

    #[test]
    fn constant_label_has_no_split() {
        let f = frame(&[3], vec![vec![0], vec![1], vec![2]], vec![1, 1, 1]);
        assert_eq!(best_split(&f, &[0, 1, 2], &[0]), None);
    }

    #[test]
    fn uninformative_feature_has_no_split() {
        let f = frame(&[2], vec![vec![0], vec![0], vec![1], vec![1]], vec![1, 0, 1, 0]);
        assert_eq!(best_split(&f, &[0, 1, 2, 3], &[0]), None);
    }

    #[test]
    fn three_level_matches_brute_force() {
        // A: 1,1  B: 1,0  C: 0,0
        let f = frame(
            &[3],
            vec![vec![0], vec![0], vec![1], vec![1], vec![2], vec![2]],
            vec![1, 1, 1, 0, 0, 0],
        );
        let rows: Vec<usize> = (0..6).collect();
        let s = best_split(&f, &rows, &[0]).unwrap();
        let oracle = brute_force(&f, &rows, 0).unwrap();
        assert!((s.child_impurity - oracle).abs() < 1e-12);
        // {A} | {B, C}: (2*0 + 4*(1 - .25^2 - .75^2)) / 6 = 0.25
        assert!((oracle - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ordered_search_is_used_above_cap() {
        let k = 12;
        let rows: Vec<Vec<u16>> = (0..k * 4).map(|i| vec![(i % k) as u16]).collect();
        let labels: Vec<u8> = (0..k * 4).map(|i| ((i % k) % 3 == 0 || i % 5 == 0) as u8).collect();
        let f = frame(&[k], rows, labels);
        let idx: Vec<usize> = (0..k * 4).collect();
        let s = best_split(&f, &idx, &[0]).unwrap();
        let oracle = brute_force(&f, &idx, 0).unwrap();
        assert!((s.child_impurity - oracle).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn agrees_with_exhaustive_oracle(
            k in 2usize..=8,
            data in prop::collection::vec((0u16..8, 0u8..2), 2..40),
        ) {
            let rows: Vec<Vec<u16>> = data.iter().map(|(l, _)| vec![l % k as u16]).collect();
            let labels: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
            let f = frame(&[k], rows, labels);
            let idx: Vec<usize> = (0..data.len()).collect();
            let parent = gini_impurity(&f.labels).unwrap();
            let got = best_split(&f, &idx, &[0]);
            match brute_force(&f, &idx, 0) {
                Some(o) if parent - o > 1e-12 => {
                    let s = got.expect("oracle found an improving split");
                    prop_assert!((s.child_impurity - o).abs() < 1e-12);
                }
                _ => prop_assert!(got.is_none()),
            }
        }
    }
}
