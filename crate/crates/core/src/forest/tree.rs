use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::best_split;
use crate::preprocess::FeatureFrame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        positive_fraction: f64,
    },
    Split {
        feature: u16,
        left_mask: u64,
        left: u32,
        right: u32,
    },
}

/// A classification tree stored as a node arena; node 0 is the root and
/// children always follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FlatTree", try_from = "FlatTree")]
pub struct Tree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub mtry: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Tree {
    pub fn leaf(positive_fraction: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { positive_fraction }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, left as usize).max(go(nodes, right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }

    pub fn predict(&self, row: &[u16]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { positive_fraction } => return positive_fraction,
                Node::Split {
                    feature,
                    left_mask,
                    left,
                    right,
                } => {
                    i = if left_mask >> row[feature as usize] & 1 == 1 {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

/// Grows a CART tree on `rows` (a multiset of frame row indices).
///
/// At every node `mtry` features are drawn without replacement from `rng`.
/// A node becomes a leaf at `max_depth`, below `2 * min_leaf` rows, when
/// pure, or when no split reduces impurity.
pub fn build_tree<R: Rng>(frame: &FeatureFrame, rows: &[usize], params: &TreeParams, rng: &mut R) -> Tree {
    assert!(!rows.is_empty(), "build_tree needs at least one row");
    let mut nodes = Vec::new();
    grow(frame, rows.to_vec(), 0, params, rng, &mut nodes);
    Tree { nodes }
}

fn grow<R: Rng>(
    frame: &FeatureFrame,
    rows: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
    nodes: &mut Vec<Node>,
) -> u32 {
    let id = nodes.len() as u32;
    let pos = rows.iter().filter(|&&r| frame.labels[r] == 1).count();
    let positive_fraction = pos as f64 / rows.len() as f64;
    nodes.push(Node::Leaf { positive_fraction });

    let pure = pos == 0 || pos == rows.len();
    if depth >= params.max_depth || rows.len() < 2 * params.min_leaf || pure {
        return id;
    }
    let p = frame.n_features();
    let candidates = index::sample(rng, p, params.mtry.min(p)).into_vec();
    let Some(split) = best_split(frame, &rows, &candidates) else {
        return id;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| split.left_mask >> frame.rows[r][split.feature] & 1 == 1);
    let left = grow(frame, left_rows, depth + 1, params, rng, nodes);
    let right = grow(frame, right_rows, depth + 1, params, rng, nodes);
    nodes[id as usize] = Node::Split {
        feature: split.feature as u16,
        left_mask: split.left_mask,
        left,
        right,
    };
    id
}

/// Column-wise persisted form. `feature < 0` marks a leaf.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FlatTree {
    feature: Vec<i32>,
    left_mask: Vec<u64>,
    left: Vec<u32>,
    right: Vec<u32>,
    value: Vec<f64>,
}

impl From<Tree> for FlatTree {
    fn from(t: Tree) -> FlatTree {
        let n = t.nodes.len();
        let mut flat = FlatTree {
            feature: Vec::with_capacity(n),
            left_mask: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
        };
        for node in t.nodes {
            match node {
                Node::Leaf { positive_fraction } => {
                    flat.feature.push(-1);
                    flat.left_mask.push(0);
                    flat.left.push(0);
                    flat.right.push(0);
                    flat.value.push(positive_fraction);
                }
                Node::Split {
                    feature,
                    left_mask,
                    left,
                    right,
                } => {
                    flat.feature.push(feature as i32);
                    flat.left_mask.push(left_mask);
                    flat.left.push(left);
                    flat.right.push(right);
                    flat.value.push(0.0);
                }
            }
        }
        flat
    }
}

impl TryFrom<FlatTree> for Tree {
    type Error = String;

    fn try_from(f: FlatTree) -> Result<Tree, String> {
        let n = f.feature.len();
        if n == 0 {
            return Err("tree has no nodes".into());
        }
        if [f.left_mask.len(), f.left.len(), f.right.len(), f.value.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err("tree columns differ in length".into());
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if f.feature[i] < 0 {
                let v = f.value[i];
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("leaf {i} has fraction {v} outside [0, 1]"));
                }
                nodes.push(Node::Leaf { positive_fraction: v });
            } else {
                let (l, r) = (f.left[i] as usize, f.right[i] as usize);
                if l <= i || r <= i || l >= n || r >= n {
                    return Err(format!("node {i} has invalid children ({l}, {r})"));
                }
                nodes.push(Node::Split {
                    feature: f.feature[i] as u16,
                    left_mask: f.left_mask[i],
                    left: l as u32,
                    right: r as u32,
                });
            }
        }
        Ok(Tree { nodes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::split::tests::frame;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(max_depth: usize) -> TreeParams {
        TreeParams {
            mtry: 2,
            max_depth,
            min_leaf: 1,
        }
    }

    #[test]
    fn pure_input_is_single_leaf() {
        let f = frame(&[2], vec![vec![0], vec![1], vec![0]], vec![1, 1, 1]);
        let t = build_tree(&f, &[0, 1, 2], &params(5), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(t.nodes(), &[Node::Leaf { positive_fraction: 1.0 }]);
    }

    #[test]
    fn xor_is_fit_exactly() {
        // y = x0 XOR x1. On the bare 4-row table no root split lowers Gini,
        // so one corner is drawn twice, as a bootstrap sample would.
        let rows = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let labels = vec![0, 1, 1, 0];
        let f = frame(&[2, 2], rows, labels);
        let idx = [0, 1, 2, 3, 0];
        let t = build_tree(&f, &idx, &params(2), &mut ChaCha8Rng::seed_from_u64(3));
        for i in 0..4 {
            assert_eq!(t.predict(&f.rows[i]), f.labels[i] as f64, "row {i}");
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn depth_zero_is_base_rate() {
        let f = frame(&[2], vec![vec![0], vec![1], vec![0], vec![1]], vec![1, 0, 0, 0]);
        let t = build_tree(&f, &[0, 1, 2, 3], &params(0), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(t.nodes(), &[Node::Leaf { positive_fraction: 0.25 }]);
    }

    #[test]
    fn small_nodes_stop_at_min_leaf() {
        let f = frame(&[2], vec![vec![0], vec![1], vec![0], vec![1]], vec![1, 0, 1, 0]);
        let p = TreeParams {
            mtry: 1,
            max_depth: 10,
            min_leaf: 3,
        };
        let t = build_tree(&f, &[0, 1, 2, 3], &p, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(t.nodes().len(), 1);
    }

    #[test]
    fn flat_form_round_trips_and_validates() {
        let f = frame(&[3, 2], vec![vec![0, 0], vec![1, 1], vec![2, 0], vec![2, 1]], vec![1, 0, 1, 0]);
        let t = build_tree(&f, &[0, 1, 2, 3], &params(3), &mut ChaCha8Rng::seed_from_u64(9));
        let json = serde_json::to_string(&t).unwrap();
        let back: Tree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);

        let bad = r#"{"feature":[0],"left_mask":[1],"left":[0],"right":[0],"value":[0.0]}"#;
        assert!(serde_json::from_str::<Tree>(bad).is_err());
    }
}
