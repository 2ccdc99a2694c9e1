//! Near-equal-frequency three-way binning of integer columns.

use serde::{Deserialize, Serialize};

/// Upper-inclusive cut points. A value `v` falls into bin
/// `edges.iter().filter(|&&e| v > e).count()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinEdges(pub Vec<u32>);

impl BinEdges {
    pub fn assign(&self, value: u32) -> usize {
        self.0.iter().filter(|&&e| value > e).count()
    }

    pub fn n_bins(&self) -> usize {
        self.0.len() + 1
    }

    /// Human-readable interval labels, one per bin.
    pub fn labels(&self) -> Vec<String> {
        let e = &self.0;
        if e.is_empty() {
            return vec!["all".to_string()];
        }
        let mut out = vec![format!("<={}", e[0])];
        for w in e.windows(2) {
            out.push(format!("({},{}]", w[0], w[1]));
        }
        out.push(format!(">{}", e[e.len() - 1]));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tertiles {
    pub edges: BinEdges,
    pub assignments: Vec<usize>,
    /// Set when fewer than three distinct values made three bins impossible.
    pub degenerate: bool,
}

/// Splits `values` into three bins of near-equal size.
///
/// Cuts sit only between distinct values, so ties never straddle a bin
/// boundary. Among all valid cut pairs the one minimising the largest
/// deviation of a bin size from n/3 wins; remaining ties go to the lower
/// cut values. Fewer than three distinct values yields fewer bins and sets
/// `degenerate`. Returns `None` for empty input.
pub fn tertile_bin(values: &[u32]) -> Option<Tertiles> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mut distinct: Vec<(u32, usize)> = Vec::new();
    for v in sorted {
        match distinct.last_mut() {
            Some((last, c)) if *last == v => *c += 1,
            _ => distinct.push((v, 1)),
        }
    }

    let edges = match distinct.len() {
        1 => vec![],
        2 => vec![distinct[0].0],
        k => {
            let n = values.len() as f64;
            let target = n / 3.0;
            // prefix[i] = number of values among the first i distinct levels
            let mut prefix = vec![0usize; k + 1];
            for (i, (_, c)) in distinct.iter().enumerate() {
                prefix[i + 1] = prefix[i] + c;
            }
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 1..k - 1 {
                for j in i + 1..k {
                    let sizes = [prefix[i], prefix[j] - prefix[i], prefix[k] - prefix[j]];
                    let dev = sizes
                        .iter()
                        .map(|&s| (s as f64 - target).abs())
                        .fold(0.0, f64::max);
                    if best.is_none_or(|(d, _, _)| dev < d) {
                        best = Some((dev, i, j));
                    }
                }
            }
            let (_, i, j) = best.expect("k >= 3 has at least one cut pair");
            vec![distinct[i - 1].0, distinct[j - 1].0]
        }
    };
    let edges = BinEdges(edges);
    let assignments = values.iter().map(|&v| edges.assign(v)).collect();
    Some(Tertiles {
        degenerate: edges.n_bins() < 3,
        edges,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force over every cut placement between sorted positions,
    /// keeping only those that do not split a run of equal values.
    fn oracle_sizes(values: &[u32]) -> (usize, usize, usize) {
        let mut s = values.to_vec();
        s.sort_unstable();
        let n = s.len();
        let target = n as f64 / 3.0;
        let mut best: Option<(f64, u32, u32, (usize, usize, usize))> = None;
        for a in 1..n {
            for b in a + 1..n {
                if s[a - 1] == s[a] || s[b - 1] == s[b] {
                    continue;
                }
                let sizes = (a, b - a, n - b);
                let dev = [sizes.0, sizes.1, sizes.2]
                    .iter()
                    .map(|&x| (x as f64 - target).abs())
                    .fold(0.0, f64::max);
                let key = (dev, s[a - 1], s[b - 1]);
                let better = match &best {
                    None => true,
                    Some((d, e1, e2, _)) => {
                        key.0 < *d || (key.0 == *d && (key.1, key.2) < (*e1, *e2))
                    }
                };
                if better {
                    best = Some((key.0, key.1, key.2, sizes));
                }
            }
        }
        best.expect("needs three distinct values").3
    }

    fn sizes(t: &Tertiles) -> Vec<usize> {
        let mut c = vec![0; t.edges.n_bins()];
        for &a in &t.assignments {
            c[a] += 1;
        }
        c
    }

    #[test]
    fn exact_tertiles() {
        let t = tertile_bin(&[1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        assert_eq!(t.edges, BinEdges(vec![3, 6]));
        assert_eq!(sizes(&t), vec![3, 3, 3]);
        assert!(!t.degenerate);
        assert_eq!(t.edges.labels(), vec!["<=3", "(3,6]", ">6"]);
    }

    #[test]
    fn ties_share_a_bin() {
        let values = [5, 5, 5, 5, 1, 9];
        let t = tertile_bin(&values).unwrap();
        // oracle: the only cut pair between distinct values gives (1, 4, 1)
        assert_eq!(oracle_sizes(&values), (1, 4, 1));
        assert_eq!(sizes(&t), vec![1, 4, 1]);
        assert_eq!(t.assignments, vec![1, 1, 1, 1, 0, 2]);
    }

    #[test]
    fn all_identical_is_degenerate() {
        let t = tertile_bin(&[4, 4, 4, 4]).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.edges.n_bins(), 1);
        assert_eq!(t.assignments, vec![0; 4]);
    }

    #[test]
    fn two_distinct_values_give_two_bins() {
        let t = tertile_bin(&[1, 1, 2, 2, 2]).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.edges, BinEdges(vec![1]));
        assert_eq!(t.assignments, vec![0, 0, 1, 1, 1]);
    }

    #[test]
    fn empty_input_has_no_bins() {
        assert!(tertile_bin(&[]).is_none());
    }

    proptest! {
        #[test]
        fn matches_enumeration_oracle(values in prop::collection::vec(0u32..12, 3..40)) {
            let t = tertile_bin(&values).unwrap();
            let mut d = values.clone();
            d.sort_unstable();
            d.dedup();
            prop_assume!(d.len() >= 3);
            let s = sizes(&t);
            prop_assert_eq!((s[0], s[1], s[2]), oracle_sizes(&values));
        }

        #[test]
        fn monotone_and_replayable(values in prop::collection::vec(0u32..50, 1..80)) {
            let t = tertile_bin(&values).unwrap();
            for (i, &a) in values.iter().enumerate() {
                prop_assert_eq!(t.edges.assign(a), t.assignments[i]);
                for (j, &b) in values.iter().enumerate() {
                    if a <= b {
                        prop_assert!(t.assignments[i] <= t.assignments[j]);
                    }
                }
            }
        }
    }
}
