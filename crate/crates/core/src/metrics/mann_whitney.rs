//! Two-sided Mann-Whitney U test.
//!
//! U is computed from midranks of the pooled sample. The p-value comes
//! from one of three routes:
//!
//! * pooled size `<= 12`: the permutation distribution of U over every
//!   split of the observed midranks (exact, also with ties);
//! * no ties and `n1 * n2 <= 400`: the exact null distribution of U from
//!   the standard counting recurrence;
//! * otherwise: normal approximation with tie-corrected variance and a
//!   0.5 continuity correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{midranks, MetricsError};

pub const EXACT_ENUMERATION_MAX_N: usize = 12;
pub const EXACT_DISTRIBUTION_MAX_PRODUCT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    ExactEnumeration,
    ExactDistribution,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// U for the first sample: pairs with `a > b`, ties counting one half.
    pub u_statistic: f64,
    pub z: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub tie_corrected: bool,
    pub method: PValueMethod,
}

struct Ranked {
    ranks: Vec<f64>,
    u: f64,
    tie_term: f64,
    n1: usize,
    n2: usize,
}

fn rank(a: &[f64], b: &[f64]) -> Ranked {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let n1 = a.len();
    let r1: f64 = ranks[..n1].iter().sum();
    Ranked {
        u: r1 - (n1 * (n1 + 1)) as f64 / 2.0,
        ranks,
        tie_term,
        n1,
        n2: b.len(),
    }
}

/// Runs the test, choosing the p-value route automatically.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<RankTestResult, MetricsError> {
    check(a, b)?;
    let r = rank(a, b);
    let method = if r.n1 + r.n2 <= EXACT_ENUMERATION_MAX_N {
        PValueMethod::ExactEnumeration
    } else if r.tie_term == 0.0 && r.n1 * r.n2 <= EXACT_DISTRIBUTION_MAX_PRODUCT {
        PValueMethod::ExactDistribution
    } else {
        PValueMethod::NormalApproximation
    };
    Ok(finish(r, method))
}

/// Runs the test with a fixed p-value route. Exact enumeration is refused
/// above 20 pooled values; the exact distribution requires tie-free data.
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: PValueMethod) -> Result<RankTestResult, MetricsError> {
    check(a, b)?;
    let r = rank(a, b);
    match method {
        PValueMethod::ExactEnumeration if r.n1 + r.n2 > 20 => {
            Err(MetricsError::Unsupported("exact enumeration limited to 20 pooled values"))
        }
        PValueMethod::ExactDistribution if r.tie_term != 0.0 => {
            Err(MetricsError::Unsupported("exact U distribution requires tie-free samples"))
        }
        _ => Ok(finish(r, method)),
    }
}

fn check(a: &[f64], b: &[f64]) -> Result<(), MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(MetricsError::NonFinite);
    }
    Ok(())
}

fn finish(r: Ranked, method: PValueMethod) -> RankTestResult {
    let (n1, n2) = (r.n1 as f64, r.n2 as f64);
    let n = n1 + n2;
    let mean = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - r.tie_term / (n * (n - 1.0)));
    let sd = var.max(0.0).sqrt();
    let diff = r.u - mean;
    let z = if sd > 0.0 {
        diff.signum() * (diff.abs() - 0.5).max(0.0) / sd
    } else {
        0.0
    };
    let p_value = match method {
        PValueMethod::NormalApproximation => {
            if sd > 0.0 {
                let normal = Normal::standard();
                (2.0 * normal.sf(z.abs())).min(1.0)
            } else {
                1.0
            }
        }
        PValueMethod::ExactEnumeration => exact_enumeration(&r.ranks, r.n1, r.u),
        PValueMethod::ExactDistribution => exact_distribution(r.n1, r.n2, r.u),
    };
    RankTestResult {
        u_statistic: r.u,
        z,
        p_value: p_value.clamp(0.0, 1.0),
        n1: r.n1,
        n2: r.n2,
        tie_corrected: r.tie_term > 0.0 && method == PValueMethod::NormalApproximation,
        method,
    }
}

/// Share of all `C(n, n1)` assignments of the pooled midranks to the first
/// group whose U is at least as far from its mean as the observed one.
fn exact_enumeration(ranks: &[f64], n1: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    let mean = (n1 * (n - n1)) as f64 / 2.0;
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let observed = (u_obs - mean).abs() - 1e-9;
    let (mut extreme, mut total) = (0u64, 0u64);
    let mut combo: Vec<usize> = (0..n1).collect();
    loop {
        let u = combo.iter().map(|&i| ranks[i]).sum::<f64>() - offset;
        total += 1;
        if (u - mean).abs() >= observed {
            extreme += 1;
        }
        // next lexicographic combination
        let mut i = n1;
        loop {
            if i == 0 {
                return extreme as f64 / total as f64;
            }
            i -= 1;
            if combo[i] < n - n1 + i {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..n1 {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Exact two-sided p from the null frequency of U without ties:
/// `f(m, k, u) = f(m - 1, k, u - k) + f(m, k - 1, u)`.
fn exact_distribution(n1: usize, n2: usize, u_obs: f64) -> f64 {
    let max_u = n1 * n2;
    // table[k][u] holds counts for the current m and every k <= n2
    let mut prev: Vec<Vec<f64>> = (0..=n2)
        .map(|_| {
            let mut v = vec![0.0; max_u + 1];
            v[0] = 1.0;
            v
        })
        .collect();
    for _m in 1..=n1 {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n2 + 1];
        cur[0][0] = 1.0;
        for k in 1..=n2 {
            for u in 0..=max_u {
                let from_m = if u >= k { prev[k][u - k] } else { 0.0 };
                cur[k][u] = from_m + cur[k - 1][u];
            }
        }
        prev = cur;
    }
    let freq = &prev[n2];
    let total: f64 = freq.iter().sum();
    let mean = max_u as f64 / 2.0;
    let observed = (u_obs - mean).abs() - 1e-9;
    let extreme: f64 = freq
        .iter()
        .enumerate()
        .filter(|(u, _)| (*u as f64 - mean).abs() >= observed)
        .map(|(_, c)| c)
        .sum();
    extreme / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force oracle: pairwise comparison for U, then every subset of
    /// the pooled values for the null distribution.
    fn oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
        let u_of = |x: &[f64], y: &[f64]| -> f64 {
            x.iter()
                .map(|&xi| {
                    y.iter()
                        .map(|&yj| if xi > yj { 1.0 } else if xi == yj { 0.5 } else { 0.0 })
                        .sum::<f64>()
                })
                .sum()
        };
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let n = pooled.len();
        let u_obs = u_of(a, b);
        let mean = (a.len() * b.len()) as f64 / 2.0;
        let (mut hit, mut total) = (0, 0);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != a.len() {
                continue;
            }
            let (x, y): (Vec<f64>, Vec<f64>) = {
                let mut x = Vec::new();
                let mut y = Vec::new();
                for (i, &v) in pooled.iter().enumerate() {
                    if mask >> i & 1 == 1 { x.push(v) } else { y.push(v) }
                }
                (x, y)
            };
            total += 1;
            if (u_of(&x, &y) - mean).abs() >= (u_obs - mean).abs() - 1e-9 {
                hit += 1;
            }
        }
        (u_obs, hit as f64 / total as f64)
    }

    #[test]
    fn fully_separated_three_vs_three() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.method, PValueMethod::ExactEnumeration);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        let mirror = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(mirror.u_statistic, 9.0);
        assert!((mirror.p_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_constant_samples() {
        let r = mann_whitney_u(&[5.0; 3], &[5.0; 3]).unwrap();
        assert_eq!(r.u_statistic, 4.5);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let normal = mann_whitney_u_with(&[5.0; 3], &[5.0; 3], PValueMethod::NormalApproximation).unwrap();
        assert_eq!(normal.p_value, 1.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(mann_whitney_u(&[], &[1.0]), Err(MetricsError::EmptySample)));
    }

    #[test]
    fn exact_distribution_matches_enumeration() {
        let a = [1.0, 4.0, 6.0, 9.0, 10.0, 13.0];
        let b = [2.0, 3.0, 5.0, 7.0, 8.0, 11.0, 12.0];
        let e = mann_whitney_u_with(&a, &b, PValueMethod::ExactEnumeration).unwrap();
        let d = mann_whitney_u_with(&a, &b, PValueMethod::ExactDistribution).unwrap();
        assert!((e.p_value - d.p_value).abs() < 1e-12);
        assert_eq!(mann_whitney_u(&a, &b).unwrap().method, PValueMethod::ExactDistribution);
    }

    #[test]
    fn large_tied_samples_use_corrected_normal() {
        let a: Vec<f64> = (0..30).map(|i| (i % 4) as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| (i % 5) as f64).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, PValueMethod::NormalApproximation);
        assert!(r.tie_corrected);
    }

    proptest! {
        #[test]
        fn agrees_with_oracle_small(
            a in prop::collection::vec(0u8..6, 1..6),
            b in prop::collection::vec(0u8..6, 1..6),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = mann_whitney_u(&a, &b).unwrap();
            let (u, p) = oracle(&a, &b);
            prop_assert_eq!(r.u_statistic, u);
            prop_assert!((r.p_value - p).abs() < 1e-12);
        }

        #[test]
        fn u_statistics_are_complementary(
            a in prop::collection::vec(-50i32..50, 1..40),
            b in prop::collection::vec(-50i32..50, 1..40),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b).unwrap();
            let ba = mann_whitney_u(&b, &a).unwrap();
            prop_assert_eq!(ab.u_statistic + ba.u_statistic, (a.len() * b.len()) as f64);
            prop_assert!(ab.u_statistic >= 0.0 && ab.u_statistic <= (a.len() * b.len()) as f64);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }

        #[test]
        fn exact_and_normal_close_at_six_by_six(perm in Just((1..=12).map(f64::from).collect::<Vec<_>>()).prop_shuffle()) {
            let (a, b) = perm.split_at(6);
            let e = mann_whitney_u_with(a, b, PValueMethod::ExactEnumeration).unwrap();
            let n = mann_whitney_u_with(a, b, PValueMethod::NormalApproximation).unwrap();
            prop_assert!((e.p_value - n.p_value).abs() < 0.02, "exact {} normal {}", e.p_value, n.p_value);
        }
    }
}
