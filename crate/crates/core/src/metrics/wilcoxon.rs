//! Wilcoxon rank-sum (Mann-Whitney U) and signed-rank tests, normal
//! approximation with tie-corrected variance and a 0.5 continuity correction.
//!
//! Convention for the two-sided p-value: `z = (|U - mu| - 0.5) / sigma`,
//! `p = min(1, 2 * (1 - Phi(z)))`, and `p = 1` when `sigma = 0` (every value
//! tied). This matches the usual asymptotic `mannwhitneyu` with continuity
//! correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    /// Rank sum of the first sample (midranks for ties).
    pub rank_sum: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedRankTest {
    /// Sum of ranks of positive differences.
    pub t_plus: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub z: f64,
    pub p_value: f64,
}

fn two_sided(deviation: f64, variance: f64) -> (f64, f64) {
    if variance <= 0.0 {
        return (0.0, 1.0);
    }
    let z = (deviation.abs() - 0.5) / variance.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0);
    (z, p)
}

/// Midranks (1-based) of `values`, plus the tie term `sum(t^3 - t)`.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

fn to_f64<T: Scalar>(xs: &[T]) -> Result<Vec<f64>> {
    let out: Vec<f64> = xs.iter().map(|x| x.to_f64_lossy()).collect();
    if out.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("sample contains NaN".into()));
    }
    Ok(out)
}

/// Unpaired two-sided rank-sum test of `a` against `b`.
pub fn wilcoxon_rank_sum<T: Scalar>(a: &[T], b: &[T]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("rank-sum test needs two non-empty samples".into()));
    }
    let mut pooled = to_f64(a)?;
    pooled.extend(to_f64(b)?);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let (ranks, ties) = midranks(&pooled);
    let rank_sum: f64 = ranks[..a.len()].iter().sum();
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let (z, p_value) = two_sided(u - mean, variance);
    Ok(RankSumTest {
        u,
        rank_sum,
        z,
        p_value,
    })
}

/// Paired two-sided signed-rank test on `treated - baseline`. Zero
/// differences are dropped.
pub fn wilcoxon_signed_rank<T: Scalar>(baseline: &[T], treated: &[T]) -> Result<SignedRankTest> {
    if baseline.len() != treated.len() {
        return Err(Error::InvalidInput("signed-rank test needs equal-length samples".into()));
    }
    let a = to_f64(baseline)?;
    let b = to_f64(treated)?;
    let diffs: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - x).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(SignedRankTest {
            t_plus: 0.0,
            n,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let t_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let (z, p_value) = two_sided(t_plus - mean, variance);
    Ok(SignedRankTest {
        t_plus,
        n,
        z,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_samples() {
        let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.u, 0.0);
        assert_eq!(t.rank_sum, 6.0);
        // mu = 4.5, sigma^2 = 9*7/12 = 5.25
        let z = (4.5 - 0.5) / 5.25f64.sqrt();
        assert!((t.z - z).abs() < 1e-15);
        assert!((t.p_value - 0.080_856_3).abs() < 1e-6, "{}", t.p_value);
    }

    #[test]
    fn identical_samples_give_one() {
        let a = [1.0, 2.0, 2.0, 7.0];
        let t = wilcoxon_rank_sum(&a, &a).unwrap();
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.u, 8.0);
    }

    #[test]
    fn all_tied() {
        let t = wilcoxon_rank_sum(&[3.0, 3.0], &[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn empty_rejected() {
        assert!(wilcoxon_rank_sum::<f64>(&[], &[1.0]).is_err());
        assert!(wilcoxon_rank_sum(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn signed_rank_basic() {
        let t = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert_eq!(t.n, 4);
        assert_eq!(t.t_plus, 10.0);
        let none = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(none.p_value, 1.0);
    }

    #[test]
    fn midranks_with_ties() {
        let (r, ties) = midranks(&[2.0, 1.0, 2.0, 3.0]);
        assert_eq!(r, vec![2.5, 1.0, 2.5, 4.0]);
        assert_eq!(ties, 6.0);
    }
}
