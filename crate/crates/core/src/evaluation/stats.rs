use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size evaluated with the exact null distribution.
pub const EXACT_MAX_N: usize = 25;
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
    /// Every difference was zero; p is reported as 1.
    AllZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of (mid)ranks of positive differences.
    pub statistic: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// One-sided p-value for the alternative "xs tend to exceed ys".
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Midranks (1-based) of the values, ties sharing the average rank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// One-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. Up to [`EXACT_MAX_N`] remaining pairs the
/// p-value comes from the exact null distribution of the statistic (ties
/// included, by enumerating sums of doubled midranks); beyond that a
/// tie-corrected normal approximation with continuity correction is used.
pub fn wilcoxon_signed_rank(xs: &[f64], ys: &[f64]) -> Result<WilcoxonResult> {
    if xs.len() != ys.len() {
        return Err(Error::Data("paired samples must have equal length".into()));
    }
    let diffs: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 && !xs.is_empty() {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            n: 0,
            p_value: 1.0,
            method: WilcoxonMethod::AllZero,
        });
    }
    if n < MIN_PAIRS {
        return Err(Error::TooFewPairs(n));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let statistic: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    if n <= EXACT_MAX_N {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        // counts[s] = number of sign assignments with doubled W+ = s
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let observed = (2.0 * statistic).round() as usize;
        let upper: f64 = counts[observed..].iter().sum();
        let p_value = upper / 2f64.powi(n as i32);
        return Ok(WilcoxonResult {
            statistic,
            n,
            p_value: p_value.min(1.0),
            method: WilcoxonMethod::Exact,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = (statistic - mean - 0.5) / var.sqrt();
        1.0 - Normal::standard().cdf(z)
    };
    Ok(WilcoxonResult {
        statistic,
        n,
        p_value,
        method: WilcoxonMethod::NormalApprox,
    })
}

/// Benjamini-Hochberg adjusted p-values, returned in input order.
pub fn benjamini_hochberg(pvalues: &[f64]) -> Vec<f64> {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (pos, &i) in order.iter().enumerate().rev() {
        let candidate = pvalues[i] * m as f64 / (pos + 1) as f64;
        running = running.min(candidate);
        adjusted[i] = running.min(1.0);
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Full 2^n sign enumeration of the midrank statistic.
    fn enumerate_p(xs: &[f64], ys: &[f64]) -> f64 {
        let diffs: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
        let ranks = midranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
        let observed: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
        let n = diffs.len();
        let mut at_least = 0u64;
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if w >= observed - 1e-9 {
                at_least += 1;
            }
        }
        at_least as f64 / (1u64 << n) as f64
    }

    #[test]
    fn all_positive_differences() {
        let xs = [2.0, 3.0, 4.5, 5.0, 7.0, 9.0];
        let ys = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let r = wilcoxon_signed_rank(&xs, &ys).unwrap();
        assert_eq!(r.p_value, 1.0 / 64.0);
        let uniform = wilcoxon_signed_rank(&[1.0; 6], &[0.0; 6]).unwrap();
        assert_eq!(uniform.p_value, 1.0 / 64.0);
        assert_eq!(uniform.method, WilcoxonMethod::Exact);
    }

    #[test]
    fn degenerate_inputs() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.p_value, r.method), (1.0, WilcoxonMethod::AllZero));
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]),
            Err(Error::TooFewPairs(4))
        ));
        assert!(wilcoxon_signed_rank(&[1.0], &[]).is_err());
    }

    #[test]
    fn exact_matches_enumeration_up_to_twelve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let n = 5 + trial % 8;
            // coarse values force ties and zero differences
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 * 0.5).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 * 0.5).collect();
            match wilcoxon_signed_rank(&xs, &ys) {
                Ok(r) if r.method == WilcoxonMethod::Exact => {
                    assert!((r.p_value - enumerate_p(&xs, &ys)).abs() < 1e-12, "{xs:?} {ys:?}");
                }
                Ok(_) | Err(Error::TooFewPairs(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn normal_approximation_for_large_samples() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 + if i % 3 == 0 { -0.5 } else { 1.0 }).collect();
        let ys: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&xs, &ys).unwrap();
        assert_eq!(r.method, WilcoxonMethod::NormalApprox);
        assert!(r.p_value > 0.0 && r.p_value < 0.05);
        let flipped = wilcoxon_signed_rank(&ys, &xs).unwrap();
        assert!(flipped.p_value > 0.9);
    }

    #[test]
    fn bh_examples() {
        assert_eq!(benjamini_hochberg(&[0.01, 0.02, 0.03]), vec![0.03, 0.03, 0.03]);
        let adj = benjamini_hochberg(&[0.04, 0.001, 0.5]);
        assert!((adj[1] - 0.003).abs() < 1e-15);
        assert!((adj[0] - 0.06).abs() < 1e-15);
        assert_eq!(adj[2], 0.5);
        assert!(benjamini_hochberg(&[]).is_empty());
        assert_eq!(benjamini_hochberg(&[0.9, 0.8]), vec![0.9, 0.9]);
    }
}
