//! Paired two-sample statistics.

use statrs::distribution::{ContinuousCDF, Normal};

/// Result of a Wilcoxon signed-rank test on paired samples `x - y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedRank {
    /// Non-zero differences that entered the test.
    pub n: usize,
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Normal-approximation z score (tie-corrected, continuity-corrected).
    pub z: f64,
    /// One-sided p-value for the alternative "x tends to be smaller than y".
    pub p_less: f64,
    /// Two-sided p-value.
    pub p_two_sided: f64,
}

/// Average ranks (1-based) of `v`, ties sharing the mean of their positions.
/// Also returns the tie correction sum of `t^3 - t` over tie groups.
pub fn average_ranks(v: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Wilcoxon signed-rank test with the normal approximation. Zero
/// differences are dropped. Returns `None` when fewer than one non-zero
/// pair remains or the lengths differ.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Option<SignedRank> {
    if x.len() != y.len() {
        return None;
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return None;
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let normal = Normal::standard();
    let (z, p_less, p_two) = if var <= 0.0 {
        (0.0, 1.0, 1.0)
    } else {
        let sd = var.sqrt();
        let diff = w_plus - mean;
        let z = diff / sd;
        let z_less = (diff + 0.5) / sd;
        let z_two = (diff.abs() - 0.5).max(0.0) / sd;
        (z, normal.cdf(z_less), (2.0 * (1.0 - normal.cdf(z_two))).min(1.0))
    };
    Some(SignedRank {
        n,
        w_plus,
        z,
        p_less,
        p_two_sided: p_two,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        let (r, t) = average_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, 6.0);
    }

    #[test]
    fn textbook_example() {
        // Differences 1..=10 with two negatives of magnitude 2 and 5.
        let d = [1.0, -2.0, 3.0, 4.0, -5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let zeros = vec![0.0; d.len()];
        let r = wilcoxon_signed_rank(&d, &zeros).unwrap();
        assert_eq!(r.n, 10);
        assert_eq!(r.w_plus, 48.0);
        // mean 27.5, variance 96.25
        assert!((r.z - 20.5 / 96.25f64.sqrt()).abs() < 1e-12);
        assert!(r.p_two_sided < 0.05 && r.p_two_sided > 0.01);
        assert!(r.p_less > 0.95);
    }

    #[test]
    fn shifted_sample_is_detected() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() - 0.5).collect();
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() + 0.1 * (i % 3) as f64).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(r.p_less < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0]).is_none());
        assert!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0]).is_none());
    }
}
