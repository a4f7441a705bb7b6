//! Epsilon-binning of function values.
//!
//! Quantization merges values that are within `eps` of each other into bins
//! and replaces every member of a bin by the bin's arithmetic mean, taken over
//! the distinct values. Zero is never binned: zeros encode determinism (fixed
//! support), while binning encodes context-specific independence, and merging
//! the two would silently grow a function's support.
//!
//! Bins are intervals of the sorted distinct values. A bin is closed as soon
//! as the next value is more than `eps` above the bin's minimum, which yields
//! the minimum number of such intervals.

/// Mapping from each distinct positive input value to its bin mean.
pub struct QuantMap {
    pairs: Vec<(f64, f64)>, // (value, bin mean), sorted by value
}

impl QuantMap {
    pub fn apply(&self, v: f64) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        match self
            .pairs
            .binary_search_by(|(x, _)| x.partial_cmp(&v).unwrap())
        {
            Ok(i) => self.pairs[i].1,
            Err(_) => v,
        }
    }

    pub fn bin_count(&self) -> usize {
        let mut n = 0;
        let mut last = f64::NAN;
        for &(_, m) in &self.pairs {
            if m != last {
                n += 1;
                last = m;
            }
        }
        n
    }

    pub fn is_identity(&self) -> bool {
        self.pairs.iter().all(|&(v, m)| v == m)
    }
}

/// Build the greedy sweep binning for the distinct positive values of `values`.
pub fn quantize_values(values: &[f64], eps: f64) -> QuantMap {
    let mut distinct: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    let mut pairs = Vec::with_capacity(distinct.len());
    let mut start = 0;
    while start < distinct.len() {
        let mut end = start + 1;
        while end < distinct.len() && distinct[end] - distinct[start] <= eps {
            end += 1;
        }
        let mean = distinct[start..end].iter().sum::<f64>() / (end - start) as f64;
        for &v in &distinct[start..end] {
            pairs.push((v, mean));
        }
        start = end;
    }
    QuantMap { pairs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_eps_is_identity() {
        let q = quantize_values(&[0.3, 0.1, 0.3, 0.7], 0.0);
        assert!(q.is_identity());
        assert_eq!(q.bin_count(), 3);
    }

    #[test]
    fn spec_sweep_example() {
        // {0.10, 0.11, 0.50} at eps 0.05: first two merge to 0.105.
        let q = quantize_values(&[0.10, 0.11, 0.50], 0.05);
        let merged = (0.10f64 + 0.11) / 2.0;
        assert_eq!(q.apply(0.10), merged);
        assert_eq!(q.apply(0.11), merged);
        assert_eq!(q.apply(0.50), 0.50);
        assert_eq!(q.bin_count(), 2);
    }

    #[test]
    fn single_bin_when_eps_covers_range() {
        let q = quantize_values(&[1.0, 2.0, 3.0], 10.0);
        assert_eq!(q.bin_count(), 1);
        assert_eq!(q.apply(1.0), 2.0);
        assert_eq!(q.apply(3.0), 2.0);
    }

    #[test]
    fn zero_never_binned() {
        let q = quantize_values(&[0.0, 1e-9, 2e-9], 1.0);
        assert_eq!(q.apply(0.0), 0.0);
        assert!(q.apply(1e-9) > 0.0);
    }

    /// Exhaustive minimum over interval partitions of the sorted values.
    fn min_bins_exhaustive(sorted: &[f64], eps: f64) -> usize {
        let n = sorted.len();
        if n == 0 {
            return 0;
        }
        // dp[i] = min bins for the prefix of length i
        let mut dp = vec![usize::MAX; n + 1];
        dp[0] = 0;
        for i in 0..n {
            for j in i + 1..=n {
                if sorted[j - 1] - sorted[i] <= eps {
                    dp[j] = dp[j].min(dp[i].saturating_add(1));
                } else {
                    break;
                }
            }
        }
        dp[n]
    }

    #[test]
    fn greedy_bin_count_is_minimal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..400 {
            let n = rng.gen_range(1..=8);
            let mut vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            let eps = rng.gen_range(0.0..0.5);
            let q = quantize_values(&vals, eps);
            assert_eq!(q.bin_count(), min_bins_exhaustive(&vals, eps));
        }
    }
}
