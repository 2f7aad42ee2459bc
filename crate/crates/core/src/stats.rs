//! Interval estimates and seed derivation for Monte Carlo trials.
//!
//! Proportions use Wilson score intervals, means use Student-t intervals.
//! All intervals are two-sided at 95%.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

const Z95: f64 = 1.959_963_984_540_054;

/// A point estimate with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64, n: usize) -> Self {
        Self {
            mean: value,
            lo: value,
            hi: value,
            n,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Containment with the interval widened by `slack` on both sides, for
    /// quantities that are exactly zero in exact arithmetic.
    pub fn contains_within(&self, x: f64, slack: f64) -> bool {
        self.lo - slack <= x && x <= self.hi + slack
    }

    pub fn excludes_zero(&self) -> bool {
        !self.contains(0.0)
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.5} [{:.5}, {:.5}] (n={})", self.mean, self.lo, self.hi, self.n)
    }
}

fn t_quantile(df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(Z95)
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64) -> Estimate {
    assert!(n > 0 && successes <= n, "wilson_interval needs 0 <= successes <= n, n > 0");
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Estimate {
        mean: p,
        lo: if successes == 0 { 0.0 } else { (centre - half).max(0.0) },
        hi: if successes == n { 1.0 } else { (centre + half).min(1.0) },
        n: n as usize,
    }
}

/// Sample mean with a t-interval. A single sample gives a zero-width interval.
pub fn mean_interval(samples: &[f64]) -> Estimate {
    assert!(!samples.is_empty(), "mean_interval needs samples");
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Estimate::exact(mean, n);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    from_mean_var(mean, var, n)
}

fn from_mean_var(mean: f64, var: f64, n: usize) -> Estimate {
    if !(var > 0.0) || n < 2 {
        return Estimate::exact(mean, n);
    }
    let half = t_quantile((n - 1) as f64) * (var / n as f64).sqrt();
    Estimate {
        mean,
        lo: mean - half,
        hi: mean + half,
        n,
    }
}

/// Difference of means `a - b` of two independent samples (Welch).
pub fn welch_difference(a: &[f64], b: &[f64]) -> Estimate {
    let ea = mean_interval(a);
    let eb = mean_interval(b);
    let var = |s: &[f64], m: f64| {
        if s.len() < 2 {
            0.0
        } else {
            s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s.len() - 1) as f64
        }
    };
    let (va, vb) = (var(a, ea.mean) / a.len() as f64, var(b, eb.mean) / b.len() as f64);
    let mean = ea.mean - eb.mean;
    let se2 = va + vb;
    if !(se2 > 0.0) {
        return Estimate::exact(mean, a.len().min(b.len()));
    }
    let df = se2 * se2
        / (va * va / (a.len().max(2) - 1) as f64 + vb * vb / (b.len().max(2) - 1) as f64);
    let half = t_quantile(df) * se2.sqrt();
    Estimate {
        mean,
        lo: mean - half,
        hi: mean + half,
        n: a.len().min(b.len()),
    }
}

/// Paired difference `a[i] - b[i]`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Estimate {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_interval(&diffs)
}

/// Seed for trial `index` of a run seeded with `base`. Splitmix64 finalizer
/// over the pair, so neighbouring indices get unrelated streams.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sufficient statistics for a mean, in 64-bit fixed point so that merging
/// is exactly associative and commutative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    sum: i128,
    sumsq: i128,
}

const SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

fn fixed(x: f64) -> i128 {
    (x * SCALE).round() as i128
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        assert!(x.is_finite() && x.abs() < 1e9, "moment sample out of range: {x}");
        self.n += 1;
        self.sum += fixed(x);
        self.sumsq += fixed(x * x);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        Moments {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sumsq: self.sumsq + other.sumsq,
        }
    }

    pub fn estimate(&self) -> Option<Estimate> {
        if self.n == 0 {
            return None;
        }
        let n = self.n as f64;
        let mean = self.sum as f64 / SCALE / n;
        let var = (self.sumsq as f64 / SCALE - n * mean * mean) / (n - 1.0).max(1.0);
        Some(from_mean_var(mean, var.max(0.0), self.n as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wilson_edges() {
        let all = wilson_interval(100, 100);
        assert_eq!(all.mean, 1.0);
        assert_eq!(all.hi, 1.0);
        let none = wilson_interval(0, 100);
        assert_eq!(none.mean, 0.0);
        assert_eq!(none.lo, 0.0);
        // z^2 / (n + z^2) at n = 100
        let expected = Z95 * Z95 / (100.0 + Z95 * Z95);
        assert!((none.hi - expected).abs() < 1e-12);
        assert!(none.hi < 0.0371 && none.hi > 0.036);
    }

    #[test]
    fn mean_interval_cases() {
        let e = mean_interval(&[0.0; 10]);
        assert_eq!((e.lo, e.hi), (0.0, 0.0));
        let one = mean_interval(&[0.4]);
        assert_eq!((one.lo, one.mean, one.hi), (0.4, 0.4, 0.4));
        // n=4, mean 2.5, sd 1.29099, t_{0.975,3} = 3.18245
        let e = mean_interval(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.hi - e.mean - 3.182_446_305 * (5.0f64 / 12.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn seeds_are_spread() {
        let a: Vec<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 1000);
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
    }

    proptest! {
        #[test]
        fn moments_merge_exactly(xs in prop::collection::vec(-1.0f64..1.0, 0..40), cut in 0usize..40) {
            let cut = cut.min(xs.len());
            let mut whole = Moments::default();
            xs.iter().for_each(|&x| whole.push(x));
            let (mut a, mut b) = (Moments::default(), Moments::default());
            xs[..cut].iter().for_each(|&x| a.push(x));
            xs[cut..].iter().for_each(|&x| b.push(x));
            prop_assert_eq!(a.merge(&b), whole);
            prop_assert_eq!(b.merge(&a), whole);
            if let Some(e) = whole.estimate() {
                let direct = mean_interval(&xs);
                prop_assert!((e.mean - direct.mean).abs() < 1e-12);
                prop_assert!(e.contains(e.mean));
            }
        }

        #[test]
        fn intervals_contain_estimate(k in 0u64..200, extra in 1u64..200) {
            let e = wilson_interval(k, k + extra);
            prop_assert!(e.lo <= e.mean && e.mean <= e.hi);
            prop_assert!(e.lo >= 0.0 && e.hi <= 1.0);
        }
    }
}
