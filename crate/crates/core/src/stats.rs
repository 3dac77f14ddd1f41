//! Small statistical accumulators shared by the Monte Carlo drivers.

/// Running first and second moments of a scalar sample.
///
/// Accumulates `(count, sum, sum of squares)`. Merging two accumulators gives
/// the exact same state as accumulating the concatenated samples, which the
/// parallel drivers rely on for deterministic chunked reductions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    /// Number of observations.
    pub count: u64,
    /// Sum of observations.
    pub sum: f64,
    /// Sum of squared observations.
    pub sum_sq: f64,
}

impl RunningStats {
    /// Empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Absorb one observation.
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    /// Combine with another accumulator (exact, order-sensitive only through
    /// floating-point addition order; callers fix the merge order).
    pub fn merge(&mut self, other: &RunningStats) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Sample mean. Zero for an empty accumulator.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Unbiased sample variance (denominator `count - 1`), clamped at zero to
    /// absorb cancellation when all observations coincide.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        var.max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Two-sided normal-approximation confidence interval for a mean.
///
/// `z` is the standard-normal quantile (1.96 for 95% coverage).
pub fn normal_ci(mean: f64, std_error: f64, z: f64) -> (f64, f64) {
    (mean - z * std_error, mean + z * std_error)
}

/// 95% quantile constant used throughout the reports.
pub const Z_95: f64 = 1.96;

/// Wilson score interval for a binomial proportion with `successes` out of
/// `trials`, at normal quantile `z`.
///
/// Behaves sensibly at the boundary (never leaves `[0, 1]`, nonzero width
/// even when `successes` is 0 or `trials`).
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One-sample Kolmogorov–Smirnov statistic against a reference CDF.
///
/// Returns `sup_x |F_n(x) - F(x)|`. The input sample is copied and sorted.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample value"));
    let n = xs.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        sup = sup.max((f - lo).abs()).max((hi - f).abs());
    }
    sup
}
