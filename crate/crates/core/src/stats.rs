//! Proportion confidence intervals and paired-gap tests.

/// Two-sided 99% normal quantile (Phi^-1(0.995)).
pub const Z_99_TWO_SIDED: f64 = 2.5758293035489004;

/// One-sided 99% normal quantile (Phi^-1(0.99)).
pub const Z_99_ONE_SIDED: f64 = 2.3263478740408408;

/// Wilson score interval for a proportion at confidence quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // The exact Wilson endpoints at 0 or n successes are 0 and 1; rounding
    // in `center - half` can cross them by one ulp.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Wilson 99% interval.
pub fn wilson99(successes: u64, trials: u64) -> (f64, f64) {
    wilson(successes, trials, Z_99_TWO_SIDED)
}

/// Half-width of the Wilson 99% interval.
pub fn wilson99_half_width(successes: u64, trials: u64) -> f64 {
    let (lo, hi) = wilson99(successes, trials);
    (hi - lo) / 2.0
}

/// Paired comparison of two binary outcomes over the same units.
#[derive(Debug, Clone, Copy)]
pub struct PairedGap {
    /// Mean of `a_i - b_i`.
    pub gap: f64,
    /// Standard error of the mean gap.
    pub se: f64,
    pub n: u64,
}

/// Gap statistics for paired Bernoulli outcomes: `a_only` units where only
/// the first selector succeeded, `b_only` where only the second did.
pub fn paired_gap(a_only: u64, b_only: u64, n: u64) -> PairedGap {
    let nf = n as f64;
    let gap = (a_only as f64 - b_only as f64) / nf;
    let var = ((a_only + b_only) as f64 / nf - gap * gap).max(0.0);
    PairedGap { gap, se: (var / nf).sqrt(), n }
}

impl PairedGap {
    /// True when the gap is positive at one-sided 99% confidence.
    pub fn significantly_positive(&self) -> bool {
        self.gap > Z_99_ONE_SIDED * self.se
    }
}
