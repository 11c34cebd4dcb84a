//! Small estimators shared by the simulators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// A Monte Carlo (or exact, with zero error) estimate of one correlation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    /// Mean of the per-run joint values.
    pub e_hat: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
    pub n: u64,
    /// Reference value for the same settings.
    pub e_analytic: f64,
}

impl CorrelationEstimate {
    /// `|e_hat - e_analytic|` in units of `stderr`; infinite when the
    /// estimate is exact but disagrees.
    pub fn z_score(&self) -> f64 {
        let d = (self.e_hat - self.e_analytic).abs();
        if d == 0.0 {
            0.0
        } else if self.stderr == 0.0 {
            f64::INFINITY
        } else {
            d / self.stderr
        }
    }
}

/// Running mean and variance.
///
/// The mean uses compensated summation. The spread uses Welford updates and
/// Chan's merge, so a run of identical values has exactly zero variance.
/// Partial accumulators are merged in a fixed order when driven by
/// [`crate::rng::chunked_fold`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAccumulator {
    sum: f64,
    compensation: f64,
    n: u64,
    running_mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.add_to_sum(x);
        self.n += 1;
        let delta = x - self.running_mean;
        self.running_mean += delta / self.n as f64;
        self.m2 += delta * (x - self.running_mean);
    }

    // Neumaier's variant of Kahan summation.
    fn add_to_sum(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(mut self, other: MeanAccumulator) -> MeanAccumulator {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        self.add_to_sum(other.sum);
        self.add_to_sum(other.compensation);
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.running_mean - self.running_mean;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.running_mean += delta * nb / n;
        self.n += other.n;
        self
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        // No spread at all: every value equals the running mean exactly.
        if self.m2 == 0.0 {
            return self.running_mean;
        }
        (self.sum + self.compensation) / self.n as f64
    }

    /// Standard error of the mean, `s / √n`.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        (self.m2.max(0.0) / (n - 1.0) / n).sqrt()
    }
}

/// Standard error of the mean of `n` values in {-1, +1} with mean `e`.
pub fn binary_mean_stderr(e: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    ((1.0 - e * e).max(0.0) / n as f64).sqrt()
}

/// Standard error of a proportion `p` estimated from `n` trials.
pub fn proportion_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    ((p * (1.0 - p)).max(0.0) / n as f64).sqrt()
}

/// Result of a chi-square test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Chi-square test of homogeneity for a `k × 2` table of binary counts
/// (one row per condition, columns are the two outcomes).
///
/// Returns `None` for fewer than two rows or an empty column.
pub fn chi_square_homogeneity(rows: &[[u64; 2]]) -> Option<ChiSquareTest> {
    if rows.len() < 2 {
        return None;
    }
    let col = [
        rows.iter().map(|r| r[0]).sum::<u64>(),
        rows.iter().map(|r| r[1]).sum::<u64>(),
    ];
    let total = (col[0] + col[1]) as f64;
    if col[0] == 0 || col[1] == 0 {
        return None;
    }
    let mut statistic = 0.0;
    for r in rows {
        let row_total = (r[0] + r[1]) as f64;
        for j in 0..2 {
            let expected = row_total * col[j] as f64 / total;
            if expected > 0.0 {
                let d = r[j] as f64 - expected;
                statistic += d * d / expected;
            }
        }
    }
    let dof = (rows.len() - 1) as u64;
    let dist = ChiSquared::new(dof as f64).ok()?;
    Some(ChiSquareTest {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_values_average_exactly() {
        let x = -0.8660254037844387;
        let mut acc = MeanAccumulator::default();
        for _ in 0..100_000 {
            acc.push(x);
        }
        assert_eq!(acc.mean(), x);
        assert_eq!(acc.stderr(), 0.0);
        let mut other = MeanAccumulator::default();
        other.push(x);
        assert_eq!(acc.merge(other).stderr(), 0.0);
    }

    #[test]
    fn merge_matches_sequential() {
        let mut a = MeanAccumulator::default();
        let mut b = MeanAccumulator::default();
        let mut all = MeanAccumulator::default();
        for i in 0..1000 {
            let x = (i as f64 * 0.37).sin();
            if i < 400 {
                a.push(x)
            } else {
                b.push(x)
            }
            all.push(x);
        }
        let m = a.merge(b);
        assert!((m.mean() - all.mean()).abs() < 1e-15);
        assert!((m.stderr() - all.stderr()).abs() < 1e-12);
        assert_eq!(m.count(), 1000);
    }

    #[test]
    fn chi_square_detects_difference() {
        let same = chi_square_homogeneity(&[[500, 500], [510, 490], [495, 505]]).unwrap();
        assert!(same.p_value > 0.5);
        let diff = chi_square_homogeneity(&[[500, 500], [700, 300]]).unwrap();
        assert!(diff.p_value < 1e-10);
        assert!(chi_square_homogeneity(&[[5, 5]]).is_none());
    }
}
