//! Small statistics toolkit: streaming moments, proportions with Wilson
//! intervals, and weighted least squares.

use alloc::vec::Vec;

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub reps: u64,
}

impl Estimate {
    /// `|value - target| <= k * se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        libm::fabs(self.value - target) <= k * self.se
    }

    /// Deviation from `target` in units of the standard error.
    pub fn z(&self, target: f64) -> f64 {
        if self.se > 0.0 {
            (self.value - target) / self.se
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Welford running mean and variance. Merging is exact in real arithmetic;
/// in floating point the result depends on merge order, so callers merge in
/// a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n < 2 {
            0.0
        } else {
            libm::sqrt(self.variance() / self.n as f64)
        };
        Estimate {
            value: self.mean,
            se,
            reps: self.n,
        }
    }
}

/// Successes out of trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        Self { successes, trials }
    }

    pub fn record(&mut self, success: bool) {
        self.trials += 1;
        self.successes += success as u64;
    }

    pub fn merge(&mut self, other: &Proportion) {
        self.successes += other.successes;
        self.trials += other.trials;
    }

    pub fn p(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub fn se(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.p();
        libm::sqrt(p * (1.0 - p) / self.trials as f64)
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.p(),
            se: self.se(),
            reps: self.trials,
        }
    }

    /// Wilson score interval at normal quantile `z`.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        if self.trials == 0 {
            return (0.0, 1.0);
        }
        let n = self.trials as f64;
        let p = self.p();
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }
}

/// Result of a weighted straight-line fit `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
}

/// Weighted least squares on `(x, y, w)` triples. With inverse-variance
/// weights, `slope_se` is the model-based standard error of the slope.
pub fn weighted_line_fit(rows: &[(f64, f64, f64)]) -> Option<LineFit> {
    if rows.len() < 2 {
        return None;
    }
    let sw: f64 = rows.iter().map(|r| r.2).sum();
    if !(sw > 0.0) {
        return None;
    }
    let mx = rows.iter().map(|r| r.2 * r.0).sum::<f64>() / sw;
    let my = rows.iter().map(|r| r.2 * r.1).sum::<f64>() / sw;
    let sxx: f64 = rows.iter().map(|r| r.2 * (r.0 - mx) * (r.0 - mx)).sum();
    let sxy: f64 = rows.iter().map(|r| r.2 * (r.0 - mx) * (r.1 - my)).sum();
    let syy: f64 = rows.iter().map(|r| r.2 * (r.1 - my) * (r.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Some(LineFit {
        slope,
        intercept,
        slope_se: libm::sqrt(1.0 / sxx),
        r_squared,
    })
}

/// Pearson chi-square statistic of observed counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum()
}

/// Upper critical value of the chi-square distribution with `dof` degrees of
/// freedom at significance `1e-3`, via the Wilson–Hilferty approximation.
pub fn chi_square_critical_999(dof: usize) -> f64 {
    let k = dof as f64;
    let z = 3.090_232;
    let t = 1.0 - 2.0 / (9.0 * k) + z * libm::sqrt(2.0 / (9.0 * k));
    k * t * t * t
}

/// Sample mean and variance of a slice.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let mut m = Moments::new();
    for &x in xs {
        m.push(x);
    }
    (m.mean(), m.variance())
}

/// Dispersion index (variance / mean) of integer counts with a delta-method
/// standard error that is valid under the Poisson null.
pub fn dispersion_index(counts: &[u64]) -> Estimate {
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, var) = mean_var(&xs);
    let n = counts.len() as f64;
    let value = if mean > 0.0 { var / mean } else { f64::NAN };
    // Under Poisson(λ): Var(s²/x̄) ≈ 2/(n-1).
    Estimate {
        value,
        se: libm::sqrt(2.0 / (n - 1.0)),
        reps: counts.len() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.5).collect();
        let mut all = Moments::new();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::new();
        let mut b = Moments::new();
        xs[..40].iter().for_each(|&x| a.push(x));
        xs[40..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), all.count());
        assert!((a.mean() - all.mean()).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn exact_line_is_recovered() {
        let rows: Vec<(f64, f64, f64)> = (1..6)
            .map(|i| {
                let x = i as f64;
                (x, 2.0 - 1.5 * x, 1.0)
            })
            .collect();
        let fit = weighted_line_fit(&rows).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let p = Proportion::new(3, 100);
        let (lo, hi) = p.wilson(1.96);
        assert!(lo < 0.03 && 0.03 < hi);
        let zero = Proportion::new(0, 50);
        let (lo, hi) = zero.wilson(1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
    }

    #[test]
    fn chi_square_critical_is_sane() {
        // Tabulated 0.999 quantile for 9 dof is 27.877.
        assert!((chi_square_critical_999(9) - 27.877).abs() < 0.3);
    }
}
