//! Goodness-of-fit statistics, reference distributions and the validation
//! suites behind `levy-exit validate` and the acceptance tests.
//!
//! Nothing in here is called by the samplers themselves.

pub mod oracles;
pub mod suites;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Number of seeds in the majority policy.
pub const MAJORITY_SEEDS: usize = 3;

/// Kolmogorov 0.999 quantile used as the `sqrt(n) D` threshold.
pub const KS_SQRT_N_THRESHOLD: f64 = 1.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GofTest {
    Ks,
    Chi2,
    Moment,
    Frequency,
    Bound,
}

/// How `statistic` is compared with `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

/// One statistic from one seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GofReport {
    pub test: GofTest,
    pub statistic: f64,
    pub n: usize,
    pub threshold: f64,
    pub direction: Direction,
    pub pass: bool,
    pub seed: u64,
}

impl GofReport {
    pub fn new(test: GofTest, statistic: f64, n: usize, threshold: f64, direction: Direction, seed: u64) -> Self {
        let pass = match direction {
            Direction::AtMost => statistic <= threshold,
            Direction::AtLeast => statistic >= threshold,
        };
        GofReport {
            test,
            statistic,
            n,
            threshold,
            direction,
            pass,
            seed,
        }
    }
}

/// A named check of one acceptance criterion, possibly over several seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub reports: Vec<GofReport>,
    /// Whether at least two of three seeds must pass rather than all runs.
    pub majority: bool,
    pub pass: bool,
}

impl Check {
    pub fn new(criterion: u8, name: impl Into<String>, reports: Vec<GofReport>, majority: bool) -> Self {
        let passed = reports.iter().filter(|r| r.pass).count();
        let pass = if majority {
            2 * passed > reports.len()
        } else {
            passed == reports.len()
        };
        Check {
            criterion,
            name: name.into(),
            reports,
            majority,
            pass,
        }
    }

    /// Deterministic pass/fail check with a single statistic.
    pub fn single(criterion: u8, name: impl Into<String>, report: GofReport) -> Self {
        Check::new(criterion, name, vec![report], false)
    }

    /// `name: stat1, stat2, ... (<= threshold)`.
    pub fn summary(&self) -> String {
        let stats: Vec<String> = self.reports.iter().map(|r| format!("{:.4e}", r.statistic)).collect();
        let (op, thr) = match self.reports.first() {
            Some(r) => (
                match r.direction {
                    Direction::AtMost => "<=",
                    Direction::AtLeast => ">=",
                },
                r.threshold,
            ),
            None => ("", f64::NAN),
        };
        let policy = if self.majority { ", 2 of 3" } else { "" };
        format!("{} [{}] {op} {thr:.4e}{policy}", self.name, stats.join(", "))
    }
}

/// Sup distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Sup distance between two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Pearson statistic and upper-tail p-value for observed bin counts against
/// bin probabilities summing to one.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&o, &p)| {
            let e = n as f64 * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (probs.iter().filter(|&&p| p > 0.0).count() - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).expect("positive degrees of freedom").cdf(stat);
    (stat, p)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::RandomStream;

    #[test]
    fn ks_basics() {
        let d = ks_distance(&[0.5; 100], |x| x);
        assert!(d >= 0.5);
        let mut s = RandomStream::new(1, 0);
        let u: Vec<f64> = (0..1000).map(|_| s.uniform()).collect();
        let d = ks_distance(&u, |x| x.clamp(0.0, 1.0));
        assert!((0.0..=1.0).contains(&d) && d * (1000f64).sqrt() < 1.95);
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chi_square_reference() {
        // two equal bins, 60 vs 40: statistic 4, p = P{chi2_1 > 4} = 0.0455
        let (stat, p) = chi_square(&[60, 40], &[0.5, 0.5]);
        assert!((stat - 4.0).abs() < 1e-12);
        assert!((p - 0.045_500_263_896_358).abs() < 1e-9);
    }

    #[test]
    fn majority_policy() {
        let r = |pass: bool| GofReport::new(GofTest::Ks, if pass { 1.0 } else { 3.0 }, 10, 1.95, Direction::AtMost, 0);
        assert!(Check::new(1, "x", vec![r(true), r(false), r(true)], true).pass);
        assert!(!Check::new(1, "x", vec![r(false), r(false), r(true)], true).pass);
        assert!(!Check::new(1, "x", vec![r(true), r(false)], false).pass);
    }
}
