//! Exact sampling of the first exit time of standard Brownian motion from
//! `(-a, a)` started at the origin.
//!
//! The density of the exit time is written in two ways, an eigenfunction
//! series that is sharp for large times and an image series that is sharp
//! for small times. Both are dominated by a mixture whose components are a
//! truncated `Gamma(1)` and a truncated `Gamma(1/2)` variable, and each
//! component is thinned by a geometric index followed by a bounded ratio.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::samplers::{sample_geometric_ln, sample_truncated_gamma1, sample_truncated_gamma_half};
use crate::stream::RandomStream;

/// Outer loop cap for [`sample_exit_time`].
pub const ITERATION_CAP: u64 = 1_000_000;

const LARGE_TIME_CUT: f64 = PI * PI / 8.0;
const SMALL_TIME_CUT: f64 = 0.5;

/// `x exp(-x^2 / 2)`.
#[inline]
pub fn psi(x: f64) -> f64 {
    x * (-0.5 * x * x).exp()
}

/// `psi((4k + 1) sqrt(2s)) - psi((4k + 3) sqrt(2s))`.
pub fn d_k(k: u64, s: f64) -> f64 {
    let r = (2.0 * s).sqrt();
    let k = k as f64;
    psi((4.0 * k + 1.0) * r) - psi((4.0 * k + 3.0) * r)
}

/// Mixture constants of the two-branch dominating density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExitTimeConstants {
    pub c0: f64,
    pub a: f64,
    pub b: f64,
}

impl ExitTimeConstants {
    /// Probability of running the large-time branch.
    pub fn large_branch_probability(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// The constants `C0 = 2 / sqrt(e)`, `A` and `B`.
pub fn constants() -> ExitTimeConstants {
    static CONSTANTS: OnceLock<ExitTimeConstants> = OnceLock::new();
    *CONSTANTS.get_or_init(|| {
        let c0 = 2.0 * (-0.5f64).exp();
        let a = 4.0 * c0 * (-LARGE_TIME_CUT).exp() / (PI * -(-PI * PI / 2.0).exp_m1());
        let b = 2.0 * c0 * libm::erfc(std::f64::consts::FRAC_1_SQRT_2) / -(-2.0f64).exp_m1();
        ExitTimeConstants { c0, a, b }
    })
}

/// `d_k(s) / (C0 sqrt(2s) exp(-(4k + 1) s))`, evaluated without forming the
/// individually tiny factors.
pub(crate) fn acceptance_ratio(k: u64, s: f64, c0: f64) -> f64 {
    let m = 4.0 * k as f64 + 1.0;
    let lead = (-(m * (m - 1.0)) * s).exp() * m / c0;
    let tail = (m + 2.0) / m * (-(4.0 * m + 4.0) * s).exp();
    lead * (1.0 - tail)
}

/// Per-branch iteration counts gathered by [`sample_exit_time_counted`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BranchCounts {
    pub large_iterations: u64,
    pub small_iterations: u64,
    pub accepted: u64,
}

impl BranchCounts {
    pub fn iterations(&self) -> u64 {
        self.large_iterations + self.small_iterations
    }
}

/// One exact draw of the exit time of Brownian motion from `(-a, a)`.
pub fn sample_exit_time(stream: &mut RandomStream, a: f64) -> Result<f64> {
    sample_exit_time_counted(stream, a, &mut BranchCounts::default())
}

/// [`sample_exit_time`] that also records which branch each loop iteration
/// took.
pub fn sample_exit_time_counted(
    stream: &mut RandomStream,
    a: f64,
    counts: &mut BranchCounts,
) -> Result<f64> {
    ensure(a.is_finite() && a > 0.0, || {
        format!("half-width a must be finite and > 0, got {a}")
    })?;
    let k = constants();
    let p_large = k.large_branch_probability();
    let a2 = a * a;
    for _ in 0..ITERATION_CAP {
        if stream.uniform() <= p_large {
            counts.large_iterations += 1;
            let xi = sample_truncated_gamma1(stream, LARGE_TIME_CUT)?;
            if thin(stream, xi, -(-PI * PI / 2.0).exp_m1(), k.c0) {
                counts.accepted += 1;
                return Ok(8.0 * a2 * xi / (PI * PI));
            }
        } else {
            counts.small_iterations += 1;
            let zeta = sample_truncated_gamma_half(stream, SMALL_TIME_CUT)?;
            if thin(stream, zeta, -(-2.0f64).exp_m1(), k.c0) {
                counts.accepted += 1;
                return Ok(a2 / (2.0 * zeta));
            }
        }
    }
    Err(Error::internal(format!(
        "exit time sampler exceeded {ITERATION_CAP} iterations ({} large, {} small)",
        counts.large_iterations, counts.small_iterations
    )))
}

/// Geometric index plus the two acceptance tests shared by both branches.
/// `norm` is `1 - exp(-4 cut)`, the geometric normaliser at the cut.
fn thin(stream: &mut RandomStream, s: f64, norm: f64, c0: f64) -> bool {
    let kappa = sample_geometric_ln(stream, -4.0 * s);
    let geo_norm = -(-4.0 * s).exp_m1();
    if stream.uniform() * geo_norm > norm {
        return false;
    }
    let ratio = acceptance_ratio(kappa, s, c0);
    debug_assert!(
        (0.0..1.0).contains(&ratio),
        "acceptance ratio {ratio} out of [0, 1) at k = {kappa}, s = {s}"
    );
    stream.uniform() <= ratio
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_values() {
        assert_eq!(psi(0.0), 0.0);
        assert!((psi(1.0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn d0_at_half() {
        let want = (-0.5f64).exp() - 3.0 * (-4.5f64).exp();
        assert!((d_k(0, 0.5) - want).abs() < 1e-15);
        assert!((d_k(0, 0.5) - 0.573204).abs() < 1e-6);
    }

    #[test]
    fn constants_match_references() {
        let k = constants();
        assert!((k.c0 - 2.0 / 1f64.exp().sqrt()).abs() < 1e-15);
        assert!((k.a - 0.453_041_736_273_773).abs() < 1e-13);
        assert!((k.b - 0.890_326_842_007_639).abs() < 1e-13);
        assert!((k.large_branch_probability() - 0.337_243_064_634_841).abs() < 1e-13);
    }

    #[test]
    fn psi_envelope_inequality() {
        let c0 = constants().c0;
        let mut s = RandomStream::new(11, 0);
        for _ in 0..10_000 {
            let x = 1.0 + 20.0 * s.uniform();
            let y = 1.0 + 20.0 * s.uniform();
            assert!(psi(x * y) <= c0 * y * (-0.5 * x * y * y).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ratio_in_unit_interval_and_matches_direct_form() {
        let c0 = constants().c0;
        for &s in &[0.5, 0.6, 1.0, LARGE_TIME_CUT, 2.0, 5.0, 30.0] {
            for k in 0..20u64 {
                assert!(d_k(k, s) >= 0.0);
                let r = acceptance_ratio(k, s, c0);
                assert!((0.0..1.0).contains(&r), "k={k} s={s} r={r}");
                let direct = d_k(k, s) / (c0 * (2.0 * s).sqrt() * (-(4.0 * k as f64 + 1.0) * s).exp());
                if direct.is_finite() && direct > 1e-250 {
                    assert!((r - direct).abs() <= 1e-12 * direct.max(1e-300) + 1e-300, "k={k} s={s}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_half_width() {
        let mut s = RandomStream::new(1, 0);
        for a in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(sample_exit_time(&mut s, a), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn positive_and_reproducible() {
        let mut s1 = RandomStream::new(3, 7);
        let mut s2 = RandomStream::new(3, 7);
        for _ in 0..1000 {
            let x = sample_exit_time(&mut s1, 0.7).unwrap();
            assert!(x > 0.0 && x.is_finite());
            assert_eq!(x.to_bits(), sample_exit_time(&mut s2, 0.7).unwrap().to_bits());
        }
    }
}
