//! Primitive exact samplers. Every function is a deterministic function of
//! the [`RandomStream`] state and its parameters.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure, Error, Result};
use crate::stream::RandomStream;

/// `N(mean, variance)`. A zero variance returns `mean` without consuming
/// randomness.
pub fn sample_normal(stream: &mut RandomStream, mean: f64, variance: f64) -> Result<f64> {
    ensure(variance.is_finite() && variance >= 0.0, || {
        format!("normal variance must be finite and >= 0, got {variance}")
    })?;
    if variance == 0.0 {
        return Ok(mean);
    }
    Ok(mean + variance.sqrt() * standard_normal(stream))
}

#[inline]
pub(crate) fn standard_normal(stream: &mut RandomStream) -> f64 {
    StandardNormal.sample(stream.rng_mut())
}

/// `Exp(1)` by inversion.
#[inline]
pub fn sample_exp1(stream: &mut RandomStream) -> f64 {
    -stream.uniform().ln()
}

/// `Gamma(1)` conditioned on `>= cut`, i.e. `cut + Exp(1)`.
pub fn sample_truncated_gamma1(stream: &mut RandomStream, cut: f64) -> Result<f64> {
    ensure(cut.is_finite() && cut >= 0.0, || {
        format!("truncation point must be finite and >= 0, got {cut}")
    })?;
    Ok(cut + sample_exp1(stream))
}

/// `Gamma(1/2)` conditioned on `> cut`.
///
/// Uses `zeta = Z^2 / 2` with `|Z| > sqrt(2 cut)`; the normal tail is drawn
/// by rejection from a shifted exponential with the rate that maximises
/// acceptance.
pub fn sample_truncated_gamma_half(stream: &mut RandomStream, cut: f64) -> Result<f64> {
    ensure(cut.is_finite() && cut > 0.0, || {
        format!("truncation point must be finite and > 0, got {cut}")
    })?;
    let z = sample_normal_tail(stream, (2.0 * cut).sqrt());
    Ok(0.5 * z * z)
}

/// Standard normal conditioned on `Z > lower`, for `lower >= 0`.
pub(crate) fn sample_normal_tail(stream: &mut RandomStream, lower: f64) -> f64 {
    debug_assert!(lower >= 0.0);
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    loop {
        let z = lower + sample_exp1(stream) / rate;
        let d = z - rate;
        if stream.uniform() < (-0.5 * d * d).exp() {
            return z;
        }
    }
}

/// Normal `N(mean, sd^2)` restricted to `(lo, hi)`.
///
/// Picks plain rejection when the window holds a fair share of the mass,
/// exponential-tail rejection when the window lies in one tail, and uniform
/// proposals when the window is narrow relative to `sd`.
pub(crate) fn sample_truncated_normal(
    stream: &mut RandomStream,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    debug_assert!(lo < hi && sd > 0.0);
    let z = sample_truncated_standard_normal(stream, (lo - mean) / sd, (hi - mean) / sd);
    (mean + sd * z).clamp(lo, hi)
}

/// Standard normal conditioned on `(a, b)`.
pub(crate) fn sample_truncated_standard_normal(stream: &mut RandomStream, a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    if b - a < 0.5 {
        uniform_window_normal(stream, a, b)
    } else if a >= 0.3 {
        loop {
            let z = sample_normal_tail(stream, a);
            if z < b {
                break z;
            }
        }
    } else if b <= -0.3 {
        loop {
            let z = -sample_normal_tail(stream, -b);
            if z > a {
                break z;
            }
        }
    } else {
        loop {
            let z = standard_normal(stream);
            if z > a && z < b {
                break z;
            }
        }
    }
}

fn uniform_window_normal(stream: &mut RandomStream, a: f64, b: f64) -> f64 {
    // log of the largest density value on [a, b]
    let peak = if a > 0.0 {
        -0.5 * a * a
    } else if b < 0.0 {
        -0.5 * b * b
    } else {
        0.0
    };
    loop {
        let z = a + (b - a) * stream.uniform();
        if stream.uniform().ln() <= -0.5 * z * z - peak {
            return z;
        }
    }
}

/// Geometric on `{0, 1, 2, ...}` with pmf `(1 - c) c^k`.
pub fn sample_geometric(stream: &mut RandomStream, c: f64) -> Result<u64> {
    ensure(c > 0.0 && c < 1.0, || {
        format!("geometric parameter must lie in (0, 1), got {c}")
    })?;
    Ok(sample_geometric_ln(stream, c.ln()))
}

/// Geometric with parameter `exp(ln_c)`, `ln_c < 0`. Accepting the log keeps
/// parameters such as `exp(-4 xi)` exact when they would underflow.
pub fn sample_geometric_ln(stream: &mut RandomStream, ln_c: f64) -> u64 {
    debug_assert!(ln_c < 0.0);
    if ln_c == f64::NEG_INFINITY {
        return 0;
    }
    let k = (stream.uniform().ln() / ln_c).floor();
    if k >= u64::MAX as f64 {
        u64::MAX
    } else {
        k as u64
    }
}

/// `upper * sin^2(pi U / 2)`: the arcsine law on `(0, upper)`.
pub fn sample_arcsine(stream: &mut RandomStream, upper: f64) -> Result<f64> {
    ensure(upper.is_finite() && upper > 0.0, || {
        format!("arcsine upper bound must be finite and > 0, got {upper}")
    })?;
    let s = (std::f64::consts::FRAC_PI_2 * stream.uniform()).sin();
    Ok(upper * s * s)
}

/// A positive weight sequence whose tail can be bounded on the fly.
pub trait CertifiedWeights {
    /// Unnormalised weight `w(k) >= 0`.
    fn weight(&self, k: usize) -> f64;

    /// An upper bound on `w(j + 1) / w(j)` valid for every `j >= k`. Values
    /// `>= 1` mean "no tail certificate yet".
    fn ratio_bound(&self, k: usize) -> f64;
}

/// Hard cap on the number of weights a certified inversion may inspect.
pub const DISCRETE_TERM_CAP: usize = 10_000;

/// Draw `K` with `P{K = k} = w(k) / sum_j w(j)` without knowing the
/// normaliser.
///
/// Runs sequential inversion on the prefix sums `S_n`. The unknown total
/// lies in `[S_n, S_n + R_n]` with `R_n = w(n) rho / (1 - rho)`, so `U` times
/// the total is bracketed; the draw is returned as soon as no prefix sum
/// falls inside the bracket.
pub fn sample_discrete_certified<W: CertifiedWeights + ?Sized>(
    stream: &mut RandomStream,
    weights: &W,
) -> Result<usize> {
    let u = stream.uniform();
    let mut prefix: Vec<f64> = Vec::with_capacity(16);
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for n in 0..DISCRETE_TERM_CAP {
        let w = weights.weight(n);
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::internal(format!("weight {n} is {w}")));
        }
        if let Some((w_prev, rho_prev)) = prev {
            if rho_prev < 1.0 && w > rho_prev * w_prev * (1.0 + 1e-12) + f64::MIN_POSITIVE {
                return Err(Error::internal(format!(
                    "tail certificate violated at k = {n}: w = {w:e} > {rho_prev:e} * {w_prev:e}"
                )));
            }
        }
        total += w;
        prefix.push(total);
        let rho = weights.ratio_bound(n);
        prev = Some((w, rho));
        if total <= 0.0 || rho >= 1.0 {
            continue;
        }
        let tail = if rho <= 0.0 { 0.0 } else { w * rho / (1.0 - rho) };
        let lo = u * total;
        let hi = u * (total + tail);
        if hi > total {
            continue;
        }
        let k_lo = prefix.partition_point(|&s| s < lo);
        let k_hi = prefix.partition_point(|&s| s < hi);
        if k_lo == k_hi || tail <= total * 1e-17 {
            return Ok(k_lo);
        }
    }
    Err(Error::internal(format!(
        "certified inversion exceeded {DISCRETE_TERM_CAP} terms"
    )))
}

/// Closure-backed [`CertifiedWeights`].
pub struct FnWeights<W, R> {
    pub weight: W,
    pub ratio_bound: R,
}

impl<W: Fn(usize) -> f64, R: Fn(usize) -> f64> CertifiedWeights for FnWeights<W, R> {
    fn weight(&self, k: usize) -> f64 {
        (self.weight)(k)
    }

    fn ratio_bound(&self, k: usize) -> f64 {
        (self.ratio_bound)(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> RandomStream {
        RandomStream::new(20_240_601, 0)
    }

    #[test]
    fn degenerate_normal_returns_mean() {
        let mut s = stream();
        assert_eq!(sample_normal(&mut s, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(sample_normal(&mut s, 3.5, 0.0).unwrap(), 3.5);
    }

    #[test]
    fn negative_variance_rejected() {
        let mut s = stream();
        assert!(matches!(sample_normal(&mut s, 0.0, -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn normal_moments() {
        let mut s = stream();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_normal(&mut s, 0.0, 1.0).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((0.98..1.02).contains(&var), "var {var}");
    }

    #[test]
    fn truncated_gamma1_support_and_mean() {
        let mut s = stream();
        let cut = std::f64::consts::PI.powi(2) / 8.0;
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_truncated_gamma1(&mut s, cut).unwrap();
            assert!(x >= cut);
            sum += x;
        }
        assert!((sum / n as f64 - (cut + 1.0)).abs() < 0.01);
    }

    #[test]
    fn truncated_gamma_half_support() {
        let mut s = stream();
        for _ in 0..50_000 {
            assert!(sample_truncated_gamma_half(&mut s, 0.5).unwrap() > 0.5);
        }
        assert!(sample_truncated_gamma_half(&mut s, 0.0).is_err());
    }

    #[test]
    fn geometric_mean_and_limit() {
        let mut s = stream();
        let n = 100_000;
        let mean = (0..n).map(|_| sample_geometric(&mut s, 0.5).unwrap()).sum::<u64>() as f64
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        let zeros = (0..1000).filter(|_| sample_geometric(&mut s, 1e-12).unwrap() == 0).count();
        assert_eq!(zeros, 1000);
        assert_eq!(sample_geometric_ln(&mut s, f64::NEG_INFINITY), 0);
        assert!(sample_geometric(&mut s, 1.0).is_err());
    }

    #[test]
    fn arcsine_support_mean_median() {
        let mut s = stream();
        let n = 100_000;
        let mut sum = 0.0;
        let mut below = 0usize;
        for _ in 0..n {
            let x = sample_arcsine(&mut s, 3.0).unwrap();
            assert!(x > 0.0 && x < 3.0);
            sum += x;
            below += (x <= 1.5) as usize;
        }
        assert!((sum / n as f64 / 1.5 - 1.0).abs() < 0.01);
        let frac = below as f64 / n as f64;
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-3);
    }

    #[test]
    fn point_mass_weights() {
        let mut s = stream();
        let w = FnWeights {
            weight: |k: usize| if k == 0 { 1.0 } else { 0.0 },
            ratio_bound: |_| 0.0,
        };
        for _ in 0..1000 {
            assert_eq!(sample_discrete_certified(&mut s, &w).unwrap(), 0);
        }
    }

    #[test]
    fn geometric_weights_match_pmf() {
        // w(k) = 0.7^k: pmf (0.3) 0.7^k
        let mut s = stream();
        let w = FnWeights {
            weight: |k: usize| 0.7f64.powi(k as i32),
            ratio_bound: |_| 0.7,
        };
        let n = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            let k = sample_discrete_certified(&mut s, &w).unwrap();
            if k < counts.len() {
                counts[k] += 1;
            }
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = 0.3 * 0.7f64.powi(k as i32);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * sd, "k={k}");
        }
    }

    #[test]
    fn violated_certificate_is_reported() {
        let mut s = stream();
        let w = FnWeights {
            weight: |k: usize| if k < 3 { 1.0 } else { 0.5 },
            ratio_bound: |k: usize| if k < 1 { 2.0 } else { 0.1 },
        };
        let mut saw_error = false;
        for _ in 0..200 {
            if let Err(Error::Internal(msg)) = sample_discrete_certified(&mut s, &w) {
                assert!(msg.contains("k = 2"));
                saw_error = true;
                break;
            }
        }
        assert!(saw_error);
    }
}
