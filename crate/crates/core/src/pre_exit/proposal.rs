//! Exact sampler for densities of the form `p(y) N(y; mu, sd^2)` on a
//! bounded interval, where `p` is piecewise `c y^j` with `j <= 2`, and for
//! the flat analogue without the Gaussian factor.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::samplers::sample_truncated_standard_normal;
use crate::stream::RandomStream;

/// Gaussian factor ignored further than this many standard deviations out.
const REACH: f64 = 38.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coef: f64,
    pub power: u8,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Method {
    /// Power law by inversion, no Gaussian factor.
    Flat,
    /// Power law by inversion, thinned by the Gaussian relative to `peak`.
    PowerThenGauss { log_peak: f64 },
    /// Truncated normal, thinned by `(y / hi)^j`.
    GaussThenPower,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    lo: f64,
    hi: f64,
    power: u8,
    method: Method,
}

#[derive(Clone, Debug)]
pub(crate) struct PiecewiseProposal {
    gauss: Option<(f64, f64)>,
    segments: Vec<Segment>,
    cumulative: Vec<f64>,
    total: f64,
    /// `(apex, apex - mu)` for [`PiecewiseProposal::sample_reflected`].
    reflect: Option<(f64, f64)>,
}

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `P{Z > z}`.
pub(crate) fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

fn prob_between(zl: f64, zh: f64) -> f64 {
    if zl >= 0.0 {
        upper_tail(zl) - upper_tail(zh)
    } else if zh <= 0.0 {
        upper_tail(-zh) - upper_tail(-zl)
    } else {
        1.0 - upper_tail(-zl) - upper_tail(zh)
    }
}

/// `int_lo^hi y^j N(y; mu, sd^2) dy`.
fn gauss_moment(mu: f64, sd: f64, lo: f64, hi: f64, j: u8) -> f64 {
    let zl = (lo - mu) / sd;
    let zh = (hi - mu) / sd;
    let i0 = prob_between(zl, zh);
    let (pl, ph) = (std_normal_pdf(zl), std_normal_pdf(zh));
    let i1 = pl - ph;
    let m = match j {
        0 => i0,
        1 => mu * i0 + sd * i1,
        _ => {
            let zpl = if zl.is_finite() { zl * pl } else { 0.0 };
            let zph = if zh.is_finite() { zh * ph } else { 0.0 };
            let i2 = i0 + zpl - zph;
            mu * mu * i0 + 2.0 * mu * sd * i1 + sd * sd * i2
        }
    };
    m.max(0.0)
}

fn flat_moment(lo: f64, hi: f64, j: u8) -> f64 {
    let e = j as i32 + 1;
    (hi.powi(e) - lo.powi(e)) / e as f64
}

impl PiecewiseProposal {
    /// `gauss = Some((mu, sd))` multiplies every piece by `N(y; mu, sd^2)`;
    /// pieces must be disjoint with `0 <= lo < hi`.
    pub fn new(gauss: Option<(f64, f64)>, pieces: &[Piece]) -> Self {
        let mut segments = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        let mut push = |seg: Segment, mass: f64| {
            if mass > 0.0 && mass.is_finite() {
                total += mass;
                segments.push(seg);
                cumulative.push(total);
            }
        };
        for p in pieces {
            debug_assert!(p.lo >= 0.0 && p.power <= 2);
            if !(p.hi > p.lo) || p.coef <= 0.0 {
                continue;
            }
            let Some((mu, sd)) = gauss else {
                let seg = Segment {
                    lo: p.lo,
                    hi: p.hi,
                    power: p.power,
                    method: Method::Flat,
                };
                push(seg, p.coef * flat_moment(p.lo, p.hi, p.power));
                continue;
            };
            let mut lo = p.lo.max(mu - REACH * sd);
            let mut hi = p.hi.min(mu + REACH * sd);
            if !(hi > lo) {
                // the Gaussian is narrower than one ulp of its mean
                if !(mu >= p.lo && mu <= p.hi) {
                    continue;
                }
                lo = p.lo.max(mu.next_down());
                hi = p.hi.min(mu.next_up());
            }
            let gauss_seg = |lo: f64, hi: f64| Segment {
                lo,
                hi,
                power: p.power,
                method: Method::GaussThenPower,
            };
            if p.power == 0 {
                push(gauss_seg(lo, hi), p.coef * gauss_moment(mu, sd, lo, hi, 0));
                continue;
            }
            // On [0, s] the Gaussian varies by at most a factor e.
            let s = 2.0 * sd * sd / (mu.max(0.0) + (mu * mu + 2.0 * sd * sd).sqrt());
            let mut l = lo;
            if l < s {
                let h = hi.min(s);
                let m = mu.clamp(l, h);
                let log_peak = -0.5 * ((m - mu) / sd).powi(2);
                let seg = Segment {
                    lo: l,
                    hi: h,
                    power: p.power,
                    method: Method::PowerThenGauss { log_peak },
                };
                push(seg, p.coef * gauss_moment(mu, sd, l, h, p.power));
                l = h;
            }
            while l < hi {
                let h = hi.min(2.0 * l);
                push(gauss_seg(l, h), p.coef * gauss_moment(mu, sd, l, h, p.power));
                l = h;
            }
        }
        PiecewiseProposal {
            gauss,
            segments,
            cumulative,
            total,
            reflect: None,
        }
    }

    /// Enables [`Self::sample_reflected`]; `apex_minus_mu` must be `apex - mu`
    /// computed without cancellation.
    pub fn reflected(mut self, apex: f64, apex_minus_mu: f64) -> Self {
        self.reflect = Some((apex, apex_minus_mu));
        self
    }

    /// Integral of the unnormalised density.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    #[cfg(test)]
    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        self.draw(stream).0
    }

    /// `apex - y` for a draw `y`, keeping the resolution of the Gaussian
    /// offset when `sd` is below the spacing of floats near `mu`.
    pub fn sample_reflected(&self, stream: &mut RandomStream) -> f64 {
        let (apex, apex_minus_mu) = self.reflect.expect("reflection not configured");
        match self.draw(stream) {
            (_, Some(z)) => apex_minus_mu - self.gauss.expect("gaussian segment").1 * z,
            (y, None) => apex - y,
        }
    }

    /// A draw `y`, with the standard normal offset `z` when it came from a
    /// Gaussian segment.
    fn draw(&self, stream: &mut RandomStream) -> (f64, Option<f64>) {
        debug_assert!(self.total > 0.0);
        let target = stream.uniform() * self.total;
        let i = self
            .cumulative
            .partition_point(|&c| c <= target)
            .min(self.segments.len() - 1);
        let seg = self.segments[i];
        let power_draw = |stream: &mut RandomStream| {
            let e = seg.power as i32 + 1;
            let (l, h) = (seg.lo.powi(e), seg.hi.powi(e));
            let v = l + stream.uniform() * (h - l);
            v.powf(1.0 / e as f64).clamp(seg.lo, seg.hi)
        };
        match seg.method {
            Method::Flat => (power_draw(stream), None),
            Method::PowerThenGauss { log_peak } => {
                let (mu, sd) = self.gauss.expect("gaussian segment");
                loop {
                    let y = power_draw(stream);
                    let z = (y - mu) / sd;
                    if stream.uniform().ln() <= -0.5 * z * z - log_peak {
                        return (y, None);
                    }
                }
            }
            Method::GaussThenPower => {
                let (mu, sd) = self.gauss.expect("gaussian segment");
                let (zl, zh) = ((seg.lo - mu) / sd, (seg.hi - mu) / sd);
                loop {
                    let z = sample_truncated_standard_normal(stream, zl, zh);
                    let y = (mu + sd * z).clamp(seg.lo, seg.hi);
                    let accept = match seg.power {
                        0 => true,
                        j => stream.uniform() <= (y / seg.hi).powi(j as i32),
                    };
                    if accept {
                        return (y, Some(z));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|i| {
                let x0 = lo + i as f64 * h;
                (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h)) * h / 6.0
            })
            .sum()
    }

    #[test]
    fn moments_match_quadrature() {
        for &(mu, sd, lo, hi) in &[
            (0.3, 0.2, 0.0, 2.0),
            (0.0, 1.0, 0.1, 0.7),
            (5.0, 0.01, 4.9, 5.3),
            (1.0, 3.0, 0.0, 2.0),
        ] {
            for j in 0..=2u8 {
                let want = quad(
                    |y| y.powi(j as i32) * std_normal_pdf((y - mu) / sd) / sd,
                    lo,
                    hi,
                    20_000,
                );
                let got = gauss_moment(mu, sd, lo, hi, j);
                assert!((got - want).abs() <= 1e-12 + 1e-9 * want, "{mu} {sd} {lo} {hi} {j}: {got} {want}");
            }
        }
    }

    fn check_distribution(prop: &PiecewiseProposal, density: impl Fn(f64) -> f64, lo: f64, hi: f64) {
        let bins = 20;
        let n = 200_000;
        let mut counts = vec![0usize; bins];
        let mut s = RandomStream::new(5, 5);
        for _ in 0..n {
            let y = prop.sample(&mut s);
            assert!(y >= lo && y <= hi);
            let b = (((y - lo) / (hi - lo)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let w = (hi - lo) / bins as f64;
        let total = quad(&density, lo, hi, 40_000);
        assert!((total - prop.total_mass()).abs() < 1e-8 * total);
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let e = n as f64 * quad(&density, lo + b as f64 * w, lo + (b + 1) as f64 * w, 2000) / total;
            if e > 0.0 {
                chi2 += (c as f64 - e).powi(2) / e;
            }
        }
        // 19 degrees of freedom, p = 1e-4 critical value ~ 50
        assert!(chi2 < 50.0, "chi2 = {chi2}");
    }

    #[test]
    fn gaussian_piecewise_linear_quadratic() {
        let (mu, sd, k) = (0.2, 0.15, 4.0);
        let pieces = [
            Piece { lo: 0.0, hi: 1.0 / k, coef: k, power: 2 },
            Piece { lo: 1.0 / k, hi: 2.0, coef: 1.0, power: 1 },
        ];
        let prop = PiecewiseProposal::new(Some((mu, sd)), &pieces);
        let dens = |y: f64| y * (k * y).min(1.0) * std_normal_pdf((y - mu) / sd) / sd;
        check_distribution(&prop, dens, 0.0, 2.0);
    }

    #[test]
    fn gaussian_far_from_origin() {
        let (mu, sd) = (0.9, 0.01);
        let pieces = [Piece { lo: 0.0, hi: 1.0, coef: 1.0, power: 2 }];
        let prop = PiecewiseProposal::new(Some((mu, sd)), &pieces);
        assert!(prop.segments.len() < 10);
        let dens = |y: f64| y * y * std_normal_pdf((y - mu) / sd) / sd;
        check_distribution(&prop, dens, 0.8, 1.0);
    }

    #[test]
    fn flat_pieces() {
        let pieces = [
            Piece { lo: 0.0, hi: 0.2, coef: 10.0, power: 2 },
            Piece { lo: 0.2, hi: 0.5, coef: 2.0, power: 1 },
            Piece { lo: 0.5, hi: 1.0, coef: 1.0, power: 0 },
        ];
        let prop = PiecewiseProposal::new(None, &pieces);
        let dens = |y: f64| {
            if y < 0.2 {
                10.0 * y * y
            } else if y < 0.5 {
                2.0 * y
            } else {
                1.0
            }
        };
        check_distribution(&prop, dens, 0.0, 1.0);
    }
}
