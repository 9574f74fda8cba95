//! Reference laws and brute-force simulators used as independent oracles.

use std::f64::consts::PI;

use crate::densities::exit_time_survival;
use crate::error::{ensure, Error, Result};
use crate::samplers::standard_normal;
use crate::stream::RandomStream;
use crate::subordinator::{FirstPassageTriplet, PassageKind, StableHalfParams};

/// `(2 / pi) arcsec(v)`: CDF of `|X|` at the first exit of a symmetric
/// Cauchy process from `(-1, 1)` started at the origin.
pub fn cauchy_exit_cdf(v: f64) -> f64 {
    if v <= 1.0 {
        0.0
    } else if v.is_infinite() {
        1.0
    } else {
        2.0 / PI * (1.0 / v).acos()
    }
}

/// Exit position density at `y`, `|y| > 1`, of a symmetric `alpha`-stable
/// process leaving `(-1, 1)` from the origin (Blumenthal, Getoor and Ray):
/// `sin(pi alpha / 2) / pi * (y^2 - 1)^{-alpha / 2} / |y|`.
pub fn stable_exit_density(alpha: f64, y: f64) -> f64 {
    let ay = y.abs();
    if ay <= 1.0 {
        0.0
    } else {
        (PI * alpha / 2.0).sin() / PI * (ay * ay - 1.0).powf(-alpha / 2.0) / ay
    }
}

/// Density of [`cauchy_exit_cdf`] on `v > 1`.
pub fn cauchy_exit_density(v: f64) -> f64 {
    2.0 * stable_exit_density(1.0, v)
}

/// `(2 / pi) arcsin(sqrt(y / h))`.
pub fn arcsine_cdf(y: f64, h: f64) -> f64 {
    2.0 / PI * (y / h).clamp(0.0, 1.0).sqrt().asin()
}

/// `P^0{fet_a <= t}`.
pub fn exit_time_cdf(a: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 - exit_time_survival(a, t, 1e-14).map(|v| v.value).unwrap_or(f64::NAN)
}

/// Composite Simpson rule with `n` panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let x0 = lo + i as f64 * h;
        acc += f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h);
    }
    acc * h / 6.0
}

/// First grid crossing of level `h` by the stable subordinator, using exact
/// increments over steps of length `delta`.
pub fn discretized_subordinator_oracle(
    stream: &mut RandomStream,
    params: &StableHalfParams,
    h: f64,
    delta: f64,
) -> Result<FirstPassageTriplet> {
    ensure(h > 0.0 && delta > 0.0, || format!("need h > 0 and delta > 0, got {h}, {delta}"))?;
    let scale = params.sigma * delta;
    let mut s = 0.0;
    let mut steps: u64 = 0;
    loop {
        steps += 1;
        let z = standard_normal(stream);
        let next = s + (scale / z).powi(2);
        if next > h {
            return Ok(FirstPassageTriplet {
                t: steps as f64 * delta,
                s_minus: s,
                s_plus: next,
                kind: PassageKind::Jump,
            });
        }
        s = next;
    }
}

/// Outcome of [`discretized_process_oracle`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridExit {
    pub time: f64,
    pub pre_value: f64,
    pub value: f64,
}

/// Euler scheme for `B_{S_t}` with the stable subordinator on a grid of step
/// `delta`, dropping every increment larger than `r` in absolute value, run
/// until the first grid time outside `(b, c)`.
pub fn discretized_process_oracle(
    stream: &mut RandomStream,
    params: &StableHalfParams,
    r: f64,
    b: f64,
    c: f64,
    delta: f64,
    max_steps: u64,
) -> Result<GridExit> {
    let scale = params.sigma * delta;
    let mut x = 0.0;
    for k in 1..=max_steps {
        let z = standard_normal(stream);
        let ds = (scale / z).powi(2);
        let dx = ds.sqrt() * standard_normal(stream);
        let prev = x;
        if dx.abs() <= r {
            x += dx;
        }
        if x <= b || x >= c {
            return Ok(GridExit {
                time: k as f64 * delta,
                pre_value: prev,
                value: x,
            });
        }
    }
    Err(Error::internal(format!("discretized oracle did not exit within {max_steps} steps")))
}
