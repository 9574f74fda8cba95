//! Brownian first-exit densities from `(-a, a)` with certified truncation.
//!
//! Every density with two series representations exposes both: the
//! hitting/image form converges fast for `time <= a^2`, the heat-equation
//! eigenexpansion for `time > a^2`. [`Representation::Auto`] picks by that
//! switch.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{ensure, Result};
use crate::series::{sum_alternating, sum_geometric_tail, SeriesValue};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// `time / a^2` at or below which the hitting/image representation is used.
pub const SWITCH_RATIO: f64 = 1.0;

/// Which series to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    /// Sum of hitting densities / reflection images.
    Hitting,
    /// Heat-equation eigenfunction expansion.
    Eigen,
    /// Hitting form for `time <= SWITCH_RATIO * a^2`, eigen form otherwise.
    Auto,
}

impl Representation {
    fn resolve(self, a: f64, time: f64) -> Representation {
        match self {
            Representation::Auto if time <= SWITCH_RATIO * a * a => Representation::Hitting,
            Representation::Auto => Representation::Eigen,
            r => r,
        }
    }
}

/// Exit side of the interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Top,
    Bottom,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Top => 1.0,
            Side::Bottom => -1.0,
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Top => Side::Bottom,
            Side::Bottom => Side::Top,
        }
    }
}

/// Centred normal density with variance `t`.
#[inline]
pub fn normal_density(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (SQRT_2PI * t.sqrt())
}

/// First hitting time density of level `v` for standard Brownian motion
/// from 0, without argument checks.
#[inline]
pub(crate) fn hitting(v: f64, t: f64) -> f64 {
    let v = v.abs();
    v * (-v * v / (2.0 * t)).exp() / (SQRT_2PI * t * t.sqrt())
}

/// `d/dv` of [`hitting`] for `v >= 0`.
#[inline]
fn hitting_dv(v: f64, t: f64) -> f64 {
    normal_density(t, v) / t * (1.0 - v * v / t)
}

fn check_geometry(a: f64, time: f64) -> Result<()> {
    ensure(a.is_finite() && a > 0.0, || {
        format!("half-width a must be finite and > 0, got {a}")
    })?;
    ensure(time.is_finite() && time > 0.0, || {
        format!("time must be finite and > 0, got {time}")
    })
}

fn check_interior(a: f64, x: f64) -> Result<()> {
    ensure(x.abs() < a, || format!("x must lie in (-a, a) = ({}, {a}), got {x}", -a))
}

fn check_tol(tol: f64) -> Result<()> {
    ensure(tol.is_finite() && tol > 0.0, || format!("tolerance must be > 0, got {tol}"))
}

/// Density of the first hitting time of `a` by a standard Brownian motion
/// started at 0: `|a| exp(-a^2 / 2t) / (sqrt(2 pi) t^{3/2})`.
pub fn hitting_density(a: f64, t: f64) -> Result<f64> {
    ensure(t.is_finite() && t > 0.0, || format!("time must be finite and > 0, got {t}"))?;
    ensure(!a.is_nan(), || "level must not be NaN".into())?;
    if a.is_infinite() {
        return Ok(0.0);
    }
    Ok(hitting(a, t))
}

/// Density `f_a(t, x)` of the exit time from `(-a, a)` started at `x`.
pub fn exit_time_density(a: f64, t: f64, x: f64, tol: f64) -> Result<SeriesValue> {
    exit_time_density_with(a, t, x, tol, Representation::Auto)
}

pub fn exit_time_density_with(
    a: f64,
    t: f64,
    x: f64,
    tol: f64,
    repr: Representation,
) -> Result<SeriesValue> {
    check_geometry(a, t)?;
    check_interior(a, x)?;
    check_tol(tol)?;
    let ax = x.abs();
    let w = a - ax;
    match repr.resolve(a, t) {
        Representation::Hitting => {
            let sqrt_t = t.sqrt();
            sum_alternating(
                "exit-time density (hitting form)",
                tol,
                |k| {
                    let base = 2.0 * k as f64 * a + a;
                    hitting(base - ax, t) + hitting(base + ax, t)
                },
                |k| 2.0 * k as f64 * a + a - ax >= sqrt_t,
            )
        }
        _ => {
            let s = PI * PI * t / (8.0 * a * a);
            let c = PI / (2.0 * a * a);
            sum_geometric_tail(
                "exit-time density (eigen form)",
                tol / c,
                0,
                |k| {
                    // (-1)^k cos(m pi x / 2a) = sin(m pi w / 2a), exact near the ends
                    let m = (2 * k + 1) as f64;
                    m * (-m * m * s).exp() * (m * PI * w / (2.0 * a)).sin()
                },
                |k| {
                    let m = (2 * k + 1) as f64;
                    m * (-m * m * s).exp()
                },
                |k| {
                    let m = (2 * k + 1) as f64;
                    (m + 2.0) / m * (-(8.0 * k as f64 + 8.0) * s).exp()
                },
            )
            .map(|v| v.scale(c))
        }
    }
}

/// Survival function `P^0{fet_a > T}`.
pub fn exit_time_survival(a: f64, big_t: f64, tol: f64) -> Result<SeriesValue> {
    exit_time_survival_with(a, big_t, tol, Representation::Auto)
}

pub fn exit_time_survival_with(
    a: f64,
    big_t: f64,
    tol: f64,
    repr: Representation,
) -> Result<SeriesValue> {
    check_geometry(a, big_t)?;
    check_tol(tol)?;
    match repr.resolve(a, big_t) {
        Representation::Hitting => {
            // 1 - 2 sum_k (-1)^k erfc((2k+1) a / sqrt(2T))
            let scale = a / (2.0 * big_t).sqrt();
            let v = sum_alternating(
                "exit-time survival (hitting form)",
                tol / 2.0,
                |k| libm::erfc((2 * k + 1) as f64 * scale),
                |_| true,
            )?;
            Ok(SeriesValue {
                value: 1.0 - 2.0 * v.value,
                error_bound: 2.0 * v.error_bound,
                terms_used: v.terms_used,
            })
        }
        _ => {
            let s = PI * PI * big_t / (8.0 * a * a);
            sum_alternating(
                "exit-time survival (eigen form)",
                tol,
                |k| {
                    let m = (2 * k + 1) as f64;
                    4.0 / (m * PI) * (-m * m * s).exp()
                },
                |_| true,
            )
        }
    }
}

/// Joint density `f_a^±(t, x)` of exiting at time `t` through the given side.
///
/// The returned certified interval is strictly positive: if the first
/// evaluation cannot certify positivity the tolerance is tightened.
pub fn exit_side_density(a: f64, t: f64, x: f64, side: Side, tol: f64) -> Result<SeriesValue> {
    exit_side_density_with(a, t, x, side, tol, Representation::Auto)
}

pub fn exit_side_density_with(
    a: f64,
    t: f64,
    x: f64,
    side: Side,
    tol: f64,
    repr: Representation,
) -> Result<SeriesValue> {
    check_geometry(a, t)?;
    check_interior(a, x)?;
    check_tol(tol)?;
    let x = side.sign() * x;
    let repr = repr.resolve(a, t);
    let mut tol = tol;
    let mut v = exit_top_density(a, t, x, tol, repr)?;
    for _ in 0..8 {
        if v.lower() > 0.0 {
            break;
        }
        let next = (tol * 1e-3).min(v.value.abs() * 1e-6);
        if !(next > 0.0) {
            break;
        }
        tol = next;
        v = exit_top_density(a, t, x, tol, repr)?;
    }
    Ok(v)
}

fn exit_top_density(a: f64, t: f64, x: f64, tol: f64, repr: Representation) -> Result<SeriesValue> {
    let y = a - x;
    match repr {
        Representation::Hitting => {
            // g(y) - g(4a - y) + g(4a + y) - g(8a - y) + ...
            let arg = |j: usize| {
                let k = (j / 2) as f64;
                if j.is_multiple_of(2) {
                    4.0 * k * a + y
                } else {
                    4.0 * k * a + 4.0 * a - y
                }
            };
            let sqrt_t = t.sqrt();
            sum_alternating(
                "exit-side density (hitting form)",
                tol,
                |j| hitting(arg(j), t),
                |j| arg(j) >= sqrt_t,
            )
        }
        _ => {
            let full = exit_time_density_with(a, t, x, tol / 2.0, Representation::Eigen)?;
            let s = PI * PI * t / (2.0 * a * a);
            let c = PI / (2.0 * a * a);
            let sine = sum_geometric_tail(
                "exit-side density (sine series)",
                tol / (2.0 * c),
                1,
                |k| {
                    let kf = k as f64;
                    let w = a - x.abs();
                    let sine = if w >= 0.5 * a {
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        sign * (kf * PI * x / a).sin()
                    } else {
                        -x.signum() * (kf * PI * w / a).sin()
                    };
                    kf * (-kf * kf * s).exp() * sine
                },
                |k| {
                    let kf = k as f64;
                    kf * (-kf * kf * s).exp()
                },
                |k| {
                    let kf = k.max(1) as f64;
                    (kf + 1.0) / kf * (-(2.0 * kf + 1.0) * s).exp()
                },
            )?;
            Ok(SeriesValue {
                value: 0.5 * full.value - c * sine.value,
                error_bound: 0.5 * full.error_bound + c * sine.error_bound,
                terms_used: full.terms_used + sine.terms_used,
            })
        }
    }
}

/// Killed transition density `q_a(T, x) = P^0{B_T in dx, fet_a > T} / dx`.
pub fn pre_exit_density(a: f64, big_t: f64, x: f64, tol: f64) -> Result<SeriesValue> {
    pre_exit_density_with(a, big_t, x, tol, Representation::Auto)
}

pub fn pre_exit_density_with(
    a: f64,
    big_t: f64,
    x: f64,
    tol: f64,
    repr: Representation,
) -> Result<SeriesValue> {
    check_geometry(a, big_t)?;
    check_tol(tol)?;
    ensure(x.abs() <= a, || format!("x must lie in [-a, a], got {x}"))?;
    if x.abs() == a {
        return Ok(SeriesValue::exact(0.0));
    }
    let ax = x.abs();
    match repr.resolve(a, big_t) {
        Representation::Hitting => sum_alternating(
            "pre-exit density (image form)",
            tol,
            |k| {
                if k == 0 {
                    normal_density(big_t, ax)
                } else {
                    let c = 2.0 * k as f64 * a;
                    normal_density(big_t, c - ax) + normal_density(big_t, c + ax)
                }
            },
            |k| k >= 1,
        ),
        _ => {
            let s = PI * PI * big_t / (8.0 * a * a);
            sum_geometric_tail(
                "pre-exit density (eigen form)",
                tol * a,
                0,
                |k| {
                    let m = (2 * k + 1) as f64;
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * (-m * m * s).exp() * (m * PI * (a - ax) / (2.0 * a)).sin()
                },
                |k| {
                    let m = (2 * k + 1) as f64;
                    (-m * m * s).exp()
                },
                |k| (-(8.0 * k as f64 + 8.0) * s).exp(),
            )
            .map(|v| v.scale(1.0 / a))
        }
    }
}

/// One-sided `x`-derivatives at the interval ends.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundaryDerivatives {
    /// `lim_{x -> a-} d/dx f_a^+(t, x)`, strictly negative.
    pub exit_top_at_top: SeriesValue,
    /// `lim_{x -> -a+} d/dx f_a^+(t, x)`, strictly positive.
    pub exit_top_at_bottom: SeriesValue,
    /// `d/dx q_a(t, a) = -f_a(t, 0)`.
    pub pre_exit_at_top: SeriesValue,
}

/// Relative accuracy used by [`boundary_derivatives`].
const DERIVATIVE_RTOL: f64 = 1e-14;

pub fn boundary_derivatives(a: f64, t: f64) -> Result<BoundaryDerivatives> {
    boundary_derivatives_with(a, t, Representation::Auto)
}

pub fn boundary_derivatives_with(
    a: f64,
    t: f64,
    repr: Representation,
) -> Result<BoundaryDerivatives> {
    check_geometry(a, t)?;
    let repr = repr.resolve(a, t);
    let (top, bottom) = match repr {
        Representation::Hitting => {
            // d/dx P_k(x) = -g'(4ka + y) - g'(4ka + 4a - y), y = a - x
            let env = |v: f64| normal_density(t, v) / t * (1.0 + v * v / t);
            let ratio = |v: f64, step: f64| {
                // envelope(v + step) / envelope(v), nonincreasing in v
                let w = v + step;
                (-(w * w - v * v) / (2.0 * t)).exp() * (1.0 + w * w / t) / (1.0 + v * v / t)
            };
            let scale_top = normal_density(t, 0.0) / t;
            let top = sum_geometric_tail(
                "boundary derivative at top (hitting form)",
                DERIVATIVE_RTOL * scale_top,
                0,
                |k| {
                    if k == 0 {
                        -hitting_dv(0.0, t) - hitting_dv(4.0 * a, t)
                    } else {
                        let v = 4.0 * k as f64 * a;
                        -hitting_dv(v, t) - hitting_dv(v + 4.0 * a, t)
                    }
                },
                |k| 2.0 * env(4.0 * k as f64 * a),
                |k| {
                    let v = 4.0 * k as f64 * a;
                    if v * v < t {
                        f64::INFINITY
                    } else {
                        ratio(v, 4.0 * a)
                    }
                },
            )?;
            let scale_bottom = env(2.0 * a).max(f64::MIN_POSITIVE);
            let bottom = sum_geometric_tail(
                "boundary derivative at bottom (hitting form)",
                DERIVATIVE_RTOL * scale_bottom,
                0,
                |k| -2.0 * hitting_dv((4 * k + 2) as f64 * a, t),
                |k| 2.0 * env((4 * k + 2) as f64 * a),
                |k| {
                    let v = (4 * k + 2) as f64 * a;
                    if v * v < t {
                        f64::INFINITY
                    } else {
                        ratio(v, 4.0 * a)
                    }
                },
            )?;
            (top, bottom)
        }
        _ => {
            let s = PI * PI * t / (8.0 * a * a);
            let c = PI * PI / (8.0 * a * a * a);
            let env = |k: usize| {
                let kf = k as f64;
                kf * kf * (-kf * kf * s).exp()
            };
            let ratio = |k: usize| {
                let kf = k.max(1) as f64;
                ((kf + 1.0) / kf).powi(2) * (-(2.0 * kf + 1.0) * s).exp()
            };
            let tol = DERIVATIVE_RTOL * env(1);
            let top = sum_geometric_tail(
                "boundary derivative at top (eigen form)",
                tol,
                1,
                |k| -env(k),
                env,
                ratio,
            )?
            .scale(c);
            let bottom = sum_geometric_tail(
                "boundary derivative at bottom (eigen form)",
                tol,
                1,
                |k| if k % 2 == 1 { env(k) } else { -env(k) },
                env,
                ratio,
            )?
            .scale(c);
            (top, bottom)
        }
    };
    let f0 = exit_time_density_with(a, t, 0.0, 1e-15 / (a * a), repr)?;
    Ok(BoundaryDerivatives {
        exit_top_at_top: top,
        exit_top_at_bottom: bottom,
        pre_exit_at_top: SeriesValue {
            value: -f0.value,
            ..f0
        },
    })
}

/// Relative size of the omitted tail when summing the envelope constants.
const CONSTANT_RTOL: f64 = 1e-15;

fn positive_series_upper(term: impl Fn(usize) -> f64, ratio_at: impl Fn(usize) -> f64) -> f64 {
    // Sum of a positive series whose term ratio is nonincreasing; the
    // certified tail is added so the result is an upper bound.
    let mut sum = 0.0;
    let mut k = 0;
    loop {
        let w = term(k);
        sum += w;
        let rho = ratio_at(k);
        if rho < 1.0 {
            let tail = w * rho / (1.0 - rho);
            if tail <= CONSTANT_RTOL * sum || k >= crate::series::TERM_CAP {
                return sum + tail;
            }
        }
        k += 1;
    }
}

/// Constant `c_f` with `f_a^+(t, x) <= c_f phi_t(a - x) (a - x)`.
pub fn envelope_constant_cf(a: f64, t: f64) -> Result<f64> {
    check_geometry(a, t)?;
    let r = a * a / t;
    let term = |k: usize| {
        let kf = k as f64;
        ((2.0 * kf + 4.0).powi(2) * r + 1.0) * (-2.0 * kf * kf * r).exp()
    };
    let ratio = |k: usize| {
        let kf = k as f64;
        ((2.0 * kf + 6.0).powi(2) * r + 1.0) / ((2.0 * kf + 4.0).powi(2) * r + 1.0)
            * (-2.0 * (2.0 * kf + 1.0) * r).exp()
    };
    Ok(2.0 / t * positive_series_upper(term, ratio))
}

/// Constant `c_q` with `q_a(T, x) <= c_q phi_T(x) (a - |x|)`.
pub fn envelope_constant_cq(a: f64, big_t: f64) -> Result<f64> {
    check_geometry(a, big_t)?;
    let r = a * a / big_t;
    let term = |k: usize| {
        let kf = k as f64;
        (kf + 1.0) * (-2.0 * kf * kf * r).exp()
    };
    let ratio = |k: usize| {
        let kf = k as f64;
        (kf + 2.0) / (kf + 1.0) * (-2.0 * (2.0 * kf + 1.0) * r).exp()
    };
    Ok(8.0 * a / big_t * positive_series_upper(term, ratio))
}
