//! Exact sampling of the Brownian position `B_T` conditional on the exit
//! time from `(-a, a)` being `T + t` and the exit side.
//!
//! The target density in `x` is proportional to `q_a(T, x) f_a^+(t, x)`.
//! Each factor is dominated separately:
//!
//! * image form: `f_a^+` is split into the terms `P_k` and `q_a` into the
//!   terms `Q_k`; a random index drawn from the weights `a_k` (resp. `b_k`)
//!   selects a bounded ratio `r_k` (resp. `s_k`);
//! * eigen form: the factor is bounded by `min(M, L (a - |x|))` and the ratio
//!   is decided against certified series bounds.
//!
//! [`EnvelopeKind::Paper`] always uses the image form with the constants
//! `c_f` and `4 a / T (a - |x|)`. [`EnvelopeKind::Adaptive`] uses the sharper
//! image bounds `1 / t` and `min(1, 4 a (a - |x|) / T)` for short times and
//! the eigen form for long times, which keeps the acceptance rate bounded
//! away from zero over all `(T, t)`.

mod proposal;

use std::f64::consts::PI;

use serde::Serialize;

use crate::densities::{
    envelope_constant_cf, exit_side_density, exit_time_density, normal_density,
    pre_exit_density, Side,
};
use crate::error::{ensure, Error, Result};
use crate::samplers::{sample_discrete_certified, sample_truncated_normal, FnWeights};
use crate::series::{sum_geometric_tail, Accumulator};
use crate::stream::RandomStream;

use proposal::{Piece, PiecewiseProposal};

/// Proposal cap for one draw.
pub const ITERATION_CAP: u64 = 1_000_000;

/// Construction fails when the a priori acceptance rate is below this.
pub const MIN_ACCEPTANCE: f64 = 1e-9;

/// Cap on the partial-sum search for `p*` and `q*`.
pub const STAR_SEARCH_CAP: usize = 1_000_000;

/// `t / a^2` from which the adaptive envelope bounds `f_a^+` in eigen form.
pub const EIGEN_EXIT_SIDE_FROM: f64 = 0.25;

/// `T / a^2` from which the adaptive envelope bounds `q_a` in eigen form.
pub const EIGEN_PRE_EXIT_FROM: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Paper,
    #[default]
    Adaptive,
}

/// Denominator shape used by [`ratio_s`], divided by `phi_T(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QBound {
    /// `4 a (a - |x|) / T`.
    Paper,
    /// `min(1, 4 a (a - |x|) / T)`.
    Capped,
}

impl QBound {
    fn shape(self, a: f64, big_t: f64, x: f64) -> f64 {
        let v = 4.0 * a * (a - x.abs()) / big_t;
        match self {
            QBound::Paper => v,
            QBound::Capped => v.min(1.0),
        }
    }
}

fn check(a: f64, time: f64, x: f64) -> Result<()> {
    ensure(a.is_finite() && a > 0.0, || {
        format!("half-width a must be finite and > 0, got {a}")
    })?;
    ensure(time.is_finite() && time > 0.0, || {
        format!("time must be finite and > 0, got {time}")
    })?;
    ensure(x.abs() < a, || format!("x must lie in (-a, a), got {x}"))
}

/// `P_k(x) / phi_t(a - x)`.
pub(crate) fn term_p_scaled(k: usize, x: f64, a: f64, t: f64) -> f64 {
    let kf = k as f64;
    let y = a - x;
    let z = a + x;
    let u = 4.0 * kf * a + 2.0 * a;
    let arg = -2.0 * u * z / t;
    let bracket = if arg < -1.0 {
        // u - z = 4ka + y keeps full precision of y = a - x near the top
        4.0 * kf * a + y - (u + z) * arg.exp()
    } else {
        -u * arg.exp_m1() - z * (1.0 + arg.exp())
    };
    (-4.0 * kf * a * (2.0 * kf * a + y) / t).exp() * bracket / t
}

/// `Q_k(x) / phi_T(x)`.
pub(crate) fn term_q_scaled(k: usize, x: f64, a: f64, big_t: f64) -> f64 {
    let kf = k as f64;
    let ax = x.abs();
    let w = a - ax;
    let c1 = 4.0 * kf * a + a;
    let c2 = c1 + 2.0 * a;
    let near = (-4.0 * kf * a * (2.0 * kf * a + ax) / big_t).exp() * -(-2.0 * c1 * w / big_t).exp_m1();
    let m = (4.0 * kf + 2.0) * a;
    let far = (-m * (m + 2.0 * ax) / (2.0 * big_t)).exp() * -(-2.0 * c2 * w / big_t).exp_m1();
    near - far
}

/// `P_k(x) = g_t(4ka + a - x) - g_t(4ka + 3a + x)` with `g_t` the hitting
/// time density.
pub fn term_p(k: usize, x: f64, a: f64, t: f64) -> Result<f64> {
    check(a, t, x)?;
    Ok(term_p_scaled(k, x, a, t) * normal_density(t, a - x))
}

/// `Q_k(x)`, the `k`-th four-image term of `q_a(T, x)`.
pub fn term_q(k: usize, x: f64, a: f64, big_t: f64) -> Result<f64> {
    check(a, big_t, x)?;
    Ok(term_q_scaled(k, x, a, big_t) * normal_density(big_t, x))
}

/// First index at which the partial sums of `term` become nonnegative,
/// with that partial sum.
fn first_nonnegative(what: &str, term: impl Fn(usize) -> f64) -> Result<(usize, f64)> {
    let mut acc = Accumulator::default();
    for n in 0..STAR_SEARCH_CAP {
        acc.add(term(n));
        let s = acc.value();
        if s >= 0.0 {
            return Ok((n, s));
        }
    }
    Err(Error::internal(format!(
        "{what} search exceeded {STAR_SEARCH_CAP} terms"
    )))
}

/// `min{n : sum_{k <= n} P_k(x) >= 0}`.
pub fn p_star(x: f64, a: f64, t: f64) -> Result<usize> {
    check(a, t, x)?;
    first_nonnegative("p*", |k| term_p_scaled(k, x, a, t)).map(|(n, _)| n)
}

/// `min{n : sum_{k <= n} Q_k(x) >= 0}`.
pub fn q_star(x: f64, a: f64, big_t: f64) -> Result<usize> {
    check(a, big_t, x)?;
    first_nonnegative("q*", |k| term_q_scaled(k, x, a, big_t)).map(|(n, _)| n)
}

/// `a_0 = 1`, `a_k = 2k exp(-8 (k-1)^2 a^2 / t)`.
pub fn weight_a(k: usize, a: f64, t: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        let km = (k - 1) as f64;
        2.0 * k as f64 * (-8.0 * km * km * a * a / t).exp()
    }
}

fn ratio_bound_a(k: usize, a: f64, t: f64) -> f64 {
    if k == 0 {
        2.0
    } else {
        let kf = k as f64;
        (kf + 1.0) / kf * (-8.0 * a * a * (2.0 * kf - 1.0) / t).exp()
    }
}

/// `b_k = (2k + 1) exp(-8 k^2 a^2 / T)`.
pub fn weight_b(k: usize, a: f64, big_t: f64) -> f64 {
    let kf = k as f64;
    (2.0 * kf + 1.0) * (-8.0 * kf * kf * a * a / big_t).exp()
}

fn ratio_bound_b(k: usize, a: f64, big_t: f64) -> f64 {
    let kf = k as f64;
    (2.0 * kf + 3.0) / (2.0 * kf + 1.0) * (-8.0 * a * a * (2.0 * kf + 1.0) / big_t).exp()
}

fn positive_sum(what: &'static str, term: impl Fn(usize) -> f64, ratio: impl Fn(usize) -> f64, start: usize) -> Result<f64> {
    let first = term(start);
    let v = sum_geometric_tail(what, first * 1e-15, start, &term, &term, ratio)?;
    Ok(v.value + v.error_bound)
}

/// Upper bound on `sum_k a_k`.
pub fn weight_a_total(a: f64, t: f64) -> Result<f64> {
    Ok(1.0 + positive_sum("sum of a_k", |k| weight_a(k, a, t), |k| ratio_bound_a(k, a, t), 1)?)
}

/// Upper bound on `sum_k b_k`.
pub fn weight_b_total(a: f64, big_t: f64) -> Result<f64> {
    positive_sum("sum of b_k", |k| weight_b(k, a, big_t), |k| ratio_bound_b(k, a, big_t), 0)
}

/// `r_k(x, m)` with the `f_a^+` bound `c phi_t(a - x) (a - x)`.
pub fn ratio_r(k: usize, x: f64, m: usize, a: f64, t: f64, c: f64) -> Result<f64> {
    check(a, t, x)?;
    ensure(c > 0.0, || format!("envelope constant must be > 0, got {c}"))?;
    let denom = c * (a - x) * weight_a(k, a, t);
    let num = if k == 0 {
        let mut acc = Accumulator::default();
        (0..=m).for_each(|j| acc.add(term_p_scaled(j, x, a, t)));
        acc.value()
    } else {
        term_p_scaled(m + k, x, a, t)
    };
    Ok(if num == 0.0 { 0.0 } else { num / denom })
}

/// `s_k(x, m)` with the `q_a` bound `phi_T(x) * bound.shape(x)`.
pub fn ratio_s(k: usize, x: f64, m: usize, a: f64, big_t: f64, bound: QBound) -> Result<f64> {
    check(a, big_t, x)?;
    if k < m {
        return Ok(0.0);
    }
    let denom = bound.shape(a, big_t, x) * weight_b(k, a, big_t);
    let num = if k == m {
        let mut acc = Accumulator::default();
        (0..=m).for_each(|j| acc.add(term_q_scaled(j, x, a, big_t)));
        acc.value()
    } else {
        term_q_scaled(k, x, a, big_t)
    };
    Ok(if num == 0.0 { 0.0 } else { num / denom })
}

/// Draw from the paper's dominating density
/// `gamma(x) ∝ phi_t(a - x) (a - x) phi_T(x) (a - |x|)` on `(-a, a)`.
pub fn sample_gamma_envelope(stream: &mut RandomStream, a: f64, big_t: f64, t: f64) -> Result<f64> {
    check(a, big_t, 0.0)?;
    check(a, t, 0.0)?;
    let (mu, sd) = gauss_product(a, big_t, t);
    loop {
        let x = sample_truncated_normal(stream, mu, sd, -a, a);
        if x.abs() < a && stream.uniform() * 2.0 * a * a <= (a - x) * (a - x.abs()) {
            return Ok(x);
        }
    }
}

/// Mean and sd of the normal proportional to `phi_t(a - x) phi_T(x)`.
fn gauss_product(a: f64, big_t: f64, t: f64) -> (f64, f64) {
    let s = big_t + t;
    (a * big_t / s, (big_t * t / s).sqrt())
}

#[derive(Clone, Copy, Debug)]
enum ExitSideBound {
    Image { c: f64 },
    Eigen { m: f64, l: f64 },
}

#[derive(Clone, Copy, Debug)]
enum PreExitBound {
    Image { bound: QBound },
    Eigen { m: f64, l: f64 },
}

#[derive(Clone, Debug)]
enum Proposal {
    /// Normal truncated to `(-a, a)`, thinned by `(a - x)(a - |x|) / 2a^2`.
    Paper { mu: f64, sd: f64 },
    /// `y = a - x` from `y min(1, kappa y) [gauss]` on `(0, 2a)`.
    Exit { pw: PiecewiseProposal, kappa: f64 },
    /// `w = a - |x|` from `min(1, k1 w) min(1, k2 w) [gauss]` on `(0, a)`.
    Symmetric { pw: PiecewiseProposal },
}

/// Proposal and acceptance counters for one or more draws.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PreExitCounts {
    pub proposals: u64,
    pub accepted: u64,
}

/// Precomputed envelope for fixed `(a, T, t)`; immutable and shareable.
#[derive(Clone, Debug)]
pub struct PreExitSampler {
    a: f64,
    big_t: f64,
    t: f64,
    kind: EnvelopeKind,
    exit_side: ExitSideBound,
    pre_exit: PreExitBound,
    proposal: Proposal,
    acceptance: f64,
}

/// Eigen-form bounds `M >= sup f_a^+(t, .)` and `L` with
/// `f_a^+(t, x) <= L (a - |x|)`.
fn exit_side_eigen_bounds(a: f64, t: f64) -> Result<(f64, f64)> {
    let s = PI * PI * t / (8.0 * a * a);
    let c = PI / (2.0 * a * a);
    let odd = |p: i32| {
        positive_sum(
            "exit-side eigen bound",
            move |k| {
                let m = (2 * k + 1) as f64;
                m.powi(p) * (-m * m * s).exp()
            },
            move |k| {
                let m = (2 * k + 1) as f64;
                ((m + 2.0) / m).powi(p) * (-(4.0 * m + 4.0) * s).exp()
            },
            0,
        )
    };
    let all = |p: i32| {
        positive_sum(
            "exit-side eigen bound",
            move |k| {
                let kf = k as f64;
                kf.powi(p) * (-4.0 * kf * kf * s).exp()
            },
            move |k| {
                let kf = k as f64;
                ((kf + 1.0) / kf).powi(p) * (-4.0 * (2.0 * kf + 1.0) * s).exp()
            },
            1,
        )
    };
    let m = c * (0.5 * odd(1)? + all(1)?);
    let l = c * PI / a * (0.25 * odd(2)? + all(2)?);
    Ok((m, l))
}

/// Eigen-form bounds for `q_a(T, .)`.
fn pre_exit_eigen_bounds(a: f64, big_t: f64) -> Result<(f64, f64)> {
    let s = PI * PI * big_t / (8.0 * a * a);
    let odd = |p: i32| {
        positive_sum(
            "pre-exit eigen bound",
            move |k| {
                let m = (2 * k + 1) as f64;
                m.powi(p) * (-m * m * s).exp()
            },
            move |k| {
                let m = (2 * k + 1) as f64;
                ((m + 2.0) / m).powi(p) * (-(4.0 * m + 4.0) * s).exp()
            },
            0,
        )
    };
    Ok((odd(0)? / a, PI / (2.0 * a * a) * odd(1)?))
}

/// `min(1, k1 w) min(1, k2 w)` on `(0, hi)` as pieces.
fn double_ramp(k1: f64, k2: f64, hi: f64) -> Vec<Piece> {
    let (kl, kh) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
    let b1 = (1.0 / kh).min(hi);
    let b2 = (1.0 / kl).min(hi);
    vec![
        Piece { lo: 0.0, hi: b1, coef: kl * kh, power: 2 },
        Piece { lo: b1, hi: b2, coef: kl, power: 1 },
        Piece { lo: b2, hi, coef: 1.0, power: 0 },
    ]
}

fn ramp_times_linear(kappa: f64, hi: f64) -> Vec<Piece> {
    let b = (1.0 / kappa).min(hi);
    vec![
        Piece { lo: 0.0, hi: b, coef: kappa, power: 2 },
        Piece { lo: b, hi, coef: 1.0, power: 1 },
    ]
}

impl PreExitSampler {
    pub fn new(a: f64, big_t: f64, t: f64, kind: EnvelopeKind) -> Result<Self> {
        check(a, big_t, 0.0)?;
        check(a, t, 0.0)?;
        let a2 = a * a;
        let (exit_side, pre_exit) = match kind {
            EnvelopeKind::Paper => (
                ExitSideBound::Image { c: envelope_constant_cf(a, t)? },
                PreExitBound::Image { bound: QBound::Paper },
            ),
            EnvelopeKind::Adaptive => {
                let f = if t >= EIGEN_EXIT_SIDE_FROM * a2 {
                    let (m, l) = exit_side_eigen_bounds(a, t)?;
                    ExitSideBound::Eigen { m, l }
                } else {
                    ExitSideBound::Image { c: 1.0 / t }
                };
                let q = if big_t >= EIGEN_PRE_EXIT_FROM * a2 {
                    let (m, l) = pre_exit_eigen_bounds(a, big_t)?;
                    PreExitBound::Eigen { m, l }
                } else {
                    PreExitBound::Image { bound: QBound::Capped }
                };
                (f, q)
            }
        };
        let sum_a = match exit_side {
            ExitSideBound::Image { .. } => weight_a_total(a, t)?,
            ExitSideBound::Eigen { .. } => 1.0,
        };
        let sum_b = match pre_exit {
            PreExitBound::Image { .. } => weight_b_total(a, big_t)?,
            PreExitBound::Eigen { .. } => 1.0,
        };
        let kappa_q = match pre_exit {
            PreExitBound::Image { .. } => 4.0 * a / big_t,
            PreExitBound::Eigen { m, l } => l / m,
        };
        // envelope mass = constant * proposal mass; `scaled` marks constants
        // divided by phi_{T + t}(a), which may underflow on its own
        let (proposal, constant, mass, scaled) = match (kind, exit_side, pre_exit) {
            (EnvelopeKind::Paper, ExitSideBound::Image { c }, _) => {
                let (mu, sd) = gauss_product(a, big_t, t);
                let p = proposal::upper_tail((-a - mu) / sd) - proposal::upper_tail((a - mu) / sd);
                let k = c * 4.0 * a / big_t * 2.0 * a2;
                (Proposal::Paper { mu, sd }, k, p, true)
            }
            (_, ExitSideBound::Image { c }, PreExitBound::Image { .. }) => {
                let (mu, sd) = gauss_product(a, big_t, t);
                let pw = PiecewiseProposal::new(Some((a - mu, sd)), &ramp_times_linear(kappa_q, 2.0 * a))
                    .reflected(a, mu);
                let mass = pw.total_mass();
                (Proposal::Exit { pw, kappa: kappa_q }, c, mass, true)
            }
            (_, ExitSideBound::Image { c }, PreExitBound::Eigen { m, .. }) => {
                let pw = PiecewiseProposal::new(Some((0.0, t.sqrt())), &ramp_times_linear(kappa_q, 2.0 * a))
                    .reflected(a, a);
                let mass = pw.total_mass();
                (Proposal::Exit { pw, kappa: kappa_q }, c * m, mass, false)
            }
            (_, ExitSideBound::Eigen { m: mf, l: lf }, q) => {
                let gauss = match q {
                    PreExitBound::Image { .. } => Some((a, big_t.sqrt())),
                    PreExitBound::Eigen { .. } => None,
                };
                let qm = match q {
                    PreExitBound::Image { .. } => 1.0,
                    PreExitBound::Eigen { m, .. } => m,
                };
                let pw = PiecewiseProposal::new(gauss, &double_ramp(lf / mf, kappa_q, a)).reflected(a, 0.0);
                let mass = pw.total_mass();
                (Proposal::Symmetric { pw }, 2.0 * mf * qm, mass, false)
            }
        };
        let envelope_mass = constant * mass * sum_a * sum_b;
        let h = big_t + t;
        let target_mass = if scaled {
            0.5 * exit_density_over_gauss(a, h)?
        } else {
            0.5 * exit_time_density_value(a, h)?
        };
        let acceptance = target_mass / envelope_mass;
        if !(acceptance >= MIN_ACCEPTANCE) {
            return Err(Error::param(format!(
                "pre-exit envelope acceptance {acceptance:e} is below {MIN_ACCEPTANCE:e} at \
                 a = {a}, T = {big_t}, t = {t} ({kind:?} envelope); rescale the problem or use \
                 the adaptive envelope"
            )));
        }
        Ok(PreExitSampler {
            a,
            big_t,
            t,
            kind,
            exit_side,
            pre_exit,
            proposal,
            acceptance,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn big_t(&self) -> f64 {
        self.big_t
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }

    /// Probability that one proposal is accepted.
    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance
    }

    /// True where `f_a^+` is bounded in image form.
    pub fn exit_side_uses_images(&self) -> bool {
        matches!(self.exit_side, ExitSideBound::Image { .. })
    }

    /// True where `q_a` is bounded in image form.
    pub fn pre_exit_uses_images(&self) -> bool {
        matches!(self.pre_exit, PreExitBound::Image { .. })
    }

    /// Envelope of `f_a^+(t, x)` without the weight sum.
    fn exit_side_envelope(&self, x: f64) -> f64 {
        match self.exit_side {
            ExitSideBound::Image { c } => c * normal_density(self.t, self.a - x) * (self.a - x),
            ExitSideBound::Eigen { m, l } => m.min(l * (self.a - x.abs())),
        }
    }

    /// Envelope of `q_a(T, x)` without the weight sum.
    fn pre_exit_envelope(&self, x: f64) -> f64 {
        match self.pre_exit {
            PreExitBound::Image { bound } => {
                normal_density(self.big_t, x) * bound.shape(self.a, self.big_t, x)
            }
            PreExitBound::Eigen { m, l } => m.min(l * (self.a - x.abs())),
        }
    }

    /// `f_a^+(t, x) q_a(T, x)` reassembled from the envelope and the full
    /// ratio series `sum_k a_k r_k` and `sum_k b_k s_k`. Agreement with the
    /// direct densities is the correctness identity of the sampler.
    pub fn implied_target(&self, x: f64) -> Result<f64> {
        check(self.a, self.t, x)?;
        let (a, t, big_t) = (self.a, self.t, self.big_t);
        let f = match self.exit_side {
            ExitSideBound::Image { c } => {
                let m = p_star(x, a, t)?;
                let mut acc = Accumulator::default();
                for k in 0..=200 {
                    let w = weight_a(k, a, t);
                    let r = ratio_r(k, x, m, a, t, c)?;
                    acc.add(w * r);
                    if k > 2 && w * r.abs() < 1e-18 * acc.value().abs() {
                        break;
                    }
                }
                self.exit_side_envelope(x) * acc.value()
            }
            ExitSideBound::Eigen { .. } => exit_side_density(a, t, x, Side::Top, 1e-14 * self.exit_side_envelope(x))?.value,
        };
        let q = match self.pre_exit {
            PreExitBound::Image { bound } => {
                let m = q_star(x, a, big_t)?;
                let mut acc = Accumulator::default();
                for k in m..=m + 200 {
                    let w = weight_b(k, a, big_t);
                    let s = ratio_s(k, x, m, a, big_t, bound)?;
                    acc.add(w * s);
                    if k > m + 2 && w * s.abs() < 1e-18 * acc.value().abs() {
                        break;
                    }
                }
                self.pre_exit_envelope(x) * acc.value()
            }
            PreExitBound::Eigen { .. } => pre_exit_density(a, big_t, x, 1e-14 * self.pre_exit_envelope(x))?.value,
        };
        Ok(f * q)
    }

    /// Largest relative deviation between [`Self::implied_target`] and
    /// `f_a^+ q_a` over `n` equally spaced interior points.
    pub fn identity_defect(&self, n: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 1..=n {
            let x = -self.a + 2.0 * self.a * i as f64 / (n + 1) as f64;
            let implied = self.implied_target(x)?;
            let f = exit_side_density(self.a, self.t, x, Side::Top, 1e-15 * self.exit_side_envelope(x))?;
            let q = pre_exit_density(self.a, self.big_t, x, 1e-15 * self.pre_exit_envelope(x))?;
            let direct = f.value * q.value;
            if direct > 0.0 {
                worst = worst.max((implied - direct).abs() / direct);
            }
        }
        Ok(worst)
    }

    pub fn sample(&self, stream: &mut RandomStream, side: Side) -> Result<f64> {
        self.sample_counted(stream, side, &mut PreExitCounts::default())
    }

    pub fn sample_counted(
        &self,
        stream: &mut RandomStream,
        side: Side,
        counts: &mut PreExitCounts,
    ) -> Result<f64> {
        for _ in 0..ITERATION_CAP {
            counts.proposals += 1;
            if let Some(x) = self.try_once(stream)? {
                counts.accepted += 1;
                return Ok(side.sign() * x);
            }
        }
        Err(Error::internal(format!(
            "pre-exit sampler exceeded {ITERATION_CAP} proposals at a = {}, T = {}, t = {} \
             (a priori acceptance {:e}, {} accepted so far)",
            self.a, self.big_t, self.t, self.acceptance, counts.accepted
        )))
    }

    fn propose(&self, stream: &mut RandomStream) -> Option<f64> {
        let a = self.a;
        match &self.proposal {
            Proposal::Paper { mu, sd } => {
                let x = sample_truncated_normal(stream, *mu, *sd, -a, a);
                (x.abs() < a && stream.uniform() * 2.0 * a * a <= (a - x) * (a - x.abs())).then_some(x)
            }
            Proposal::Exit { pw, kappa } => {
                let x = pw.sample_reflected(stream);
                if !(x.abs() < a) {
                    return None;
                }
                if x < 0.0 {
                    let y = a - x;
                    let keep = (kappa * (2.0 * a - y)).min(1.0) / (kappa * y).min(1.0);
                    if stream.uniform() > keep {
                        return None;
                    }
                }
                Some(x)
            }
            Proposal::Symmetric { pw } => {
                let x = pw.sample_reflected(stream);
                if !(x >= 0.0 && x < a) {
                    return None;
                }
                Some(if stream.coin() { x } else { -x })
            }
        }
    }

    fn try_once(&self, stream: &mut RandomStream) -> Result<Option<f64>> {
        let Some(x) = self.propose(stream) else {
            return Ok(None);
        };
        let (a, t, big_t) = (self.a, self.t, self.big_t);
        let mut base = 1.0;
        if let ExitSideBound::Image { c } = self.exit_side {
            let (m, partial) = first_nonnegative("p*", |k| term_p_scaled(k, x, a, t))?;
            let weights = FnWeights {
                weight: |k| weight_a(k, a, t),
                ratio_bound: |k| ratio_bound_a(k, a, t),
            };
            let k = sample_discrete_certified(stream, &weights)?;
            let num = if k == 0 { partial } else { term_p_scaled(m + k, x, a, t) };
            let r = if num == 0.0 { 0.0 } else { num / (c * (a - x) * weight_a(k, a, t)) };
            debug_assert!((0.0..1.0 + 1e-9).contains(&r), "r = {r} at x = {x}, k = {k}, m = {m}");
            base *= r;
        }
        if let PreExitBound::Image { bound } = self.pre_exit {
            let (m, partial) = first_nonnegative("q*", |k| term_q_scaled(k, x, a, big_t))?;
            let weights = FnWeights {
                weight: |k| weight_b(k, a, big_t),
                ratio_bound: |k| ratio_bound_b(k, a, big_t),
            };
            let k = sample_discrete_certified(stream, &weights)?;
            let s = if k < m || num_is_zero(k, m, partial, x, a, big_t) {
                0.0
            } else {
                let num = if k == m { partial } else { term_q_scaled(k, x, a, big_t) };
                num / (bound.shape(a, big_t, x) * weight_b(k, a, big_t))
            };
            debug_assert!((0.0..1.0 + 1e-9).contains(&s), "s = {s} at x = {x}, k = {k}, m = {m}");
            base *= s;
        }
        let u = stream.uniform();
        if u > base {
            return Ok(None);
        }
        let eigen_f = matches!(self.exit_side, ExitSideBound::Eigen { .. });
        let eigen_q = matches!(self.pre_exit, PreExitBound::Eigen { .. });
        if !eigen_f && !eigen_q {
            return Ok(Some(x));
        }
        let ef = self.exit_side_envelope(x);
        let eq = self.pre_exit_envelope(x);
        let mut rel = 1e-4;
        loop {
            let (mut lo, mut hi, mut mid) = (base, base, base);
            if eigen_f {
                let v = exit_side_density(a, t, x, Side::Top, rel * ef)?;
                lo *= v.lower().max(0.0) / ef;
                hi *= v.upper() / ef;
                mid *= v.value / ef;
                debug_assert!(v.lower() <= ef * (1.0 + 1e-9), "f+ above its envelope at x = {x}, a = {a}, t = {t}");
            }
            if eigen_q {
                let v = pre_exit_density(a, big_t, x, rel * eq)?;
                lo *= v.lower().max(0.0) / eq;
                hi *= v.upper() / eq;
                mid *= v.value / eq;
                debug_assert!(v.lower() <= eq * (1.0 + 1e-9), "q above its envelope at x = {x}, a = {a}, T = {big_t}");
            }
            if u <= lo {
                return Ok(Some(x));
            }
            if u > hi {
                return Ok(None);
            }
            if rel < 1e-15 {
                return Ok((u <= mid).then_some(x));
            }
            rel *= 1e-3;
        }
    }
}

/// `f_a(h)` at the centre to about twelve significant digits.
fn exit_time_density_value(a: f64, h: f64) -> Result<f64> {
    let mut tol = 1e-12 / (a * a);
    loop {
        let v = exit_time_density(a, h, 0.0, tol)?;
        if v.value > 1e6 * tol || tol < 1e-300 {
            return Ok(v.value);
        }
        tol = (v.value * 1e-12).max(tol * 1e-30).max(1e-305);
    }
}

/// `f_a(h) / phi_h(a)` at the centre, stable for small `h`.
fn exit_density_over_gauss(a: f64, h: f64) -> Result<f64> {
    if h >= a * a {
        return Ok(exit_time_density_value(a, h)? / normal_density(h, a));
    }
    let r = a * a / (2.0 * h);
    let term = |k: usize| {
        let kf = k as f64;
        2.0 * (2.0 * kf + 1.0) * a / h * (-4.0 * kf * (kf + 1.0) * r).exp()
    };
    let v = crate::series::sum_alternating("centre exit density", term(0) * 1e-15, term, |_| true)?;
    Ok(v.value)
}

fn num_is_zero(k: usize, m: usize, partial: f64, x: f64, a: f64, big_t: f64) -> bool {
    if k == m {
        partial == 0.0
    } else {
        term_q_scaled(k, x, a, big_t) == 0.0
    }
}

/// One exact draw of `B_T` given `fet_a = T + t` and exit through `side`.
pub fn sample_pre_exit_location(
    stream: &mut RandomStream,
    a: f64,
    big_t: f64,
    t: f64,
    side: Side,
) -> Result<f64> {
    PreExitSampler::new(a, big_t, t, EnvelopeKind::Adaptive)?.sample(stream, side)
}

#[cfg(test)]
mod tests;
