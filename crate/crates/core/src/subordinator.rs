//! First passage triplets `(t, S_{t-}, S_t)` of the subordinators that drive
//! the embedding, with optional horizon truncation.
//!
//! The index-1/2 stable subordinator is the hitting-time process of a
//! Brownian motion, so its marginal and every piece of its first passage
//! law are closed form. For a level `h`,
//!
//! - the undershoot `S_{t-}` is arcsine on `(0, h)`,
//! - given the undershoot `s`, the passage time is Rayleigh with scale
//!   `sqrt(s) / sigma`,
//! - given `s`, the jump `S_t - s` has tail `sqrt((h - s) / w)` on
//!   `w >= h - s`.
//!
//! The drift subordinator `S_t = delta2 * t` always creeps.

use serde::Serialize;

use crate::error::{ensure, Result};
use crate::samplers::{sample_arcsine, sample_exp1, sample_normal_tail, standard_normal};
use crate::stream::RandomStream;

/// How the level was crossed, or that it was not crossed before the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PassageKind {
    /// `s_minus < h < s_plus`.
    Jump,
    /// `s_minus = s_plus = h`.
    Creep,
    /// `t` is the horizon and `s_minus = s_plus <= h`.
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FirstPassageTriplet {
    pub t: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    pub kind: PassageKind,
}

impl FirstPassageTriplet {
    /// Checks the classification invariant for a level `h` and `horizon`.
    pub fn is_consistent(&self, h: f64, horizon: f64) -> bool {
        let t_ok = self.t > 0.0 && self.t <= horizon;
        t_ok && match self.kind {
            PassageKind::Jump => self.s_minus <= h && h <= self.s_plus && self.s_minus < self.s_plus,
            PassageKind::Creep => self.s_minus == h && self.s_plus == h,
            PassageKind::Horizon => {
                self.t == horizon && self.s_minus == self.s_plus && self.s_minus <= h
            }
        }
    }
}

/// Index-1/2 stable subordinator with Laplace exponent `sigma sqrt(2 lambda)`
/// and Lévy density `sigma y^{-3/2} / sqrt(2 pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StableHalfParams {
    pub sigma: f64,
}

/// Scale `sigma` of the subordinator whose subordinated Brownian motion has
/// Lévy density `c |x|^{-2}`.
pub fn levy_to_scale(c: f64) -> Result<f64> {
    ensure(c.is_finite() && c > 0.0, || {
        format!("Lévy coefficient c must be finite and > 0, got {c}")
    })?;
    Ok(c * std::f64::consts::PI)
}

impl StableHalfParams {
    pub fn new(sigma: f64) -> Result<Self> {
        ensure(sigma.is_finite() && sigma > 0.0, || {
            format!("stable scale sigma must be finite and > 0, got {sigma}")
        })?;
        Ok(StableHalfParams { sigma })
    }

    pub fn from_levy_coefficient(c: f64) -> Result<Self> {
        Self::new(levy_to_scale(c)?)
    }

    /// `sigma y^{-3/2} / sqrt(2 pi)`.
    pub fn levy_density(&self, y: f64) -> f64 {
        self.sigma * y.powf(-1.5) / (2.0 * std::f64::consts::PI).sqrt()
    }

    /// `P{S_u <= h} = erfc(sigma u / sqrt(2h))`.
    pub fn prob_below(&self, u: f64, h: f64) -> f64 {
        libm::erfc(self.sigma * u / (2.0 * h).sqrt())
    }

    /// `S_u = sigma^2 u^2 / Z^2`.
    pub fn sample_marginal(&self, stream: &mut RandomStream, u: f64) -> Result<f64> {
        ensure(u.is_finite() && u > 0.0, || {
            format!("subordinator time must be finite and > 0, got {u}")
        })?;
        let z = loop {
            let z = standard_normal(stream);
            if z != 0.0 {
                break z;
            }
        };
        let r = self.sigma * u / z;
        Ok(r * r)
    }

    /// `S_u` conditioned on `S_u <= h`, i.e. `|Z| >= sigma u / sqrt(h)`.
    pub fn sample_marginal_below(&self, stream: &mut RandomStream, u: f64, h: f64) -> Result<f64> {
        ensure(u.is_finite() && u > 0.0 && h.is_finite() && h > 0.0, || {
            format!("need finite u > 0 and h > 0, got u = {u}, h = {h}")
        })?;
        let lower = self.sigma * u / h.sqrt();
        loop {
            let z = sample_normal_tail(stream, lower);
            let r = self.sigma * u / z;
            let s = r * r;
            if s <= h {
                return Ok(s);
            }
        }
    }

    pub fn sample_first_passage(&self, stream: &mut RandomStream, h: f64) -> Result<FirstPassageTriplet> {
        check_level(h)?;
        let s_minus = sample_arcsine(stream, h)?;
        let t = s_minus.sqrt() / self.sigma * (2.0 * sample_exp1(stream)).sqrt();
        let u = stream.uniform();
        let s_plus = s_minus + (h - s_minus) / (u * u);
        Ok(FirstPassageTriplet {
            t,
            s_minus,
            s_plus,
            kind: PassageKind::Jump,
        })
    }

    /// `(min(theta, u), S_{min-}, S_min)`; `horizon = inf` disables truncation.
    pub fn sample_first_passage_with_horizon(
        &self,
        stream: &mut RandomStream,
        h: f64,
        horizon: f64,
    ) -> Result<FirstPassageTriplet> {
        check_horizon(horizon)?;
        let triplet = self.sample_first_passage(stream, h)?;
        if triplet.t <= horizon {
            return Ok(triplet);
        }
        // theta > u iff S_u <= h, so the conditional law is S_u given S_u <= h
        let s = self.sample_marginal_below(stream, horizon, h)?;
        Ok(FirstPassageTriplet {
            t: horizon,
            s_minus: s,
            s_plus: s,
            kind: PassageKind::Horizon,
        })
    }
}

/// Deterministic `S_t = delta2 t`.
pub fn drift_first_passage(delta2: f64, h: f64, horizon: f64) -> Result<FirstPassageTriplet> {
    ensure(delta2.is_finite() && delta2 > 0.0, || {
        format!("drift delta^2 must be finite and > 0, got {delta2}")
    })?;
    check_level(h)?;
    check_horizon(horizon)?;
    let theta = h / delta2;
    Ok(if theta <= horizon {
        FirstPassageTriplet {
            t: theta,
            s_minus: h,
            s_plus: h,
            kind: PassageKind::Creep,
        }
    } else {
        let s = (delta2 * horizon).min(h);
        FirstPassageTriplet {
            t: horizon,
            s_minus: s,
            s_plus: s,
            kind: PassageKind::Horizon,
        }
    })
}

fn check_level(h: f64) -> Result<()> {
    ensure(h.is_finite() && h > 0.0, || format!("level h must be finite and > 0, got {h}"))
}

fn check_horizon(horizon: f64) -> Result<()> {
    ensure(horizon > 0.0, || format!("horizon must be > 0, got {horizon}"))
}

/// The subordinators supported by the engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Subordinator {
    /// Driftless index-1/2 stable; the subordinated process is Cauchy-like.
    StableHalf(StableHalfParams),
    /// `S_t = delta2 t`; the subordinated process is `delta B`.
    Drift { delta2: f64 },
}

impl Subordinator {
    pub fn stable_half(c: f64) -> Result<Self> {
        Ok(Subordinator::StableHalf(StableHalfParams::from_levy_coefficient(c)?))
    }

    pub fn drift(delta2: f64) -> Result<Self> {
        ensure(delta2.is_finite() && delta2 > 0.0, || {
            format!("drift delta^2 must be finite and > 0, got {delta2}")
        })?;
        Ok(Subordinator::Drift { delta2 })
    }

    pub fn first_passage(
        &self,
        stream: &mut RandomStream,
        h: f64,
        horizon: f64,
    ) -> Result<FirstPassageTriplet> {
        match *self {
            Subordinator::StableHalf(p) => p.sample_first_passage_with_horizon(stream, h, horizon),
            Subordinator::Drift { delta2 } => drift_first_passage(delta2, h, horizon),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn scale_from_levy_coefficient() {
        assert!((levy_to_scale(1.0 / std::f64::consts::PI).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(levy_to_scale(2.0).unwrap(), 2.0 * levy_to_scale(1.0).unwrap());
        // c sqrt(pi / 2) y^{-3/2} is the Lévy density c / d_{1/2} y^{-3/2}
        let c = 0.37;
        let p = StableHalfParams::from_levy_coefficient(c).unwrap();
        for y in [0.1f64, 1.0, 10.0] {
            let want = c * (std::f64::consts::PI / 2.0).sqrt() * y.powf(-1.5);
            assert!((p.levy_density(y) - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn drift_cases() {
        let t = drift_first_passage(1.0, 2.0, f64::INFINITY).unwrap();
        assert_eq!((t.t, t.s_minus, t.s_plus, t.kind), (2.0, 2.0, 2.0, PassageKind::Creep));
        let t = drift_first_passage(4.0, 2.0, 0.25).unwrap();
        assert_eq!((t.t, t.s_minus, t.s_plus, t.kind), (0.25, 1.0, 1.0, PassageKind::Horizon));
        assert!(t.is_consistent(2.0, 0.25));
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut s = RandomStream::new(1, 0);
        let p = StableHalfParams::new(1.0).unwrap();
        assert!(matches!(p.sample_first_passage(&mut s, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(p.sample_first_passage_with_horizon(&mut s, 1.0, 0.0), Err(Error::Parameter(_))));
        assert!(StableHalfParams::new(-1.0).is_err());
        assert!(Subordinator::drift(0.0).is_err());
        assert!(Subordinator::stable_half(f64::NAN).is_err());
    }

    #[test]
    fn horizon_branch_stays_below_level() {
        let mut s = RandomStream::new(2, 0);
        let p = StableHalfParams::new(1.3).unwrap();
        let mut hits = 0;
        for _ in 0..20_000 {
            let tr = p.sample_first_passage_with_horizon(&mut s, 0.7, 0.4).unwrap();
            assert!(tr.is_consistent(0.7, 0.4), "{tr:?}");
            if tr.kind == PassageKind::Horizon {
                hits += 1;
            }
        }
        assert!(hits > 0);
    }
}
