//! Truncated series with certified remainder bounds.

use serde::Serialize;

use crate::error::{Error, Result};

/// Hard cap on the number of series terms summed for one evaluation.
pub const TERM_CAP: usize = 10_000;

/// A series evaluation together with a certified bound on the truncation
/// error: the exact value lies in `[value - error_bound, value + error_bound]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub error_bound: f64,
    pub terms_used: usize,
}

impl SeriesValue {
    pub fn exact(value: f64) -> Self {
        SeriesValue {
            value,
            error_bound: 0.0,
            terms_used: 0,
        }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.error_bound
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error_bound
    }

    /// True when the two certified intervals intersect (with `slack` added
    /// for floating-point roundoff).
    pub fn agrees_with(&self, other: &SeriesValue, slack: f64) -> bool {
        (self.value - other.value).abs() <= self.error_bound + other.error_bound + slack
    }

    pub(crate) fn scale(self, c: f64) -> Self {
        SeriesValue {
            value: self.value * c,
            error_bound: self.error_bound * c.abs(),
            terms_used: self.terms_used,
        }
    }
}

/// Neumaier-compensated accumulator.
#[derive(Default, Clone, Copy)]
pub(crate) struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Sums `sum_k (-1)^k m_k` for magnitudes `m_k >= 0`.
///
/// `monotone_from(j)` must return true only if `m_j >= m_{j+1} >= ...`; the
/// alternating-series bound `|remainder| <= m_{n+1}` is applied only then.
pub(crate) fn sum_alternating(
    what: &'static str,
    tol: f64,
    magnitude: impl Fn(usize) -> f64,
    monotone_from: impl Fn(usize) -> bool,
) -> Result<SeriesValue> {
    let mut acc = Accumulator::default();
    let mut next = magnitude(0);
    for n in 0..TERM_CAP {
        let m = next;
        acc.add(if n % 2 == 0 { m } else { -m });
        next = magnitude(n + 1);
        if monotone_from(n + 1) && next <= tol {
            return Ok(SeriesValue {
                value: acc.value(),
                error_bound: next,
                terms_used: n + 1,
            });
        }
    }
    Err(Error::Truncation {
        what,
        terms: TERM_CAP,
        bound: next,
        tol,
    })
}

/// Sums `sum_{k >= start} term(k)` where `|term(k)| <= envelope(k)` and
/// `ratio_bound(j) >= envelope(i + 1) / envelope(i)` for all `i >= j`.
///
/// The remainder after index `n` is bounded by
/// `envelope(n + 1) / (1 - ratio_bound(n + 1))` once that ratio is below one.
pub(crate) fn sum_geometric_tail(
    what: &'static str,
    tol: f64,
    start: usize,
    term: impl Fn(usize) -> f64,
    envelope: impl Fn(usize) -> f64,
    ratio_bound: impl Fn(usize) -> f64,
) -> Result<SeriesValue> {
    let mut acc = Accumulator::default();
    let mut bound = f64::INFINITY;
    for n in start..start + TERM_CAP {
        acc.add(term(n));
        let rho = ratio_bound(n + 1);
        if rho < 1.0 {
            bound = envelope(n + 1) / (1.0 - rho);
            if bound <= tol {
                return Ok(SeriesValue {
                    value: acc.value(),
                    error_bound: bound,
                    terms_used: n + 1 - start,
                });
            }
        }
    }
    Err(Error::Truncation {
        what,
        terms: TERM_CAP,
        bound,
        tol,
    })
}
