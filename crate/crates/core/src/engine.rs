//! Exact first exit events `(time, X_{time-}, X_time)` of a symmetric Lévy
//! process `X_t = B_{S_t}` with jumps larger than `r` removed, for an
//! interval `(b, c)` around the origin and a horizon `t0`.
//!
//! Each iteration runs a fresh Brownian motion until it leaves
//! `(W - a, W + a)`, where `a` keeps the whole window inside `(b, c)` and
//! below `r / 2`. The subordinator then decides whether the process jumped
//! over the Brownian exit time (pre-exit location plus a Gaussian jump),
//! crept onto it, or ran into the horizon first.

use serde::Serialize;

use crate::densities::Side;
use crate::error::{ensure, Error, Result};
use crate::pre_exit::{EnvelopeKind, PreExitSampler};
use crate::exit_time::sample_exit_time;
use crate::samplers::sample_normal;
use crate::stream::RandomStream;
use crate::subordinator::{FirstPassageTriplet, PassageKind, Subordinator};

/// Default cap on engine iterations per event.
pub const ITERATION_CAP: u64 = 100_000;

/// The process: subordinator plus jump truncation radius `r` (may be `inf`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProcessSpec {
    pub r: f64,
    pub subordinator: Subordinator,
}

impl ProcessSpec {
    pub fn new(r: f64, subordinator: Subordinator) -> Result<Self> {
        ensure(r > 0.0, || format!("truncation radius r must be > 0, got {r}"))?;
        Ok(ProcessSpec { r, subordinator })
    }
}

/// Interval `(b, c)` with `b < 0 < c` (either may be infinite) and horizon
/// `t0` in `(0, inf]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExitProblem {
    pub b: f64,
    pub c: f64,
    pub t0: f64,
}

impl ExitProblem {
    pub fn new(b: f64, c: f64, t0: f64) -> Result<Self> {
        ensure(b < 0.0 && c > 0.0, || format!("need b < 0 < c, got b = {b}, c = {c}"))?;
        ensure(t0 > 0.0, || format!("horizon t0 must be > 0, got {t0}"))?;
        Ok(ExitProblem { b, c, t0 })
    }

    /// An unbounded interval needs a finite `r` and a finite horizon.
    pub fn check(&self, spec: &ProcessSpec) -> Result<()> {
        ExitProblem::new(self.b, self.c, self.t0)?;
        ensure(self.b.is_finite() || self.c.is_finite() || (spec.r.is_finite() && self.t0.is_finite()), || {
            "with b = -inf and c = inf both r and t0 must be finite".to_string()
        })?;
        ensure(spec.r > 0.0, || format!("truncation radius r must be > 0, got {}", spec.r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Exit,
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PassageEvent {
    pub time: f64,
    pub pre_value: f64,
    pub value: f64,
    pub stopped_by: StopReason,
    /// `None` when stopped by the horizon.
    pub side: Option<Side>,
    pub iterations: u64,
    pub retained_jumps: u64,
    pub discarded_jumps: u64,
    /// Largest `|D|` kept, `0` if none.
    pub max_retained_jump: f64,
    /// Smallest `|d|` thrown away, `inf` if none.
    pub min_discarded_jump: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EngineOptions {
    pub envelope: EnvelopeKind,
    pub iteration_cap: u64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            envelope: EnvelopeKind::Adaptive,
            iteration_cap: ITERATION_CAP,
        }
    }
}

/// Elapsed time `T` and current position `W`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EngineState {
    pub time: f64,
    pub position: f64,
}

/// Everything one iteration drew.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub a: f64,
    pub exit_time: f64,
    pub exit_value: f64,
    pub triplet: FirstPassageTriplet,
    /// Brownian position at the undershoot `s_minus`.
    pub pre_exit: f64,
    /// Proposed jump `y - x + u`, `None` unless the subordinator jumped.
    pub proposed_jump: Option<f64>,
    /// Jump actually applied.
    pub jump: f64,
    pub state: EngineState,
    pub hit_horizon: bool,
}

/// One iteration from `state`. Requires `T < t0` and `W` in `(b, c)`.
pub fn step(
    state: EngineState,
    spec: &ProcessSpec,
    problem: &ExitProblem,
    options: &EngineOptions,
    stream: &mut RandomStream,
) -> Result<StepRecord> {
    let EngineState { time, position: w } = state;
    ensure(time < problem.t0 && w > problem.b && w < problem.c, || {
        format!("step needs T < t0 and b < W < c, got T = {time}, W = {w}")
    })?;
    let to_top = problem.c - w;
    let to_bottom = w - problem.b;
    let a = (0.5 * spec.r).min(to_top).min(to_bottom);
    let h = sample_exit_time(stream, a)?;
    let side = if stream.coin() { Side::Top } else { Side::Bottom };
    let y = side.sign() * a;
    let horizon = problem.t0 - time;
    let triplet = spec.subordinator.first_passage(stream, h, horizon)?;

    let pre_exit = match triplet.kind {
        PassageKind::Creep => y,
        PassageKind::Jump | PassageKind::Horizon => {
            let (s, rest) = (triplet.s_minus, h - triplet.s_minus);
            if s <= 0.0 {
                0.0
            } else if rest <= 0.0 {
                y
            } else {
                PreExitSampler::new(a, s, rest, options.envelope)?.sample(stream, side)?
            }
        }
    };
    let proposed_jump = if triplet.kind == PassageKind::Jump {
        let u = sample_normal(stream, 0.0, (triplet.s_plus - h).max(0.0))?;
        Some(y - pre_exit + u)
    } else {
        None
    };
    let jump = match proposed_jump {
        Some(d) if d.abs() <= spec.r => d,
        _ => 0.0,
    };

    // land exactly on the boundary when the window was pinned to it
    let mut pre = (w + pre_exit).clamp(problem.b, problem.c);
    if pre_exit == y {
        if side == Side::Top && a == to_top {
            pre = problem.c;
        } else if side == Side::Bottom && a == to_bottom {
            pre = problem.b;
        }
    }
    let hit_horizon = triplet.kind == PassageKind::Horizon;
    let new_time = if hit_horizon { problem.t0 } else { (time + triplet.t).min(problem.t0) };
    Ok(StepRecord {
        a,
        exit_time: h,
        exit_value: y,
        triplet,
        pre_exit,
        proposed_jump,
        jump,
        state: EngineState {
            time: new_time,
            position: pre + jump,
        },
        hit_horizon,
    })
}

/// One exact draw of the first exit event with default options.
pub fn sample_passage_event(
    spec: &ProcessSpec,
    problem: &ExitProblem,
    stream: &mut RandomStream,
) -> Result<PassageEvent> {
    sample_passage_event_with(spec, problem, &EngineOptions::default(), stream, |_| {})
}

/// [`sample_passage_event`] with explicit options and a per-step observer.
pub fn sample_passage_event_with(
    spec: &ProcessSpec,
    problem: &ExitProblem,
    options: &EngineOptions,
    stream: &mut RandomStream,
    mut observe: impl FnMut(&StepRecord),
) -> Result<PassageEvent> {
    problem.check(spec)?;
    let mut state = EngineState {
        time: 0.0,
        position: 0.0,
    };
    let mut event = PassageEvent {
        time: 0.0,
        pre_value: 0.0,
        value: 0.0,
        stopped_by: StopReason::Exit,
        side: None,
        iterations: 0,
        retained_jumps: 0,
        discarded_jumps: 0,
        max_retained_jump: 0.0,
        min_discarded_jump: f64::INFINITY,
    };
    while event.iterations < options.iteration_cap {
        let rec = step(state, spec, problem, options, stream)?;
        observe(&rec);
        event.iterations += 1;
        if let Some(d) = rec.proposed_jump {
            if rec.jump != 0.0 || d == 0.0 {
                event.retained_jumps += 1;
                event.max_retained_jump = event.max_retained_jump.max(d.abs());
            } else {
                event.discarded_jumps += 1;
                event.min_discarded_jump = event.min_discarded_jump.min(d.abs());
            }
        }
        state = rec.state;
        let w = state.position;
        let exited = w <= problem.b || w >= problem.c;
        if rec.hit_horizon || exited {
            event.time = state.time;
            event.pre_value = w - rec.jump;
            event.value = w;
            if exited {
                event.stopped_by = StopReason::Exit;
                event.side = Some(if w >= problem.c { Side::Top } else { Side::Bottom });
            } else {
                event.stopped_by = StopReason::Horizon;
            }
            return Ok(event);
        }
    }
    Err(Error::internal(format!(
        "engine exceeded {} iterations: T = {}, W = {}, retained jumps {}, discarded jumps {}",
        options.iteration_cap, state.time, state.position, event.retained_jumps, event.discarded_jumps
    )))
}
