//! Exact sampling of first exit events `(time, pre-exit value, exit value)`
//! for symmetric Lévy processes with unbounded variation that embed into a
//! subordinated standard Brownian motion.
//!
//! The building blocks are exact samplers for the Brownian first exit time
//! from a symmetric interval ([`exit_time`]), for the Brownian position at an
//! interior time conditional on the exit time and side ([`pre_exit`]), and
//! for subordinator first passage triplets ([`subordinator`]). The
//! [`engine`] chains them into the embedding iteration.

// `!(x > 0.0)` style guards are there to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densities;
pub mod engine;
pub mod error;
pub mod exit_time;
pub mod pre_exit;
pub mod samplers;
pub mod series;
pub mod stream;
pub mod subordinator;
pub mod validation;

pub use densities::Side;

pub use error::{Error, Result};
pub use series::SeriesValue;
pub use stream::RandomStream;

pub use engine::{sample_passage_event, ExitProblem, PassageEvent, ProcessSpec, StopReason};
pub use subordinator::{FirstPassageTriplet, Subordinator};
