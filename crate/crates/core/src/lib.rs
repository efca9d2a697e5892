//! Cost-aware opportunistic spectrum access.
//!
//! A transmitter can sense channels one at a time (paying a sensing cost),
//! transmit on a channel it found idle, transmit blindly on an unsensed
//! channel, or skip the frame. This crate provides
//!
//! * the optimal double-threshold policy for known statistics ([`offline`]),
//! * a seeded frame simulator with common random numbers ([`env`]),
//! * online learners that estimate the statistics as they go ([`learners`]),
//! * regret series and bound constants ([`analysis`]),
//! * batch experiment orchestration and CSV/JSON reporting ([`harness`]).

pub mod analysis;
pub mod env;
pub mod format;
pub mod harness;
pub mod learners;
pub mod model;
pub mod offline;
pub mod par;

pub use model::{Action, BoundedUniform, CostMeans, FrameRecord, ModelError, SenseObservation, SystemParams};
pub use offline::{
    brute_force_optimal, evaluate_policy, max_sense_depth, solve, Fallback, SequentialPolicy, SlotAction,
    ThresholdPolicy,
};
