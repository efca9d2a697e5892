//! Online strategies that learn the channel statistics while transmitting.
//!
//! * [`LearnerKind::Alg1`] separates exploration from exploitation: a channel
//!   is explored while its exploration count is below `L·ln t + D`, and
//!   otherwise the threshold policy is solved on the empirical estimates.
//! * [`LearnerKind::EpsGreedy`] explores every channel with probability `ε`.
//! * [`LearnerKind::Thompson`] samples idle probabilities from Beta
//!   posteriors and acts on the sampled instance.
//!
//! Alg1 and ε-greedy spend frame 1 sensing every channel.

mod constants;
mod estimator;

pub use constants::{recommended_ld, ConstantsError, ExplorationConstants};
pub use estimator::EstimatorState;

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{sense_all_decider, sequential_decider, InfoState, RngStream};
use crate::model::{Action, CostMeans, FrameRecord};
use crate::offline::{solve_with, SequentialPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("channel {channel} has no observations at exploitation time")]
    EstimatesUnavailable { channel: usize },
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Alg1,
    EpsGreedy,
    Thompson,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Alg1 => "alg1",
            LearnerKind::EpsGreedy => "eps_greedy",
            LearnerKind::Thompson => "thompson",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Exploration slope `L`.
    pub explore_slope: f64,
    /// Exploration offset `D`.
    pub explore_offset: f64,
    pub epsilon: f64,
    /// Thompson sampling uses the true `b0, c0, p0` instead of estimates.
    pub ts_known_costs: bool,
}

impl LearnerConfig {
    pub fn alg1(explore_slope: f64, explore_offset: f64) -> Self {
        Self {
            kind: LearnerKind::Alg1,
            explore_slope,
            explore_offset,
            epsilon: 0.0,
            ts_known_costs: true,
        }
    }

    /// Alg1 with `D = L·ln(2K)/2`.
    pub fn alg1_default_offset(explore_slope: f64, num_channels: usize) -> Self {
        Self::alg1(explore_slope, default_offset(explore_slope, num_channels))
    }

    pub fn eps_greedy(epsilon: f64) -> Self {
        Self {
            kind: LearnerKind::EpsGreedy,
            explore_slope: 0.0,
            explore_offset: 0.0,
            epsilon,
            ts_known_costs: true,
        }
    }

    pub fn thompson(known_costs: bool) -> Self {
        Self {
            kind: LearnerKind::Thompson,
            explore_slope: 0.0,
            explore_offset: 0.0,
            epsilon: 0.0,
            ts_known_costs: known_costs,
        }
    }

    /// `D(t) = L·ln t + D`.
    pub fn exploration_target(&self, t: u64) -> f64 {
        self.explore_slope * (t as f64).ln() + self.explore_offset
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        match self.kind {
            LearnerKind::Alg1 if !(self.explore_slope > 0.0 && self.explore_offset > 0.0) => {
                Err(LearnerError::InvalidConfig(format!(
                    "alg1 needs L > 0 and D > 0, got L = {}, D = {}",
                    self.explore_slope, self.explore_offset
                )))
            }
            LearnerKind::EpsGreedy if !(0.0..=1.0).contains(&self.epsilon) => Err(LearnerError::InvalidConfig(
                format!("epsilon must lie in [0, 1], got {}", self.epsilon),
            )),
            _ => Ok(()),
        }
    }
}

/// `L·ln(2K)/2`, the offset paired with slope `L` in the reference experiments.
pub fn default_offset(explore_slope: f64, num_channels: usize) -> f64 {
    explore_slope * (2.0 * num_channels as f64).ln() / 2.0
}

/// What a learner does in one frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FramePlan {
    /// Sense every listed channel, then transmit on the lowest-indexed idle one.
    Explore(Vec<usize>),
    /// Execute a sequential policy.
    Exploit(SequentialPolicy),
}

impl FramePlan {
    pub fn is_exploration(&self) -> bool {
        matches!(self, FramePlan::Explore(_))
    }

    pub fn decider(&self) -> Box<dyn FnMut(&InfoState<'_>) -> Action + '_> {
        match self {
            FramePlan::Explore(channels) => Box::new(sense_all_decider(channels)),
            FramePlan::Exploit(policy) => Box::new(sequential_decider(policy)),
        }
    }

    fn explored(&self) -> Option<&[usize]> {
        match self {
            FramePlan::Explore(channels) => Some(channels),
            FramePlan::Exploit(_) => None,
        }
    }
}

fn explore_all(num_channels: usize) -> FramePlan {
    FramePlan::Explore((0..num_channels).collect())
}

/// Channel indices sorted by descending score, ties by index.
fn rank_channels(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Solves the threshold policy on an estimated instance and maps it back to
/// channel indices.
pub fn plan_from_estimates(thetas: &[f64], means: CostMeans) -> SequentialPolicy {
    let order = rank_channels(thetas);
    let sorted: Vec<f64> = order.iter().map(|&i| thetas[i]).collect();
    solve_with(&sorted, means).to_sequential(&order)
}

fn exploit(state: &EstimatorState) -> Result<FramePlan, LearnerError> {
    let mut thetas = Vec::with_capacity(state.num_channels());
    for channel in 0..state.num_channels() {
        thetas.push(
            state
                .theta_hat(channel)
                .ok_or(LearnerError::EstimatesUnavailable { channel })?,
        );
    }
    // no transmission observed yet: gather one by exploring everything
    let Some(means) = state.cost_means() else {
        return Ok(explore_all(state.num_channels()));
    };
    Ok(FramePlan::Exploit(plan_from_estimates(&thetas, means)))
}

/// Decoupled exploration/exploitation decision for frame `t`.
pub fn alg1_decide(state: &EstimatorState, t: u64, cfg: &LearnerConfig) -> Result<FramePlan, LearnerError> {
    if t <= 1 {
        return Ok(explore_all(state.num_channels()));
    }
    let target = cfg.exploration_target(t);
    let explore: Vec<usize> = (0..state.num_channels())
        .filter(|&i| (state.explore_counts[i] as f64) < target)
        .collect();
    if explore.is_empty() {
        exploit(state)
    } else {
        Ok(FramePlan::Explore(explore))
    }
}

/// Explore all channels with probability `ε`, otherwise exploit.
pub fn eps_greedy_decide(
    state: &EstimatorState,
    t: u64,
    cfg: &LearnerConfig,
    rng: &mut RngStream,
) -> Result<FramePlan, LearnerError> {
    if t <= 1 {
        return Ok(explore_all(state.num_channels()));
    }
    if rng.uniform() < cfg.epsilon {
        Ok(explore_all(state.num_channels()))
    } else {
        exploit(state)
    }
}

/// Posterior sample of every channel's idle probability.
pub fn thompson_sample(state: &EstimatorState, rng: &mut RngStream) -> Vec<f64> {
    (0..state.num_channels())
        .map(|k| {
            let alpha = state.beta_success[k] as f64 + 1.0;
            let beta = state.beta_failure[k] as f64 + 1.0;
            Beta::new(alpha, beta)
                .expect("positive shape parameters")
                .sample(rng.rng())
        })
        .collect()
}

/// Acts on a posterior sample. With unknown costs, frames before the first
/// transmission explore every channel.
pub fn thompson_decide(
    state: &EstimatorState,
    cfg: &LearnerConfig,
    true_means: CostMeans,
    rng: &mut RngStream,
) -> Result<FramePlan, LearnerError> {
    let sampled = thompson_sample(state, rng);
    let means = if cfg.ts_known_costs {
        true_means
    } else {
        match state.cost_means() {
            Some(m) => m,
            None => return Ok(explore_all(state.num_channels())),
        }
    };
    Ok(FramePlan::Exploit(plan_from_estimates(&sampled, means)))
}

/// A learner together with its estimator state and private random stream.
#[derive(Debug, Clone)]
pub struct OnlineLearner {
    cfg: LearnerConfig,
    state: EstimatorState,
    rng: RngStream,
    true_means: CostMeans,
    guess_reveals_state: bool,
}

impl OnlineLearner {
    /// `true_means` is only read by Thompson sampling with known costs.
    /// `guess_reveals_state` should be true when rewards on idle channels are
    /// strictly positive.
    pub fn new(
        cfg: LearnerConfig,
        num_channels: usize,
        true_means: CostMeans,
        guess_reveals_state: bool,
        rng: RngStream,
    ) -> Result<Self, LearnerError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: EstimatorState::new(num_channels),
            rng,
            true_means,
            guess_reveals_state,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EstimatorState {
        &self.state
    }

    pub fn plan(&mut self, t: u64) -> Result<FramePlan, LearnerError> {
        match self.cfg.kind {
            LearnerKind::Alg1 => alg1_decide(&self.state, t, &self.cfg),
            LearnerKind::EpsGreedy => eps_greedy_decide(&self.state, t, &self.cfg, &mut self.rng),
            LearnerKind::Thompson => thompson_decide(&self.state, &self.cfg, self.true_means, &mut self.rng),
        }
    }

    pub fn observe(&mut self, plan: &FramePlan, record: &FrameRecord) {
        self.state.update(record, plan.explored(), self.guess_reveals_state);
    }
}
