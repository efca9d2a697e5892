//! Domain types shared across the crate: channel parameters, cost and reward
//! distributions, per-frame actions and frame records.
//!
//! Channel indices are 0-based positions in the *sorted* channel list
//! (descending idle probability). [`SystemParams::labels`] maps them back to
//! the order in which the caller supplied the channels.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("channel set is empty")]
    EmptyChannelSet,
    #[error("idle probability of channel {channel} is {theta}, expected a value in (0, 1]")]
    InvalidTheta { channel: usize, theta: f64 },
    #[error("mean reward {reward} does not exceed mean transmission cost {tx_cost}")]
    NonpositiveMargin { reward: f64, tx_cost: f64 },
    #[error("invalid {name} distribution: lower = {lower}, width = {width}")]
    InvalidDistribution { name: &'static str, lower: f64, width: f64 },
}

/// Uniform distribution on `[lower, lower + width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedUniform {
    pub lower: f64,
    pub width: f64,
}

impl BoundedUniform {
    pub fn new(lower: f64, width: f64) -> Self {
        Self { lower, width }
    }

    /// Distribution with the given mean and support width.
    pub fn from_mean(mean: f64, width: f64) -> Self {
        Self {
            lower: mean - width / 2.0,
            width,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    pub fn mean(&self) -> f64 {
        self.lower + self.width / 2.0
    }

    pub fn upper(&self) -> f64 {
        self.lower + self.width
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper()
    }

    /// Maps a unit-interval draw onto the support.
    pub fn quantile(&self, u: f64) -> f64 {
        self.lower + self.width * u
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    fn validate(&self, name: &'static str) -> Result<(), ModelError> {
        let ok = self.lower.is_finite() && self.width.is_finite() && self.lower >= 0.0 && self.width >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidDistribution {
                name,
                lower: self.lower,
                width: self.width,
            })
        }
    }
}

/// Validated system parameters with channels sorted by descending idle
/// probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    thetas: Vec<f64>,
    labels: Vec<usize>,
    reward: BoundedUniform,
    sense_cost: BoundedUniform,
    tx_cost: BoundedUniform,
}

impl SystemParams {
    /// Validates and sorts the channel set. Ties keep the supplied order.
    pub fn new(
        thetas: Vec<f64>,
        reward: BoundedUniform,
        sense_cost: BoundedUniform,
        tx_cost: BoundedUniform,
    ) -> Result<Self, ModelError> {
        if thetas.is_empty() {
            return Err(ModelError::EmptyChannelSet);
        }
        for (channel, &theta) in thetas.iter().enumerate() {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(ModelError::InvalidTheta { channel, theta });
            }
        }
        reward.validate("reward")?;
        sense_cost.validate("sensing cost")?;
        tx_cost.validate("transmission cost")?;
        if reward.mean() - tx_cost.mean() <= 0.0 {
            return Err(ModelError::NonpositiveMargin {
                reward: reward.mean(),
                tx_cost: tx_cost.mean(),
            });
        }

        let mut labels: Vec<usize> = (0..thetas.len()).collect();
        // stable: equal thetas keep their original relative order
        labels.sort_by(|&a, &b| thetas[b].total_cmp(&thetas[a]));
        let sorted = labels.iter().map(|&i| thetas[i]).collect();
        Ok(Self {
            thetas: sorted,
            labels,
            reward,
            sense_cost,
            tx_cost,
        })
    }

    /// Same distributions, different channel set.
    pub fn with_thetas(&self, thetas: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(thetas, self.reward, self.sense_cost, self.tx_cost)
    }

    pub fn num_channels(&self) -> usize {
        self.thetas.len()
    }

    /// Idle probabilities, sorted descending.
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// `labels()[i]` is the caller's index of sorted channel `i`.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn reward(&self) -> BoundedUniform {
        self.reward
    }

    pub fn sense_cost(&self) -> BoundedUniform {
        self.sense_cost
    }

    pub fn tx_cost(&self) -> BoundedUniform {
        self.tx_cost
    }

    pub fn means(&self) -> CostMeans {
        CostMeans {
            reward: self.reward.mean(),
            sense: self.sense_cost.mean(),
            tx: self.tx_cost.mean(),
        }
    }
}

/// Mean reward `b0`, sensing cost `c0` and transmission cost `p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostMeans {
    pub reward: f64,
    pub sense: f64,
    pub tx: f64,
}

impl CostMeans {
    /// `b0 - p0`, the expected gain of a transmission on an idle channel.
    pub fn margin(&self) -> f64 {
        self.reward - self.tx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Sense(usize),
    /// Transmit on a channel sensed idle in this frame.
    Access(usize),
    /// Transmit on a channel that was not sensed in this frame.
    Guess(usize),
    Quit,
}

impl Action {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Action::Sense(_))
    }

    /// The transmission channel, if any.
    pub fn tx_channel(&self) -> Option<usize> {
        match *self {
            Action::Access(ch) | Action::Guess(ch) => Some(ch),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Action::Sense(_) => "sense",
            Action::Access(_) => "access",
            Action::Guess(_) => "guess",
            Action::Quit => "quit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenseObservation {
    pub channel: usize,
    pub idle: bool,
    pub cost: f64,
}

/// Everything observed in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub sensed: Vec<SenseObservation>,
    pub final_action: Action,
    pub realized_reward: f64,
    pub realized_tx_cost: f64,
    pub net_reward: f64,
}

impl FrameRecord {
    pub fn total_sense_cost(&self) -> f64 {
        self.sensed.iter().map(|s| s.cost).sum()
    }
}
