use serde::{Deserialize, Serialize};

use crate::model::{Action, CostMeans, FrameRecord};

/// Counters and running sums behind the empirical estimates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatorState {
    /// Exploration samples per channel, `T_i(t)`.
    pub explore_counts: Vec<u64>,
    pub obs_counts: Vec<u64>,
    pub idle_counts: Vec<u64>,
    pub sense_cost_sum: f64,
    pub sense_cost_count: u64,
    pub reward_sum: f64,
    pub reward_count: u64,
    pub tx_cost_sum: f64,
    pub tx_cost_count: u64,
    pub beta_success: Vec<u64>,
    pub beta_failure: Vec<u64>,
}

impl EstimatorState {
    pub fn new(num_channels: usize) -> Self {
        Self {
            explore_counts: vec![0; num_channels],
            obs_counts: vec![0; num_channels],
            idle_counts: vec![0; num_channels],
            beta_success: vec![0; num_channels],
            beta_failure: vec![0; num_channels],
            ..Self::default()
        }
    }

    pub fn num_channels(&self) -> usize {
        self.obs_counts.len()
    }

    pub fn theta_hat(&self, channel: usize) -> Option<f64> {
        match self.obs_counts[channel] {
            0 => None,
            n => Some(self.idle_counts[channel] as f64 / n as f64),
        }
    }

    /// All empirical idle probabilities, or `None` if a channel was never
    /// observed.
    pub fn theta_hats(&self) -> Option<Vec<f64>> {
        (0..self.num_channels()).map(|i| self.theta_hat(i)).collect()
    }

    /// Empirical `b0`, `c0`, `p0`, once each has at least one sample.
    pub fn cost_means(&self) -> Option<CostMeans> {
        let mean = |sum: f64, n: u64| (n > 0).then(|| sum / n as f64);
        Some(CostMeans {
            reward: mean(self.reward_sum, self.reward_count)?,
            sense: mean(self.sense_cost_sum, self.sense_cost_count)?,
            tx: mean(self.tx_cost_sum, self.tx_cost_count)?,
        })
    }

    fn observe_state(&mut self, channel: usize, idle: bool) {
        self.obs_counts[channel] += 1;
        if idle {
            self.idle_counts[channel] += 1;
            self.beta_success[channel] += 1;
        } else {
            self.beta_failure[channel] += 1;
        }
    }

    /// Folds one frame into the estimates.
    ///
    /// `explored` lists the exploration set of the frame, if it was an
    /// exploration frame. A guess reveals the guessed channel's state through
    /// its reward only when rewards are strictly positive on idle channels;
    /// `guess_reveals_state` says whether that holds.
    pub fn update(&mut self, record: &FrameRecord, explored: Option<&[usize]>, guess_reveals_state: bool) {
        for obs in &record.sensed {
            self.observe_state(obs.channel, obs.idle);
            self.sense_cost_sum += obs.cost;
            self.sense_cost_count += 1;
        }
        if let Action::Guess(ch) = record.final_action {
            if guess_reveals_state {
                self.observe_state(ch, record.realized_reward > 0.0);
            }
        }
        if record.final_action.tx_channel().is_some() {
            self.tx_cost_sum += record.realized_tx_cost;
            self.tx_cost_count += 1;
        }
        if record.realized_reward > 0.0 {
            self.reward_sum += record.realized_reward;
            self.reward_count += 1;
        }
        for &ch in explored.unwrap_or_default() {
            self.explore_counts[ch] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SenseObservation;

    fn obs(channel: usize, idle: bool, cost: f64) -> SenseObservation {
        SenseObservation { channel, idle, cost }
    }

    fn record(sensed: Vec<SenseObservation>, final_action: Action, reward: f64, tx: f64) -> FrameRecord {
        let net = reward - tx - sensed.iter().map(|s| s.cost).sum::<f64>();
        FrameRecord {
            frame_index: 1,
            sensed,
            final_action,
            realized_reward: reward,
            realized_tx_cost: tx,
            net_reward: net,
        }
    }

    #[test]
    fn access_updates_all_sums() {
        let mut s = EstimatorState::new(3);
        s.update(
            &record(vec![obs(0, true, 0.2)], Action::Access(0), 1.02, 0.48),
            None,
            true,
        );
        assert_eq!((s.obs_counts[0], s.idle_counts[0]), (1, 1));
        assert_eq!((s.sense_cost_count, s.tx_cost_count, s.reward_count), (1, 1, 1));
        assert_eq!(s.explore_counts, vec![0, 0, 0]);
        let m = s.cost_means().unwrap();
        assert_eq!((m.reward, m.sense, m.tx), (1.02, 0.2, 0.48));
    }

    #[test]
    fn quit_after_busy_senses() {
        let mut s = EstimatorState::new(3);
        s.update(
            &record(vec![obs(0, false, 0.2), obs(1, false, 0.22)], Action::Quit, 0.0, 0.0),
            None,
            true,
        );
        assert_eq!(s.obs_counts, vec![1, 1, 0]);
        assert_eq!(s.idle_counts, vec![0, 0, 0]);
        assert_eq!(s.sense_cost_count, 2);
        assert_eq!((s.tx_cost_count, s.reward_count), (0, 0));
        assert!(s.cost_means().is_none());
        assert_eq!(s.theta_hat(2), None);
        assert_eq!(s.theta_hat(0), Some(0.0));
    }

    #[test]
    fn guess_outcome_reveals_state() {
        let mut s = EstimatorState::new(2);
        s.update(&record(vec![], Action::Guess(1), 0.0, 0.5), None, true);
        assert_eq!((s.obs_counts[1], s.idle_counts[1]), (1, 0));
        assert_eq!((s.tx_cost_count, s.reward_count), (1, 0));
        s.update(&record(vec![], Action::Guess(1), 0.97, 0.5), None, true);
        assert_eq!((s.obs_counts[1], s.idle_counts[1]), (2, 1));
        assert_eq!((s.beta_success[1], s.beta_failure[1]), (1, 1));

        let mut ambiguous = EstimatorState::new(2);
        ambiguous.update(&record(vec![], Action::Guess(1), 0.0, 0.5), None, false);
        assert_eq!(ambiguous.obs_counts[1], 0);
        assert_eq!(ambiguous.tx_cost_count, 1);
    }

    #[test]
    fn exploration_counts() {
        let mut s = EstimatorState::new(3);
        s.update(
            &record(vec![obs(0, false, 0.2), obs(2, true, 0.2)], Action::Access(2), 1.0, 0.5),
            Some(&[0, 2]),
            true,
        );
        assert_eq!(s.explore_counts, vec![1, 0, 1]);
        assert!(s.explore_counts.iter().zip(&s.obs_counts).all(|(t, o)| t <= o));
    }

    #[test]
    fn conjugate_counts() {
        let mut s = EstimatorState::new(1);
        for i in 0..10 {
            s.update(&record(vec![obs(0, i != 3, 0.2)], Action::Quit, 0.0, 0.0), None, true);
        }
        assert_eq!((s.beta_success[0], s.beta_failure[0]), (9, 1));
        let (a, b) = (s.beta_success[0] + 1, s.beta_failure[0] + 1);
        assert!((a as f64 / (a + b) as f64 - 10.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn snapshot_round_trips_through_json() {
        let mut s = EstimatorState::new(2);
        s.update(
            &record(vec![obs(1, true, 0.2)], Action::Access(1), 1.0, 0.5),
            Some(&[1]),
            true,
        );
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"explore_counts\""));
        assert!(json.contains("\"beta_success\""));
        assert_eq!(serde_json::from_str::<EstimatorState>(&json).unwrap(), s);
    }
}
