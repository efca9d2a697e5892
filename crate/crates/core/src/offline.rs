//! Optimal per-frame policy when all statistics are known.
//!
//! After the `(i-1)`-th channel is found busy the remaining value is
//!
//! ```text
//! E_{i-1} = max{ -c0 + (b0 - p0) θ_i + E_i (1 - θ_i),  θ_i b0 - p0,  0 },   E_K = 0
//! ```
//!
//! and the three arguments of the max are *sense*, *guess* and *quit*. The
//! lines cross at the thresholds
//!
//! ```text
//! u_i = max{ p0/b0, 1 - c0/(p0 + E_i) }
//! l_i = min{ p0/b0, 1 - (b0 - p0 - c0)/(b0 - p0 - E_i) }
//! ```
//!
//! so slot `i` guesses when `θ_i ≥ u_i`, senses when `l_i ≤ θ_i < u_i` and
//! quits otherwise. [`brute_force_optimal`] solves the unrestricted Bellman
//! recursion over every unsensed subset and serves as an oracle for [`solve`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CostMeans, SystemParams};

/// Tolerance used when comparing a channel's idle probability to its
/// thresholds, and when guarding the lower-threshold denominator.
pub const TIE_TOL: f64 = 1e-12;

/// Exhaustive search is limited to this many channels.
pub const MAX_BRUTE_FORCE_CHANNELS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("{channels} channels exceed the exhaustive-search limit of {limit}")]
    TooManyChannels { channels: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotAction {
    /// Sense this slot's channel; access it if idle, otherwise move on.
    Sense,
    /// Transmit on this slot's channel without sensing it.
    Guess,
    /// Give up the frame.
    Quit,
}

impl SlotAction {
    pub fn name(&self) -> &'static str {
        match self {
            SlotAction::Sense => "sense",
            SlotAction::Guess => "guess",
            SlotAction::Quit => "quit",
        }
    }
}

/// Solved double-threshold policy. Slot `i` (0-based here) holds the channel
/// with the `i`-th largest idle probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    /// `E_0 ..= E_K`; `e_values[0]` is the optimal per-frame value.
    pub e_values: Vec<f64>,
    pub lowers: Vec<f64>,
    pub uppers: Vec<f64>,
    pub slot_actions: Vec<SlotAction>,
    /// Number of slots reached by the policy (1-based index of the last one).
    pub max_depth: usize,
}

impl ThresholdPolicy {
    pub fn optimal_value(&self) -> f64 {
        self.e_values[0]
    }

    pub fn num_slots(&self) -> usize {
        self.slot_actions.len()
    }

    /// Executed form of the policy, with slot `i` mapped to `channels[i]`.
    pub fn to_sequential(&self, channels: &[usize]) -> SequentialPolicy {
        debug_assert_eq!(channels.len(), self.slot_actions.len());
        let mut sense_order = Vec::with_capacity(self.max_depth);
        for (slot, action) in self.slot_actions.iter().enumerate() {
            match action {
                SlotAction::Sense => sense_order.push(channels[slot]),
                SlotAction::Guess => {
                    return SequentialPolicy {
                        sense_order,
                        fallback: Fallback::Guess(channels[slot]),
                    }
                }
                SlotAction::Quit => break,
            }
        }
        SequentialPolicy {
            sense_order,
            fallback: Fallback::Quit,
        }
    }

    /// Executed form with slots mapped to channels `0..K`.
    pub fn to_sequential_identity(&self) -> SequentialPolicy {
        let channels: Vec<usize> = (0..self.num_slots()).collect();
        self.to_sequential(&channels)
    }
}

/// Solves the threshold recursion for validated parameters.
pub fn solve(params: &SystemParams) -> ThresholdPolicy {
    solve_with(params.thetas(), params.means())
}

/// Solves the recursion for idle probabilities given in slot order.
///
/// The slot order is taken as-is, which lets callers evaluate non-sorted
/// orderings and estimated parameters that never went through validation.
pub fn solve_with(thetas: &[f64], means: CostMeans) -> ThresholdPolicy {
    let k = thetas.len();
    let CostMeans {
        reward: b0,
        sense: c0,
        tx: p0,
    } = means;
    let margin = b0 - p0;
    let guess_ratio = if b0 > 0.0 { p0 / b0 } else { 1.0 };

    let mut e_values = vec![0.0; k + 1];
    let mut lowers = vec![0.0; k];
    let mut uppers = vec![0.0; k];
    let mut slot_actions = vec![SlotAction::Quit; k];

    for i in (0..k).rev() {
        let theta = thetas[i];
        let e_next = e_values[i + 1];

        let sense = -c0 + margin * theta + e_next * (1.0 - theta);
        let guess = theta * b0 - p0;
        e_values[i] = sense.max(guess).max(0.0);

        let upper = if p0 + e_next > TIE_TOL {
            guess_ratio.max(1.0 - c0 / (p0 + e_next))
        } else {
            guess_ratio
        };
        let gap = margin - e_next;
        let lower = if gap > TIE_TOL {
            guess_ratio.min(1.0 - (margin - c0) / gap)
        } else {
            guess_ratio
        };
        uppers[i] = upper.clamp(0.0, 1.0);
        lowers[i] = lower.clamp(0.0, uppers[i]);

        slot_actions[i] = if theta >= uppers[i] - TIE_TOL {
            SlotAction::Guess
        } else if theta >= lowers[i] - TIE_TOL {
            SlotAction::Sense
        } else {
            SlotAction::Quit
        };
    }

    let max_depth = reached_depth(&slot_actions);
    ThresholdPolicy {
        e_values,
        lowers,
        uppers,
        slot_actions,
        max_depth,
    }
}

fn reached_depth(actions: &[SlotAction]) -> usize {
    for (slot, action) in actions.iter().enumerate() {
        match action {
            SlotAction::Sense => {}
            SlotAction::Guess => return slot + 1,
            SlotAction::Quit => return slot,
        }
    }
    actions.len()
}

/// Depth of the policy and the action taken on its last slot. A policy that
/// quits immediately reports `(0, Quit)`.
pub fn max_sense_depth(policy: &ThresholdPolicy) -> (usize, SlotAction) {
    match policy.max_depth {
        0 => (0, SlotAction::Quit),
        n => (n, policy.slot_actions[n - 1]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    Guess(usize),
    Quit,
}

/// Sense channels in order, access the first idle one, and fall back to a
/// guess or a quit when all of them are busy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequentialPolicy {
    pub sense_order: Vec<usize>,
    pub fallback: Fallback,
}

impl SequentialPolicy {
    pub fn quit() -> Self {
        Self {
            sense_order: Vec::new(),
            fallback: Fallback::Quit,
        }
    }

    pub fn new(sense_order: Vec<usize>, fallback: Fallback) -> Self {
        Self { sense_order, fallback }
    }

    /// Whether the policy senses or guesses `channel`.
    pub fn touches(&self, channel: usize) -> bool {
        self.sense_order.contains(&channel) || self.fallback == Fallback::Guess(channel)
    }

    pub fn validate(&self, num_channels: usize) -> Result<(), PolicyError> {
        let mut seen = vec![false; num_channels];
        for &ch in &self.sense_order {
            if ch >= num_channels {
                return Err(PolicyError::InvalidPolicy(format!("channel {ch} out of range")));
            }
            if std::mem::replace(&mut seen[ch], true) {
                return Err(PolicyError::InvalidPolicy(format!("channel {ch} sensed twice")));
            }
        }
        if let Fallback::Guess(ch) = self.fallback {
            if ch >= num_channels {
                return Err(PolicyError::InvalidPolicy(format!("guess target {ch} out of range")));
            }
            if seen[ch] {
                return Err(PolicyError::InvalidPolicy(format!(
                    "guess target {ch} was already sensed"
                )));
            }
        }
        Ok(())
    }
}

/// Expected per-frame net reward of a sequential policy.
pub fn evaluate_policy(params: &SystemParams, policy: &SequentialPolicy) -> Result<f64, PolicyError> {
    policy.validate(params.num_channels())?;
    Ok(evaluate_with(params.thetas(), params.means(), policy))
}

/// Closed-form value without validation.
pub(crate) fn evaluate_with(thetas: &[f64], means: CostMeans, policy: &SequentialPolicy) -> f64 {
    let margin = means.margin();
    let mut all_busy = 1.0;
    let mut value = 0.0;
    for &ch in &policy.sense_order {
        value += all_busy * (-means.sense + thetas[ch] * margin);
        all_busy *= 1.0 - thetas[ch];
    }
    if let Fallback::Guess(ch) = policy.fallback {
        value += all_busy * (thetas[ch] * means.reward - means.tx);
    }
    value
}

/// Exhaustive backward induction over `(last state, unsensed set)` with
/// arbitrary sensing orders. Returns the optimal value and one optimal
/// sequential policy.
///
/// Near-ties (within [`TIE_TOL`]) prefer guess over sense over quit, and the
/// lowest channel index within each action.
pub fn brute_force_optimal(params: &SystemParams) -> Result<(f64, SequentialPolicy), PolicyError> {
    let k = params.num_channels();
    if k > MAX_BRUTE_FORCE_CHANNELS {
        return Err(PolicyError::TooManyChannels {
            channels: k,
            limit: MAX_BRUTE_FORCE_CHANNELS,
        });
    }
    let thetas = params.thetas();
    let CostMeans {
        reward: b0,
        sense: c0,
        tx: p0,
    } = params.means();

    let full = (1usize << k) - 1;
    // values[x][mask]: last sensed channel had state x, `mask` is unsensed
    let mut values = [vec![0.0f64; full + 1], vec![0.0f64; full + 1]];
    for mask in 0..=full {
        let mut rest = 0.0f64;
        for (j, &theta) in thetas.iter().enumerate() {
            if mask & (1 << j) != 0 {
                let sub = mask & !(1 << j);
                let probe = -c0 + theta * values[1][sub] + (1.0 - theta) * values[0][sub];
                let guess = theta * b0 - p0;
                rest = rest.max(probe).max(guess);
            }
        }
        values[0][mask] = rest.max(-p0);
        values[1][mask] = rest.max(b0 - p0);
    }

    let mut mask = full;
    let mut sense_order = Vec::new();
    let fallback = loop {
        let target = values[0][mask];
        let guess = (0..k)
            .filter(|&j| mask & (1 << j) != 0)
            .find(|&j| thetas[j] * b0 - p0 >= target - TIE_TOL);
        if let Some(j) = guess {
            break Fallback::Guess(j);
        }
        let probe = (0..k).filter(|&j| mask & (1 << j) != 0).find(|&j| {
            let sub = mask & !(1 << j);
            -c0 + thetas[j] * values[1][sub] + (1.0 - thetas[j]) * values[0][sub] >= target - TIE_TOL
        });
        match probe {
            Some(j) => {
                sense_order.push(j);
                mask &= !(1 << j);
            }
            None => break Fallback::Quit,
        }
    };

    Ok((values[0][full], SequentialPolicy::new(sense_order, fallback)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundedUniform;

    fn params(thetas: &[f64], b0: f64, c0: f64, p0: f64) -> SystemParams {
        SystemParams::new(
            thetas.to_vec(),
            BoundedUniform::from_mean(b0, 0.1),
            BoundedUniform::from_mean(c0, 0.1),
            BoundedUniform::from_mean(p0, 0.1),
        )
        .unwrap()
    }

    fn reference(c0: f64, p0: f64) -> SystemParams {
        params(&[0.6, 0.5, 0.4, 0.3, 0.2, 0.1], 1.0, c0, p0)
    }

    #[test]
    fn reference_instance_values() {
        let pol = solve(&reference(0.2, 0.5));
        assert!((pol.optimal_value() - 0.12).abs() < 1e-12);
        let expected_e = [0.12, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (got, want) in pol.e_values.iter().zip(expected_e) {
            assert!((got - want).abs() < 1e-12, "{:?}", pol.e_values);
        }
        assert!((pol.uppers[0] - (1.0 - 0.2 / 0.55)).abs() < 1e-12);
        assert!((pol.lowers[0] - 1.0 / 3.0).abs() < 1e-12);
        use SlotAction::*;
        assert_eq!(pol.slot_actions, vec![Sense, Sense, Sense, Quit, Quit, Quit]);
        assert_eq!(max_sense_depth(&pol), (3, Sense));
    }

    #[test]
    fn guess_stops_execution() {
        // slot 2 would sense, but slot 1 already guesses
        let pol = solve(&reference(0.23, 0.5));
        assert_eq!(pol.slot_actions[0], SlotAction::Guess);
        assert_eq!(pol.slot_actions[1], SlotAction::Sense);
        assert_eq!(max_sense_depth(&pol), (1, SlotAction::Guess));
        assert_eq!(
            pol.to_sequential_identity(),
            SequentialPolicy::new(vec![], Fallback::Guess(0))
        );
    }

    #[test]
    fn table_rows() {
        assert_eq!(max_sense_depth(&solve(&reference(0.15, 0.5))), (4, SlotAction::Sense));
        assert_eq!(max_sense_depth(&solve(&reference(0.20, 0.65))), (1, SlotAction::Sense));
    }

    #[test]
    fn immediate_quit() {
        let pol = solve(&params(&[0.05, 0.02], 1.0, 0.3, 0.5));
        assert_eq!(max_sense_depth(&pol), (0, SlotAction::Quit));
        assert_eq!(pol.optimal_value(), 0.0);
        assert_eq!(pol.to_sequential_identity(), SequentialPolicy::quit());
    }

    #[test]
    fn evaluate_examples() {
        let p = reference(0.2, 0.5);
        let v = evaluate_policy(&p, &SequentialPolicy::new(vec![0, 1, 2], Fallback::Quit)).unwrap();
        assert!((v - 0.12).abs() < 1e-12);
        assert_eq!(evaluate_policy(&p, &SequentialPolicy::quit()).unwrap(), 0.0);
        let v = evaluate_policy(&p, &SequentialPolicy::new(vec![], Fallback::Guess(0))).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_invalid_policies() {
        let p = reference(0.2, 0.5);
        let dup = SequentialPolicy::new(vec![0, 0], Fallback::Quit);
        assert!(matches!(evaluate_policy(&p, &dup), Err(PolicyError::InvalidPolicy(_))));
        let guess_sensed = SequentialPolicy::new(vec![1], Fallback::Guess(1));
        assert!(matches!(
            evaluate_policy(&p, &guess_sensed),
            Err(PolicyError::InvalidPolicy(_))
        ));
        let oob = SequentialPolicy::new(vec![6], Fallback::Quit);
        assert!(evaluate_policy(&p, &oob).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let (v, best) = brute_force_optimal(&reference(0.2, 0.5)).unwrap();
        assert!((v - 0.12).abs() < 1e-12);
        assert_eq!(best, SequentialPolicy::new(vec![0, 1, 2], Fallback::Quit));

        let p = SystemParams::new(
            vec![0.9],
            BoundedUniform::constant(1.0),
            BoundedUniform::constant(10.0),
            BoundedUniform::constant(0.5),
        )
        .unwrap();
        let (v, best) = brute_force_optimal(&p).unwrap();
        assert!((v - 0.4).abs() < 1e-12);
        assert_eq!(best, SequentialPolicy::new(vec![], Fallback::Guess(0)));
    }

    #[test]
    fn brute_force_rejects_large_instances() {
        let p = params(&[0.5; 13], 1.0, 0.2, 0.5);
        assert!(matches!(
            brute_force_optimal(&p),
            Err(PolicyError::TooManyChannels { .. })
        ));
    }

    #[test]
    fn threshold_sequence_matches_evaluation_without_guess() {
        let p = reference(0.17, 0.5);
        let pol = solve(&p);
        let seq = pol.to_sequential_identity();
        let v = evaluate_policy(&p, &seq).unwrap();
        assert!((v - pol.optimal_value()).abs() < 1e-12);
    }

    #[test]
    fn depth_non_increasing_in_sensing_cost() {
        let mut last = usize::MAX;
        for step in 0..60 {
            let c0 = 0.05 + 0.005 * step as f64;
            let (n, _) = max_sense_depth(&solve(&reference(c0, 0.5)));
            assert!(n <= last, "c0 = {c0}: depth {n} after {last}");
            last = n;
        }
    }

    proptest::proptest! {
        #[test]
        fn threshold_invariants(
            thetas in proptest::collection::vec(0.01f64..1.0, 1..9),
            b0 in 0.5f64..2.0,
            c_frac in 0.0f64..0.6,
            p_frac in 0.0f64..0.95,
        ) {
            let p0 = b0 * p_frac;
            let c0 = (b0 - p0) * c_frac;
            let p = SystemParams::new(
                thetas,
                BoundedUniform::constant(b0),
                BoundedUniform::constant(c0),
                BoundedUniform::constant(p0),
            ).unwrap();
            let pol = solve(&p);
            let k = p.num_channels();
            proptest::prop_assert_eq!(pol.e_values[k], 0.0);
            proptest::prop_assert!(pol.optimal_value() >= 0.0);
            for i in 0..k {
                proptest::prop_assert!(0.0 <= pol.lowers[i] && pol.lowers[i] <= pol.uppers[i] && pol.uppers[i] <= 1.0);
                proptest::prop_assert!(pol.e_values[i] >= pol.e_values[i + 1] - 1e-12);
                proptest::prop_assert!(pol.e_values[i] <= b0 - p0 + 1e-12);
            }
            for i in 1..k {
                proptest::prop_assert!(pol.uppers[i] <= pol.uppers[i - 1] + 1e-12);
                proptest::prop_assert!(pol.lowers[i] >= pol.lowers[i - 1] - 1e-12);
            }
            let (oracle, _) = brute_force_optimal(&p).unwrap();
            proptest::prop_assert!((oracle - pol.optimal_value()).abs() <= 1e-12);
            let executed = evaluate_policy(&p, &pol.to_sequential_identity()).unwrap();
            proptest::prop_assert!((executed - pol.optimal_value()).abs() <= 1e-9);
        }
    }
}
