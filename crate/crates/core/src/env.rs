//! Seeded frame simulator.
//!
//! Every frame consumes a fixed block of `2K + 2` uniform draws from the
//! stream, in this order: the `K` channel states, the `K` sensing costs (the
//! `n`-th sense of the frame pays the `n`-th one), the reward and the
//! transmission cost. The values are drawn up front and consumed as actions
//! happen, so the sample path does not depend on how a policy behaves and
//! different policies can be compared on common random numbers.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded with a `u64` through
//! `SeedableRng::seed_from_u64`, which is portable across platforms.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::format::fmt_num;
use crate::model::{Action, FrameRecord, SenseObservation, SystemParams};
use crate::offline::{Fallback, SequentialPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("illegal action {action:?} at slot {slot}: {reason}")]
    IllegalAction {
        action: Action,
        slot: usize,
        reason: &'static str,
    },
}

/// Stream id reserved for channel states, costs and rewards.
pub const ENV_STREAM: u64 = 0;
/// Stream id reserved for a learner's own randomisation.
pub const LEARNER_STREAM: u64 = 1;

/// Deterministic random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, ENV_STREAM)
    }

    /// Independent sub-stream of the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, rng }
    }

    /// Seed of run `run_index` in a batch started from `base_seed`.
    pub fn run_seed(base_seed: u64, run_index: u64) -> u64 {
        base_seed.wrapping_add(run_index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Pre-drawn randomness of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDraw {
    pub states: Vec<bool>,
    pub sense_costs: Vec<f64>,
    pub reward: f64,
    pub tx_cost: f64,
}

impl FrameDraw {
    pub fn draw(params: &SystemParams, stream: &mut RngStream) -> Self {
        let states = params.thetas().iter().map(|&theta| stream.uniform() < theta).collect();
        let sense_cost = params.sense_cost();
        let sense_costs = (0..params.num_channels())
            .map(|_| sense_cost.quantile(stream.uniform()))
            .collect();
        let reward = params.reward().quantile(stream.uniform());
        let tx_cost = params.tx_cost().quantile(stream.uniform());
        Self {
            states,
            sense_costs,
            reward,
            tx_cost,
        }
    }
}

/// Information available to a policy inside a frame.
#[derive(Debug, Clone, Copy)]
pub struct InfoState<'a> {
    pub sensed: &'a [SenseObservation],
    pub unsensed: &'a [bool],
}

impl InfoState<'_> {
    /// Last sensed channel and whether it was idle.
    pub fn last(&self) -> Option<(usize, bool)> {
        self.sensed.last().map(|s| (s.channel, s.idle))
    }

    pub fn slot(&self) -> usize {
        self.sensed.len()
    }

    pub fn is_unsensed(&self, channel: usize) -> bool {
        self.unsensed.get(channel).copied().unwrap_or(false)
    }
}

/// Plays one frame against pre-drawn randomness.
pub fn execute_frame<F>(
    params: &SystemParams,
    draw: &FrameDraw,
    frame_index: u64,
    mut decide: F,
) -> Result<FrameRecord, EnvError>
where
    F: FnMut(&InfoState<'_>) -> Action,
{
    let k = params.num_channels();
    let mut unsensed = vec![true; k];
    let mut sensed: Vec<SenseObservation> = Vec::with_capacity(k);

    let final_action = loop {
        let action = decide(&InfoState {
            sensed: &sensed,
            unsensed: &unsensed,
        });
        let illegal = |reason| EnvError::IllegalAction {
            action,
            slot: sensed.len(),
            reason,
        };
        match action {
            Action::Sense(ch) => {
                if ch >= k {
                    return Err(illegal("channel out of range"));
                }
                if !unsensed[ch] {
                    return Err(illegal("channel already sensed in this frame"));
                }
                unsensed[ch] = false;
                sensed.push(SenseObservation {
                    channel: ch,
                    idle: draw.states[ch],
                    cost: draw.sense_costs[sensed.len()],
                });
            }
            Action::Access(ch) => {
                if !sensed.iter().any(|s| s.channel == ch && s.idle) {
                    return Err(illegal("access target was not sensed idle"));
                }
                break action;
            }
            Action::Guess(ch) => {
                if ch >= k {
                    return Err(illegal("channel out of range"));
                }
                if !unsensed[ch] {
                    return Err(illegal("guess target was sensed in this frame"));
                }
                break action;
            }
            Action::Quit => break action,
        }
    };

    let (realized_reward, realized_tx_cost) = match final_action.tx_channel() {
        Some(ch) => (if draw.states[ch] { draw.reward } else { 0.0 }, draw.tx_cost),
        None => (0.0, 0.0),
    };
    let sense_total: f64 = sensed.iter().map(|s| s.cost).sum();
    Ok(FrameRecord {
        frame_index,
        sensed,
        final_action,
        realized_reward,
        realized_tx_cost,
        net_reward: realized_reward - realized_tx_cost - sense_total,
    })
}

/// Draws a frame from `stream` and plays it.
pub fn run_frame<F>(
    params: &SystemParams,
    stream: &mut RngStream,
    frame_index: u64,
    decide: F,
) -> Result<FrameRecord, EnvError>
where
    F: FnMut(&InfoState<'_>) -> Action,
{
    let draw = FrameDraw::draw(params, stream);
    execute_frame(params, &draw, frame_index, decide)
}

/// Decision rule that executes a sequential policy.
pub fn sequential_decider(policy: &SequentialPolicy) -> impl FnMut(&InfoState<'_>) -> Action + '_ {
    move |info| {
        if let Some((ch, true)) = info.last() {
            return Action::Access(ch);
        }
        match policy.sense_order.get(info.slot()) {
            Some(&ch) => Action::Sense(ch),
            None => match policy.fallback {
                Fallback::Guess(ch) => Action::Guess(ch),
                Fallback::Quit => Action::Quit,
            },
        }
    }
}

/// Decision rule that senses every listed channel, then transmits on the
/// lowest-indexed idle one or quits.
pub fn sense_all_decider(channels: &[usize]) -> impl FnMut(&InfoState<'_>) -> Action + '_ {
    move |info| {
        if let Some(&ch) = channels.get(info.slot()) {
            return Action::Sense(ch);
        }
        info.sensed
            .iter()
            .filter(|s| s.idle)
            .map(|s| s.channel)
            .min()
            .map_or(Action::Quit, Action::Access)
    }
}

/// Sample mean of a Monte-Carlo run and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub frames: u64,
}

/// Mean net reward of `policy` over `frames` i.i.d. frames.
pub fn simulate_policy_reward(
    params: &SystemParams,
    policy: &SequentialPolicy,
    frames: u64,
    stream: &mut RngStream,
) -> Result<MonteCarloEstimate, EnvError> {
    assert!(frames >= 1, "at least one frame is required");
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for t in 1..=frames {
        let record = run_frame(params, stream, t, sequential_decider(policy))?;
        sum += record.net_reward;
        sum_sq += record.net_reward * record.net_reward;
    }
    let n = frames as f64;
    let mean = sum / n;
    let var = if frames > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        frames,
    })
}

pub const TRACE_HEADER: &str = "t,n,channel,state,sense_cost,action,reward,tx_cost,net";

/// Writes a frame trace. Channels are reported with the caller's 1-based
/// labels; sense rows leave the transmission columns empty and the closing
/// row of each frame leaves the sensing columns empty.
pub fn write_trace<W: Write>(out: &mut W, params: &SystemParams, records: &[FrameRecord]) -> io::Result<()> {
    let label = |ch: usize| params.labels()[ch] + 1;
    writeln!(out, "{TRACE_HEADER}")?;
    for rec in records {
        for (n, obs) in rec.sensed.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},sense,,,",
                rec.frame_index,
                n + 1,
                label(obs.channel),
                u8::from(obs.idle),
                fmt_num(obs.cost)
            )?;
        }
        let channel = rec
            .final_action
            .tx_channel()
            .map(|ch| label(ch).to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},,,{},{},{},{}",
            rec.frame_index,
            rec.sensed.len() + 1,
            channel,
            rec.final_action.name(),
            fmt_num(rec.realized_reward),
            fmt_num(rec.realized_tx_cost),
            fmt_num(rec.net_reward)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundedUniform;
    use crate::offline::{evaluate_policy, solve};

    fn reference() -> SystemParams {
        SystemParams::new(
            vec![0.6, 0.5, 0.4, 0.3, 0.2, 0.1],
            BoundedUniform::from_mean(1.0, 0.1),
            BoundedUniform::from_mean(0.2, 0.1),
            BoundedUniform::from_mean(0.5, 0.1),
        )
        .unwrap()
    }

    #[test]
    fn quit_costs_nothing() {
        let p = reference();
        let mut s = RngStream::new(3);
        let rec = run_frame(&p, &mut s, 1, |_: &InfoState<'_>| Action::Quit).unwrap();
        assert_eq!(rec.net_reward, 0.0);
        assert!(rec.sensed.is_empty());
        assert_eq!(rec.final_action, Action::Quit);
    }

    #[test]
    fn optimal_policy_frame_with_first_channel_idle() {
        let p = reference();
        let seq = solve(&p).to_sequential_identity();
        let mut s = RngStream::new(11);
        let mut found = false;
        for t in 0..200 {
            let draw = FrameDraw::draw(&p, &mut s);
            if !draw.states[0] {
                continue;
            }
            let rec = execute_frame(&p, &draw, t, sequential_decider(&seq)).unwrap();
            assert_eq!(rec.sensed.len(), 1);
            assert_eq!(rec.sensed[0].channel, 0);
            assert!(rec.sensed[0].idle);
            assert_eq!(rec.final_action, Action::Access(0));
            let (b, c, pc) = (rec.realized_reward, rec.sensed[0].cost, rec.realized_tx_cost);
            assert!((0.95..=1.05).contains(&b));
            assert!((0.15..=0.25).contains(&c));
            assert!((0.45..=0.55).contains(&pc));
            assert!((rec.net_reward - (b - pc - c)).abs() < 1e-15);
            found = true;
        }
        assert!(found);
    }

    #[test]
    fn guess_on_busy_channel_pays_tx_cost() {
        let p = reference();
        let mut s = RngStream::new(5);
        let draw = loop {
            let d = FrameDraw::draw(&p, &mut s);
            if !d.states[0] {
                break d;
            }
        };
        let rec = execute_frame(&p, &draw, 1, |_: &InfoState<'_>| Action::Guess(0)).unwrap();
        assert_eq!(rec.realized_reward, 0.0);
        assert_eq!(rec.net_reward, -draw.tx_cost);
    }

    #[test]
    fn illegal_actions_fail_fast() {
        let p = reference();
        let draw = FrameDraw {
            states: vec![false; 6],
            sense_costs: vec![0.2; 6],
            reward: 1.0,
            tx_cost: 0.5,
        };
        let mut script = vec![Action::Sense(0), Action::Sense(0)].into_iter();
        let err = execute_frame(&p, &draw, 1, |_: &InfoState<'_>| script.next().unwrap()).unwrap_err();
        assert!(matches!(err, EnvError::IllegalAction { slot: 1, .. }));

        let mut script = vec![Action::Sense(1), Action::Access(1)].into_iter();
        assert!(execute_frame(&p, &draw, 1, |_: &InfoState<'_>| script.next().unwrap()).is_err());

        let mut script = vec![Action::Sense(2), Action::Guess(2)].into_iter();
        assert!(execute_frame(&p, &draw, 1, |_: &InfoState<'_>| script.next().unwrap()).is_err());

        assert!(execute_frame(&p, &draw, 1, |_: &InfoState<'_>| Action::Sense(9)).is_err());
    }

    #[test]
    fn sense_all_continues_after_idle() {
        let p = reference();
        let draw = FrameDraw {
            states: vec![false, true, true, false, false, false],
            sense_costs: vec![0.2; 6],
            reward: 1.0,
            tx_cost: 0.5,
        };
        let channels = [0, 1, 2, 3, 4, 5];
        let rec = execute_frame(&p, &draw, 1, sense_all_decider(&channels)).unwrap();
        assert_eq!(rec.sensed.len(), 6);
        assert_eq!(rec.final_action, Action::Access(1));
        assert!((rec.net_reward - (1.0 - 0.5 - 1.2)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_records() {
        let p = reference();
        let seq = solve(&p).to_sequential_identity();
        let play = |seed| {
            let mut s = RngStream::new(seed);
            (1..=500)
                .map(|t| run_frame(&p, &mut s, t, sequential_decider(&seq)).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(play(42), play(42));
        assert_ne!(play(42), play(43));
    }

    #[test]
    fn draws_stay_in_support_and_states_match_thetas() {
        let p = reference();
        let mut s = RngStream::new(9);
        let n = 50_000;
        let mut idle = [0u32; 6];
        for _ in 0..n {
            let d = FrameDraw::draw(&p, &mut s);
            for (i, &x) in d.states.iter().enumerate() {
                idle[i] += u32::from(x);
            }
            assert!(d.sense_costs.iter().all(|&c| p.sense_cost().contains(c)));
            assert!(p.reward().contains(d.reward));
            assert!(p.tx_cost().contains(d.tx_cost));
        }
        for (i, &theta) in p.thetas().iter().enumerate() {
            let est = idle[i] as f64 / n as f64;
            assert!((est - theta).abs() < 4.0 * (theta * (1.0 - theta) / n as f64).sqrt());
        }
    }

    #[test]
    fn optimal_policy_monte_carlo_near_closed_form() {
        let p = reference();
        let seq = solve(&p).to_sequential_identity();
        let est = simulate_policy_reward(&p, &seq, 1_000_000, &mut RngStream::new(2024)).unwrap();
        assert!((est.mean - 0.12).abs() < 3.0 * est.std_error, "{est:?}");
        let exact = evaluate_policy(&p, &seq).unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn always_quit_simulates_to_zero() {
        let p = reference();
        let est = simulate_policy_reward(&p, &SequentialPolicy::quit(), 1000, &mut RngStream::new(1)).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn trace_rows() {
        let p = reference();
        let draw = FrameDraw {
            states: vec![false, true, false, false, false, false],
            sense_costs: vec![0.25, 0.2, 0.2, 0.2, 0.2, 0.2],
            reward: 1.0,
            tx_cost: 0.5,
        };
        let seq = SequentialPolicy::new(vec![0, 1], Fallback::Quit);
        let rec = execute_frame(&p, &draw, 7, sequential_decider(&seq)).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &p, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[1], "7,1,1,0,0.25,sense,,,");
        assert_eq!(lines[2], "7,2,2,1,0.2,sense,,,");
        assert_eq!(lines[3], "7,3,2,,,access,1,0.5,0.05");
    }
}
