//! Multi-run batches with common random numbers.
//!
//! Every run owns an environment stream seeded with `base_seed + r`. Each
//! frame's randomness is drawn once and replayed to every strategy of the
//! batch, so differences between strategies within a run come from their
//! decisions alone.

use serde::Serialize;

use super::HarnessError;
use crate::analysis::{RegretAccumulator, RegretSeries};
use crate::env::{execute_frame, sequential_decider, FrameDraw, RngStream, ENV_STREAM, LEARNER_STREAM};
use crate::learners::{FramePlan, LearnerConfig, LearnerKind, OnlineLearner};
use crate::model::SystemParams;
use crate::offline::{evaluate_with, solve, SequentialPolicy};
use crate::par::{map_indexed, Execution};

/// Tolerance used to decide whether an exploitation plan is optimal.
pub const PLAN_VALUE_TOL: f64 = 1e-9;

/// Number of runs simulated per parallel batch. Bounds peak memory to
/// `RUN_CHUNK · strategies · horizon` floats.
const RUN_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// The offline-optimal policy computed from the true statistics.
    Offline,
    Learner(LearnerConfig),
}

impl Strategy {
    fn learner_stream(kind: LearnerKind) -> u64 {
        LEARNER_STREAM
            + match kind {
                LearnerKind::Alg1 => 0,
                LearnerKind::EpsGreedy => 1,
                LearnerKind::Thompson => 2,
            }
    }
}

/// Per-run counters collected alongside the net rewards.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub seed: u64,
    pub exploration_frames: u64,
    /// Exploitation frames in the tail window.
    pub tail_exploit_frames: u64,
    /// Tail exploitation frames whose plan attains the optimal value.
    pub tail_optimal_frames: u64,
    /// Sum of net rewards over the tail window.
    pub tail_net_reward: f64,
    /// Cumulative net reward at each requested checkpoint.
    pub checkpoint_net: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSpec {
    pub horizon: u64,
    pub runs: u64,
    pub base_seed: u64,
    /// Frames `t > tail_start` form the tail window.
    pub tail_start: u64,
    /// Frame indices at which cumulative net reward is recorded per run.
    pub checkpoints: Vec<u64>,
}

impl BatchSpec {
    /// Tail window of the last 10% of frames.
    pub fn new(horizon: u64, runs: u64, base_seed: u64) -> Self {
        Self {
            horizon,
            runs,
            base_seed,
            tail_start: horizon - horizon / 10,
            checkpoints: Vec::new(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs).map(|r| RngStream::run_seed(self.base_seed, r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub series: RegretSeries,
    /// One entry per run, in run order.
    pub runs: Vec<RunStats>,
}

impl StrategyResult {
    pub fn tail_mean_reward(&self, tail_frames: u64) -> f64 {
        let total: f64 = self.runs.iter().map(|r| r.tail_net_reward).sum();
        total / (tail_frames as f64 * self.runs.len() as f64)
    }

    pub fn tail_optimal_fraction(&self) -> f64 {
        let exploit: u64 = self.runs.iter().map(|r| r.tail_exploit_frames).sum();
        let optimal: u64 = self.runs.iter().map(|r| r.tail_optimal_frames).sum();
        if exploit == 0 {
            0.0
        } else {
            optimal as f64 / exploit as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub j_star: f64,
    pub strategies: Vec<StrategyResult>,
}

struct Player<'a> {
    learner: Option<OnlineLearner>,
    offline: &'a SequentialPolicy,
}

struct RunOutput {
    nets: Vec<Vec<f64>>,
    stats: Vec<RunStats>,
}

fn simulate_run(
    params: &SystemParams,
    strategies: &[Strategy],
    spec: &BatchSpec,
    offline: &SequentialPolicy,
    j_star: f64,
    run: u64,
) -> Result<RunOutput, HarnessError> {
    let seed = RngStream::run_seed(spec.base_seed, run);
    let means = params.means();
    let guess_reveals_state = params.reward().lower > 0.0;
    let mut players = strategies
        .iter()
        .map(|s| {
            let learner = match s {
                Strategy::Offline => None,
                Strategy::Learner(cfg) => Some(OnlineLearner::new(
                    *cfg,
                    params.num_channels(),
                    means,
                    guess_reveals_state,
                    RngStream::with_stream(seed, Strategy::learner_stream(cfg.kind)),
                )?),
            };
            Ok(Player { learner, offline })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let horizon = spec.horizon as usize;
    let mut nets = vec![Vec::with_capacity(horizon); strategies.len()];
    let mut stats = vec![
        RunStats {
            seed,
            ..RunStats::default()
        };
        strategies.len()
    ];
    let mut cumulative = vec![0.0; strategies.len()];
    let mut env = RngStream::with_stream(seed, ENV_STREAM);
    let mut next_checkpoint = 0;

    for t in 1..=spec.horizon {
        let draw = FrameDraw::draw(params, &mut env);
        let in_tail = t > spec.tail_start;
        for (i, player) in players.iter_mut().enumerate() {
            let net = match &mut player.learner {
                None => {
                    let record = execute_frame(params, &draw, t, sequential_decider(player.offline))?;
                    if in_tail {
                        stats[i].tail_exploit_frames += 1;
                        stats[i].tail_optimal_frames += 1;
                    }
                    record.net_reward
                }
                Some(learner) => {
                    let plan = learner.plan(t)?;
                    let record = execute_frame(params, &draw, t, plan.decider())?;
                    match &plan {
                        FramePlan::Explore(_) => stats[i].exploration_frames += 1,
                        FramePlan::Exploit(policy) if in_tail => {
                            stats[i].tail_exploit_frames += 1;
                            if (evaluate_with(params.thetas(), means, policy) - j_star).abs() <= PLAN_VALUE_TOL {
                                stats[i].tail_optimal_frames += 1;
                            }
                        }
                        FramePlan::Exploit(_) => {}
                    }
                    learner.observe(&plan, &record);
                    record.net_reward
                }
            };
            if in_tail {
                stats[i].tail_net_reward += net;
            }
            cumulative[i] += net;
            nets[i].push(net);
        }
        while next_checkpoint < spec.checkpoints.len() && spec.checkpoints[next_checkpoint] == t {
            for (s, c) in stats.iter_mut().zip(&cumulative) {
                s.checkpoint_net.push(*c);
            }
            next_checkpoint += 1;
        }
    }
    Ok(RunOutput { nets, stats })
}

/// Simulates `spec.runs` runs of every strategy.
///
/// Runs are spread over worker threads according to `mode`, but results are
/// folded in run order, so the output does not depend on scheduling.
pub fn run_batch(
    params: &SystemParams,
    strategies: &[Strategy],
    spec: &BatchSpec,
    mode: Execution,
) -> Result<BatchResult, HarnessError> {
    if spec.horizon < 1 || spec.runs < 1 {
        return Err(HarnessError::Config("horizon and runs must be at least 1".into()));
    }
    if spec.checkpoints.windows(2).any(|w| w[0] >= w[1]) || spec.checkpoints.iter().any(|&c| c < 1 || c > spec.horizon)
    {
        return Err(HarnessError::Config(
            "checkpoints must be increasing and within the horizon".into(),
        ));
    }
    let policy = solve(params);
    let j_star = policy.optimal_value();
    let offline = policy.to_sequential_identity();

    let horizon = spec.horizon as usize;
    let mut accs: Vec<RegretAccumulator> = strategies
        .iter()
        .map(|_| RegretAccumulator::new(j_star, horizon))
        .collect();
    let mut stats: Vec<Vec<RunStats>> = vec![Vec::with_capacity(spec.runs as usize); strategies.len()];

    let runs = spec.runs as usize;
    for chunk_start in (0..runs).step_by(RUN_CHUNK) {
        let chunk_end = (chunk_start + RUN_CHUNK).min(runs);
        let outputs = map_indexed(chunk_start..chunk_end, mode, |r| {
            simulate_run(params, strategies, spec, &offline, j_star, r as u64)
        });
        for output in outputs {
            let output = output?;
            for (i, (nets, st)) in output.nets.iter().zip(output.stats).enumerate() {
                accs[i].add_run(nets)?;
                stats[i].push(st);
            }
        }
    }

    let strategies = accs
        .into_iter()
        .zip(stats)
        .map(|(acc, runs)| StrategyResult {
            series: acc.finish(),
            runs,
        })
        .collect();
    Ok(BatchResult { j_star, strategies })
}
