//! Regret bookkeeping and the constants of the regret bounds.

use serde::Serialize;
use thiserror::Error;

use crate::model::{FrameRecord, SystemParams};
use crate::offline::{
    evaluate_with, max_sense_depth, solve, solve_with, Fallback, SequentialPolicy, MAX_BRUTE_FORCE_CHANNELS,
};

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum AnalysisError {
    #[error("KL divergence undefined for p = {p}, q = {q}")]
    DomainError { p: f64, q: f64 },
    #[error("run {run} has {got} frames, expected {expected}")]
    LengthMismatch { run: usize, expected: usize, got: usize },
    #[error("the optimal policy touches every channel; no channel is provably suboptimal")]
    NoSuboptimalChannels,
    #[error("{channels} channels exceed the enumeration limit of {limit}")]
    TooManyChannels { channels: usize, limit: usize },
    #[error("channel {channel} is indistinguishable from the best channel (zero divergence)")]
    ZeroDivergence { channel: usize },
}

/// KL divergence between Bernoulli(p) and Bernoulli(q), with `0·ln 0 = 0`.
pub fn bernoulli_kl(p: f64, q: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&p) || !(q > 0.0 && q < 1.0) {
        return Err(AnalysisError::DomainError { p, q });
    }
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    Ok((term(p, q) + term(1.0 - p, 1.0 - q)).max(0.0))
}

/// Run-averaged realized regret `t·J* - mean cumulative net reward`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretSeries {
    pub j_star: f64,
    pub runs: usize,
    /// Mean net reward of frame `t` (index `t - 1`).
    pub per_frame_reward: Vec<f64>,
    /// `R(t)` for `t = 1..=T` (index `t - 1`).
    pub cumulative_regret: Vec<f64>,
    /// Standard error of `R(t)` across runs (zero for a single run).
    pub cumulative_std_error: Vec<f64>,
    /// Total net reward of each run over the full horizon.
    pub per_run_totals: Vec<f64>,
}

impl RegretSeries {
    pub fn horizon(&self) -> usize {
        self.cumulative_regret.len()
    }

    /// `R(t)`, with `R(0) = 0`.
    pub fn regret_at(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.cumulative_regret[t - 1]
        }
    }

    pub fn average_regret(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.cumulative_regret[t - 1] / t as f64
        }
    }

    /// Regret of each run at the horizon.
    pub fn per_run_regret(&self) -> Vec<f64> {
        let t = self.horizon() as f64;
        self.per_run_totals
            .iter()
            .map(|&total| t * self.j_star - total)
            .collect()
    }
}

/// Streaming builder for [`RegretSeries`]; runs must be added in a fixed
/// order for bit-identical results.
#[derive(Debug, Clone)]
pub struct RegretAccumulator {
    j_star: f64,
    sum_frame: Vec<f64>,
    sum_cum: Vec<f64>,
    sum_sq_cum: Vec<f64>,
    totals: Vec<f64>,
}

impl RegretAccumulator {
    pub fn new(j_star: f64, horizon: usize) -> Self {
        Self {
            j_star,
            sum_frame: vec![0.0; horizon],
            sum_cum: vec![0.0; horizon],
            sum_sq_cum: vec![0.0; horizon],
            totals: Vec::new(),
        }
    }

    pub fn add_run(&mut self, net_rewards: &[f64]) -> Result<(), AnalysisError> {
        if net_rewards.len() != self.sum_frame.len() {
            return Err(AnalysisError::LengthMismatch {
                run: self.totals.len(),
                expected: self.sum_frame.len(),
                got: net_rewards.len(),
            });
        }
        let mut cum = 0.0;
        for (t, &r) in net_rewards.iter().enumerate() {
            cum += r;
            self.sum_frame[t] += r;
            self.sum_cum[t] += cum;
            self.sum_sq_cum[t] += cum * cum;
        }
        self.totals.push(cum);
        Ok(())
    }

    pub fn finish(self) -> RegretSeries {
        let runs = self.totals.len();
        let n = runs.max(1) as f64;
        let per_frame_reward = self.sum_frame.iter().map(|s| s / n).collect();
        let cumulative_regret = self
            .sum_cum
            .iter()
            .enumerate()
            .map(|(i, s)| (i + 1) as f64 * self.j_star - s / n)
            .collect();
        let cumulative_std_error = self
            .sum_cum
            .iter()
            .zip(&self.sum_sq_cum)
            .map(|(&s, &sq)| {
                if runs < 2 {
                    return 0.0;
                }
                let mean = s / n;
                let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect();
        RegretSeries {
            j_star: self.j_star,
            runs,
            per_frame_reward,
            cumulative_regret,
            cumulative_std_error,
            per_run_totals: self.totals,
        }
    }
}

/// Realized regret of a batch of equally long runs.
pub fn regret_series(runs: &[Vec<FrameRecord>], j_star: f64) -> Result<RegretSeries, AnalysisError> {
    let horizon = runs.first().map_or(0, Vec::len);
    let mut acc = RegretAccumulator::new(j_star, horizon);
    for run in runs {
        let nets: Vec<f64> = run.iter().map(|r| r.net_reward).collect();
        acc.add_run(&nets)?;
    }
    Ok(acc.finish())
}

/// `(C1, C2)` with `C1 = K L (b0 + K c0)` and `C2 = (π² + D K + 1)(b0 + K c0)`.
pub fn upper_bound_constants(params: &SystemParams, explore_slope: f64, explore_offset: f64) -> (f64, f64) {
    let k = params.num_channels() as f64;
    let m = params.means();
    let worst_frame = m.reward + k * m.sense;
    let c1 = k * explore_slope * worst_frame;
    let c2 = (std::f64::consts::PI.powi(2) + explore_offset * k + 1.0) * worst_frame;
    (c1, c2)
}

/// Regret bound `C1 ln t + C2`.
pub fn upper_bound(c1: f64, c2: f64, t: usize) -> f64 {
    c1 * (t as f64).ln() + c2
}

/// Slot-1 upper threshold when channel `k` is moved to the front and the
/// rest keep their descending order.
pub fn u_prime(params: &SystemParams, channel: usize) -> f64 {
    let thetas = params.thetas();
    let mut order = Vec::with_capacity(thetas.len());
    order.push(thetas[channel]);
    order.extend(
        thetas
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != channel)
            .map(|(_, &t)| t),
    );
    solve_with(&order, params.means()).uppers[0]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundTerm {
    /// 0-based sorted channel index.
    pub channel: usize,
    pub u_prime: f64,
    pub kl_value: f64,
    pub min_delta: f64,
    pub ratio: f64,
    pub argmin: SequentialPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    /// Number of channels the optimal policy touches.
    pub k_star: usize,
    pub j_star: f64,
    pub per_k: Vec<LowerBoundTerm>,
    pub bound: f64,
}

/// Every sequential policy whose sensed channels are in descending order:
/// all subsets, each with a quit or a guess on an unsensed channel.
pub fn descending_policies(num_channels: usize) -> impl Iterator<Item = SequentialPolicy> {
    (0usize..1 << num_channels).flat_map(move |mask| {
        let sense_order: Vec<usize> = (0..num_channels).filter(|&i| mask & (1 << i) != 0).collect();
        let fallbacks = std::iter::once(Fallback::Quit).chain(
            (0..num_channels)
                .filter(move |&j| mask & (1 << j) == 0)
                .map(Fallback::Guess),
        );
        fallbacks.map(move |fb| SequentialPolicy::new(sense_order.clone(), fb))
    })
}

/// Per-channel terms of the logarithmic regret lower bound and their maximum.
///
/// The minimum gap for channel `k` ranges over descending-order sequential
/// policies that sense `k` or guess on it.
pub fn lower_bound_constant(params: &SystemParams) -> Result<LowerBoundReport, AnalysisError> {
    let k = params.num_channels();
    if k > MAX_BRUTE_FORCE_CHANNELS {
        return Err(AnalysisError::TooManyChannels {
            channels: k,
            limit: MAX_BRUTE_FORCE_CHANNELS,
        });
    }
    let policy = solve(params);
    let j_star = policy.optimal_value();
    let (k_star, _) = max_sense_depth(&policy);
    if k_star >= k {
        return Err(AnalysisError::NoSuboptimalChannels);
    }

    let thetas = params.thetas();
    let means = params.means();
    let mut best: Vec<Option<(f64, SequentialPolicy)>> = vec![None; k];
    for pi in descending_policies(k) {
        let delta = j_star - evaluate_with(thetas, means, &pi);
        for (ch, slot) in best.iter_mut().enumerate().skip(k_star) {
            if pi.touches(ch) && slot.as_ref().is_none_or(|(d, _)| delta < *d) {
                *slot = Some((delta, pi.clone()));
            }
        }
    }

    let mut per_k = Vec::with_capacity(k - k_star);
    for (channel, entry) in best.into_iter().enumerate().skip(k_star) {
        let (min_delta, argmin) = entry.expect("every channel is touched by some policy");
        let u = u_prime(params, channel);
        let kl_value = bernoulli_kl(thetas[channel], thetas[0].max(u))?;
        if kl_value <= 0.0 {
            return Err(AnalysisError::ZeroDivergence { channel });
        }
        per_k.push(LowerBoundTerm {
            channel,
            u_prime: u,
            kl_value,
            min_delta,
            ratio: min_delta / kl_value,
            argmin,
        });
    }
    let bound = per_k.iter().map(|t| t.ratio).fold(0.0, f64::max);
    Ok(LowerBoundReport {
        k_star,
        j_star,
        per_k,
        bound,
    })
}
