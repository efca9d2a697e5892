//! Experiment orchestration: configuration, batched simulation and the four
//! report commands behind the CLI.

pub mod config;
pub mod output;
pub mod runner;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{lower_bound_constant, upper_bound_constants, AnalysisError};
use crate::env::EnvError;
use crate::format::fmt_num;
use crate::learners::recommended_ld;
use crate::learners::{default_offset, LearnerConfig, LearnerError};
use crate::model::{CostMeans, ModelError};
use crate::offline::{max_sense_depth, solve, solve_with, PolicyError};
use crate::par::Execution;

pub use config::{Algorithm, ExperimentConfig, Overrides, OUT_DIR_ENV};
pub use runner::{run_batch, BatchResult, BatchSpec, RunStats, Strategy, StrategyResult};

use output::{content_hash, render_rows, to_json, write_file, SeriesTable};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Files written by a command and any non-fatal problems it ran into.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandReport {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Hash of the resolved configuration, excluding the output directory.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String, HarnessError> {
    Ok(content_hash(to_json(&hashed_config(cfg)?)?.as_bytes()))
}

fn hashed_config(cfg: &ExperimentConfig) -> Result<Value, HarnessError> {
    let mut value = serde_json::to_value(cfg)?;
    if let Value::Object(map) = &mut value {
        map.remove("out_dir");
    }
    Ok(value)
}

fn resolved_system(cfg: &ExperimentConfig) -> Result<Value, HarnessError> {
    let p = cfg.params()?;
    let dist = |d: crate::model::BoundedUniform| json!({ "lower": d.lower, "width": d.width, "mean": d.mean() });
    let labels: Vec<usize> = p.labels().iter().map(|l| l + 1).collect();
    Ok(json!({
        "num_channels": p.num_channels(),
        "thetas_sorted": p.thetas(),
        "sorted_to_config_channel": labels,
        "reward": dist(p.reward()),
        "sense_cost": dist(p.sense_cost()),
        "tx_cost": dist(p.tx_cost()),
        "j_star": solve(&p).optimal_value(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineRow {
    pub p0: f64,
    pub c0: f64,
    pub depth: usize,
    pub action: &'static str,
    pub j_star: f64,
}

/// Optimal-policy structure over the configured `(p0, c0)` grid, with the
/// channel set and `b0` taken from `[system]`.
pub fn offline_table(cfg: &ExperimentConfig) -> Result<Vec<OfflineRow>, HarnessError> {
    let params = cfg.params()?;
    let b0 = params.reward().mean();
    cfg.offline_table
        .pairs
        .iter()
        .map(|&(p0, c0)| {
            if !(p0 >= 0.0 && c0 >= 0.0 && p0 < b0) {
                return Err(HarnessError::Config(format!(
                    "offline_table pair ({p0}, {c0}) needs 0 <= p0 < b0 = {b0} and c0 >= 0"
                )));
            }
            let policy = solve_with(
                params.thetas(),
                CostMeans {
                    reward: b0,
                    sense: c0,
                    tx: p0,
                },
            );
            let (depth, action) = max_sense_depth(&policy);
            Ok(OfflineRow {
                p0,
                c0,
                depth,
                action: action.name(),
                j_star: policy.optimal_value(),
            })
        })
        .collect()
}

pub fn cmd_offline_table(cfg: &ExperimentConfig) -> Result<CommandReport, HarnessError> {
    let rows: Vec<Vec<String>> = offline_table(cfg)?
        .into_iter()
        .map(|r| {
            vec![
                fmt_num(r.p0),
                fmt_num(r.c0),
                r.depth.to_string(),
                r.action.to_string(),
                fmt_num(r.j_star),
            ]
        })
        .collect();
    let csv = render_rows(&["p0", "c0", "n", "action", "j_star"], &rows);
    Ok(CommandReport {
        files: vec![write_file(&cfg.out_dir, "offline_table.csv", &csv)?],
        warnings: Vec::new(),
    })
}

/// Output of [`cmd_simulate`].
#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub report: CommandReport,
    pub batch: BatchResult,
}

fn strategy_for(cfg: &ExperimentConfig, algorithm: Algorithm) -> Strategy {
    cfg.learner_config(algorithm)
        .map_or(Strategy::Offline, Strategy::Learner)
}

fn write_manifest(
    cfg: &ExperimentConfig,
    command: &str,
    columns: &[String],
    extra: Value,
    outputs: &[(String, String)],
) -> Result<PathBuf, HarnessError> {
    let spec = BatchSpec::new(cfg.horizon, cfg.runs, cfg.base_seed);
    let (l, d) = cfg.alg1_constants();
    let hashes: BTreeMap<&str, String> = outputs
        .iter()
        .map(|(name, body)| (name.as_str(), content_hash(body.as_bytes())))
        .collect();
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": config_hash(cfg)?,
        "config": hashed_config(cfg)?,
        "resolved": {
            "system": resolved_system(cfg)?,
            "alg1": { "L": l, "D": d },
            "columns": columns,
            "tail_start": spec.tail_start,
        },
        "seeds": spec.seeds(),
        "regret": "R(t) = t * j_star - (mean over runs of the cumulative net reward of frames 1..t)",
        "outputs": hashes,
        "summary": extra,
    });
    let name = if command == "simulate" {
        "manifest.json".to_string()
    } else {
        format!("{}_manifest.json", command.replace('-', "_"))
    };
    write_file(&cfg.out_dir, &name, &to_json(&manifest)?)
}

fn summarize(name: &str, result: &StrategyResult, horizon: u64, tail_frames: u64) -> (String, Value) {
    let runs = result.runs.len() as f64;
    let t = horizon as usize;
    let mean_explore = result.runs.iter().map(|r| r.exploration_frames as f64).sum::<f64>() / runs;
    (
        name.to_string(),
        json!({
            "cumulative_regret": result.series.regret_at(t),
            "cumulative_regret_std_error": result.series.cumulative_std_error[t - 1],
            "average_regret": result.series.average_regret(t),
            "mean_exploration_frames": mean_explore,
            "tail_mean_net_reward": result.tail_mean_reward(tail_frames),
            "tail_optimal_plan_fraction": result.tail_optimal_fraction(),
        }),
    )
}

/// Runs every configured algorithm over `runs` seeded runs and writes
/// `cumulative_regret.csv`, `average_regret.csv`, `per_frame_reward.csv` and
/// `manifest.json`.
pub fn cmd_simulate(cfg: &ExperimentConfig, mode: Execution) -> Result<SimulateOutput, HarnessError> {
    cfg.validate()?;
    let params = cfg.params()?;
    let strategies: Vec<Strategy> = cfg.algorithms.iter().map(|&a| strategy_for(cfg, a)).collect();
    let spec = BatchSpec::new(cfg.horizon, cfg.runs, cfg.base_seed);
    let batch = run_batch(&params, &strategies, &spec, mode)?;

    let t = cfg.horizon as usize;
    let j_col = vec![batch.j_star; t];
    let mut cumulative = SeriesTable::new();
    let mut average = SeriesTable::new();
    let mut per_frame = SeriesTable::new();
    for table in [&mut cumulative, &mut average, &mut per_frame] {
        table.push("j_star", j_col.clone());
    }
    let names: Vec<String> = cfg.algorithms.iter().map(|a| a.name().to_string()).collect();
    let mut summary = serde_json::Map::new();
    for (name, result) in names.iter().zip(&batch.strategies) {
        let s = &result.series;
        cumulative.push(name.clone(), s.cumulative_regret.clone());
        average.push(name.clone(), (1..=t).map(|i| s.average_regret(i)).collect());
        per_frame.push(name.clone(), s.per_frame_reward.clone());
        let (k, v) = summarize(name, result, cfg.horizon, cfg.horizon - spec.tail_start);
        summary.insert(k, v);
    }

    let outputs = vec![
        ("cumulative_regret.csv".to_string(), cumulative.render()),
        ("average_regret.csv".to_string(), average.render()),
        ("per_frame_reward.csv".to_string(), per_frame.render()),
    ];
    let mut files = Vec::new();
    for (name, body) in &outputs {
        files.push(write_file(&cfg.out_dir, name, body)?);
    }
    files.push(write_manifest(
        cfg,
        "simulate",
        &names,
        Value::Object(summary),
        &outputs,
    )?);
    Ok(SimulateOutput {
        report: CommandReport {
            files,
            warnings: Vec::new(),
        },
        batch,
    })
}

/// Alg1 over each `L` in `[l_sweep] values`, with `D = L·ln(2K)/2`; writes
/// cumulative regret columns `L=<value>` to `l_sweep.csv`.
pub fn cmd_l_sweep(cfg: &ExperimentConfig, mode: Execution) -> Result<SimulateOutput, HarnessError> {
    cfg.validate()?;
    if cfg.l_sweep.values.is_empty() {
        return Err(HarnessError::Config("l_sweep.values must not be empty".into()));
    }
    let params = cfg.params()?;
    let k = params.num_channels();
    let strategies: Vec<Strategy> = cfg
        .l_sweep
        .values
        .iter()
        .map(|&l| Strategy::Learner(LearnerConfig::alg1(l, default_offset(l, k))))
        .collect();
    let spec = BatchSpec::new(cfg.horizon, cfg.runs, cfg.base_seed);
    let batch = run_batch(&params, &strategies, &spec, mode)?;

    let mut table = SeriesTable::new();
    table.push("j_star", vec![batch.j_star; cfg.horizon as usize]);
    let mut names = Vec::new();
    let mut summary = serde_json::Map::new();
    for (&l, result) in cfg.l_sweep.values.iter().zip(&batch.strategies) {
        let name = format!("L={}", fmt_num(l));
        table.push(name.clone(), result.series.cumulative_regret.clone());
        let (key, mut value) = summarize(&name, result, cfg.horizon, cfg.horizon - spec.tail_start);
        value["L"] = json!(l);
        value["D"] = json!(default_offset(l, k));
        summary.insert(key, value);
        names.push(name);
    }
    let outputs = vec![("l_sweep.csv".to_string(), table.render())];
    let mut files = vec![write_file(&cfg.out_dir, &outputs[0].0, &outputs[0].1)?];
    files.push(write_manifest(
        cfg,
        "l-sweep",
        &names,
        Value::Object(summary),
        &outputs,
    )?);
    Ok(SimulateOutput {
        report: CommandReport {
            files,
            warnings: Vec::new(),
        },
        batch,
    })
}

fn error_value<E: Serialize + std::fmt::Display>(e: &E) -> Result<Value, HarnessError> {
    Ok(json!({ "error": serde_json::to_value(e)?, "message": e.to_string() }))
}

/// Upper-bound constants, recommended exploration constants and the
/// lower-bound report, written to `bounds.json` and `bounds.csv`.
/// Degenerate instances are reported in place of the affected section and
/// as warnings; they are not errors.
pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<(CommandReport, Value), HarnessError> {
    cfg.validate()?;
    let params = cfg.params()?;
    let (l, d) = cfg.alg1_constants();
    let (c1, c2) = upper_bound_constants(&params, l, d);
    let mut warnings = Vec::new();
    let mut csv_row = vec![String::new(); 7];
    csv_row[3] = fmt_num(c1);
    csv_row[4] = fmt_num(c2);
    csv_row[1] = fmt_num(solve(&params).optimal_value());

    let constants = match recommended_ld(&params) {
        Ok(c) => {
            csv_row[5] = fmt_num(c.recommended_l);
            csv_row[6] = fmt_num(c.recommended_d);
            serde_json::to_value(&c)?
        }
        Err(e) => {
            warnings.push(format!("recommended (L, D): {e}"));
            error_value(&e)?
        }
    };
    let lower = match lower_bound_constant(&params) {
        Ok(r) => {
            csv_row[0] = r.k_star.to_string();
            csv_row[2] = fmt_num(r.bound);
            serde_json::to_value(&r)?
        }
        Err(e) => {
            warnings.push(format!("lower bound: {e}"));
            error_value(&e)?
        }
    };
    let report = json!({
        "config_hash": config_hash(cfg)?,
        "system": resolved_system(cfg)?,
        "upper_bound": { "L": l, "D": d, "c1": c1, "c2": c2 },
        "recommended_exploration": constants,
        "lower_bound": lower,
        "warnings": warnings,
    });
    let json_path = write_file(&cfg.out_dir, "bounds.json", &to_json(&report)?)?;
    let csv = render_rows(
        &[
            "k_star",
            "j_star",
            "lower_bound",
            "c1",
            "c2",
            "recommended_l",
            "recommended_d",
        ],
        &[csv_row],
    );
    let csv_path = write_file(&cfg.out_dir, "bounds.csv", &csv)?;
    Ok((
        CommandReport {
            files: vec![json_path, csv_path],
            warnings,
        },
        report,
    ))
}
