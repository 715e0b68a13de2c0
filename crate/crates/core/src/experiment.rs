//! Parameter sweeps over repeated seeded trials, aggregation and CSV output.
//!
//! A sweep is the Cartesian product of the `topology`, `C_r`, `C_f` and
//! `epsilon` lists (in that nesting order) times `repeats` trials. Each trial
//! gets a seed derived from `(base_seed, cell, trial)`, so results do not
//! depend on how many workers execute them.

use std::io;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::engine::{self, EngineError, RunRecord, SimConfig};
use crate::network::Topology;

/// Keys accepted in a config document.
pub const KNOWN_KEYS: &[&str] = &[
    "m",
    "hex_disc_radius",
    "circumradius",
    "C_r",
    "C_f",
    "epsilon",
    "topology",
    "max_ticks",
    "speed",
    "seed",
    "sample_every",
    "repeats",
];

const SWEPT_KEYS: [&str; 4] = ["topology", "C_r", "C_f", "epsilon"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("no records for cell {0}")]
    EmptyGroup(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn config_err(field: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Config { field: field.to_string(), reason: reason.into() }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub topology: Topology,
    #[serde(rename = "C_r")]
    pub comm_radius: f64,
    #[serde(rename = "C_f")]
    pub comm_freq: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub topology: Vec<Topology>,
    pub comm_radius: Vec<f64>,
    pub comm_freq: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub repeats: usize,
    pub base_seed: u64,
    /// Non-swept fields; its swept fields and seed are overwritten per run.
    pub base: SimConfig,
}

impl SweepSpec {
    /// Parses a config document. The swept keys accept a scalar or a list;
    /// `seed` is the base seed and `repeats` defaults to 1.
    pub fn from_value(doc: &Value) -> Result<Self, ExperimentError> {
        let map = doc
            .as_object()
            .ok_or_else(|| config_err("<root>", "config must be a JSON object"))?;
        if let Some(key) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(config_err(key, "unknown key"));
        }

        let mut scalars = Map::new();
        for (k, v) in map {
            if k == "repeats" {
                continue;
            }
            let scalar = match v {
                Value::Array(items) if SWEPT_KEYS.contains(&k.as_str()) => {
                    items.first().cloned().ok_or_else(|| config_err(k, "list is empty"))?
                }
                other => other.clone(),
            };
            scalars.insert(k.clone(), scalar);
        }
        let base: SimConfig = serde_json::from_value(Value::Object(scalars))
            .map_err(|e| config_err("<document>", e.to_string()))?;

        let spec = SweepSpec {
            topology: list_of(map, "topology", base.topology)?,
            comm_radius: list_of(map, "C_r", base.comm_radius)?,
            comm_freq: list_of(map, "C_f", base.comm_freq)?,
            epsilon: list_of(map, "epsilon", base.epsilon)?,
            repeats: match map.get("repeats") {
                None => 1,
                Some(v) => v
                    .as_u64()
                    .ok_or_else(|| config_err("repeats", format!("expected an integer, got {v}")))?
                    as usize,
            },
            base_seed: base.seed,
            base,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &topology in &self.topology {
            for &comm_radius in &self.comm_radius {
                for &comm_freq in &self.comm_freq {
                    for &epsilon in &self.epsilon {
                        cells.push(Cell { topology, comm_radius, comm_freq, epsilon });
                    }
                }
            }
        }
        cells
    }

    pub fn cell_config(&self, cell: &Cell, seed: u64) -> SimConfig {
        SimConfig {
            topology: cell.topology,
            comm_radius: cell.comm_radius,
            comm_freq: cell.comm_freq,
            epsilon: cell.epsilon,
            seed,
            ..self.base.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.repeats < 1 {
            return Err(config_err("repeats", "must be at least 1"));
        }
        for (key, len) in [
            ("topology", self.topology.len()),
            ("C_r", self.comm_radius.len()),
            ("C_f", self.comm_freq.len()),
            ("epsilon", self.epsilon.len()),
        ] {
            if len == 0 {
                return Err(config_err(key, "list is empty"));
            }
        }
        for cell in self.cells() {
            self.cell_config(&cell, self.base_seed).validate().map_err(|e| match e {
                EngineError::Config { field, reason } => config_err(field, reason),
                other => other.into(),
            })?;
        }
        Ok(())
    }

    /// The single run this document describes; fails if any key is swept.
    pub fn single_config(&self) -> Result<SimConfig, ExperimentError> {
        for (key, len) in [
            ("topology", self.topology.len()),
            ("C_r", self.comm_radius.len()),
            ("C_f", self.comm_freq.len()),
            ("epsilon", self.epsilon.len()),
        ] {
            if len != 1 {
                return Err(config_err(key, "a single run needs exactly one value"));
            }
        }
        let cells = self.cells();
        Ok(self.cell_config(&cells[0], self.base_seed))
    }
}

fn list_of<T>(map: &Map<String, Value>, key: &str, default: T) -> Result<Vec<T>, ExperimentError>
where
    T: serde::de::DeserializeOwned,
{
    match map.get(key) {
        None => Ok(vec![default]),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| serde_json::from_value(v.clone()).map_err(|e| config_err(key, e.to_string())))
            .collect(),
        Some(v) => Ok(vec![serde_json::from_value(v.clone()).map_err(|e| config_err(key, e.to_string()))?]),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for one trial of one cell.
pub fn derive_seed(base_seed: u64, cell: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ cell as u64) ^ trial as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub cell_index: usize,
    pub cell: Cell,
    pub trial: usize,
    pub config: SimConfig,
}

/// Every (cell, trial) pair in deterministic order, trials innermost.
pub fn expand(spec: &SweepSpec) -> Result<Vec<RunPlan>, ExperimentError> {
    spec.validate()?;
    let mut plans = Vec::new();
    for (cell_index, cell) in spec.cells().into_iter().enumerate() {
        for trial in 0..spec.repeats {
            let seed = derive_seed(spec.base_seed, cell_index, trial);
            plans.push(RunPlan { cell_index, cell, trial, config: spec.cell_config(&cell, seed) });
        }
    }
    Ok(plans)
}

/// Runs every plan on a pool of `workers` threads; output order matches `plans`.
pub fn execute(plans: &[RunPlan], workers: usize) -> Result<Vec<RunRecord>, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let records = pool.install(|| {
        plans
            .par_iter()
            .map(|p| engine::run(&p.config))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub tick: u64,
    pub mean_error: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell_index: usize,
    pub cell: Cell,
    pub mean_error: f64,
    pub ci95: f64,
    pub mean_terminal_tick: f64,
    pub consensus_fraction: f64,
    /// Steady-state error of each trial, in trial order.
    pub trial_errors: Vec<f64>,
    /// Set when the cell has a single trial and `ci95` is reported as zero.
    pub degenerate: bool,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Returns `(mean, 95% normal half-width)`; the half-width is zero for fewer
/// than two values.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

/// Pointwise mean error over a common tick grid. Runs that ended early hold
/// their final value for later ticks.
pub fn mean_trajectory(records: &[RunRecord]) -> Vec<TrajectoryPoint> {
    let Some(step) = records.first().map(|r| r.config.sample_every.max(1)) else {
        return Vec::new();
    };
    let end = records.iter().map(|r| r.terminal_tick()).max().unwrap_or(0);
    let mut ticks: Vec<u64> = (0..=end / step).map(|i| i * step).collect();
    if ticks.last() != Some(&end) {
        ticks.push(end);
    }
    let mut cursors = vec![0usize; records.len()];
    ticks
        .into_iter()
        .map(|tick| {
            let values: Vec<f64> = records
                .iter()
                .zip(cursors.iter_mut())
                .map(|(r, c)| {
                    while *c + 1 < r.trajectory.len() && r.trajectory[*c + 1].tick <= tick {
                        *c += 1;
                    }
                    r.trajectory[*c].average_error
                })
                .collect();
            let (mean_error, ci95) = mean_ci95(&values);
            TrajectoryPoint { tick, mean_error, ci95 }
        })
        .collect()
}

/// Summarises each group of records; groups are `(cell_index, cell, records)`.
pub fn aggregate<'a, I>(groups: I) -> Result<Vec<CellSummary>, ExperimentError>
where
    I: IntoIterator<Item = (usize, Cell, &'a [RunRecord])>,
{
    groups
        .into_iter()
        .map(|(cell_index, cell, records)| {
            if records.is_empty() {
                return Err(ExperimentError::EmptyGroup(cell_index));
            }
            let n = records.len() as f64;
            let trial_errors: Vec<f64> = records.iter().map(|r| r.steady_state_error()).collect();
            let (mean_error, ci95) = mean_ci95(&trial_errors);
            Ok(CellSummary {
                cell_index,
                cell,
                mean_error,
                ci95,
                mean_terminal_tick: records.iter().map(|r| r.terminal_tick() as f64).sum::<f64>() / n,
                consensus_fraction: records.iter().filter(|r| r.converged()).count() as f64 / n,
                degenerate: records.len() == 1,
                trial_errors,
                trajectory: mean_trajectory(records),
            })
        })
        .collect()
}

/// A completed sweep: plans and records in matching order plus per-cell summaries.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub plans: Vec<RunPlan>,
    pub records: Vec<RunRecord>,
    pub summaries: Vec<CellSummary>,
}

pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepOutcome, ExperimentError> {
    let plans = expand(spec)?;
    let records = execute(&plans, workers)?;
    let cells = spec.cells();
    let groups = records.chunks(spec.repeats).zip(cells).enumerate().map(|(i, (rs, c))| (i, c, rs));
    let summaries = aggregate(groups)?;
    Ok(SweepOutcome { plans, records, summaries })
}

fn cell_fields(cell: &Cell, agents: usize) -> Vec<String> {
    vec![
        cell.topology.name().to_string(),
        cell.topology.degree(agents).to_string(),
        cell.comm_radius.to_string(),
        cell.comm_freq.to_string(),
        cell.epsilon.to_string(),
    ]
}

const CELL_HEADER: [&str; 5] = ["topology", "k", "C_r", "C_f", "epsilon"];

fn writer_with_header<W: io::Write>(out: W, tail: &[&str]) -> Result<csv::Writer<W>, ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CELL_HEADER.iter().chain(tail))?;
    Ok(w)
}

/// `topology,k,C_r,C_f,epsilon,trial,seed,steady_state_error,terminal_tick,converged`
pub fn write_sweep_results<W: io::Write>(out: W, outcome: &SweepOutcome) -> Result<(), ExperimentError> {
    let mut w = writer_with_header(
        out,
        &["trial", "seed", "steady_state_error", "terminal_tick", "converged"],
    )?;
    for (plan, rec) in outcome.plans.iter().zip(&outcome.records) {
        let mut row = cell_fields(&plan.cell, plan.config.agents);
        row.extend([
            plan.trial.to_string(),
            plan.config.seed.to_string(),
            rec.steady_state_error().to_string(),
            rec.terminal_tick().to_string(),
            rec.converged().to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `topology,k,C_r,C_f,epsilon,mean_error,ci95,mean_terminal_tick,consensus_fraction`
pub fn write_cell_summary<W: io::Write>(
    out: W,
    summaries: &[CellSummary],
    agents: usize,
) -> Result<(), ExperimentError> {
    let mut w = writer_with_header(
        out,
        &["mean_error", "ci95", "mean_terminal_tick", "consensus_fraction"],
    )?;
    for s in summaries {
        let mut row = cell_fields(&s.cell, agents);
        row.extend([
            s.mean_error.to_string(),
            s.ci95.to_string(),
            s.mean_terminal_tick.to_string(),
            s.consensus_fraction.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `topology,k,C_r,C_f,epsilon,tick,mean_error,ci95`
pub fn write_trajectories<W: io::Write>(
    out: W,
    summaries: &[CellSummary],
    agents: usize,
) -> Result<(), ExperimentError> {
    let mut w = writer_with_header(out, &["tick", "mean_error", "ci95"])?;
    for s in summaries {
        let cell = cell_fields(&s.cell, agents);
        for p in &s.trajectory {
            let mut row = cell.clone();
            row.extend([p.tick.to_string(), p.mean_error.to_string(), p.ci95.to_string()]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
