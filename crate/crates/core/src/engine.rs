//! Single-run simulation loop.
//!
//! Every tick runs these phases in order:
//!
//! 1. every agent moves towards its destination;
//! 2. agents that reached their target observe it (ascending id);
//! 3. the physical network is recomputed from positions;
//! 4. eligible edges are taken over communicating agents;
//! 5. communicating agents are visited in a shuffled order and each unmatched
//!    agent with an unmatched eligible neighbour fuses with one of them, chosen
//!    uniformly; both partners adopt the fused belief;
//! 6. saturated agents stay available for fusion on the next tick.
//!
//! One ChaCha8 stream seeded from the config drives the whole run, so a run is
//! a pure function of its [`SimConfig`]. Changing the phase order changes every
//! trajectory.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, AgentState, Mode};
use crate::belief::{Belief, BeliefError, GroundTruth};
use crate::environment::{sample_ground_truth, HexGrid, NoiseModel};
use crate::network::{eligible_edges, physical_edges, InteractionNetwork, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("average error of an empty population is undefined")]
    EmptyPopulation,
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

fn config_err(field: &'static str, reason: impl Into<String>) -> EngineError {
    EngineError::Config { field, reason: reason.into() }
}

/// Parameters of one run. Field names on the wire follow the CSV column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    #[serde(rename = "m")]
    pub agents: usize,
    pub hex_disc_radius: u32,
    pub circumradius: f64,
    #[serde(rename = "C_r")]
    pub comm_radius: f64,
    #[serde(rename = "C_f")]
    pub comm_freq: f64,
    pub epsilon: f64,
    pub topology: Topology,
    pub max_ticks: u64,
    pub speed: f64,
    pub seed: u64,
    pub sample_every: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            agents: 20,
            hex_disc_radius: 6,
            circumradius: 10.0,
            comm_radius: 20.0,
            comm_freq: 0.1,
            epsilon: 0.1,
            topology: Topology::Complete,
            max_ticks: 30_000,
            speed: 5.0,
            seed: 0,
            sample_every: 100,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.agents < 2 {
            return Err(config_err("m", format!("need at least 2 agents, got {}", self.agents)));
        }
        if self.hex_disc_radius < 1 {
            return Err(config_err("hex_disc_radius", "must be at least 1"));
        }
        if !(self.circumradius.is_finite() && self.circumradius > 0.0) {
            return Err(config_err("circumradius", format!("must be positive, got {}", self.circumradius)));
        }
        if !(self.comm_radius.is_finite() && self.comm_radius > 0.0) {
            return Err(config_err("C_r", format!("must be positive, got {}", self.comm_radius)));
        }
        if !(0.0..=1.0).contains(&self.comm_freq) {
            return Err(config_err("C_f", format!("must lie in [0, 1], got {}", self.comm_freq)));
        }
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(config_err("epsilon", format!("must lie in [0, 0.5], got {}", self.epsilon)));
        }
        if self.max_ticks < 1 {
            return Err(config_err("max_ticks", "must be at least 1"));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(config_err("speed", format!("must be positive, got {}", self.speed)));
        }
        if self.sample_every < 1 {
            return Err(config_err("sample_every", "must be at least 1"));
        }
        self.topology
            .build(self.agents)
            .map_err(|e| config_err("topology", e.to_string()))?;
        Ok(())
    }
}

/// True iff every belief is fully certain and all are identical.
pub fn consensus_reached<'a, I>(beliefs: I) -> bool
where
    I: IntoIterator<Item = &'a Belief>,
{
    let mut iter = beliefs.into_iter();
    let Some(first) = iter.next() else {
        return false;
    };
    first.is_fully_certain() && iter.all(|b| b == first)
}

/// Population mean of the per-agent normalised error.
pub fn average_error<'a, I>(beliefs: I, truth: &GroundTruth) -> Result<f64, EngineError>
where
    I: IntoIterator<Item = &'a Belief>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for b in beliefs {
        total += b.error(truth)?;
        count += 1;
    }
    if count == 0 {
        return Err(EngineError::EmptyPopulation);
    }
    Ok(total / count as f64)
}

/// Full state of a run in progress.
#[derive(Debug, Clone)]
pub struct SimState {
    config: SimConfig,
    grid: HexGrid,
    network: InteractionNetwork,
    truth: GroundTruth,
    noise: NoiseModel,
    agents: Vec<AgentState>,
    tick: u64,
    fusion_events: u64,
    last_fusions: Vec<(usize, usize)>,
    rng: ChaCha8Rng,
}

impl SimState {
    /// All agents at the launch cell with total uncertainty and a drawn target.
    pub fn initialize(config: &SimConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let grid = HexGrid::build(config.hex_disc_radius, config.circumradius)
            .map_err(|e| config_err("hex_disc_radius", e.to_string()))?;
        let network = config
            .topology
            .build(config.agents)
            .map_err(|e| config_err("topology", e.to_string()))?;
        let noise =
            NoiseModel::new(config.epsilon).map_err(|e| config_err("epsilon", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let truth = sample_ground_truth(grid.len(), &mut rng);
        let agents = (0..config.agents)
            .map(|id| AgentState::new(id, grid.launch(), grid.len(), config.speed, &mut rng))
            .collect();
        Ok(SimState {
            config: config.clone(),
            grid,
            network,
            truth,
            noise,
            agents,
            tick: 0,
            fusion_events: 0,
            last_fusions: Vec::new(),
            rng,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &HexGrid {
        &self.grid
    }

    pub fn network(&self) -> &InteractionNetwork {
        &self.network
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    /// Cumulative number of pairwise fusions.
    pub fn fusion_events(&self) -> u64 {
        self.fusion_events
    }

    /// Pairs that fused during the most recent tick.
    pub fn last_fusions(&self) -> &[(usize, usize)] {
        &self.last_fusions
    }

    pub fn beliefs(&self) -> impl Iterator<Item = &Belief> + '_ {
        self.agents.iter().map(|a| &a.belief)
    }

    /// Whether agent `i` takes part in fusion this tick. Saturated agents
    /// communicate only when communication is enabled at all.
    pub fn is_communicating(&self, i: usize) -> bool {
        match self.agents[i].mode {
            Mode::Broadcasting => true,
            Mode::Saturated => self.config.comm_freq > 0.0,
            Mode::Exploring => false,
        }
    }

    pub fn consensus(&self) -> bool {
        self.agents.iter().all(|a| a.mode == Mode::Saturated) && consensus_reached(self.beliefs())
    }

    pub fn average_error(&self) -> f64 {
        average_error(self.beliefs(), &self.truth).expect("population is non-empty and well-formed")
    }

    pub fn mean_certainty(&self) -> f64 {
        let n = self.grid.len() as f64;
        self.agents.iter().map(|a| a.belief.certainty() as f64 / n).sum::<f64>()
            / self.agents.len() as f64
    }

    pub fn sample(&self) -> Sample {
        Sample {
            tick: self.tick,
            average_error: self.average_error(),
            mean_certainty: self.mean_certainty(),
            fusion_events: self.fusion_events,
        }
    }

    pub fn tick(&mut self) -> Result<(), EngineError> {
        for agent in &mut self.agents {
            agent.advance_position(&self.grid, &mut self.rng);
        }

        for agent in &mut self.agents {
            if agent.at_target(&self.grid) {
                agent.on_arrival(&self.truth, self.noise, self.config.comm_freq, &mut self.rng)?;
            }
        }

        self.last_fusions.clear();
        let communicating: Vec<bool> =
            (0..self.agents.len()).map(|i| self.is_communicating(i)).collect();
        if communicating.iter().filter(|&&c| c).count() >= 2 {
            let positions: Vec<_> = self.agents.iter().map(|a| a.position).collect();
            let physical = physical_edges(&positions, self.config.comm_radius);
            let eligible = eligible_edges(&physical, &self.network, &communicating);
            self.fuse_matched(&communicating, &eligible);
        }

        self.tick += 1;
        Ok(())
    }

    fn fuse_matched(&mut self, communicating: &[bool], eligible: &crate::network::EdgeSet) {
        if eligible.is_empty() {
            return;
        }
        let m = self.agents.len();
        let mut adjacent = vec![Vec::new(); m];
        for (i, j) in eligible.iter() {
            adjacent[i].push(j);
            adjacent[j].push(i);
        }
        let mut order: Vec<usize> = (0..m).filter(|&i| communicating[i]).collect();
        order.shuffle(&mut self.rng);

        let mut matched = vec![false; m];
        for i in order {
            if matched[i] {
                continue;
            }
            let open: Vec<usize> = adjacent[i].iter().copied().filter(|&j| !matched[j]).collect();
            let Some(&j) = open.choose(&mut self.rng) else {
                continue;
            };
            matched[i] = true;
            matched[j] = true;
            let fused = self.agents[i]
                .belief
                .fuse(&self.agents[j].belief)
                .expect("beliefs share the grid's dimension");
            self.agents[i].adopt(fused.clone(), &mut self.rng);
            self.agents[j].adopt(fused, &mut self.rng);
            self.last_fusions.push((i.min(j), i.max(j)));
            self.fusion_events += 1;
        }
    }
}

/// One metrics sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tick: u64,
    pub average_error: f64,
    /// Mean fraction of propositions each agent is certain about.
    pub mean_certainty: f64,
    /// Cumulative fusion count up to this tick.
    pub fusion_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub terminal_tick: u64,
    pub converged: bool,
    /// Average error at the terminal tick.
    pub steady_state_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SimConfig,
    pub trajectory: Vec<Sample>,
    pub summary: RunSummary,
}

impl RunRecord {
    pub fn steady_state_error(&self) -> f64 {
        self.summary.steady_state_error
    }

    pub fn terminal_tick(&self) -> u64 {
        self.summary.terminal_tick
    }

    pub fn converged(&self) -> bool {
        self.summary.converged
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run records are always serialisable")
    }
}

/// Runs until unanimous consensus or `max_ticks`, sampling every
/// `sample_every` ticks plus the first and terminal tick.
pub fn run(config: &SimConfig) -> Result<RunRecord, EngineError> {
    run_observed(config, |_| {})
}

/// Like [`run`], calling `observer` on the initial state and after every tick.
pub fn run_observed<F>(config: &SimConfig, mut observer: F) -> Result<RunRecord, EngineError>
where
    F: FnMut(&SimState),
{
    let mut state = SimState::initialize(config)?;
    observer(&state);
    let mut trajectory = vec![state.sample()];
    let mut converged = state.consensus();
    while !converged && state.tick_count() < config.max_ticks {
        state.tick()?;
        observer(&state);
        converged = state.consensus();
        if state.tick_count() % config.sample_every == 0 {
            trajectory.push(state.sample());
        }
    }
    if trajectory.last().map(|s| s.tick) != Some(state.tick_count()) {
        trajectory.push(state.sample());
    }
    let last = trajectory.last().expect("trajectory has the initial sample");
    Ok(RunRecord {
        config: config.clone(),
        summary: RunSummary {
            terminal_tick: state.tick_count(),
            converged,
            steady_state_error: last.average_error,
        },
        trajectory,
    })
}
