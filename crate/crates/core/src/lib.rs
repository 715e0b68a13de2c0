//! Seedable discrete-time simulator of collective learning.
//!
//! Agents explore a hexagonal arena, observe noisy evidence about locations
//! and fuse three-valued beliefs with peers. Who may fuse with whom is the
//! intersection of a per-tick proximity network and a fixed interaction
//! network. [`experiment`] runs repeated seeded trials over parameter grids.

pub mod agent;
pub mod belief;
pub mod engine;
pub mod environment;
pub mod experiment;
pub mod network;

pub use agent::{AgentState, Mode};
pub use belief::{Belief, Evidence, GroundTruth, TruthValue};
pub use engine::{run, RunRecord, SimConfig, SimState};
pub use environment::{HexGrid, NoiseModel, Point};
pub use experiment::{CellSummary, SweepSpec};
pub use network::{EdgeSet, InteractionNetwork, Topology};
