//! The two network layers: a static interaction network fixed at
//! initialisation and a physical proximity network recomputed every tick.
//! Agents may communicate only across edges present in both.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::Point;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("lattice degree k={k} must be even")]
    OddDegree { k: usize },
    #[error("lattice degree k={k} out of range [2, {max}] for {m} agents")]
    DegreeRange { k: usize, m: usize, max: usize },
    #[error("need at least {min} agents, got {m}")]
    TooFewAgents { m: usize, min: usize },
    #[error("unknown topology {0:?} (expected \"complete\" or \"lattice:K\")")]
    Parse(String),
}

/// Shape of the interaction network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Topology {
    Lattice { k: usize },
    Complete,
}

impl Topology {
    /// Short name used in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Topology::Lattice { .. } => "lattice",
            Topology::Complete => "complete",
        }
    }

    /// Vertex degree for a population of `m` agents.
    pub fn degree(self, m: usize) -> usize {
        match self {
            Topology::Lattice { k } => k,
            Topology::Complete => m.saturating_sub(1),
        }
    }

    pub fn build(self, m: usize) -> Result<InteractionNetwork, NetworkError> {
        match self {
            Topology::Lattice { k } => InteractionNetwork::ring_lattice(m, k),
            Topology::Complete => InteractionNetwork::complete(m),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Lattice { k } => write!(f, "lattice:{k}"),
            Topology::Complete => f.write_str("complete"),
        }
    }
}

impl FromStr for Topology {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "complete" {
            return Ok(Topology::Complete);
        }
        s.strip_prefix("lattice:")
            .and_then(|k| k.parse().ok())
            .map(|k| Topology::Lattice { k })
            .ok_or_else(|| NetworkError::Parse(s.to_string()))
    }
}

impl TryFrom<String> for Topology {
    type Error = NetworkError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Topology> for String {
    fn from(t: Topology) -> String {
        t.to_string()
    }
}

/// Immutable undirected graph of permitted communication partners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionNetwork {
    topology: Topology,
    neighbors: Vec<Vec<usize>>,
    adjacency: Vec<bool>,
}

impl InteractionNetwork {
    /// Agents on a ring, each joined to its `k/2` nearest neighbours on either side.
    pub fn ring_lattice(m: usize, k: usize) -> Result<Self, NetworkError> {
        if m < 3 {
            return Err(NetworkError::TooFewAgents { m, min: 3 });
        }
        if !k.is_multiple_of(2) {
            return Err(NetworkError::OddDegree { k });
        }
        if k < 2 || k > m - 2 {
            return Err(NetworkError::DegreeRange { k, m, max: m - 2 });
        }
        let mut edges = Vec::new();
        for i in 0..m {
            for step in 1..=k / 2 {
                edges.push((i, (i + step) % m));
            }
        }
        Ok(Self::from_edges(Topology::Lattice { k }, m, edges))
    }

    pub fn complete(m: usize) -> Result<Self, NetworkError> {
        if m < 2 {
            return Err(NetworkError::TooFewAgents { m, min: 2 });
        }
        let edges = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j)));
        Ok(Self::from_edges(Topology::Complete, m, edges.collect()))
    }

    fn from_edges(topology: Topology, m: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![false; m * m];
        for (i, j) in edges {
            adjacency[i * m + j] = true;
            adjacency[j * m + i] = true;
        }
        let neighbors = (0..m)
            .map(|i| (0..m).filter(|&j| adjacency[i * m + j]).collect())
            .collect();
        InteractionNetwork { topology, neighbors, adjacency }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn agent_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        let m = self.agent_count();
        i < m && j < m && self.adjacency[i * m + j]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edges(&self) -> EdgeSet {
        let mut set = EdgeSet::new();
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns.iter().filter(|&&j| j > i) {
                set.insert(i, j);
            }
        }
        set
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Set of unordered agent pairs, stored as `(low, high)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeSet(BTreeSet<(usize, usize)>);

impl EdgeSet {
    pub fn new() -> Self {
        EdgeSet::default()
    }

    /// Inserts the pair `{i, j}`. Self-loops are ignored.
    pub fn insert(&mut self, i: usize, j: usize) {
        if i != j {
            self.0.insert((i.min(j), i.max(j)));
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.0.contains(&(i.min(j), i.max(j)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// One `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        self.iter().map(|(i, j)| format!("{i} {j}\n")).collect()
    }
}

impl FromIterator<(usize, usize)> for EdgeSet {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        let mut set = EdgeSet::new();
        for (i, j) in iter {
            set.insert(i, j);
        }
        set
    }
}

/// Pairs within Euclidean distance `comm_radius` of each other (closed ball).
pub fn physical_edges(positions: &[Point], comm_radius: f64) -> EdgeSet {
    let mut set = EdgeSet::new();
    for (i, a) in positions.iter().enumerate() {
        for (j, b) in positions.iter().enumerate().skip(i + 1) {
            if a.distance(*b) <= comm_radius {
                set.insert(i, j);
            }
        }
    }
    set
}

/// Physical edges that the interaction network allows and whose endpoints are
/// both broadcasting. `broadcasting[i]` flags agent `i`.
pub fn eligible_edges(
    physical: &EdgeSet,
    interaction: &InteractionNetwork,
    broadcasting: &[bool],
) -> EdgeSet {
    let on = |i: usize| broadcasting.get(i).copied().unwrap_or(false);
    physical
        .iter()
        .filter(|&(i, j)| on(i) && on(j) && interaction.is_adjacent(i, j))
        .collect()
}
