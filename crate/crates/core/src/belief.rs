//! Three-valued beliefs and the fusion operator.
//!
//! A [`Belief`] assigns one of `0`, `½` (unknown) or `1` to each proposition.
//! Evidence and peer beliefs are both combined with the same element-wise
//! operator, [`TruthValue::fuse`]. Propositions are indexed from zero.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BeliefError {
    #[error("dimension mismatch: {left} vs {right} propositions")]
    Dimension { left: usize, right: usize },
    #[error("malformed evidence: expected exactly one certain entry, found {0}")]
    MalformedEvidence(usize),
    #[error("proposition index {index} out of range for {len} propositions")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid truth value character {0:?} (expected '0', 'u' or '1')")]
    InvalidChar(char),
}

/// A truth value of the three-valued logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TruthValue {
    False,
    Unknown,
    True,
}

impl TruthValue {
    pub const ALL: [TruthValue; 3] = [TruthValue::False, TruthValue::Unknown, TruthValue::True];

    /// Fusion operator. Certainty wins over uncertainty, agreement is kept
    /// and a `0`/`1` disagreement collapses to unknown.
    pub fn fuse(self, other: TruthValue) -> TruthValue {
        use TruthValue::*;
        match (self, other) {
            (Unknown, v) | (v, Unknown) => v,
            (False, False) => False,
            (True, True) => True,
            (False, True) | (True, False) => Unknown,
        }
    }

    pub fn is_certain(self) -> bool {
        self != TruthValue::Unknown
    }

    /// Numeric interpretation in `{0, 0.5, 1}`.
    pub fn as_f64(self) -> f64 {
        match self {
            TruthValue::False => 0.0,
            TruthValue::Unknown => 0.5,
            TruthValue::True => 1.0,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            TruthValue::False => '0',
            TruthValue::Unknown => 'u',
            TruthValue::True => '1',
        }
    }

    pub fn from_char(c: char) -> Result<Self, BeliefError> {
        match c {
            '0' => Ok(TruthValue::False),
            'u' => Ok(TruthValue::Unknown),
            '1' => Ok(TruthValue::True),
            other => Err(BeliefError::InvalidChar(other)),
        }
    }
}

impl From<bool> for TruthValue {
    fn from(b: bool) -> Self {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }
}

/// An agent's world model: one truth value per proposition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Belief(Vec<TruthValue>);

impl Belief {
    /// Total uncertainty over `n` propositions.
    pub fn unknown(n: usize) -> Self {
        Belief(vec![TruthValue::Unknown; n])
    }

    pub fn from_values(values: Vec<TruthValue>) -> Self {
        Belief(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[TruthValue] {
        &self.0
    }

    /// Number of propositions with a certain truth value.
    pub fn certainty(&self) -> usize {
        self.0.iter().filter(|v| v.is_certain()).count()
    }

    pub fn is_fully_certain(&self) -> bool {
        self.0.iter().all(|v| v.is_certain())
    }

    /// Indices of the propositions the belief is uncertain about, ascending.
    pub fn uncertain_indices(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_certain())
            .map(|(i, _)| i)
            .collect()
    }

    /// Element-wise fusion `self ⊙ other`.
    pub fn fuse(&self, other: &Belief) -> Result<Belief, BeliefError> {
        self.check_len(other.len())?;
        Ok(Belief(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.fuse(*b))
                .collect(),
        ))
    }

    /// Evidential updating `B|E`. `evidence` must be unknown everywhere except
    /// at exactly one proposition.
    pub fn update_with_evidence(&self, evidence: &Belief) -> Result<Belief, BeliefError> {
        Evidence::try_from_belief(evidence)?;
        self.fuse(evidence)
    }

    /// In-place evidential update. Equivalent to [`Belief::update_with_evidence`]
    /// on the expanded evidence, since unknown is the identity of the operator.
    pub fn absorb(&mut self, evidence: Evidence) -> Result<(), BeliefError> {
        let len = self.len();
        let slot = self
            .0
            .get_mut(evidence.index)
            .ok_or(BeliefError::IndexOutOfRange { index: evidence.index, len })?;
        *slot = slot.fuse(evidence.value.into());
        Ok(())
    }

    /// Normalised L1 distance to the ground truth, in `[0, 1]`.
    pub fn error(&self, truth: &GroundTruth) -> Result<f64, BeliefError> {
        self.check_len(truth.len())?;
        if self.is_empty() {
            return Ok(0.0);
        }
        let total: f64 = self
            .0
            .iter()
            .zip(truth.values())
            .map(|(b, &s)| (b.as_f64() - TruthValue::from(s).as_f64()).abs())
            .sum();
        Ok(total / self.len() as f64)
    }

    fn check_len(&self, other: usize) -> Result<(), BeliefError> {
        if self.len() == other {
            Ok(())
        } else {
            Err(BeliefError::Dimension { left: self.len(), right: other })
        }
    }
}

impl Index<usize> for Belief {
    type Output = TruthValue;

    fn index(&self, i: usize) -> &TruthValue {
        &self.0[i]
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            write!(f, "{}", v.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Belief {
    type Err = BeliefError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars().map(TruthValue::from_char).collect::<Result<_, _>>().map(Belief)
    }
}

impl Serialize for Belief {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Belief {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A single observation: an assertion about one proposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evidence {
    pub index: usize,
    pub value: bool,
}

impl Evidence {
    /// Expands to the belief form `⟨½, …, value, …, ½⟩` over `n` propositions.
    pub fn to_belief(self, n: usize) -> Result<Belief, BeliefError> {
        if self.index >= n {
            return Err(BeliefError::IndexOutOfRange { index: self.index, len: n });
        }
        let mut values = vec![TruthValue::Unknown; n];
        values[self.index] = self.value.into();
        Ok(Belief(values))
    }

    pub fn try_from_belief(belief: &Belief) -> Result<Evidence, BeliefError> {
        let mut certain = belief.0.iter().enumerate().filter(|(_, v)| v.is_certain());
        match (certain.next(), certain.next()) {
            (Some((index, v)), None) => Ok(Evidence { index, value: *v == TruthValue::True }),
            (None, _) => Err(BeliefError::MalformedEvidence(0)),
            (Some(_), Some(_)) => Err(BeliefError::MalformedEvidence(belief.certainty())),
        }
    }
}

/// The hidden state of the world: every proposition is certainly true or false.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundTruth(Vec<bool>);

impl GroundTruth {
    pub fn new(values: Vec<bool>) -> Self {
        GroundTruth(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn as_belief(&self) -> Belief {
        Belief(self.0.iter().map(|&b| b.into()).collect())
    }
}
