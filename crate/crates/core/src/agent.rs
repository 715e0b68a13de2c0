//! Per-agent state machine.
//!
//! An agent alternates between travelling to an uncertain location and
//! observing it. After each observation it may start broadcasting, and it
//! keeps broadcasting until the engine pairs it with a partner for fusion.
//! Agents whose belief is fully certain are `Saturated`: they wander between
//! random cells and stay available for fusion.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Belief, BeliefError, GroundTruth};
use crate::environment::{observe, EnvError, HexGrid, NoiseModel, Point, ARRIVAL_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("agent {0} has no target")]
    NoTarget(usize),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Exploring,
    Broadcasting,
    Saturated,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exploring => "exploring",
            Mode::Broadcasting => "broadcasting",
            Mode::Saturated => "saturated",
        })
    }
}

/// Uniform draw from the propositions `belief` is uncertain about.
pub fn select_target<R: Rng + ?Sized>(belief: &Belief, rng: &mut R) -> Option<usize> {
    belief.uncertain_indices().choose(rng).copied()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub position: Point,
    /// Proposition being investigated; `None` once saturated.
    pub target: Option<usize>,
    /// Cell a saturated agent is wandering towards.
    pub waypoint: Option<usize>,
    pub belief: Belief,
    pub mode: Mode,
    pub speed: f64,
}

impl AgentState {
    /// A fresh, totally uncertain agent at `position` with a target already drawn.
    pub fn new<R: Rng + ?Sized>(
        id: usize,
        position: Point,
        propositions: usize,
        speed: f64,
        rng: &mut R,
    ) -> Self {
        let belief = Belief::unknown(propositions);
        let target = select_target(&belief, rng);
        let mode = if target.is_some() { Mode::Exploring } else { Mode::Saturated };
        AgentState { id, position, target, waypoint: None, belief, mode, speed }
    }

    /// Current travel destination as a cell index.
    pub fn destination(&self) -> Option<usize> {
        match self.mode {
            Mode::Saturated => self.waypoint,
            _ => self.target,
        }
    }

    pub fn at_target(&self, grid: &HexGrid) -> bool {
        self.mode != Mode::Saturated
            && self
                .target
                .is_some_and(|t| self.position.distance(grid.center(t)) <= ARRIVAL_THRESHOLD)
    }

    /// Moves at most `speed` units straight towards the destination, landing
    /// exactly on it when within reach. A saturated agent that has reached its
    /// waypoint (or has none) first draws a new one uniformly over all cells.
    pub fn advance_position<R: Rng + ?Sized>(&mut self, grid: &HexGrid, rng: &mut R) {
        if self.mode == Mode::Saturated {
            let reached = self
                .waypoint
                .is_none_or(|w| self.position.distance(grid.center(w)) <= ARRIVAL_THRESHOLD);
            if reached && !grid.is_empty() {
                self.waypoint = Some(rng.gen_range(0..grid.len()));
            }
        }
        let Some(dest) = self.destination().map(|i| grid.center(i)) else {
            return;
        };
        let dist = self.position.distance(dest);
        if dist <= self.speed {
            self.position = dest;
        } else {
            let t = self.speed / dist;
            self.position = Point::new(
                self.position.x + (dest.x - self.position.x) * t,
                self.position.y + (dest.y - self.position.y) * t,
            );
        }
    }

    /// Observes the target, updates the belief, draws the next target and
    /// possibly starts broadcasting. An agent that is already broadcasting
    /// stays so.
    pub fn on_arrival<R: Rng + ?Sized>(
        &mut self,
        truth: &GroundTruth,
        noise: NoiseModel,
        comm_freq: f64,
        rng: &mut R,
    ) -> Result<(), AgentError> {
        let target = self.target.ok_or(AgentError::NoTarget(self.id))?;
        let evidence = observe(target, truth, noise, rng)?;
        self.belief.absorb(evidence)?;
        if self.belief.is_fully_certain() {
            self.saturate();
            return Ok(());
        }
        self.target = select_target(&self.belief, rng);
        if self.mode != Mode::Broadcasting && rng.gen_bool(comm_freq) {
            self.mode = Mode::Broadcasting;
        } else if self.mode != Mode::Broadcasting {
            self.mode = Mode::Exploring;
        }
        Ok(())
    }

    /// Adopts `belief ⊙ partner` and leaves the broadcasting state. Redraws the
    /// target if fusion made it certain.
    pub fn on_fusion<R: Rng + ?Sized>(
        &mut self,
        partner: &Belief,
        rng: &mut R,
    ) -> Result<(), AgentError> {
        let fused = self.belief.fuse(partner)?;
        self.adopt(fused, rng);
        Ok(())
    }

    /// Applies an already fused belief; used by the engine so both partners
    /// share one computed result.
    pub(crate) fn adopt<R: Rng + ?Sized>(&mut self, fused: Belief, rng: &mut R) {
        self.belief = fused;
        if self.belief.is_fully_certain() {
            if self.mode != Mode::Saturated {
                self.saturate();
            }
            return;
        }
        self.mode = Mode::Exploring;
        self.waypoint = None;
        let still_needed = self.target.is_some_and(|t| !self.belief[t].is_certain());
        if !still_needed {
            self.target = select_target(&self.belief, rng);
        }
    }

    fn saturate(&mut self) {
        self.mode = Mode::Saturated;
        self.target = None;
        self.waypoint = None;
    }

    /// `tick id x y mode certainty belief`
    pub fn log_line(&self, tick: u64) -> String {
        format!(
            "{tick} {} {:.3} {:.3} {} {} {}",
            self.id,
            self.position.x,
            self.position.y,
            self.mode,
            self.belief.certainty(),
            self.belief
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    fn b(s: &str) -> Belief {
        s.parse().unwrap()
    }

    fn agent(belief: &str, mode: Mode) -> AgentState {
        let belief = b(belief);
        let target = belief.uncertain_indices().first().copied();
        AgentState {
            id: 0,
            position: Point::default(),
            target: if mode == Mode::Saturated { None } else { target },
            waypoint: None,
            belief,
            mode,
            speed: 5.0,
        }
    }

    #[test]
    fn select_target_examples() {
        let mut r = rng();
        for _ in 0..20 {
            assert_eq!(select_target(&b("u1"), &mut r), Some(0));
        }
        assert_eq!(select_target(&b("10"), &mut r), None);
    }

    #[test]
    fn select_target_is_uniform() {
        let mut r = rng();
        let draws = 10_000;
        let zeros = (0..draws)
            .filter(|_| select_target(&b("uu"), &mut r) == Some(0))
            .count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn arrival_without_noise_learns_truth() {
        let truth = GroundTruth::new(vec![true, false, true]);
        let noise = NoiseModel::new(0.0).unwrap();
        let mut r = rng();
        let mut a = AgentState::new(0, Point::default(), 3, 5.0, &mut r);
        let i = a.target.unwrap();
        a.on_arrival(&truth, noise, 0.0, &mut r).unwrap();
        assert_eq!(a.belief.certainty(), 1);
        assert_eq!(a.belief[i], truth.values()[i].into());
        assert_eq!(a.mode, Mode::Exploring);
        let next = a.target.unwrap();
        assert_ne!(next, i);
        assert!(!a.belief[next].is_certain());
    }

    #[test]
    fn arrival_comm_freq_extremes() {
        let truth = GroundTruth::new(vec![true; 8]);
        let noise = NoiseModel::new(0.1).unwrap();
        let mut r = rng();
        for (cf, mode) in [(0.0, Mode::Exploring), (1.0, Mode::Broadcasting)] {
            for _ in 0..50 {
                let mut a = AgentState::new(0, Point::default(), 8, 5.0, &mut r);
                a.on_arrival(&truth, noise, cf, &mut r).unwrap();
                assert_eq!(a.mode, mode);
            }
        }
    }

    #[test]
    fn broadcasting_persists_through_arrival() {
        let truth = GroundTruth::new(vec![true; 4]);
        let noise = NoiseModel::new(0.0).unwrap();
        let mut r = rng();
        let mut a = agent("uuuu", Mode::Broadcasting);
        a.on_arrival(&truth, noise, 0.0, &mut r).unwrap();
        assert_eq!(a.mode, Mode::Broadcasting);
    }

    #[test]
    fn arrival_saturates() {
        let truth = GroundTruth::new(vec![true, false]);
        let noise = NoiseModel::new(0.0).unwrap();
        let mut r = rng();
        let mut a = agent("1u", Mode::Broadcasting);
        a.on_arrival(&truth, noise, 0.5, &mut r).unwrap();
        assert_eq!(a.belief, b("10"));
        assert_eq!(a.mode, Mode::Saturated);
        assert_eq!(a.target, None);
    }

    #[test]
    fn arrival_without_target_is_rejected() {
        let truth = GroundTruth::new(vec![true]);
        let noise = NoiseModel::new(0.0).unwrap();
        let mut a = agent("1", Mode::Saturated);
        assert_eq!(
            a.on_arrival(&truth, noise, 0.0, &mut rng()),
            Err(AgentError::NoTarget(0))
        );
    }

    #[test]
    fn fusion_disagreement_resets_to_exploring() {
        let mut r = rng();
        let mut a = agent("1u", Mode::Broadcasting);
        a.on_fusion(&b("0u"), &mut r).unwrap();
        assert_eq!(a.belief, b("uu"));
        assert_eq!(a.mode, Mode::Exploring);
        assert!(a.target.is_some());
    }

    #[test]
    fn fusion_agreement_keeps_saturated() {
        let mut a = agent("11", Mode::Saturated);
        a.on_fusion(&b("11"), &mut rng()).unwrap();
        assert_eq!(a.belief, b("11"));
        assert_eq!(a.mode, Mode::Saturated);
    }

    #[test]
    fn fusion_fills_in_certainty() {
        let mut a = agent("u1", Mode::Broadcasting);
        a.on_fusion(&b("01"), &mut rng()).unwrap();
        assert_eq!(a.belief, b("01"));
        assert_eq!(a.mode, Mode::Saturated);
        assert_eq!(a.target, None);
    }

    #[test]
    fn fusion_redraws_certain_target() {
        let mut a = agent("uuu", Mode::Broadcasting);
        a.target = Some(1);
        a.on_fusion(&b("u0u"), &mut rng()).unwrap();
        let t = a.target.unwrap();
        assert!(t == 0 || t == 2);

        let mut kept = agent("uuu", Mode::Broadcasting);
        kept.target = Some(1);
        kept.on_fusion(&b("0uu"), &mut rng()).unwrap();
        assert_eq!(kept.target, Some(1));
    }

    #[test]
    fn advance_clamps_and_interpolates() {
        let grid = HexGrid::build(2, 10.0).unwrap();
        let mut r = rng();
        let dest = grid.center(0);

        let mut near = agent("u", Mode::Exploring);
        near.position = Point::new(dest.x - 3.0, dest.y);
        near.target = Some(0);
        near.advance_position(&grid, &mut r);
        assert_eq!(near.position, dest);

        let mut far = agent("u", Mode::Exploring);
        far.position = Point::new(dest.x - 10.0, dest.y);
        far.target = Some(0);
        far.advance_position(&grid, &mut r);
        assert!(far.position.distance(Point::new(dest.x - 5.0, dest.y)) < 1e-9);
    }

    #[test]
    fn saturated_redraws_waypoint_on_arrival() {
        let grid = HexGrid::build(2, 10.0).unwrap();
        let mut r = rng();
        let mut a = agent("1", Mode::Saturated);
        a.waypoint = Some(3);
        a.position = grid.center(3);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200 {
            a.position = grid.center(a.waypoint.unwrap());
            a.advance_position(&grid, &mut r);
            seen.insert(a.waypoint.unwrap());
        }
        assert!(seen.len() > 10, "waypoints not spread: {seen:?}");
    }

    #[test]
    fn log_line_format() {
        let a = agent("u10", Mode::Exploring);
        assert_eq!(a.log_line(7), "7 0 0.000 0.000 exploring 2 u10");
    }
}
