//! The hexagonal arena, ground truth generation and the noisy observation channel.
//!
//! Cells use pointy-top axial coordinates. The arena is a hexagonal disc whose
//! central cell is the launch location; every other cell carries one proposition.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Evidence, GroundTruth};

/// Agents closer than this to a cell center are considered to be at the cell.
pub const ARRIVAL_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("hex disc radius must be at least 1, got {0}")]
    Radius(u32),
    #[error("circumradius must be positive and finite, got {0}")]
    Circumradius(f64),
    #[error("noise must lie in [0, 0.5], got {0}")]
    Noise(f64),
    #[error("proposition index {index} out of range for {len} propositions")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Axial {
    pub q: i32,
    pub r: i32,
}

impl Axial {
    pub const NEIGHBOR_OFFSETS: [Axial; 6] = [
        Axial { q: 1, r: 0 },
        Axial { q: 1, r: -1 },
        Axial { q: 0, r: -1 },
        Axial { q: -1, r: 0 },
        Axial { q: -1, r: 1 },
        Axial { q: 0, r: 1 },
    ];

    /// Hex distance from the origin.
    pub fn ring(self) -> i32 {
        (self.q.abs() + self.r.abs() + (self.q + self.r).abs()) / 2
    }

    /// Pointy-top pixel center for a hex of the given circumradius.
    pub fn center(self, circumradius: f64) -> Point {
        let q = f64::from(self.q);
        let r = f64::from(self.r);
        Point {
            x: circumradius * 3f64.sqrt() * (q + r / 2.0),
            y: circumradius * 1.5 * r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub axial: Axial,
    pub center: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HexGrid {
    cells: Vec<Cell>,
    launch: Point,
    circumradius: f64,
}

impl HexGrid {
    /// Builds a disc of `3r(r+1)+1` hexes; the central one is the launch cell,
    /// leaving `3r(r+1)` proposition cells indexed in `(q, r)` scan order.
    pub fn build(hex_disc_radius: u32, circumradius: f64) -> Result<Self, EnvError> {
        if hex_disc_radius < 1 {
            return Err(EnvError::Radius(hex_disc_radius));
        }
        if !(circumradius.is_finite() && circumradius > 0.0) {
            return Err(EnvError::Circumradius(circumradius));
        }
        let rad = hex_disc_radius as i32;
        let mut cells = Vec::new();
        for q in -rad..=rad {
            for r in (-rad).max(-q - rad)..=rad.min(-q + rad) {
                if q == 0 && r == 0 {
                    continue;
                }
                let axial = Axial { q, r };
                cells.push(Cell {
                    index: cells.len(),
                    axial,
                    center: axial.center(circumradius),
                });
            }
        }
        Ok(HexGrid {
            cells,
            launch: Axial { q: 0, r: 0 }.center(circumradius),
            circumradius,
        })
    }

    /// Number of propositions (the launch cell excluded).
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn center(&self, index: usize) -> Point {
        self.cells[index].center
    }

    pub fn launch(&self) -> Point {
        self.launch
    }

    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    /// Whitespace-separated table: `index q r x y`.
    pub fn dump_table(&self) -> String {
        let mut out = String::from("index\tq\tr\tx\ty\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.4}\t{:.4}",
                c.index, c.axial.q, c.axial.r, c.center.x, c.center.y
            );
        }
        out
    }
}

/// Probability that an observation reports the wrong truth value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    epsilon: f64,
}

impl NoiseModel {
    pub fn new(epsilon: f64) -> Result<Self, EnvError> {
        if (0.0..=0.5).contains(&epsilon) {
            Ok(NoiseModel { epsilon })
        } else {
            Err(EnvError::Noise(epsilon))
        }
    }

    pub fn epsilon(self) -> f64 {
        self.epsilon
    }
}

/// Each proposition is independently true with probability ½.
pub fn sample_ground_truth<R: Rng + ?Sized>(n: usize, rng: &mut R) -> GroundTruth {
    GroundTruth::new((0..n).map(|_| rng.gen_bool(0.5)).collect())
}

/// Observes proposition `index`: the true value with probability `1 − ε`,
/// its negation otherwise.
pub fn observe<R: Rng + ?Sized>(
    index: usize,
    truth: &GroundTruth,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<Evidence, EnvError> {
    let actual = truth
        .get(index)
        .ok_or(EnvError::IndexOutOfRange { index, len: truth.len() })?;
    let flipped = rng.gen_bool(noise.epsilon);
    Ok(Evidence { index, value: actual ^ flipped })
}
