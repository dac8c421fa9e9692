use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation, Wall};
use crate::model::{BodyShape, Grid};
use crate::Vec3;

/// The shared part shape plus an optional per-part exchange of the first
/// two axes (a rectangle standing upright instead of lying flat).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swimmer {
    pub shape: BodyShape,
    pub swap_axes: Vec<bool>,
}

impl Swimmer {
    pub fn uniform(shape: BodyShape, parts: usize) -> Self {
        Self {
            shape,
            swap_axes: vec![false; parts],
        }
    }

    pub fn parts(&self) -> usize {
        self.swap_axes.len()
    }

    pub fn part_shape(&self, part: usize) -> BodyShape {
        if self.swap_axes.get(part).copied().unwrap_or(false) {
            self.shape.swapped()
        } else {
            self.shape
        }
    }

    /// `r` of the ball containing every part.
    pub fn radius(&self) -> f64 {
        self.shape.circumscribed_radius()
    }

    pub fn measure(&self) -> f64 {
        self.shape.measure()
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }
}

/// Centers `z_1, ..., z_n` of the body parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SwimmerState {
    pub positions: Vec<Vec3>,
}

impl SwimmerState {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() < 3 {
            return Err(Error::InvalidShape(format!(
                "a swimmer needs at least 3 parts, got {}",
                positions.len()
            )));
        }
        Ok(Self { positions })
    }

    pub fn parts(&self) -> usize {
        self.positions.len()
    }

    pub fn num_controls(&self) -> usize {
        2 * self.parts() - 3
    }

    pub fn center_of_mass(&self) -> Vec3 {
        self.positions.iter().sum::<Vec3>() / self.parts() as f64
    }
}

/// Role of a control entry (0-based index into the control vector).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    /// Rotates the two neighbors of `center` about it.
    Rotational { center: usize },
    /// Acts along the link between parts `link` and `link + 1`.
    Elastic { link: usize },
}

impl ControlKind {
    pub fn of(index: usize, parts: usize) -> Result<Self> {
        let count = 2 * parts - 3;
        if index >= count {
            return Err(Error::IndexOutOfRange {
                index,
                detail: format!("{parts}-part swimmer has {count} controls"),
            });
        }
        Ok(if index < parts - 2 {
            ControlKind::Rotational { center: index + 1 }
        } else {
            ControlKind::Elastic {
                link: index - (parts - 2),
            }
        })
    }
}

/// Multiplicative control weights `v_1, ..., v_{2n-3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector(pub Vec<f64>);

impl ControlVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// `v = h a` with `a` normalized to unit length.
    pub fn from_direction(direction: &[f64], h: f64) -> Self {
        let norm = direction.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Self::zeros(direction.len());
        }
        Self(direction.iter().map(|a| h * a / norm).collect())
    }

    /// Only entry `index` set to `value`.
    pub fn unit(len: usize, index: usize, value: f64) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = value;
        v
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Clearances of a configuration; both must be positive for validity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginReport {
    /// `min_{i != j} |z_i - z_j| - 2r`
    pub pair_margin: f64,
    pub closest_pair: (usize, usize),
    /// Smallest gap between a part's closure and a wall.
    pub wall_clearance: f64,
    pub closest_wall: (usize, Wall),
    /// Smallest distance from a part center to the boundary.
    pub center_wall_distance: f64,
}

impl MarginReport {
    pub fn is_valid(&self) -> bool {
        self.pair_margin > 0.0 && self.wall_clearance > 0.0
    }

    pub fn violation(&self) -> Option<Violation> {
        if !(self.pair_margin > 0.0) {
            return Some(Violation::Overlap {
                first: self.closest_pair.0,
                second: self.closest_pair.1,
                margin: self.pair_margin,
            });
        }
        if !(self.wall_clearance > 0.0) {
            return Some(Violation::Boundary {
                part: self.closest_wall.0,
                wall: self.closest_wall.1,
                clearance: self.wall_clearance,
            });
        }
        None
    }
}

/// Pair and wall clearances without judging them.
pub fn margins(state: &SwimmerState, swimmer: &Swimmer, grid: &Grid) -> MarginReport {
    let r = swimmer.radius();
    let mut pair = (f64::INFINITY, (0, 0));
    for i in 0..state.parts() {
        for j in i + 1..state.parts() {
            let m = (state.positions[i] - state.positions[j]).norm() - 2.0 * r;
            if m < pair.0 || m.is_nan() {
                pair = (m, (i, j));
            }
        }
    }
    let ext = grid.extent();
    let mut wall = (f64::INFINITY, (0, Wall { axis: 0, upper: false }));
    let mut center = f64::INFINITY;
    for (i, z) in state.positions.iter().enumerate() {
        let e = swimmer.part_shape(i).half_extents();
        for a in 0..grid.dim() {
            for (upper, gap) in [(false, z[a] - e[a]), (true, ext[a] - z[a] - e[a])] {
                if gap < wall.0 || gap.is_nan() {
                    wall = (gap, (i, Wall { axis: a, upper }));
                }
            }
        }
        center = center.min(grid.wall_distance(z));
    }
    MarginReport {
        pair_margin: pair.0,
        closest_pair: pair.1,
        wall_clearance: wall.0,
        closest_wall: wall.1,
        center_wall_distance: center,
    }
}

/// Strict non-overlap and containment check of a configuration.
pub fn validate_configuration(
    state: &SwimmerState,
    swimmer: &Swimmer,
    grid: &Grid,
) -> Result<MarginReport> {
    if swimmer.parts() != state.parts() {
        return Err(Error::DimensionMismatch(format!(
            "swimmer has {} parts but the state has {}",
            swimmer.parts(),
            state.parts()
        )));
    }
    let report = margins(state, swimmer, grid);
    match report.violation() {
        Some(v) => Err(Error::from_violation(v)),
        None => Ok(report),
    }
}
