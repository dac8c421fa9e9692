//! Internal rotational and elastic forces of the swimmer.
//!
//! Every unit force is a list of constant density vectors, one per body
//! part, rasterized through the part masks. All parts share the measure of
//! the reference shape, so the vectors of one unit force summing to zero is
//! exactly the discrete force balance.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::ForceField;
use crate::model::{validate_configuration, BodyMask, ControlKind, ControlVector, Grid, Swimmer, SwimmerState};
use crate::Vec3;

/// `A x` with `A = [[0, 1], [-1, 0]]`.
fn rotate_2d(x: &Vec3) -> Vec3 {
    Vec3::new(x[1], -x[0], 0.0)
}

/// Rotational operator pair at a middle part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationalOperatorPair {
    /// `P = Q = A`.
    Planar,
    /// `P x = n x x`, `Q x = x x n`.
    Spatial { normal: Vec3 },
}

impl RotationalOperatorPair {
    /// Operators at `center` (0-based, `1..=n-2`).
    pub fn at(state: &SwimmerState, center: usize, dim: usize) -> Self {
        if dim == 2 {
            return Self::Planar;
        }
        let z = &state.positions;
        let normal = (z[center - 1] - z[center]).cross(&(z[center + 1] - z[center]));
        Self::Spatial { normal }
    }

    pub fn p(&self, x: &Vec3) -> Vec3 {
        match self {
            Self::Planar => rotate_2d(x),
            Self::Spatial { normal } => normal.cross(x),
        }
    }

    pub fn q(&self, x: &Vec3) -> Vec3 {
        match self {
            Self::Planar => rotate_2d(x),
            Self::Spatial { normal } => x.cross(normal),
        }
    }
}

/// Density vectors of one unit control on every part (zero on parts the
/// control does not touch).
pub fn unit_densities(state: &SwimmerState, index: usize, grid: &Grid) -> Result<Vec<Vec3>> {
    let n = state.parts();
    let z = &state.positions;
    let mut out = vec![Vec3::zeros(); n];
    match ControlKind::of(index, n)? {
        ControlKind::Rotational { center: i } => {
            let prev = z[i - 1] - z[i];
            let next = z[i + 1] - z[i];
            let threshold = 1e-8 * grid.extent()[..grid.dim()].iter().cloned().fold(0.0, f64::max);
            if grid.dim() == 2 && next.norm() < threshold {
                return Err(Error::DegenerateGeometry {
                    part: i + 1,
                    detail: format!("|z_{} - z_{}| = {:e}", i + 2, i + 1, next.norm()),
                });
            }
            let ops = RotationalOperatorPair::at(state, i, grid.dim());
            let ratio = prev.norm_squared() / next.norm_squared();
            let ratio = if ratio.is_finite() { ratio } else { 0.0 };
            out[i - 1] = ops.p(&prev);
            out[i + 1] = -ops.q(&next) * ratio;
            out[i] = ops.p(&-prev) - ops.q(&-next) * ratio;
        }
        ControlKind::Elastic { link } => {
            let d = z[link + 1] - z[link];
            out[link] = d;
            out[link + 1] = -d;
        }
    }
    Ok(out)
}

/// Per-part densities `sum_j v_j f_j` of a control vector.
pub fn part_densities(state: &SwimmerState, v: &ControlVector, grid: &Grid) -> Result<Vec<Vec3>> {
    if v.len() != state.num_controls() {
        return Err(Error::DimensionMismatch(format!(
            "{} controls for a {}-part swimmer (expected {})",
            v.len(),
            state.parts(),
            state.num_controls()
        )));
    }
    let mut out = vec![Vec3::zeros(); state.parts()];
    for (j, vj) in v.0.iter().enumerate() {
        if *vj == 0.0 {
            continue;
        }
        for (acc, d) in out.iter_mut().zip(unit_densities(state, j, grid)?) {
            *acc += d * *vj;
        }
    }
    Ok(out)
}

/// Masks of every part at one configuration.
#[derive(Debug, Clone)]
pub struct PartMasks {
    pub masks: Vec<BodyMask>,
}

impl PartMasks {
    pub fn new(state: &SwimmerState, swimmer: &Swimmer, grid: &Grid) -> Result<Self> {
        let masks = state
            .positions
            .iter()
            .enumerate()
            .map(|(i, z)| BodyMask::new(&swimmer.part_shape(i), z, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { masks })
    }

    /// Grid field equal to `densities[i]` on part `i`.
    pub fn rasterize(&self, densities: &[Vec3], grid: &Grid) -> ForceField {
        let mut f = ForceField::zeros(grid);
        for (m, d) in self.masks.iter().zip(densities) {
            m.add_vector(&mut f, d);
        }
        f
    }
}

fn unit_field(state: &SwimmerState, swimmer: &Swimmer, grid: &Grid, index: usize) -> Result<ForceField> {
    validate_configuration(state, swimmer, grid)?;
    let dens = unit_densities(state, index, grid)?;
    Ok(PartMasks::new(state, swimmer, grid)?.rasterize(&dens, grid))
}

/// Rotational unit force `f_{i-1}` about the middle part `center`
/// (0-based, `1..=n-2`).
pub fn rotational_force(
    state: &SwimmerState,
    swimmer: &Swimmer,
    grid: &Grid,
    center: usize,
) -> Result<ForceField> {
    if center == 0 || center + 1 >= state.parts() {
        return Err(Error::IndexOutOfRange {
            index: center,
            detail: format!("rotation centers are parts 1..={}", state.parts().saturating_sub(2)),
        });
    }
    unit_field(state, swimmer, grid, center - 1)
}

/// Elastic unit force on the link between parts `link` and `link + 1`
/// (0-based).
pub fn elastic_force(state: &SwimmerState, swimmer: &Swimmer, grid: &Grid, link: usize) -> Result<ForceField> {
    if link + 1 >= state.parts() {
        return Err(Error::IndexOutOfRange {
            index: link,
            detail: format!("links are 0..={}", state.parts().saturating_sub(2)),
        });
    }
    unit_field(state, swimmer, grid, state.parts() - 2 + link)
}

/// Unit force of a control index (0-based).
pub fn control_force(state: &SwimmerState, swimmer: &Swimmer, grid: &Grid, index: usize) -> Result<ForceField> {
    unit_field(state, swimmer, grid, index)
}

/// `f = sum_j v_j f_j`.
pub fn assemble_force(
    state: &SwimmerState,
    v: &ControlVector,
    swimmer: &Swimmer,
    grid: &Grid,
) -> Result<ForceField> {
    validate_configuration(state, swimmer, grid)?;
    let dens = part_densities(state, v, grid)?;
    Ok(PartMasks::new(state, swimmer, grid)?.rasterize(&dens, grid))
}

/// Total force exerted on each part, `∫ ξ_i dx` times its density.
pub fn integrated_part_forces(masks: &PartMasks, densities: &[Vec3], grid: &Grid) -> Vec<Vec3> {
    let vol = grid.cell_volume();
    masks
        .masks
        .iter()
        .zip(densities)
        .map(|(m, d)| {
            let mut out = Vec3::zeros();
            for a in 0..grid.dim() {
                out[a] = d[a] * m.faces[a].iter().map(|(_, w)| w).sum::<f64>() * vol;
            }
            out
        })
        .collect()
}

/// Net torque `sum_i z_i x F_i` about the origin; a diagnostic only.
pub fn net_torque(state: &SwimmerState, part_forces: &[Vec3]) -> Vec3 {
    state
        .positions
        .iter()
        .zip(part_forces)
        .map(|(z, f)| z.cross(f))
        .sum()
}

/// CSV with columns `part, fx, fy[, fz]`, parts numbered from 1.
pub fn part_forces_csv(part_forces: &[Vec3], dim: usize) -> String {
    let mut s = String::from(if dim == 3 { "part,fx,fy,fz\n" } else { "part,fx,fy\n" });
    for (i, f) in part_forces.iter().enumerate() {
        let _ = write!(s, "{}", i + 1);
        for a in 0..dim {
            let _ = write!(s, ",{:e}", f[a]);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BodyShape, DomainSpec};
    use proptest::prelude::*;

    fn state(pts: &[[f64; 3]]) -> SwimmerState {
        SwimmerState::new(pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect()).unwrap()
    }

    #[test]
    fn planar_rotation_example() {
        let g = DomainSpec::cube(2, 10.0, 16, 1.0).unwrap().grid();
        let s = state(&[[6.0, 5.0, 0.0], [5.0, 5.0, 0.0], [5.0, 6.0, 0.0]]);
        let d = unit_densities(&s, 0, &g).unwrap();
        assert_eq!(d[0], Vec3::new(0.0, -1.0, 0.0));
        assert_eq!(d[2], Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(d[1], Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(d.iter().sum::<Vec3>(), Vec3::zeros());
    }

    #[test]
    fn spatial_rotation_examples() {
        let g = DomainSpec::cube(3, 10.0, 8, 1.0).unwrap().grid();
        let s = state(&[[6.0, 5.0, 5.0], [5.0, 5.0, 5.0], [3.0, 5.0, 5.0]]);
        assert!(unit_densities(&s, 0, &g).unwrap().iter().all(|d| *d == Vec3::zeros()));
        let s = state(&[[6.0, 5.0, 5.0], [5.0, 5.0, 5.0], [5.0, 6.0, 5.0]]);
        assert_eq!(unit_densities(&s, 0, &g).unwrap()[0], Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn elastic_examples() {
        let g = DomainSpec::cube(3, 20.0, 8, 1.0).unwrap().grid();
        let s = state(&[[5.0, 5.0, 5.0], [5.0, 5.0, 10.0], [12.0, 5.0, 10.0]]);
        let d = unit_densities(&s, 1, &g).unwrap();
        assert_eq!((d[0], d[1], d[2]), (Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -5.0), Vec3::zeros()));
    }

    #[test]
    fn degenerate_planar_ratio() {
        let g = DomainSpec::cube(2, 1.0, 16, 1.0).unwrap().grid();
        let s = state(&[[0.3, 0.5, 0.0], [0.5, 0.5, 0.0], [0.5, 0.5, 0.0]]);
        assert!(matches!(unit_densities(&s, 0, &g), Err(Error::DegenerateGeometry { .. })));
    }

    fn four_parts() -> (SwimmerState, Swimmer, Grid) {
        let g = DomainSpec::cube(2, 1.0, 32, 1.0).unwrap().grid();
        let s = state(&[[0.2, 0.3, 0.0], [0.4, 0.35, 0.0], [0.6, 0.5, 0.0], [0.7, 0.75, 0.0]]);
        (s, Swimmer::uniform(BodyShape::Disc { r: 0.06 }, 4), g)
    }

    #[test]
    fn assemble_matches_single_control() {
        let (s, sw, g) = four_parts();
        assert_eq!(assemble_force(&s, &ControlVector::zeros(5), &sw, &g).unwrap().max_abs(), 0.0);
        let a = assemble_force(&s, &ControlVector::unit(5, 2, 1.0), &sw, &g).unwrap();
        assert_eq!(a, elastic_force(&s, &sw, &g, 0).unwrap());
        assert_eq!(
            control_force(&s, &sw, &g, 1).unwrap(),
            rotational_force(&s, &sw, &g, 2).unwrap()
        );
    }

    #[test]
    fn forces_live_on_masks_and_csv() {
        let (s, sw, g) = four_parts();
        let v = ControlVector(vec![0.3, -1.0, 0.5, 2.0, 0.1]);
        let f = assemble_force(&s, &v, &sw, &g).unwrap();
        let masks = PartMasks::new(&s, &sw, &g).unwrap();
        let dens = part_densities(&s, &v, &g).unwrap();
        let per_part = integrated_part_forces(&masks, &dens, &g);
        for (p, d) in per_part.iter().zip(&dens) {
            assert!((p - d * sw.measure()).norm() < 1e-13);
        }
        assert!((per_part.iter().sum::<Vec3>() - f.integral()).norm() < 1e-14);
        let csv = part_forces_csv(&per_part, 2);
        assert!(csv.starts_with("part,fx,fy\n1,"));
        assert_eq!(csv.lines().count(), 5);
        let _ = net_torque(&s, &per_part);
    }

    fn random_state(dim: usize, seed: &[f64]) -> Option<(SwimmerState, Swimmer, Grid)> {
        let spec = if dim == 2 {
            DomainSpec::cube(2, 1.0, 24, 1.0)
        } else {
            DomainSpec::cube(3, 1.0, 12, 1.0)
        }
        .unwrap();
        let g = spec.grid();
        let parts = 4;
        let pos = (0..parts)
            .map(|i| {
                let mut p = Vec3::zeros();
                for a in 0..dim {
                    p[a] = 0.15 + 0.7 * seed[i * 3 + a];
                }
                p
            })
            .collect();
        let shape = if dim == 2 {
            BodyShape::Rectangle { p: 0.07, q: 0.03 }
        } else {
            BodyShape::Ball { r: 0.06 }
        };
        let s = SwimmerState::new(pos).unwrap();
        let sw = Swimmer {
            shape,
            swap_axes: vec![false, true, false, true],
        };
        validate_configuration(&s, &sw, &g).ok()?;
        Some((s, sw, g))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn third_law(seed in prop::collection::vec(0.0f64..1.0, 12), dim in 2usize..4) {
            if let Some((s, sw, g)) = random_state(dim, &seed) {
                for j in 0..s.num_controls() {
                    let dens = unit_densities(&s, j, &g).unwrap();
                    let scale = sw.measure() * dens.iter().map(|d| d.norm()).fold(0.0, f64::max);
                    let f = control_force(&s, &sw, &g, j).unwrap();
                    prop_assert!(f.integral().norm() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn spatial_operators_antisymmetric(
            p in prop::array::uniform9(-1.0f64..1.0),
            x in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let s = state(&[[p[0], p[1], p[2]], [p[3], p[4], p[5]], [p[6], p[7], p[8]]]);
            let ops = RotationalOperatorPair::at(&s, 1, 3);
            let x = Vec3::new(x[0], x[1], x[2]);
            prop_assert!((ops.p(&x) + ops.q(&x)).norm() == 0.0);
        }

        #[test]
        fn linear_in_controls(seed in prop::collection::vec(0.0f64..1.0, 12), c in -3.0f64..3.0,
                              v in prop::collection::vec(-1.0f64..1.0, 5)) {
            if let Some((s, sw, g)) = random_state(2, &seed) {
                let v = ControlVector(v);
                let cv = ControlVector(v.0.iter().map(|x| c * x).collect());
                let f = assemble_force(&s, &v, &sw, &g).unwrap();
                let fc = assemble_force(&s, &cv, &sw, &g).unwrap();
                prop_assert!(fc.sub(&f.scaled(c)).max_abs() <= 1e-15 * f.max_abs().max(1.0) * c.abs().max(1.0));
            }
        }

        #[test]
        fn densities_lipschitz_in_state(seed in prop::collection::vec(0.0f64..1.0, 12),
                                        dir in prop::collection::vec(-1.0f64..1.0, 12)) {
            if let Some((s, _, g)) = random_state(2, &seed) {
                let v = ControlVector(vec![1.0; 5]);
                let d0 = part_densities(&s, &v, &g).unwrap();
                for eps in [1e-3, 1e-4] {
                    let moved = SwimmerState::new(
                        s.positions.iter().enumerate()
                            .map(|(i, z)| z + Vec3::new(dir[3 * i], dir[3 * i + 1], 0.0) * eps)
                            .collect(),
                    ).unwrap();
                    let d1 = part_densities(&moved, &v, &g).unwrap();
                    let diff = d0.iter().zip(&d1).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                    // bounded slope on configurations whose links are not tiny
                    let min_link = s.positions.windows(2).map(|w| (w[1] - w[0]).norm()).fold(f64::INFINITY, f64::min);
                    prop_assert!(diff / eps <= 100.0 / min_link.powi(2));
                }
            }
        }
    }
}
