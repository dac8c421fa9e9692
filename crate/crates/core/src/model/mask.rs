use crate::error::{Error, Result};
use crate::field::{CellField, FaceField};
use crate::model::{BodyShape, Grid};
use crate::Vec3;

/// Sparse area-weighted indicator of one shifted body part.
///
/// Each weight is the exact fraction of a control volume covered by the
/// shape: cell volumes for `cells`, the face-centered dual volumes for
/// `faces[a]`.
#[derive(Debug, Clone)]
pub struct BodyMask {
    pub center: Vec3,
    pub cells: Vec<(usize, f64)>,
    pub faces: [Vec<(usize, f64)>; 3],
    /// Integrated cell mask, i.e. the discrete `meas(S(z))`.
    pub measure: f64,
}

/// Checks that the closure of the shifted shape lies strictly inside the box.
pub fn check_inside(shape: &BodyShape, center: &Vec3, grid: &Grid) -> Result<()> {
    let e = shape.half_extents();
    let ext = grid.extent();
    for a in 0..grid.dim() {
        if !(center[a] - e[a] > 0.0 && center[a] + e[a] < ext[a]) {
            return Err(Error::ShapeOutsideDomain {
                center: [center[0], center[1], center[2]],
            });
        }
    }
    Ok(())
}

impl BodyMask {
    pub fn new(shape: &BodyShape, center: &Vec3, grid: &Grid) -> Result<Self> {
        if shape.dim() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}-D shape on a {}-D grid",
                shape.dim(),
                grid.dim()
            )));
        }
        check_inside(shape, center, grid)?;
        let e = shape.half_extents();
        let h = grid.h();
        let n = grid.n();
        let d = grid.dim();
        let vol = grid.cell_volume();

        // index range of cells touching the bounding box
        let mut lo = [0usize; 3];
        let mut hi = [1usize; 3];
        for a in 0..d {
            lo[a] = ((center[a] - e[a]) / h[a]).floor().max(0.0) as usize;
            hi[a] = (((center[a] + e[a]) / h[a]).ceil() as usize).min(n[a]);
        }

        let mut cells = Vec::new();
        let mut measure = 0.0;
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    let idx = [i, j, k];
                    let mut bl = Vec3::zeros();
                    let mut bh = Vec3::zeros();
                    for a in 0..d {
                        bl[a] = idx[a] as f64 * h[a];
                        bh[a] = (idx[a] + 1) as f64 * h[a];
                    }
                    let c = shape.coverage(center, &bl, &bh);
                    if c > 0.0 {
                        let w = c / vol;
                        cells.push((grid.cell_index(i, j, k), w));
                        measure += w;
                    }
                }
            }
        }
        measure *= vol;

        let mut faces: [Vec<(usize, f64)>; 3] = Default::default();
        for a in 0..d {
            let mut flo = lo;
            let mut fhi = hi;
            // dual cells along `a` are shifted by half a cell
            flo[a] = ((center[a] - e[a]) / h[a] + 0.5).floor().max(0.0) as usize;
            fhi[a] = ((((center[a] + e[a]) / h[a]) + 0.5).ceil() as usize).min(n[a] + 1);
            for k in flo[2]..fhi[2] {
                for j in flo[1]..fhi[1] {
                    for i in flo[0]..fhi[0] {
                        let idx = [i, j, k];
                        let mut bl = Vec3::zeros();
                        let mut bh = Vec3::zeros();
                        for b in 0..d {
                            if b == a {
                                bl[b] = (idx[b] as f64 - 0.5) * h[b];
                                bh[b] = (idx[b] as f64 + 0.5) * h[b];
                            } else {
                                bl[b] = idx[b] as f64 * h[b];
                                bh[b] = (idx[b] + 1) as f64 * h[b];
                            }
                        }
                        let c = shape.coverage(center, &bl, &bh);
                        if c > 0.0 {
                            faces[a].push((grid.face_index(a, i, j, k), c / vol));
                        }
                    }
                }
            }
        }
        Ok(Self {
            center: *center,
            cells,
            faces,
            measure,
        })
    }

    /// Mask-weighted integral `∫ u ξ dx` of a face field.
    pub fn integrate(&self, u: &FaceField) -> Vec3 {
        let vol = u.grid().cell_volume();
        let mut out = Vec3::zeros();
        for a in 0..u.dim() {
            out[a] = self.faces[a].iter().map(|(i, w)| w * u.comps[a][*i]).sum::<f64>() * vol;
        }
        out
    }

    /// Adds `c * ξ` to a face field.
    pub fn add_vector(&self, target: &mut FaceField, c: &Vec3) {
        for a in 0..target.dim() {
            if c[a] == 0.0 {
                continue;
            }
            for (i, w) in &self.faces[a] {
                target.comps[a][*i] += w * c[a];
            }
        }
    }

    pub fn to_cell_field(&self, grid: &Grid) -> CellField {
        let mut out = CellField::zeros(grid);
        for (i, w) in &self.cells {
            out.data[*i] = *w;
        }
        out
    }
}

/// Area-weighted sharp characteristic function of `center + S(0)` at cell
/// centers.
pub fn characteristic_mask(shape: &BodyShape, center: &Vec3, grid: &Grid) -> Result<CellField> {
    Ok(BodyMask::new(shape, center, grid)?.to_cell_field(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DomainSpec;
    use std::f64::consts::PI;

    fn grid2(n: usize) -> Grid {
        DomainSpec::cube(2, 1.0, n, 1.0).unwrap().grid()
    }

    #[test]
    fn grid_aligned_rectangle_is_exact() {
        let g = grid2(32);
        let shape = BodyShape::Rectangle { p: 4.0 / 32.0, q: 2.0 / 32.0 };
        let m = characteristic_mask(&shape, &Vec3::new(0.5, 0.5, 0.0), &g).unwrap();
        assert_eq!(m.integral(), shape.measure());
        assert!(m.data.iter().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn disc_measure_converges() {
        // relative error bounded by 1 / (cells across the diameter)
        for n in [16, 32, 64, 128] {
            let g = grid2(n);
            let r = 0.2;
            let m = characteristic_mask(&BodyShape::Disc { r }, &Vec3::new(0.47, 0.52, 0.0), &g).unwrap();
            let exact = PI * r * r;
            let cells_across = 2.0 * r * n as f64;
            assert!(((m.integral() - exact) / exact).abs() <= 1.0 / cells_across);
        }
    }

    #[test]
    fn outside_cells_are_zero_and_wall_contact_fails() {
        let g = grid2(16);
        let m = characteristic_mask(&BodyShape::Disc { r: 0.1 }, &Vec3::new(0.3, 0.3, 0.0), &g).unwrap();
        assert_eq!(m.data[g.cell_index(15, 15, 0)], 0.0);
        let err = characteristic_mask(&BodyShape::Disc { r: 0.1 }, &Vec3::new(0.1, 0.5, 0.0), &g);
        assert!(matches!(err, Err(Error::ShapeOutsideDomain { .. })));
    }

    #[test]
    fn face_masks_integrate_to_measure() {
        let g = grid2(40);
        let shape = BodyShape::Disc { r: 0.11 };
        let m = BodyMask::new(&shape, &Vec3::new(0.431, 0.517, 0.0), &g).unwrap();
        let vol = g.cell_volume();
        for a in 0..2 {
            let s: f64 = m.faces[a].iter().map(|(_, w)| w).sum::<f64>() * vol;
            assert!((s - shape.measure()).abs() < 1e-14);
        }
        assert!((m.measure - shape.measure()).abs() < 1e-14);
    }
}
