//! Grid fields on the staggered (MAC) layout.
//!
//! Scalars live at cell centers; component `a` of a vector field lives on
//! the faces normal to axis `a`. Faces with index `0` or `n[a]` along their
//! own axis lie on the walls.

use crate::model::Grid;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    pub data: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            data: vec![0.0; grid.num_cells()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Vec3) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for (i, j, k) in Grid::indices(grid.n()) {
            out.data[grid.cell_index(i, j, k)] = f(&grid.cell_center(i, j, k));
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Sum of values times the cell volume.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Vector field with one component per face family.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    grid: Grid,
    pub comps: [Vec<f64>; 3],
}

/// Vector grid field of force densities.
pub type ForceField = FaceField;

impl FaceField {
    pub fn zeros(grid: &Grid) -> Self {
        let comp = |a: usize| {
            if a < grid.dim() {
                vec![0.0; grid.num_faces(a)]
            } else {
                Vec::new()
            }
        };
        Self {
            grid: *grid,
            comps: [comp(0), comp(1), comp(2)],
        }
    }

    /// Samples `f` at every face center, keeping the component normal to
    /// each face.
    pub fn from_fn(grid: &Grid, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let mut out = Self::zeros(grid);
        for a in 0..grid.dim() {
            for (i, j, k) in Grid::indices(grid.face_shape(a)) {
                let x = grid.face_center(a, i, j, k);
                out.comps[a][grid.face_index(a, i, j, k)] = f(&x)[a];
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Grid inner product: sum over all faces of `u * v` times the cell volume.
    pub fn dot(&self, other: &FaceField) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim() {
            s += self.comps[a]
                .iter()
                .zip(&other.comps[a])
                .map(|(x, y)| x * y)
                .sum::<f64>();
        }
        s * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Kinetic energy `1/2 |u|^2` in the grid norm.
    pub fn energy(&self) -> f64 {
        0.5 * self.dot(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flat_map(|c| c.iter()).all(|v| v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &FaceField) {
        for a in 0..self.dim() {
            for (x, y) in self.comps[a].iter_mut().zip(&other.comps[a]) {
                *x += alpha * y;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in 0..self.dim() {
            self.comps[a].iter_mut().for_each(|x| *x *= alpha);
        }
    }

    pub fn scaled(&self, alpha: f64) -> FaceField {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn sub(&self, other: &FaceField) -> FaceField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Sets the wall-normal components to zero.
    pub fn zero_boundary_normal(&mut self) {
        let g = self.grid;
        for a in 0..g.dim() {
            let s = g.face_shape(a);
            for (i, j, k) in Grid::indices(s) {
                let idx = [i, j, k];
                if idx[a] == 0 || idx[a] == s[a] - 1 {
                    self.comps[a][g.face_index(a, i, j, k)] = 0.0;
                }
            }
        }
    }

    /// Integral over the domain of each component (all faces weighted by the
    /// cell volume).
    pub fn integral(&self) -> Vec3 {
        let mut out = Vec3::zeros();
        let vol = self.grid.cell_volume();
        for a in 0..self.dim() {
            out[a] = self.comps[a].iter().sum::<f64>() * vol;
        }
        out
    }

    /// Discrete divergence at cell centers.
    pub fn divergence(&self) -> CellField {
        let g = self.grid;
        let mut div = CellField::zeros(&g);
        let h = g.h();
        for (i, j, k) in Grid::indices(g.n()) {
            let mut s = 0.0;
            for a in 0..g.dim() {
                let mut up = [i, j, k];
                up[a] += 1;
                let hi = self.comps[a][g.face_index(a, up[0], up[1], up[2])];
                let lo = self.comps[a][g.face_index(a, i, j, k)];
                s += (hi - lo) / h[a];
            }
            div.data[g.cell_index(i, j, k)] = s;
        }
        div
    }

    /// Divergence scaled to a dimensionless quantity:
    /// `max |div u| * h_min / max |u|`.
    pub fn relative_divergence(&self) -> f64 {
        let umax = self.max_abs();
        if umax == 0.0 {
            return 0.0;
        }
        self.divergence().max_abs() * self.grid.h_min() / umax
    }
}

/// Discrete gradient of a cell field on interior faces; wall faces are zero.
pub fn gradient(phi: &CellField) -> FaceField {
    let g = *phi.grid();
    let h = g.h();
    let mut out = FaceField::zeros(&g);
    for a in 0..g.dim() {
        let s = g.face_shape(a);
        for (i, j, k) in Grid::indices(s) {
            let idx = [i, j, k];
            if idx[a] == 0 || idx[a] == s[a] - 1 {
                continue;
            }
            let mut lo = idx;
            lo[a] -= 1;
            let v = (phi.data[g.cell_index(i, j, k)] - phi.data[g.cell_index(lo[0], lo[1], lo[2])]) / h[a];
            out.comps[a][g.face_index(a, i, j, k)] = v;
        }
    }
    out
}
