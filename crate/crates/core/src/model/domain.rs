use crate::error::{Error, Result};
use crate::Vec3;

/// Minimum number of cells along every axis.
pub const MIN_CELLS: usize = 8;

/// Axis-aligned box `[0, L_1] x ... x [0, L_d]` with a uniform grid and the
/// fluid viscosity.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
    pub nu: f64,
}

impl DomainSpec {
    pub fn new(extent: Vec<f64>, cells: Vec<usize>, nu: f64) -> Result<Self> {
        let spec = Self { extent, cells, nu };
        spec.check()?;
        Ok(spec)
    }

    /// Square (cube) domain with `cells` cells per axis.
    pub fn cube(dim: usize, length: f64, cells: usize, nu: f64) -> Result<Self> {
        Self::new(vec![length; dim], vec![cells; dim], nu)
    }

    pub fn check(&self) -> Result<()> {
        let d = self.extent.len();
        if !(d == 2 || d == 3) {
            return Err(Error::InvalidDomain(format!("dimension must be 2 or 3, got {d}")));
        }
        if self.cells.len() != d {
            return Err(Error::InvalidDomain(format!(
                "{} extents but {} cell counts",
                d,
                self.cells.len()
            )));
        }
        if let Some(l) = self.extent.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidDomain(format!("extent {l} must be positive")));
        }
        if let Some(n) = self.cells.iter().find(|n| **n < MIN_CELLS) {
            return Err(Error::InvalidDomain(format!(
                "cell count {n} below the minimum of {MIN_CELLS}"
            )));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::InvalidDomain(format!("viscosity {} must be positive", self.nu)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(&self.extent, &self.cells)
    }

    pub fn max_extent(&self) -> f64 {
        self.extent.iter().cloned().fold(0.0, f64::max)
    }
}

/// Uniform MAC grid over the domain box.
///
/// Two-dimensional grids keep a singleton third axis (`n[2] == 1`) so that
/// all index arithmetic is shared; the third component is never touched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 3],
    h: [f64; 3],
    extent: [f64; 3],
}

impl Grid {
    fn new(extent: &[f64], cells: &[usize]) -> Self {
        let mut n = [1; 3];
        let mut h = [1.0; 3];
        let mut e = [1.0; 3];
        for a in 0..extent.len() {
            n[a] = cells[a];
            e[a] = extent[a];
            h[a] = extent[a] / cells[a] as f64;
        }
        Grid {
            dim: extent.len(),
            n,
            h,
            extent: e,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn h(&self) -> [f64; 3] {
        self.h
    }

    pub fn extent(&self) -> [f64; 3] {
        self.extent
    }

    pub fn h_min(&self) -> f64 {
        self.h[..self.dim].iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.n.iter().product()
    }

    /// Array shape of the faces normal to `axis`.
    pub fn face_shape(&self, axis: usize) -> [usize; 3] {
        let mut s = self.n;
        s[axis] += 1;
        s
    }

    pub fn num_faces(&self, axis: usize) -> usize {
        self.face_shape(axis).iter().product()
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    pub fn face_index(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        let s = self.face_shape(axis);
        i + s[0] * (j + s[1] * k)
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let mut p = Vec3::zeros();
        let idx = [i, j, k];
        for a in 0..self.dim {
            p[a] = (idx[a] as f64 + 0.5) * self.h[a];
        }
        p
    }

    pub fn face_center(&self, axis: usize, i: usize, j: usize, k: usize) -> Vec3 {
        let mut p = self.cell_center(i, j, k);
        p[axis] -= 0.5 * self.h[axis];
        p
    }

    /// Iterates `(i, j, k)` over an index box of the given shape.
    pub fn indices(shape: [usize; 3]) -> impl Iterator<Item = (usize, usize, usize)> {
        (0..shape[2]).flat_map(move |k| {
            (0..shape[1]).flat_map(move |j| (0..shape[0]).map(move |i| (i, j, k)))
        })
    }

    /// Distance from `p` to the nearest wall.
    pub fn wall_distance(&self, p: &Vec3) -> f64 {
        (0..self.dim)
            .map(|a| p[a].min(self.extent[a] - p[a]))
            .fold(f64::INFINITY, f64::min)
    }
}
