//! Neumann Poisson solves `div grad φ = b` on the cell-centered grid.

use std::sync::Arc;

use rustdct::{Dct2, Dct3, DctPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CellField;
use crate::model::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoissonMethod {
    /// Direct solve in the cosine basis that diagonalizes the Neumann
    /// Laplacian on a uniform box grid.
    #[default]
    Spectral,
    /// Jacobi-preconditioned conjugate gradient.
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

struct Plans {
    forward: [Arc<dyn Dct2<f64>>; 3],
    inverse: [Arc<dyn Dct3<f64>>; 3],
    eigen: [Vec<f64>; 3],
}

/// Reusable solver for one grid.
pub struct PoissonSolver {
    grid: Grid,
    method: PoissonMethod,
    rtol: f64,
    max_iter: usize,
    plans: Option<Plans>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver")
            .field("method", &self.method)
            .field("rtol", &self.rtol)
            .finish()
    }
}

impl PoissonSolver {
    pub fn new(grid: &Grid, method: PoissonMethod, rtol: f64) -> Self {
        let plans = (method == PoissonMethod::Spectral).then(|| {
            let mut planner = DctPlanner::new();
            let n = grid.n();
            let h = grid.h();
            let eig = |a: usize| -> Vec<f64> {
                if a >= grid.dim() {
                    return vec![0.0];
                }
                (0..n[a])
                    .map(|k| {
                        let c = (std::f64::consts::PI * k as f64 / n[a] as f64).cos();
                        -(2.0 - 2.0 * c) / (h[a] * h[a])
                    })
                    .collect()
            };
            Plans {
                forward: [planner.plan_dct2(n[0]), planner.plan_dct2(n[1]), planner.plan_dct2(n[2])],
                inverse: [planner.plan_dct3(n[0]), planner.plan_dct3(n[1]), planner.plan_dct3(n[2])],
                eigen: [eig(0), eig(1), eig(2)],
            }
        });
        Self {
            grid: *grid,
            method,
            rtol,
            max_iter: 20 * grid.n().iter().sum::<usize>() + 1000,
            plans,
        }
    }

    pub fn method(&self) -> PoissonMethod {
        self.method
    }

    /// Solves the Neumann problem for the mean-free part of `rhs`; the
    /// returned potential has zero mean.
    pub fn solve(&self, rhs: &CellField) -> Result<(CellField, SolveStats)> {
        let mut b = rhs.clone();
        let mean = b.mean();
        b.data.iter_mut().for_each(|v| *v -= mean);
        match self.method {
            PoissonMethod::Spectral => Ok(self.solve_spectral(b)),
            PoissonMethod::ConjugateGradient => self.solve_cg(&b),
        }
    }

    fn solve_spectral(&self, mut b: CellField) -> (CellField, SolveStats) {
        let plans = self.plans.as_ref().expect("spectral plans");
        let g = self.grid;
        let n = g.n();
        for a in 0..g.dim() {
            transform_axis(&mut b.data, n, a, |line| plans.forward[a].process_dct2(line));
        }
        for (i, j, k) in Grid::indices(n) {
            let idx = g.cell_index(i, j, k);
            let lambda = plans.eigen[0][i] + plans.eigen[1][j] + plans.eigen[2][k];
            b.data[idx] = if idx == 0 { 0.0 } else { b.data[idx] / lambda };
        }
        for a in 0..g.dim() {
            let scale = 2.0 / n[a] as f64;
            transform_axis(&mut b.data, n, a, |line| {
                plans.inverse[a].process_dct3(line);
                line.iter_mut().for_each(|v| *v *= scale);
            });
        }
        let mean = b.mean();
        b.data.iter_mut().for_each(|v| *v -= mean);
        (
            b,
            SolveStats {
                iterations: 1,
                relative_residual: 0.0,
            },
        )
    }

    fn solve_cg(&self, b: &CellField) -> Result<(CellField, SolveStats)> {
        let g = self.grid;
        let diag = neg_laplacian_diagonal(&g);
        let bnorm = norm(&b.data);
        let mut x = CellField::zeros(&g);
        if bnorm == 0.0 {
            return Ok((
                x,
                SolveStats {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        // A = -L is positive semidefinite; the rhs is mean-free
        let mut r = b.data.iter().map(|v| -v).collect::<Vec<_>>();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; r.len()];
        for it in 1..=self.max_iter {
            apply_neg_laplacian(&g, &p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..r.len() {
                x.data[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let res = norm(&r) / bnorm;
            if res <= self.rtol {
                let mean = x.mean();
                x.data.iter_mut().for_each(|v| *v -= mean);
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        relative_residual: res,
                    },
                ));
            }
            for i in 0..r.len() {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::PoissonDivergence {
            residual: norm(&r) / bnorm,
            iterations: self.max_iter,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Applies `f` to every grid line along `axis`, in place.
fn transform_axis(data: &mut [f64], n: [usize; 3], axis: usize, mut f: impl FnMut(&mut [f64])) {
    let stride = match axis {
        0 => 1,
        1 => n[0],
        _ => n[0] * n[1],
    };
    let len = n[axis];
    if axis == 0 {
        for line in data.chunks_mut(len) {
            f(line);
        }
        return;
    }
    let mut buf = vec![0.0; len];
    let outer: Vec<usize> = (0..data.len())
        .filter(|idx| (idx / stride) % len == 0)
        .collect();
    for start in outer {
        for (m, b) in buf.iter_mut().enumerate() {
            *b = data[start + m * stride];
        }
        f(&mut buf);
        for (m, b) in buf.iter().enumerate() {
            data[start + m * stride] = *b;
        }
    }
}

fn neg_laplacian_diagonal(g: &Grid) -> Vec<f64> {
    let n = g.n();
    let h = g.h();
    let mut diag = vec![0.0; g.num_cells()];
    for (i, j, k) in Grid::indices(n) {
        let idx = [i, j, k];
        let mut d = 0.0;
        for a in 0..g.dim() {
            let neighbors = (idx[a] > 0) as usize + (idx[a] + 1 < n[a]) as usize;
            d += neighbors as f64 / (h[a] * h[a]);
        }
        diag[g.cell_index(i, j, k)] = d;
    }
    diag
}

/// `out = -div grad x` with zero-flux walls.
fn apply_neg_laplacian(g: &Grid, x: &[f64], out: &mut [f64]) {
    let n = g.n();
    let h = g.h();
    let strides = [1, n[0], n[0] * n[1]];
    for (i, j, k) in Grid::indices(n) {
        let idx = [i, j, k];
        let c = g.cell_index(i, j, k);
        let mut s = 0.0;
        for a in 0..g.dim() {
            let w = 1.0 / (h[a] * h[a]);
            if idx[a] > 0 {
                s += w * (x[c] - x[c - strides[a]]);
            }
            if idx[a] + 1 < n[a] {
                s += w * (x[c] - x[c + strides[a]]);
            }
        }
        out[c] = s;
    }
}
