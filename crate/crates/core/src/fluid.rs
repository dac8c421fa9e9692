//! Incompressible flow with no-slip walls on the staggered grid.
//!
//! One step is explicit: `u+ = P[u + dt (ν Δu - (u·∇)u + f)]` where `P` is
//! the discrete Leray projection. The projection subtracts the gradient of
//! the Neumann potential of the divergence and is the exact orthogonal
//! projection onto discretely solenoidal fields with zero wall flux.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::field::{gradient, CellField, FaceField, ForceField};
use crate::model::Grid;
use crate::poisson::{PoissonMethod, PoissonSolver};

pub type Mat3 = Matrix3<f64>;

/// Default bound on `max |div u| h / max |u|` after a projection.
pub const DIV_TOL: f64 = 1e-10;

/// Discretely divergence-free velocity with its time stamp and pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub u: FaceField,
    /// Mean-zero kinematic pressure of the last step.
    pub pressure: CellField,
    pub time: f64,
}

impl VelocityField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            u: FaceField::zeros(grid),
            pressure: CellField::zeros(grid),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }
}

/// Which terms one step keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Physics {
    NavierStokes,
    Stokes,
}

/// Stepping and projection on one grid with fixed viscosity.
#[derive(Debug)]
pub struct FluidSolver {
    grid: Grid,
    nu: f64,
    poisson: PoissonSolver,
}

impl FluidSolver {
    pub fn new(grid: &Grid, nu: f64, method: PoissonMethod) -> Self {
        Self::with_tolerance(grid, nu, method, 1e-12)
    }

    /// `rtol` is the relative residual target of iterative Poisson solves.
    pub fn with_tolerance(grid: &Grid, nu: f64, method: PoissonMethod, rtol: f64) -> Self {
        Self {
            grid: *grid,
            nu,
            poisson: PoissonSolver::new(grid, method, rtol),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Leray projection `P_H f`.
    pub fn leray_project(&self, field: &FaceField) -> Result<FaceField> {
        Ok(self.project_with_potential(field)?.0)
    }

    /// Projection plus the potential `φ` with `f = P f + ∇φ` on interior faces.
    pub fn project_with_potential(&self, field: &FaceField) -> Result<(FaceField, CellField)> {
        let mut g = field.clone();
        g.zero_boundary_normal();
        let (phi, _) = self.poisson.solve(&g.divergence())?;
        g.axpy(-1.0, &gradient(&phi));
        Ok((g, phi))
    }

    /// Largest stable step for `u`: half the smaller of the advective and
    /// diffusive limits.
    pub fn stable_dt(&self, u: &FaceField) -> f64 {
        0.5 * self.dt_bound(u)
    }

    fn dt_bound(&self, u: &FaceField) -> f64 {
        let h = self.grid.h_min();
        let diff = h * h / (2.0 * self.grid.dim() as f64 * self.nu);
        let umax = u.max_abs();
        if umax > 0.0 {
            diff.min(h / umax)
        } else {
            diff
        }
    }

    fn check_cfl(&self, u: &FaceField, dt: f64) -> Result<()> {
        let bound = self.dt_bound(u);
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, bound });
        }
        Ok(())
    }

    fn advance(&self, u: &VelocityField, f: &ForceField, dt: f64, physics: Physics) -> Result<VelocityField> {
        self.check_cfl(&u.u, dt)?;
        let mut rhs = laplacian(&u.u);
        rhs.scale(self.nu);
        if physics == Physics::NavierStokes {
            rhs.axpy(-1.0, &advection(&u.u, &u.u));
        }
        rhs.axpy(1.0, f);
        let mut next = u.u.clone();
        next.axpy(dt, &rhs);
        self.finish(next, u.time + dt, dt)
    }

    fn finish(&self, tentative: FaceField, time: f64, dt: f64) -> Result<VelocityField> {
        if !tentative.is_finite() {
            return Err(Error::NanDetected { time });
        }
        let (u, mut phi) = self.project_with_potential(&tentative)?;
        if !u.is_finite() {
            return Err(Error::NanDetected { time });
        }
        phi.data.iter_mut().for_each(|p| *p /= dt);
        Ok(VelocityField { u, pressure: phi, time })
    }

    /// One projection step of the Navier-Stokes equations.
    pub fn nse_step(&self, u: &VelocityField, f: &ForceField, dt: f64) -> Result<VelocityField> {
        self.advance(u, f, dt, Physics::NavierStokes)
    }

    /// As [`FluidSolver::nse_step`] without advection.
    pub fn stokes_step(&self, u: &VelocityField, f: &ForceField, dt: f64) -> Result<VelocityField> {
        self.advance(u, f, dt, Physics::Stokes)
    }

    /// One step of the equations linearized about the frozen baseline `base`:
    /// `w+ = P[w + dt (ν Δw - (u*·∇)w - (w·∇)u* + f)]`.
    pub fn linearized_step(
        &self,
        w: &VelocityField,
        base: &FaceField,
        f: &ForceField,
        dt: f64,
    ) -> Result<VelocityField> {
        self.check_cfl(base, dt)?;
        let mut rhs = laplacian(&w.u);
        rhs.scale(self.nu);
        rhs.axpy(-1.0, &advection(base, &w.u));
        rhs.axpy(-1.0, &advection(&w.u, base));
        rhs.axpy(1.0, f);
        let mut next = w.u.clone();
        next.axpy(dt, &rhs);
        self.finish(next, w.time + dt, dt)
    }
}

fn strides(shape: [usize; 3]) -> [usize; 3] {
    [1, shape[0], shape[0] * shape[1]]
}

/// Vector Laplacian on interior faces with no-slip ghost reflection for the
/// tangential directions; wall-normal faces stay zero.
pub fn laplacian(u: &FaceField) -> FaceField {
    let g = *u.grid();
    let h = g.h();
    let mut out = FaceField::zeros(&g);
    for c in 0..g.dim() {
        let s = g.face_shape(c);
        let st = strides(s);
        let src = &u.comps[c];
        let dst = &mut out.comps[c];
        for (i, j, k) in Grid::indices(s) {
            let idx = [i, j, k];
            if idx[c] == 0 || idx[c] + 1 == s[c] {
                continue;
            }
            let m = g.face_index(c, i, j, k);
            let v = src[m];
            let mut acc = 0.0;
            for d in 0..g.dim() {
                let lo = if idx[d] > 0 { src[m - st[d]] } else { -v };
                let hi = if idx[d] + 1 < s[d] { src[m + st[d]] } else { -v };
                acc += (hi - 2.0 * v + lo) / (h[d] * h[d]);
            }
            dst[m] = acc;
        }
    }
    out
}

/// Central approximation of `(a·∇) b` on the interior faces of `b`.
pub fn advection(a: &FaceField, b: &FaceField) -> FaceField {
    let g = *a.grid();
    let h = g.h();
    let mut out = FaceField::zeros(&g);
    for c in 0..g.dim() {
        let s = g.face_shape(c);
        let st = strides(s);
        let bc = &b.comps[c];
        for (i, j, k) in Grid::indices(s) {
            let idx = [i, j, k];
            if idx[c] == 0 || idx[c] + 1 == s[c] {
                continue;
            }
            let m = g.face_index(c, i, j, k);
            let mut acc = 0.0;
            for d in 0..g.dim() {
                // a_d interpolated to this c-face
                let ad = if d == c {
                    a.comps[c][m]
                } else {
                    let sd = g.face_shape(d);
                    let mut sum = 0.0;
                    for dc in [0, 1] {
                        for dd in [0, 1] {
                            let mut q = idx;
                            q[c] = idx[c] + dc - 1;
                            q[d] = idx[d] + dd;
                            sum += a.comps[d][q[0] + sd[0] * (q[1] + sd[1] * q[2])];
                        }
                    }
                    0.25 * sum
                };
                if ad == 0.0 {
                    continue;
                }
                let v = bc[m];
                let lo = if idx[d] > 0 { bc[m - st[d]] } else { -v };
                let hi = if idx[d] + 1 < s[d] { bc[m + st[d]] } else { -v };
                acc += ad * (hi - lo) / (2.0 * h[d]);
            }
            out.comps[c][m] = acc;
        }
    }
    out
}

/// Cell-centered Jacobian `J[c][d] = ∂u_c/∂x_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianField {
    grid: Grid,
    pub data: Vec<Mat3>,
}

impl JacobianField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, j| m.max(j.norm()))
    }
}

/// Velocity gradient at cell centers: exact face differences on the
/// diagonal, centered differences of cell-averaged components off it and
/// one-sided differences in the cells next to a wall.
pub fn velocity_gradient(u: &FaceField) -> JacobianField {
    let g = *u.grid();
    let n = g.n();
    let h = g.h();
    let cst = strides(n);
    let mut centers: [Vec<f64>; 3] = Default::default();
    for c in 0..g.dim() {
        let s = g.face_shape(c);
        let fst = strides(s);
        centers[c] = Grid::indices(n)
            .map(|(i, j, k)| {
                let m = g.face_index(c, i, j, k);
                0.5 * (u.comps[c][m] + u.comps[c][m + fst[c]])
            })
            .collect();
    }
    let mut data = vec![Mat3::zeros(); g.num_cells()];
    for (i, j, k) in Grid::indices(n) {
        let idx = [i, j, k];
        let cell = g.cell_index(i, j, k);
        for c in 0..g.dim() {
            for d in 0..g.dim() {
                let v = if c == d {
                    let m = g.face_index(c, i, j, k);
                    (u.comps[c][m + strides(g.face_shape(c))[c]] - u.comps[c][m]) / h[c]
                } else {
                    let uc = &centers[c];
                    let lo = if idx[d] > 0 { cell - cst[d] } else { cell };
                    let hi = if idx[d] + 1 < n[d] { cell + cst[d] } else { cell };
                    let span = (hi - lo) / cst[d];
                    (uc[hi] - uc[lo]) / (span as f64 * h[d])
                };
                data[cell][(c, d)] = v;
            }
        }
    }
    JacobianField { grid: g, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DomainSpec;
    use crate::Vec3;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid2(n: usize) -> Grid {
        DomainSpec::cube(2, 1.0, n, 1e-2).unwrap().grid()
    }

    /// Discrete curl of a corner-based stream function vanishing to second
    /// order at the walls: divergence-free with zero wall flux by construction.
    fn stream_field(g: &Grid, amp: f64) -> FaceField {
        let psi = |x: f64, y: f64| amp * (PI * x).sin().powi(2) * (PI * y).sin().powi(2);
        let h = g.h();
        let mut u = FaceField::zeros(g);
        for (i, j, k) in Grid::indices(g.face_shape(0)) {
            let x = i as f64 * h[0];
            let (y0, y1) = (j as f64 * h[1], (j + 1) as f64 * h[1]);
            u.comps[0][g.face_index(0, i, j, k)] = (psi(x, y1) - psi(x, y0)) / h[1];
        }
        for (i, j, k) in Grid::indices(g.face_shape(1)) {
            let y = j as f64 * h[1];
            let (x0, x1) = (i as f64 * h[0], (i + 1) as f64 * h[0]);
            u.comps[1][g.face_index(1, i, j, k)] = -(psi(x1, y) - psi(x0, y)) / h[0];
        }
        u
    }

    fn random_field(g: &Grid, vals: &[f64]) -> FaceField {
        let mut f = FaceField::zeros(g);
        let mut t = 0;
        for a in 0..g.dim() {
            for v in f.comps[a].iter_mut() {
                *v = vals[t % vals.len()] * (1.0 + (t as f64 * 0.37).sin());
                t += 1;
            }
        }
        f
    }

    #[test]
    fn gradients_project_to_zero() {
        for dim in [2, 3] {
            let g = DomainSpec::cube(dim, 1.0, if dim == 2 { 32 } else { 12 }, 1.0).unwrap().grid();
            let s = FluidSolver::new(&g, 1.0, PoissonMethod::Spectral);
            let f = gradient(&CellField::from_fn(&g, |x| x[0] * x[0] + x[1] * x[1]));
            let p = s.leray_project(&f).unwrap();
            assert!(p.norm() <= 1e-9 * f.norm(), "{}", p.norm() / f.norm());
        }
    }

    #[test]
    fn solenoidal_input_is_unchanged() {
        let g = grid2(48);
        let s = FluidSolver::new(&g, 1.0, PoissonMethod::ConjugateGradient);
        let u = stream_field(&g, 1.0);
        assert!(u.divergence().max_abs() < 1e-10);
        let p = s.leray_project(&u).unwrap();
        assert!(p.sub(&u).norm() <= 1e-9 * u.norm());
    }

    #[test]
    fn laplacian_and_advection_vanish_on_zero() {
        let g = grid2(16);
        let z = FaceField::zeros(&g);
        assert_eq!(laplacian(&z).max_abs(), 0.0);
        assert_eq!(advection(&z, &z).max_abs(), 0.0);
    }

    #[test]
    fn advection_of_linear_field() {
        // (a·∇)b with a = (1, 0) and b = (0, x) gives (0, 1) in the interior
        let g = grid2(16);
        let a = FaceField::from_fn(&g, |_| Vec3::new(1.0, 0.0, 0.0));
        let b = FaceField::from_fn(&g, |x| Vec3::new(0.0, x[0], 0.0));
        let r = advection(&a, &b);
        let s = g.face_shape(1);
        for (i, j, k) in Grid::indices(s) {
            if j == 0 || j == s[1] - 1 || i == 0 || i == s[0] - 1 {
                continue;
            }
            assert!((r.comps[1][g.face_index(1, i, j, k)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid2(16);
        let s = FluidSolver::new(&g, 1e-2, PoissonMethod::Spectral);
        let mut u = VelocityField::zeros(&g);
        let f = ForceField::zeros(&g);
        for _ in 0..10 {
            u = s.nse_step(&u, &f, s.stable_dt(&u.u)).unwrap();
        }
        assert_eq!(u.u.max_abs(), 0.0);
    }

    #[test]
    fn energy_decays_without_forcing() {
        let g = grid2(32);
        let s = FluidSolver::new(&g, 1e-2, PoissonMethod::Spectral);
        let mut u = VelocityField::zeros(&g);
        u.u = stream_field(&g, 0.05);
        let f = ForceField::zeros(&g);
        let mut e = u.u.energy();
        for _ in 0..200 {
            u = s.nse_step(&u, &f, s.stable_dt(&u.u)).unwrap();
            assert!(u.u.energy() <= e);
            assert!(u.u.relative_divergence() <= DIV_TOL);
            e = u.u.energy();
        }
    }

    #[test]
    fn stokes_is_linear_and_ignores_gradients() {
        let g = grid2(24);
        let s = FluidSolver::new(&g, 1e-2, PoissonMethod::Spectral);
        let f = FaceField::from_fn(&g, |x| Vec3::new((3.0 * x[1]).sin(), x[0] * x[0], 0.0));
        let dt = 1e-3;
        let (mut u1, mut u2, mut ug) = (VelocityField::zeros(&g), VelocityField::zeros(&g), VelocityField::zeros(&g));
        let grad = gradient(&CellField::from_fn(&g, |x| (x[0] * x[1]).exp()));
        for _ in 0..20 {
            u1 = s.stokes_step(&u1, &f, dt).unwrap();
            u2 = s.stokes_step(&u2, &f.scaled(2.0), dt).unwrap();
            ug = s.stokes_step(&ug, &grad, dt).unwrap();
            assert!(u2.u.sub(&u1.u.scaled(2.0)).max_abs() <= 1e-13 * u1.u.max_abs());
        }
        assert!(ug.u.max_abs() <= 1e-10 * grad.max_abs() * dt);
    }

    #[test]
    fn stokes_agrees_with_nse_for_tiny_data() {
        let g = grid2(32);
        let s = FluidSolver::new(&g, 1e-2, PoissonMethod::Spectral);
        let dt = 1e-3;
        let f = ForceField::zeros(&g);
        let mut prev = f64::INFINITY;
        for amp in [1e-2, 1e-3] {
            let mut u = VelocityField::zeros(&g);
            u.u = stream_field(&g, amp);
            let a = s.nse_step(&u, &f, dt).unwrap();
            let b = s.stokes_step(&u, &f, dt).unwrap();
            // difference scales like |u|^2 dt
            let ratio = a.u.sub(&b.u).norm() / (u.u.norm().powi(2) * dt);
            assert!(ratio < 1e3);
            let d = a.u.sub(&b.u).norm();
            assert!(d < prev / 50.0);
            prev = d;
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = grid2(16);
        let s = FluidSolver::new(&g, 1.0, PoissonMethod::Spectral);
        let u = VelocityField::zeros(&g);
        let err = s.nse_step(&u, &ForceField::zeros(&g), 1.0).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn gradient_examples() {
        let g = grid2(16);
        let shear = velocity_gradient(&FaceField::from_fn(&g, |x| Vec3::new(x[1], 0.0, 0.0)));
        let want = Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(shear.data.iter().all(|j| (j - want).norm() < 1e-10));
        let rot = velocity_gradient(&FaceField::from_fn(&g, |x| Vec3::new(-x[1], x[0], 0.0)));
        assert!(rot.data.iter().all(|j| (j + j.transpose()).norm() < 1e-10));
        assert_eq!(velocity_gradient(&FaceField::zeros(&g)).max_norm(), 0.0);
        let g3 = DomainSpec::cube(3, 1.0, 8, 1.0).unwrap().grid();
        let lin = velocity_gradient(&FaceField::from_fn(&g3, |x| Vec3::new(x[2], 2.0 * x[0], -x[1])));
        let want = Mat3::new(0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        assert!(lin.data.iter().all(|j| (j - want).norm() < 1e-10));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn projection_properties(vals in prop::collection::vec(-1.0f64..1.0, 1..40), dim in 2usize..4) {
            let g = DomainSpec::cube(dim, 1.0, if dim == 2 { 16 } else { 8 }, 1.0).unwrap().grid();
            let s = FluidSolver::new(&g, 1.0, PoissonMethod::Spectral);
            let f = random_field(&g, &vals);
            let p = s.leray_project(&f).unwrap();
            let pp = s.leray_project(&p).unwrap();
            let fnorm = f.norm();
            prop_assert!(p.norm() <= fnorm * (1.0 + 1e-12));
            prop_assert!(pp.sub(&p).norm() <= 1e-10 * fnorm);
            prop_assert!(p.dot(&f.sub(&p)).abs() <= 1e-9 * fnorm * fnorm);
            prop_assert!(p.relative_divergence() <= DIV_TOL);
        }
    }
}
