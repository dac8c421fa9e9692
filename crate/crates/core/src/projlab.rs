//! Body averages of the Leray projection of a uniform force on a small body.
//!
//! For a disc the average keeps the direction of `b` and halves it; for a thin
//! rectangle only the component along the long side survives.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::FaceField;
use crate::fluid::FluidSolver;
use crate::model::{BodyMask, BodyShape, Grid};
use crate::poisson::PoissonMethod;
use crate::Vec3;

fn solver(grid: &Grid) -> FluidSolver {
    FluidSolver::new(grid, 0.0, PoissonMethod::Spectral)
}

/// `b·χ_S` on the faces of `grid`.
pub fn indicator_force(mask: &BodyMask, b: &Vec3, grid: &Grid) -> FaceField {
    let mut f = FaceField::zeros(grid);
    mask.add_vector(&mut f, b);
    f
}

/// `⟨χ, χ⟩` on each face family. The discrete indicator has fractional
/// weights on cut faces, so this replaces `meas S` as the normalization that
/// makes the average of `b·χ_S` itself equal to `b`.
fn self_products(mask: &BodyMask, grid: &Grid) -> Vec3 {
    let vol = grid.cell_volume();
    let mut out = Vec3::zeros();
    for a in 0..grid.dim() {
        out[a] = mask.faces[a].iter().map(|(_, w)| w * w).sum::<f64>() * vol;
    }
    out
}

fn normalized(v: Vec3, norm: &Vec3, dim: usize) -> Vec3 {
    let mut out = Vec3::zeros();
    for a in 0..dim {
        out[a] = v[a] / norm[a];
    }
    out
}

/// `(1/meas S) ∫_S P_H(b χ_S) dx` for the shape centered at `center`.
pub fn averaged_projection(shape: &BodyShape, b: &Vec3, grid: &Grid, center: &Vec3) -> Result<Vec3> {
    let mask = BodyMask::new(shape, center, grid)?;
    if b.norm() == 0.0 {
        return Ok(Vec3::zeros());
    }
    let pf = solver(grid).leray_project(&indicator_force(&mask, b, grid))?;
    Ok(normalized(mask.integrate(&pf), &self_products(&mask, grid), grid.dim()))
}

/// Mean of [`averaged_projection`] over `m^d` placements of the center on
/// the midpoints of a uniform `m`-partition of one grid cell around
/// `center`. Bodies only a few cells thick alias strongly with the grid, and
/// this averages that out.
pub fn averaged_projection_jittered(shape: &BodyShape, b: &Vec3, grid: &Grid, center: &Vec3, m: usize) -> Result<Vec3> {
    let m = m.max(1);
    let h = grid.h();
    let d = grid.dim();
    let offs: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64 - 0.5).collect();
    let count = m.pow(d as u32);
    let mut sum = Vec3::zeros();
    for idx in 0..count {
        let mut c = *center;
        let mut rest = idx;
        for a in 0..d {
            c[a] += offs[rest % m] * h[a];
            rest /= m;
        }
        sum += averaged_projection(shape, b, grid, &c)?;
    }
    Ok(sum / count as f64)
}

/// `(1/meas Q) ∫_Q P_H(b χ_S) dx` for a probe body `Q` whose gap to `S`
/// (distance between circumscribed balls) is at least `separation`.
pub fn remote_influence(
    shape: &BodyShape,
    center: &Vec3,
    b: &Vec3,
    probe: &BodyShape,
    probe_center: &Vec3,
    separation: f64,
    grid: &Grid,
) -> Result<Vec3> {
    let gap = (probe_center - center).norm() - shape.circumscribed_radius() - probe.circumscribed_radius();
    if gap < separation {
        return Err(Error::SeparationViolated {
            distance: gap,
            required: separation,
        });
    }
    let source = BodyMask::new(shape, center, grid)?;
    let target = BodyMask::new(probe, probe_center, grid)?;
    if b.norm() == 0.0 {
        return Ok(Vec3::zeros());
    }
    let pf = solver(grid).leray_project(&indicator_force(&source, b, grid))?;
    // same normalization as the self average, with the probe's own mask
    Ok(normalized(target.integrate(&pf), &self_products(&target, grid), grid.dim()))
}

/// One rung of a sweep: a body of characteristic size `size` on its grid.
#[derive(Debug, Clone)]
pub struct Rung {
    pub shape: BodyShape,
    pub grid: Grid,
    pub center: Vec3,
    /// Size parameter the fit is taken against (e.g. `r/L`).
    pub size: f64,
    /// Sub-cell placements per axis (1 for the center only).
    pub jitter: usize,
}

impl Rung {
    /// Body at the center of the domain.
    pub fn centered(shape: BodyShape, grid: Grid, size: f64) -> Self {
        let ext = grid.extent();
        let mut center = Vec3::zeros();
        for a in 0..grid.dim() {
            center[a] = 0.5 * ext[a];
        }
        Self {
            shape,
            grid,
            center,
            size,
            jitter: 1,
        }
    }

    pub fn with_jitter(mut self, m: usize) -> Self {
        self.jitter = m;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub size: f64,
    pub shape: BodyShape,
    pub cells: usize,
    pub value: Vec3,
    /// `b̂·value / |b|`.
    pub longitudinal: f64,
    /// Length of the part of `value` orthogonal to `b`, over `|b|`.
    pub transverse: f64,
}

#[derive(Debug, Clone)]
pub struct SweepFit {
    /// Extrapolated `value` as the size goes to zero, from the last three
    /// rungs and the model `v∞ + C sᵅ`.
    pub limit: Vec3,
    /// `α` of that model, from the longitudinal ratios.
    pub rate: Option<f64>,
    /// Log-log least-squares slope of `|longitudinal − reference|` against
    /// size over the last three rungs, when a reference ratio is given.
    pub error_slope: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub dim: usize,
    pub b: Vec3,
    pub rows: Vec<SweepRow>,
    pub fit: SweepFit,
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Log-log slope of `|y|` against `x`; `None` if some `y` vanishes.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if y.iter().any(|v| *v == 0.0 || !v.is_finite()) || x.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    Some(ls_slope(&lx, &ly))
}

fn fit(rows: &[SweepRow], reference: Option<f64>) -> SweepFit {
    let tail = &rows[rows.len().saturating_sub(3)..];
    let last = tail.last().map_or(Vec3::zeros(), |r| r.value);
    let mut out = SweepFit {
        limit: last,
        rate: None,
        error_slope: None,
    };
    if let Some(r) = reference {
        let s: Vec<f64> = tail.iter().map(|r| r.size).collect();
        let e: Vec<f64> = tail.iter().map(|row| row.longitudinal - r).collect();
        out.error_slope = loglog_slope(&s, &e);
    }
    if let [a, b, c] = tail {
        let (d1, d2) = (b.longitudinal - a.longitudinal, c.longitudinal - b.longitudinal);
        if d1 != 0.0 && d2 != 0.0 && d1.signum() == d2.signum() && a.size != b.size && b.size != c.size {
            let alpha = (d1 / d2).ln() / (a.size / b.size).ln();
            if alpha.is_finite() && alpha > 0.0 {
                out.rate = Some(alpha);
                let (pb, pc) = (b.size.powf(alpha), c.size.powf(alpha));
                out.limit = (c.value * pb - b.value * pc) / (pb - pc);
            }
        }
    }
    out
}

/// Averaged projections along a ladder of shrinking bodies, with a fit of
/// the limit and of the rate.
pub fn asymptotic_sweep(rungs: &[Rung], b: &Vec3, reference: Option<f64>) -> Result<Sweep> {
    let dim = rungs.first().map_or(2, |r| r.grid.dim());
    let bn = b.norm();
    let rows = rungs
        .iter()
        .map(|r| {
            let value = averaged_projection_jittered(&r.shape, b, &r.grid, &r.center, r.jitter)?;
            let (longitudinal, transverse) = if bn > 0.0 {
                let l = value.dot(b) / (bn * bn);
                (l, (value - b * l).norm() / bn)
            } else {
                (0.0, 0.0)
            };
            Ok(SweepRow {
                size: r.size,
                shape: r.shape,
                cells: r.grid.n()[0],
                value,
                longitudinal,
                transverse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit(&rows, reference);
    Ok(Sweep { dim, b: *b, rows, fit })
}

impl Sweep {
    /// Columns `size,cells,c_x,c_y[,c_z],longitudinal,transverse,fit`; the
    /// final `limit` row carries the extrapolated value with the fitted rate
    /// in `fit`, and an `error_slope` row follows when one was fitted.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("size,cells");
        for ax in ["x", "y", "z"].iter().take(self.dim) {
            let _ = write!(s, ",c_{ax}");
        }
        s.push_str(",longitudinal,transverse,fit\n");
        let bn = self.b.norm();
        let mut line = |label: &str, cells: &str, v: &Vec3, fit: &str| {
            let _ = write!(s, "{label},{cells}");
            for a in 0..self.dim {
                let _ = write!(s, ",{:e}", v[a]);
            }
            let l = if bn > 0.0 { v.dot(&self.b) / (bn * bn) } else { 0.0 };
            let t = if bn > 0.0 { (v - self.b * l).norm() / bn } else { 0.0 };
            let _ = writeln!(s, ",{l:e},{t:e},{fit}");
        };
        for r in &self.rows {
            line(&format!("{:e}", r.size), &r.cells.to_string(), &r.value, "");
        }
        let rate = self.fit.rate.map_or(String::new(), |a| format!("{a:e}"));
        line("limit", "", &self.fit.limit, &rate);
        if let Some(e) = self.fit.error_slope {
            let _ = writeln!(s, "error_slope,{},,{e:e}", ",".repeat(self.dim));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DomainSpec;

    fn grid(n: usize) -> Grid {
        DomainSpec::cube(2, 1.0, n, 1.0).unwrap().grid()
    }

    #[test]
    fn zero_force_and_outside() {
        let g = grid(32);
        let d = BodyShape::Disc { r: 0.1 };
        let c = Vec3::new(0.5, 0.5, 0.0);
        assert_eq!(averaged_projection(&d, &Vec3::zeros(), &g, &c).unwrap(), Vec3::zeros());
        assert!(matches!(
            averaged_projection(&d, &Vec3::x(), &g, &Vec3::new(0.05, 0.5, 0.0)),
            Err(Error::ShapeOutsideDomain { .. })
        ));
    }

    #[test]
    fn linear_in_b() {
        let g = grid(64);
        let s = BodyShape::Rectangle { p: 0.1, q: 0.03 };
        let c = Vec3::new(0.47, 0.52, 0.0);
        let (b1, b2) = (Vec3::new(1.0, 0.3, 0.0), Vec3::new(-0.2, 0.7, 0.0));
        let lhs = averaged_projection(&s, &(b1 * 2.0 - b2 * 0.5), &g, &c).unwrap();
        let rhs = averaged_projection(&s, &b1, &g, &c).unwrap() * 2.0 - averaged_projection(&s, &b2, &g, &c).unwrap() * 0.5;
        assert!((lhs - rhs).norm() < 1e-10 * rhs.norm());
    }

    #[test]
    fn disc_is_roughly_halved() {
        let g = grid(128);
        let v = averaged_projection(&BodyShape::Disc { r: 1.0 / 32.0 }, &Vec3::x(), &g, &Vec3::new(0.5, 0.5, 0.0)).unwrap();
        assert!((v[0] - 0.5).abs() < 0.05, "{v:?}");
        assert!(v[1].abs() < 1e-10);
    }

    #[test]
    fn jitter_of_one_is_plain() {
        let g = grid(64);
        let s = BodyShape::Rectangle { p: 0.1, q: 0.02 };
        let c = Vec3::new(0.5, 0.5, 0.0);
        let b = Vec3::new(0.3, 1.0, 0.0);
        let a = averaged_projection(&s, &b, &g, &c).unwrap();
        assert_eq!(averaged_projection_jittered(&s, &b, &g, &c, 1).unwrap(), a);
        let j = averaged_projection_jittered(&s, &b, &g, &c, 3).unwrap();
        assert!((j - a).norm() < 0.05);
    }

    #[test]
    fn separation_enforced() {
        let g = grid(64);
        let d = BodyShape::Disc { r: 0.05 };
        let err = remote_influence(&d, &Vec3::new(0.3, 0.5, 0.0), &Vec3::x(), &d, &Vec3::new(0.5, 0.5, 0.0), 0.2, &g);
        assert!(matches!(err, Err(Error::SeparationViolated { .. })));
        let ok = remote_influence(&d, &Vec3::new(0.2, 0.5, 0.0), &Vec3::zeros(), &d, &Vec3::new(0.8, 0.5, 0.0), 0.2, &g).unwrap();
        assert_eq!(ok, Vec3::zeros());
    }

    #[test]
    fn fit_recovers_power_law() {
        let rows: Vec<SweepRow> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|s: &f64| {
                let l = 0.5 + 0.3 * s * s;
                SweepRow {
                    size: *s,
                    shape: BodyShape::Disc { r: *s },
                    cells: 0,
                    value: Vec3::new(l, 0.0, 0.0),
                    longitudinal: l,
                    transverse: 0.0,
                }
            })
            .collect();
        let f = fit(&rows, Some(0.5));
        assert!((f.rate.unwrap() - 2.0).abs() < 1e-9);
        assert!((f.limit[0] - 0.5).abs() < 1e-12);
        assert!((f.error_slope.unwrap() - 2.0).abs() < 1e-9);
    }
}
