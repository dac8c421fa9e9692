//! Derivatives of the fluid and of the part positions with respect to one
//! control, taken along a zero-control baseline.
//!
//! `w_j = ∂u/∂v_j` solves the equations linearized about the baseline `u*`
//! with source `f_j` evaluated on the baseline positions. `ψ = ∂z_i/∂v_j`
//! then solves the second-kind Volterra equation
//! `ψ(t) + ∫₀ᵗ K₀ ψ dτ = g(t)` where `K₀` is minus the body average of the
//! baseline velocity gradient and `g` is the time integral of the body
//! average of `w_j`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::FaceField;
use crate::fluid::{velocity_gradient, FluidSolver, Mat3, VelocityField};
use crate::forces::{unit_densities, PartMasks};
use crate::model::{BodyMask, ControlKind, ControlVector, Grid, Swimmer, SwimmerState};
use crate::simulator::{Session, Trajectory};
use crate::Vec3;

/// `w_j` on the baseline time grid.
#[derive(Debug, Clone)]
pub struct LinearizedField {
    pub control: usize,
    pub times: Vec<f64>,
    pub fields: Vec<FaceField>,
}

#[derive(Debug, Clone)]
pub struct VolterraKernel {
    pub part: usize,
    pub times: Vec<f64>,
    pub values: Vec<Mat3>,
    /// `∫₀ᵀ ‖K₀‖₂ dτ` by the trapezoidal rule.
    pub integral_norm: f64,
}

impl VolterraKernel {
    /// Whether the smallness estimate stays under `bound` (`1/4` by default).
    pub fn is_small(&self, bound: f64) -> bool {
        self.integral_norm < bound
    }

    /// Columns `t, k11, k12, ...` row-major over the active dimensions.
    pub fn to_csv(&self, dim: usize) -> String {
        let mut s = String::from("t");
        for r in 0..dim {
            for c in 0..dim {
                let _ = write!(s, ",k{}{}", r + 1, c + 1);
            }
        }
        s.push('\n');
        for (t, k) in self.times.iter().zip(&self.values) {
            let _ = write!(s, "{t:e}");
            for r in 0..dim {
                for c in 0..dim {
                    let _ = write!(s, ",{:e}", k[(r, c)]);
                }
            }
            s.push('\n');
        }
        s
    }
}

/// `∂z_i/∂v_j` on the baseline time grid together with its source `g`.
#[derive(Debug, Clone)]
pub struct Sensitivity {
    pub part: usize,
    pub control: usize,
    pub times: Vec<f64>,
    pub psi: Vec<Vec3>,
    pub g: Vec<Vec3>,
}

impl Sensitivity {
    pub fn final_value(&self) -> Vec3 {
        *self.psi.last().expect("non-empty time grid")
    }

    /// Columns `t, psi_x, psi_y[, psi_z], g_x, ...`.
    pub fn to_csv(&self, dim: usize) -> String {
        let axes = ["x", "y", "z"];
        let mut s = String::from("t");
        for name in ["psi", "g"] {
            for ax in axes.iter().take(dim) {
                let _ = write!(s, ",{name}_{ax}");
            }
        }
        s.push('\n');
        for ((t, p), g) in self.times.iter().zip(&self.psi).zip(&self.g) {
            let _ = write!(s, "{t:e}");
            for v in [p, g] {
                for a in 0..dim {
                    let _ = write!(s, ",{:e}", v[a]);
                }
            }
            s.push('\n');
        }
        s
    }
}

fn require_snapshots(baseline: &Trajectory) -> Result<()> {
    if baseline.snapshots.len() != baseline.records.len() || baseline.records.is_empty() {
        return Err(Error::MissingBaselineData(format!(
            "{} velocity snapshots for {} time levels",
            baseline.snapshots.len(),
            baseline.records.len()
        )));
    }
    Ok(())
}

fn baseline_state(baseline: &Trajectory, n: usize) -> SwimmerState {
    SwimmerState {
        positions: baseline.records[n].positions.clone(),
    }
}

/// Time-steps the linearized equations for control `j` (0-based) along the
/// cached baseline, starting from `w_j(0) = 0`.
pub fn linearized_solve(session: &Session, baseline: &Trajectory, j: usize) -> Result<LinearizedField> {
    require_snapshots(baseline)?;
    let grid = &session.grid;
    let parts = session.initial.parts();
    ControlKind::of(j, parts)?;
    let times = baseline.times();
    let mut w = VelocityField::zeros(grid);
    let mut fields = Vec::with_capacity(times.len());
    fields.push(w.u.clone());
    for n in 0..times.len() - 1 {
        let state = baseline_state(baseline, n);
        let dens = unit_densities(&state, j, grid)?;
        let f = PartMasks::new(&state, &session.swimmer, grid)?.rasterize(&dens, grid);
        let dt = times[n + 1] - times[n];
        w = session.fluid.linearized_step(&w, &baseline.snapshots[n].u, &f, dt)?;
        fields.push(w.u.clone());
    }
    Ok(LinearizedField {
        control: j,
        times,
        fields,
    })
}

fn spectral_norm(m: &Mat3) -> f64 {
    m.singular_values().max()
}

/// `K₀(t) = -(1/meas S(0)) ∫ ξ_i ∇u* dx` along the baseline, for part `i`
/// (0-based).
pub fn volterra_kernel(session: &Session, baseline: &Trajectory, i: usize) -> Result<VolterraKernel> {
    require_snapshots(baseline)?;
    let grid = &session.grid;
    if i >= session.initial.parts() {
        return Err(Error::IndexOutOfRange {
            index: i,
            detail: format!("{} parts", session.initial.parts()),
        });
    }
    let shape = session.swimmer.part_shape(i);
    let vol = grid.cell_volume();
    let values = baseline
        .records
        .iter()
        .zip(&baseline.snapshots)
        .map(|(rec, snap)| {
            if snap.u.max_abs() == 0.0 {
                return Ok(Mat3::zeros());
            }
            let jac = velocity_gradient(&snap.u);
            let mask = BodyMask::new(&shape, &rec.positions[i], grid)?;
            let mut acc = Mat3::zeros();
            for (c, w) in &mask.cells {
                acc += jac.data[*c] * *w;
            }
            Ok(-acc * (vol / shape.measure()))
        })
        .collect::<Result<Vec<_>>>()?;
    let times = baseline.times();
    let integral_norm = trapezoid(&times, &values.iter().map(spectral_norm).collect::<Vec<_>>());
    Ok(VolterraKernel {
        part: i,
        times,
        values,
        integral_norm,
    })
}

fn trapezoid(times: &[f64], f: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(f.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Solves `ψ(t) + ∫₀ᵗ K(τ) ψ(τ) dτ = g(t)` by trapezoidal forward
/// substitution on the (possibly non-uniform) grid `times`.
pub fn volterra_trapezoid(times: &[f64], kernel: &[Mat3], g: &[Vec3]) -> Result<Vec<Vec3>> {
    if kernel.len() != times.len() || g.len() != times.len() || times.is_empty() {
        return Err(Error::GridMismatch(format!(
            "{} times, {} kernel samples, {} source samples",
            times.len(),
            kernel.len(),
            g.len()
        )));
    }
    let mut psi = Vec::with_capacity(times.len());
    psi.push(g[0]);
    // running trapezoid sum of K ψ over completed intervals
    let mut hist = Vec3::zeros();
    for n in 1..times.len() {
        let dt = times[n] - times[n - 1];
        let known = hist + kernel[n - 1] * psi[n - 1] * (0.5 * dt);
        let lhs = Mat3::identity() + kernel[n] * (0.5 * dt);
        let rhs = g[n] - known;
        let p = lhs.lu().solve(&rhs).ok_or(Error::SingularJacobian {
            condition: f64::INFINITY,
        })?;
        hist = known + kernel[n] * p * (0.5 * dt);
        psi.push(p);
    }
    Ok(psi)
}

/// `ψ = ∂z_i/∂v_j` from a linearized field and the kernel of part `i`.
pub fn volterra_solve(
    session: &Session,
    baseline: &Trajectory,
    kernel: &VolterraKernel,
    w: &LinearizedField,
) -> Result<Sensitivity> {
    if w.times != kernel.times || w.times.len() != baseline.records.len() {
        return Err(Error::GridMismatch(format!(
            "linearized field has {} levels, kernel {}, baseline {}",
            w.times.len(),
            kernel.times.len(),
            baseline.records.len()
        )));
    }
    let i = kernel.part;
    let shape = session.swimmer.part_shape(i);
    let averages = baseline
        .records
        .iter()
        .zip(&w.fields)
        .map(|(rec, f)| Ok(BodyMask::new(&shape, &rec.positions[i], &session.grid)?.integrate(f) / shape.measure()))
        .collect::<Result<Vec<Vec3>>>()?;
    let mut g = vec![Vec3::zeros(); w.times.len()];
    for n in 1..g.len() {
        g[n] = g[n - 1] + (averages[n - 1] + averages[n]) * (0.5 * (w.times[n] - w.times[n - 1]));
    }
    let psi = volterra_trapezoid(&w.times, &kernel.values, &g)?;
    Ok(Sensitivity {
        part: i,
        control: w.control,
        times: w.times.clone(),
        psi,
        g,
    })
}

/// Linearized field, kernel and Volterra solution in one call.
pub fn sensitivity(session: &Session, baseline: &Trajectory, i: usize, j: usize) -> Result<(Sensitivity, VolterraKernel)> {
    let w = linearized_solve(session, baseline, j)?;
    let k = volterra_kernel(session, baseline, i)?;
    Ok((volterra_solve(session, baseline, &k, &w)?, k))
}

/// `(1/meas S(0)) ∫_{S(z_i)} P_H f_j dx` for every control `j` (outer) and
/// part `i` (inner).
pub fn projected_force_averages(
    state: &SwimmerState,
    swimmer: &Swimmer,
    grid: &Grid,
    fluid: &FluidSolver,
) -> Result<Vec<Vec<Vec3>>> {
    let masks = PartMasks::new(state, swimmer, grid)?;
    let meas = swimmer.measure();
    (0..state.num_controls())
        .map(|j| {
            let f = masks.rasterize(&unit_densities(state, j, grid)?, grid);
            let pf = fluid.leray_project(&f)?;
            Ok(masks.masks.iter().map(|m| m.integrate(&pf) / meas).collect())
        })
        .collect()
}

/// Leading-order positions `z_i(0) + h t²/2 Σ_j a_j avg_i(P_H f_j)` under
/// constant controls `v = h a` from rest.
pub fn micromotion_predict(
    state: &SwimmerState,
    swimmer: &Swimmer,
    grid: &Grid,
    fluid: &FluidSolver,
    a: &[f64],
    h: f64,
    t: f64,
) -> Result<Vec<Vec3>> {
    if a.len() != state.num_controls() {
        return Err(Error::DimensionMismatch(format!(
            "{} control directions for {} controls",
            a.len(),
            state.num_controls()
        )));
    }
    let mut out = state.positions.clone();
    if h == 0.0 {
        return Ok(out);
    }
    let avgs = projected_force_averages(state, swimmer, grid, fluid)?;
    let c = 0.5 * h * t * t;
    for (aj, per_part) in a.iter().zip(&avgs) {
        for (z, p) in out.iter_mut().zip(per_part) {
            *z += p * (c * aj);
        }
    }
    Ok(out)
}

/// Simulated against predicted displacement of every part under constant
/// controls `h a`.
#[derive(Debug, Clone)]
pub struct MicromotionReport {
    pub dim: usize,
    pub h: f64,
    pub direction: Vec<f64>,
    pub times: Vec<f64>,
    /// `[time][part]` displacements `z_i(t) − z_i(0)`.
    pub simulated: Vec<Vec<Vec3>>,
    pub predicted: Vec<Vec<Vec3>>,
    /// Per part: log-log slope of `|Δz|` against `t` over the second half of
    /// the run.
    pub slopes: Vec<Option<f64>>,
    /// Per part: angle in degrees between the final simulated and predicted
    /// displacements.
    pub angles: Vec<f64>,
    /// Per part: `|Δz_sim| / |Δz_pred|` at the final time.
    pub magnitude_ratios: Vec<f64>,
    pub halted: bool,
}

impl MicromotionReport {
    /// Columns `t,part,pred_dx,pred_dy[,pred_dz],sim_dx,...` (parts from 1).
    pub fn to_csv(&self) -> String {
        let axes = ["x", "y", "z"];
        let mut s = String::from("t,part");
        for which in ["pred", "sim"] {
            for ax in axes.iter().take(self.dim) {
                let _ = write!(s, ",{which}_d{ax}");
            }
        }
        s.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            for i in 0..self.predicted[k].len() {
                let _ = write!(s, "{t:e},{}", i + 1);
                for v in [&self.predicted[k][i], &self.simulated[k][i]] {
                    for a in 0..self.dim {
                        let _ = write!(s, ",{:e}", v[a]);
                    }
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Runs `session`'s scenario from its initial state with constant controls
/// `h a` and compares with [`micromotion_predict`] at every time level.
pub fn micromotion_compare(session: &Session, a: &[f64], h: f64) -> Result<MicromotionReport> {
    let m = session.initial.num_controls();
    if a.len() != m {
        return Err(Error::DimensionMismatch(format!("{} control directions for {m} controls", a.len())));
    }
    let v = ControlVector(a.iter().map(|x| h * x).collect());
    let run = Session::new(&session.config.with_constant_controls(&v))?.run(false)?;
    let z0 = &session.initial.positions;
    let avgs = projected_force_averages(&session.initial, &session.swimmer, &session.grid, &session.fluid)?;
    let unit: Vec<Vec3> = (0..z0.len())
        .map(|i| a.iter().zip(&avgs).map(|(aj, per)| per[i] * *aj).sum())
        .collect();
    let times = run.times();
    let simulated: Vec<Vec<Vec3>> = run
        .records
        .iter()
        .map(|r| r.positions.iter().zip(z0).map(|(z, z0)| z - z0).collect())
        .collect();
    let predicted: Vec<Vec<Vec3>> = times
        .iter()
        .map(|t| unit.iter().map(|p| p * (0.5 * h * t * t)).collect())
        .collect();
    let t_end = *times.last().unwrap_or(&0.0);
    let window: Vec<usize> = (0..times.len()).filter(|k| times[*k] >= 0.5 * t_end && times[*k] > 0.0).collect();
    let parts = z0.len();
    let mut slopes = Vec::with_capacity(parts);
    let mut angles = Vec::with_capacity(parts);
    let mut ratios = Vec::with_capacity(parts);
    let last = simulated.len() - 1;
    for i in 0..parts {
        let x: Vec<f64> = window.iter().map(|k| times[*k]).collect();
        let y: Vec<f64> = window.iter().map(|k| simulated[*k][i].norm()).collect();
        slopes.push(crate::projlab::loglog_slope(&x, &y));
        let (s, p) = (simulated[last][i], predicted[last][i]);
        let cos = s.dot(&p) / (s.norm() * p.norm());
        angles.push(if cos.is_finite() { cos.clamp(-1.0, 1.0).acos().to_degrees() } else { f64::NAN });
        ratios.push(s.norm() / p.norm());
    }
    Ok(MicromotionReport {
        dim: session.grid.dim(),
        h,
        direction: a.to_vec(),
        times,
        simulated,
        predicted,
        slopes,
        angles,
        magnitude_ratios: ratios,
        halted: run.halt.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::simulator::baseline_run;

    fn config(flow: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml_str(&format!(
            r#"
[domain]
extent = [1.0, 1.0]
cells = [32, 32]
nu = 1e-3
{flow}
[swimmer]
shape = "rectangle"
params = [0.0625, 0.03125]
centers = [[0.25, 0.25], [0.4375, 0.4375], [0.625, 0.625]]
swap_axes = [false, true, false]
[time]
horizon = 0.05
max_dt = 2.5e-3
stepping = "fixed"
"#
        ))
        .unwrap()
    }

    #[test]
    fn trapezoid_with_zero_kernel_returns_source() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let g: Vec<Vec3> = t.iter().map(|s| Vec3::new(s.sin(), *s, 0.0)).collect();
        let psi = volterra_trapezoid(&t, &vec![Mat3::zeros(); 11], &g).unwrap();
        assert_eq!(psi, g);
        assert!(volterra_trapezoid(&t, &[Mat3::zeros()], &g).is_err());
    }

    #[test]
    fn trapezoid_is_second_order() {
        // manufactured pair: K = [[0, -1], [1, 0]], ψ = (cos t, sin t)
        let k = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let exact = |t: f64| Vec3::new(t.cos(), t.sin(), 0.0);
        // ∫₀ᵗ K ψ = ∫ (-sin, cos) = (cos t - 1, sin t)
        let source = |t: f64| exact(t) + Vec3::new(t.cos() - 1.0, t.sin(), 0.0);
        let mut errs = Vec::new();
        for n in [20, 40, 80] {
            let t: Vec<f64> = (0..=n).map(|m| m as f64 * 1.0 / n as f64).collect();
            let g: Vec<Vec3> = t.iter().map(|s| source(*s)).collect();
            let psi = volterra_trapezoid(&t, &vec![k; n + 1], &g).unwrap();
            errs.push((psi[n] - exact(1.0)).norm());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "{order}");
        }
        // linear in g
        let t: Vec<f64> = (0..=10).map(|m| m as f64 * 0.1).collect();
        let g: Vec<Vec3> = t.iter().map(|s| source(*s)).collect();
        let g3: Vec<Vec3> = g.iter().map(|v| v * 3.0).collect();
        let a = volterra_trapezoid(&t, &vec![k; 11], &g).unwrap();
        let b = volterra_trapezoid(&t, &vec![k; 11], &g3).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x * 3.0 - y).norm() < 1e-14));
    }

    #[test]
    fn equilibrium_kernel_vanishes_and_zero_source_gives_zero() {
        let cfg = config("");
        let session = Session::new(&cfg).unwrap();
        let base = baseline_run(&cfg).unwrap();
        let k = volterra_kernel(&session, &base, 1).unwrap();
        assert!(k.values.iter().all(|m| *m == Mat3::zeros()));
        assert!(k.is_small(0.25));
        let w = linearized_solve(&session, &base, 2).unwrap();
        assert_eq!(w.fields[0].max_abs(), 0.0);
        assert!(w.fields.last().unwrap().max_abs() > 0.0);
        let missing = Trajectory {
            snapshots: Vec::new(),
            ..base.clone()
        };
        assert!(matches!(linearized_solve(&session, &missing, 0), Err(Error::MissingBaselineData(_))));
    }

    #[test]
    fn equilibrium_sensitivity_has_t_squared_leading_term() {
        let cfg = config("");
        let session = Session::new(&cfg).unwrap();
        let base = baseline_run(&cfg).unwrap();
        let avgs = projected_force_averages(&session.initial, &session.swimmer, &session.grid, &session.fluid).unwrap();
        let (s, _) = sensitivity(&session, &base, 0, 2).unwrap();
        let t = *s.times.last().unwrap();
        let lead = avgs[2][0] * (0.5 * t * t);
        assert!((s.final_value() - lead).norm() <= 0.05 * lead.norm(), "{:?} vs {:?}", s.final_value(), lead);
        assert!(s.to_csv(2).starts_with("t,psi_x,psi_y,g_x,g_y\n"));
    }

    #[test]
    fn linear_shear_kernel() {
        let g = crate::model::DomainSpec::cube(2, 1.0, 32, 1e-3).unwrap().grid();
        let cfg = config("");
        let session = Session::new(&cfg).unwrap();
        let mut base = baseline_run(&cfg).unwrap();
        let shear = FaceField::from_fn(&g, |x| Vec3::new(x[1], 0.0, 0.0));
        for s in base.snapshots.iter_mut() {
            s.u = shear.clone();
        }
        let k = volterra_kernel(&session, &base, 1).unwrap();
        let want = -Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(k.values.iter().all(|m| (m - want).norm() < 1e-10));
        assert!((k.integral_norm - 0.05).abs() < 1e-10);
    }

    #[test]
    fn micromotion_with_zero_h_is_identity() {
        let cfg = config("");
        let s = Session::new(&cfg).unwrap();
        let p = micromotion_predict(&s.initial, &s.swimmer, &s.grid, &s.fluid, &[1.0, 0.0, 0.0], 0.0, 0.1).unwrap();
        assert_eq!(p, s.initial.positions);
    }
}
