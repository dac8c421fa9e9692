//! Local controllability experiments with constant controls.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{ScenarioConfig, Stepping};
use crate::error::{Error, Result};
use crate::model::{ControlVector, SwimmerState};
use crate::sensitivity::{linearized_solve, projected_force_averages, volterra_kernel, volterra_solve};
use crate::simulator::{baseline_run, simulate, Session, Trajectory};
use crate::winding::{distance_to_polygon, icosphere, is_simple, signed_volume, surface_winding, winding_number};
use crate::Vec3;

/// Which point of the swimmer is steered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Center of one part (0-based).
    Part(usize),
    CenterOfMass,
}

impl Observable {
    pub fn of(&self, positions: &[Vec3]) -> Vec3 {
        match self {
            Observable::Part(i) => positions[*i],
            Observable::CenterOfMass => positions.iter().sum::<Vec3>() / positions.len() as f64,
        }
    }

    fn check(&self, parts: usize) -> Result<()> {
        match self {
            Observable::Part(i) if *i >= parts => Err(Error::IndexOutOfRange {
                index: *i,
                detail: format!("{parts} parts"),
            }),
            _ => Ok(()),
        }
    }
}

/// Same scenario on the fixed step `max_dt`, so that runs with different
/// controls share one time grid.
pub fn fixed_schedule(config: &ScenarioConfig) -> ScenarioConfig {
    let mut c = config.clone();
    c.time.stepping = Stepping::Fixed;
    c
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidDomain(format!("thread pool: {e}")))
}

fn check_indices(indices: &[usize], controls: usize) -> Result<()> {
    match indices.iter().find(|k| **k >= controls) {
        Some(k) => Err(Error::IndexOutOfRange {
            index: *k,
            detail: format!("{controls} controls"),
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct IndependenceReport {
    pub independent: bool,
    /// Averaged projected force of each selected control.
    pub vectors: Vec<Vec3>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `σ_max / σ_min` (infinite when singular).
    pub condition: f64,
}

fn singular_values(vectors: &[Vec3], dim: usize) -> (f64, f64) {
    if vectors.is_empty() {
        return (0.0, 0.0);
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c][r]);
    let sv = m.singular_values();
    let max = sv.max();
    // a wide matrix has at most `dim` nonzero values
    let min = if vectors.len() > dim { 0.0 } else { sv.min() };
    (min, max)
}

/// Linear independence of `∫_{S(z_i)} P_H f_k dx` over the selected controls
/// (0-based), or of their sums over all parts for the center of mass.
pub fn independence_check(
    session: &Session,
    state: &SwimmerState,
    observable: Observable,
    indices: &[usize],
    sigma_tol: f64,
) -> Result<IndependenceReport> {
    observable.check(state.parts())?;
    check_indices(indices, state.num_controls())?;
    let avgs = projected_force_averages(state, &session.swimmer, &session.grid, &session.fluid)?;
    let vectors: Vec<Vec3> = indices
        .iter()
        .map(|k| match observable {
            Observable::Part(i) => avgs[*k][i],
            Observable::CenterOfMass => avgs[*k].iter().sum(),
        })
        .collect();
    let (sigma_min, sigma_max) = singular_values(&vectors, session.grid.dim());
    let independent = sigma_max > 0.0 && sigma_min > sigma_tol * sigma_max;
    Ok(IndependenceReport {
        independent,
        vectors,
        sigma_min,
        sigma_max,
        condition: if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY },
    })
}

#[derive(Debug, Clone)]
pub struct AtlasSample {
    pub controls: ControlVector,
    pub endpoint: Vec3,
    /// The run lost validity before the horizon; `endpoint` is its last
    /// valid value.
    pub halted: bool,
}

#[derive(Debug, Clone)]
pub struct ReachabilityAtlas {
    pub dim: usize,
    pub observable: Observable,
    pub indices: Vec<usize>,
    pub h: f64,
    pub horizon: f64,
    pub drift_endpoint: Vec3,
    pub samples: Vec<AtlasSample>,
    /// Winding number of the image curve (2-D) or surface (3-D) around the
    /// drift endpoint; `None` when degenerate.
    pub winding: Option<i32>,
    /// The 2-D image polygon has no self-intersections.
    pub simple: bool,
    /// Distance from the drift endpoint to the image (2-D).
    pub inradius: f64,
    /// Signed volume of the image surface about the drift endpoint (3-D).
    pub signed_volume: f64,
    /// Largest distance between two image points.
    pub diameter: f64,
}

impl ReachabilityAtlas {
    pub fn degenerate(&self) -> bool {
        self.winding.is_none()
    }

    /// The image certifiably surrounds the drift endpoint.
    pub fn certified(&self) -> bool {
        match self.dim {
            2 => self.winding.is_some_and(|w| w.abs() == 1) && self.simple,
            _ => self.winding.is_some_and(|w| w.abs() == 1) && self.signed_volume * self.winding.unwrap() as f64 > 0.0,
        }
    }

    /// Columns `sample, v{j}..., e_x, e_y[, e_z], halted` (1-based controls).
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("sample");
        let m = self.samples.first().map_or(0, |x| x.controls.len());
        for j in 0..m {
            let _ = write!(s, ",v{}", j + 1);
        }
        for ax in ["x", "y", "z"].iter().take(self.dim) {
            let _ = write!(s, ",e_{ax}");
        }
        s.push_str(",halted\n");
        for (k, smp) in self.samples.iter().enumerate() {
            let _ = write!(s, "{k}");
            for v in &smp.controls.0 {
                let _ = write!(s, ",{v:e}");
            }
            for a in 0..self.dim {
                let _ = write!(s, ",{:e}", smp.endpoint[a]);
            }
            let _ = writeln!(s, ",{}", smp.halted as u8);
        }
        s
    }
}

/// Control directions on the unit circle (2 indices) or the 42-point
/// icosphere (3 indices).
pub fn control_directions(dim: usize, samples: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        (0..samples.max(3))
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / samples.max(3) as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    } else {
        icosphere(1).0.iter().map(|v| vec![v[0], v[1], v[2]]).collect()
    }
}

fn endpoint(config: &ScenarioConfig, observable: Observable, v: &ControlVector) -> Result<(Vec3, bool)> {
    let traj = simulate(&config.with_constant_controls(v))?;
    Ok((observable.of(traj.final_positions()), traj.halt.is_some()))
}

fn embed(indices: &[usize], m: usize, coeffs: &[f64]) -> ControlVector {
    let mut v = ControlVector::zeros(m);
    for (k, c) in indices.iter().zip(coeffs) {
        v.0[*k] += c;
    }
    v
}

/// Endpoints of constant controls `h·a` with `a` on the unit circle or
/// sphere of the selected indices, all on the fixed time grid of `config`.
pub fn reachability_map(
    config: &ScenarioConfig,
    observable: Observable,
    indices: &[usize],
    h: f64,
    samples: usize,
    jobs: usize,
) -> Result<ReachabilityAtlas> {
    let config = fixed_schedule(config);
    let dim = config.dim();
    let m = config.num_controls();
    check_indices(indices, m)?;
    observable.check(config.swimmer.centers.len())?;
    if indices.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{} control indices in {dim}-D (need {dim})",
            indices.len()
        )));
    }
    let (drift, _) = endpoint(&config, observable, &ControlVector::zeros(m))?;
    let dirs = control_directions(dim, samples);
    let results: Vec<Result<AtlasSample>> = pool(jobs)?.install(|| {
        dirs.par_iter()
            .map(|a| {
                let coeffs: Vec<f64> = a.iter().map(|x| h * x).collect();
                let v = embed(indices, m, &coeffs);
                let (e, halted) = endpoint(&config, observable, &v)?;
                Ok(AtlasSample {
                    controls: v,
                    endpoint: e,
                    halted,
                })
            })
            .collect()
    });
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    let pts: Vec<Vec3> = samples.iter().map(|s| s.endpoint).collect();
    let mut diameter: f64 = 0.0;
    for a in &pts {
        for b in &pts {
            diameter = diameter.max((a - b).norm());
        }
    }
    let spread = pts.iter().map(|p| (p - drift).norm()).fold(0.0, f64::max);
    let mut atlas = ReachabilityAtlas {
        dim,
        observable,
        indices: indices.to_vec(),
        h,
        horizon: config.time.horizon,
        drift_endpoint: drift,
        samples,
        winding: None,
        simple: false,
        inradius: 0.0,
        signed_volume: 0.0,
        diameter,
    };
    if h == 0.0 || spread == 0.0 {
        return Ok(atlas);
    }
    if dim == 2 {
        atlas.winding = winding_number(&pts, &drift);
        atlas.simple = is_simple(&pts);
        atlas.inradius = distance_to_polygon(&pts, &drift);
    } else {
        let (_, faces) = icosphere(1);
        atlas.winding = surface_winding(&pts, &faces, &drift);
        atlas.signed_volume = signed_volume(&pts, &faces, &drift);
        atlas.inradius = faces
            .iter()
            .map(|f| point_triangle_distance(&drift, &pts[f[0]], &pts[f[1]], &pts[f[2]]))
            .fold(f64::INFINITY, f64::min);
    }
    Ok(atlas)
}

fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    // distance to the plane when the foot lies inside, otherwise to an edge
    let n = (b - a).cross(&(c - a));
    let seg = |x: &Vec3, y: &Vec3| {
        let d = y - x;
        let t = if d.norm_squared() > 0.0 { ((p - x).dot(&d) / d.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
        (p - (x + d * t)).norm()
    };
    let edges = seg(a, b).min(seg(b, c)).min(seg(c, a));
    if n.norm() == 0.0 {
        return edges;
    }
    let nn = n.normalize();
    let foot = p - nn * (p - a).dot(&nn);
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(x, y)| (*y - *x).cross(&(foot - *x)).dot(&n) >= 0.0);
    if inside {
        (p - foot).norm()
    } else {
        edges
    }
}

#[derive(Debug, Clone)]
pub struct JacobianReport {
    /// `d × m` matrix with columns `∂(observable)(T)/∂v_k`.
    pub matrix: DMatrix<f64>,
    pub determinant: Option<f64>,
    pub condition: f64,
    pub singular: bool,
}

impl JacobianReport {
    fn new(matrix: DMatrix<f64>, sigma_tol: f64) -> Self {
        let sv = matrix.singular_values();
        let (max, min) = (sv.max(), if matrix.ncols() > matrix.nrows() { 0.0 } else { sv.min() });
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        let determinant = matrix.is_square().then(|| matrix.determinant());
        Self {
            matrix,
            determinant,
            condition,
            singular: !(max > 0.0 && min > sigma_tol * max),
        }
    }

    pub fn spectral_norm(&self) -> f64 {
        self.matrix.singular_values().max()
    }
}

/// Jacobian from the linearized equations and the Volterra solve along the
/// zero-control baseline of `config` (on its fixed time grid).
pub fn jacobian_matrix(
    config: &ScenarioConfig,
    observable: Observable,
    indices: &[usize],
    sigma_tol: f64,
    jobs: usize,
) -> Result<JacobianReport> {
    let config = fixed_schedule(config);
    let session = Session::new(&config)?;
    let baseline = baseline_run(&config)?;
    jacobian_from_baseline(&session, &baseline, observable, indices, sigma_tol, jobs)
}

pub fn jacobian_from_baseline(
    session: &Session,
    baseline: &Trajectory,
    observable: Observable,
    indices: &[usize],
    sigma_tol: f64,
    jobs: usize,
) -> Result<JacobianReport> {
    let parts = session.initial.parts();
    observable.check(parts)?;
    check_indices(indices, session.initial.num_controls())?;
    let dim = session.grid.dim();
    let observed: Vec<usize> = match observable {
        Observable::Part(i) => vec![i],
        Observable::CenterOfMass => (0..parts).collect(),
    };
    let kernels = observed
        .iter()
        .map(|i| volterra_kernel(session, baseline, *i))
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<Result<Vec3>> = pool(jobs)?.install(|| {
        indices
            .par_iter()
            .map(|k| {
                let w = linearized_solve(session, baseline, *k)?;
                let mut col = Vec3::zeros();
                for kern in &kernels {
                    col += volterra_solve(session, baseline, kern, &w)?.final_value();
                }
                Ok(col / observed.len() as f64)
            })
            .collect()
    });
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    if columns.len() != indices.len() {
        return Err(Error::MissingSensitivity(indices[columns.len()]));
    }
    let m = DMatrix::from_fn(dim, indices.len(), |r, c| columns[c][r]);
    Ok(JacobianReport::new(m, sigma_tol))
}

/// Two-sided finite-difference Jacobian with control step `eps`.
pub fn fd_jacobian(
    config: &ScenarioConfig,
    observable: Observable,
    indices: &[usize],
    eps: f64,
    sigma_tol: f64,
    jobs: usize,
) -> Result<JacobianReport> {
    let config = fixed_schedule(config);
    let m = config.num_controls();
    check_indices(indices, m)?;
    let dim = config.dim();
    let columns: Vec<Result<Vec3>> = pool(jobs)?.install(|| {
        indices
            .par_iter()
            .map(|k| {
                let (plus, _) = endpoint(&config, observable, &ControlVector::unit(m, *k, eps))?;
                let (minus, _) = endpoint(&config, observable, &ControlVector::unit(m, *k, -eps))?;
                Ok((plus - minus) / (2.0 * eps))
            })
            .collect()
    });
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    let mat = DMatrix::from_fn(dim, indices.len(), |r, c| columns[c][r]);
    Ok(JacobianReport::new(mat, sigma_tol))
}

#[derive(Debug, Clone, Copy)]
pub struct SteeringOptions {
    /// Stop when the endpoint is this close to the target.
    pub tol: f64,
    pub max_iter: usize,
    /// Controls are kept in the ball of this radius.
    pub max_control: f64,
    pub sigma_tol: f64,
}

#[derive(Debug, Clone)]
pub struct SteeringIterate {
    pub controls: ControlVector,
    pub endpoint: Vec3,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SteeringResult {
    pub target: Vec3,
    pub controls: ControlVector,
    pub endpoint: Vec3,
    pub iterations: usize,
    pub residual: f64,
    /// Accepted iterates; residuals are non-increasing.
    pub history: Vec<SteeringIterate>,
}

/// Damped Newton iteration on constant controls of the selected indices,
/// starting from zero with the Volterra Jacobian and refining it by Broyden
/// updates. Every iterate is a full simulation.
pub fn steer(
    config: &ScenarioConfig,
    observable: Observable,
    indices: &[usize],
    target: &Vec3,
    opts: &SteeringOptions,
) -> Result<SteeringResult> {
    let config = fixed_schedule(config);
    let jac = jacobian_matrix(&config, observable, indices, opts.sigma_tol, 1)?;
    steer_with_jacobian(&config, observable, indices, target, opts, &jac)
}

pub fn steer_with_jacobian(
    config: &ScenarioConfig,
    observable: Observable,
    indices: &[usize],
    target: &Vec3,
    opts: &SteeringOptions,
    jacobian: &JacobianReport,
) -> Result<SteeringResult> {
    let config = fixed_schedule(config);
    let dim = config.dim();
    let m = config.num_controls();
    check_indices(indices, m)?;
    let tvec = DVector::from_fn(dim, |r, _| target[r]);
    let evaluate = |coeffs: &DVector<f64>| -> Result<SteeringIterate> {
        let v = embed(indices, m, coeffs.as_slice());
        let (e, _) = endpoint(&config, observable, &v)?;
        let ev = DVector::from_fn(dim, |r, _| e[r]);
        Ok(SteeringIterate {
            controls: v,
            endpoint: e,
            residual: (ev - &tvec).norm(),
        })
    };
    let mut a = DVector::zeros(indices.len());
    let mut cur = evaluate(&a)?;
    let mut history = vec![cur.clone()];
    let finish = |cur: &SteeringIterate, history: Vec<SteeringIterate>, iterations| SteeringResult {
        target: *target,
        controls: cur.controls.clone(),
        endpoint: cur.endpoint,
        iterations,
        residual: cur.residual,
        history,
    };
    if cur.residual <= opts.tol {
        return Ok(finish(&cur, history, 0));
    }
    if jacobian.singular {
        return Err(Error::SingularJacobian {
            condition: jacobian.condition,
        });
    }
    let mut j = jacobian.matrix.clone();
    let residuals = |h: &[SteeringIterate]| h.iter().map(|x| x.residual).collect::<Vec<_>>();
    for iter in 1..=opts.max_iter {
        let e = DVector::from_fn(dim, |r, _| cur.endpoint[r]);
        let step = j
            .clone()
            .pseudo_inverse(1e-14)
            .map_err(|_| Error::SingularJacobian { condition: f64::INFINITY })?
            * (&tvec - &e);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..6 {
            let mut trial = &a + &step * alpha;
            let n = trial.norm();
            if n > opts.max_control {
                trial *= opts.max_control / n;
            }
            let it = evaluate(&trial)?;
            if it.residual < cur.residual {
                accepted = Some((trial, it));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next_a, next)) = accepted else {
            return Err(Error::NoConvergence {
                best_residual: cur.residual,
                residuals: residuals(&history),
            });
        };
        // Broyden rank-one secant update
        let da = &next_a - &a;
        let dz = DVector::from_fn(dim, |r, _| next.endpoint[r] - cur.endpoint[r]);
        let denom = da.norm_squared();
        if denom > 0.0 {
            j += (dz - &j * &da) * da.transpose() / denom;
        }
        a = next_a;
        cur = next;
        history.push(cur.clone());
        if cur.residual <= opts.tol {
            return Ok(finish(&cur, history, iter));
        }
    }
    Err(Error::NoConvergence {
        best_residual: cur.residual,
        residuals: residuals(&history),
    })
}
