//! Coupled fluid and body-part integration.
//!
//! Each step assembles the force from the state at the start of the step,
//! advances the fluid, then moves every part with the average fluid
//! velocity inside it (Heun or Euler). A configuration that stops being
//! valid ends the run; the trajectory up to that point is returned with the
//! cause.

use std::fmt::Write as _;
use std::f64::consts::PI;

use crate::config::{InitialFlow, Integrator, ScenarioConfig, Stepping};
use crate::error::{Error, Result, Violation, Wall};
use crate::field::FaceField;
use crate::fluid::{FluidSolver, VelocityField};
use crate::forces::{part_densities, PartMasks};
use crate::model::{margins, validate_configuration, BodyMask, ControlVector, Grid, Swimmer, SwimmerState};
use crate::Vec3;

/// `(1/meas S(0)) ∫ ξ u dx` over the part centered at `center`.
pub fn average_velocity(u: &FaceField, center: &Vec3, shape: &crate::model::BodyShape, grid: &Grid) -> Result<Vec3> {
    Ok(BodyMask::new(shape, center, grid)?.integrate(u) / shape.measure())
}

/// One recorded time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub time: f64,
    pub positions: Vec<Vec3>,
    /// Controls applied on the step that starts here.
    pub controls: ControlVector,
    pub energy: f64,
    pub pair_margin: f64,
    pub wall_clearance: f64,
    /// Averaged fluid velocity on each part.
    pub part_velocity: Vec<Vec3>,
    pub relative_divergence: f64,
}

/// Why a run stopped before its horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Halt {
    pub time: f64,
    pub cause: Violation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub records: Vec<Record>,
    pub halt: Option<Halt>,
    /// Velocity at every recorded time level, kept by baseline runs.
    pub snapshots: Vec<VelocityField>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("trajectory has its initial record")
    }

    pub fn final_positions(&self) -> &[Vec3] {
        &self.last().positions
    }

    /// Smallest clearance over the run, the `μ` of the validity margin.
    pub fn margin(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.pair_margin.min(r.wall_clearance))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_relative_divergence(&self) -> f64 {
        self.records.iter().map(|r| r.relative_divergence).fold(0.0, f64::max)
    }

    pub fn validity_error(&self) -> Option<Error> {
        self.halt.as_ref().map(|h| Error::ValidityLost {
            time: h.time,
            cause: h.cause.clone(),
        })
    }

    /// Columns: `t`, `z{i}_{x,y[,z]}`, `v{j}`, `energy`, `pair_margin`,
    /// `wall_clearance`, `divergence`. Numbering starts at 1.
    pub fn to_csv(&self) -> String {
        let axes = ["x", "y", "z"];
        let first = &self.records[0];
        let mut s = String::from("t");
        for i in 0..first.positions.len() {
            for ax in axes.iter().take(self.dim) {
                let _ = write!(s, ",z{}_{ax}", i + 1);
            }
        }
        for j in 0..first.controls.len() {
            let _ = write!(s, ",v{}", j + 1);
        }
        s.push_str(",energy,pair_margin,wall_clearance,divergence\n");
        for r in &self.records {
            let _ = write!(s, "{:e}", r.time);
            for z in &r.positions {
                for a in 0..self.dim {
                    let _ = write!(s, ",{:e}", z[a]);
                }
            }
            for v in &r.controls.0 {
                let _ = write!(s, ",{v:e}");
            }
            let _ = writeln!(
                s,
                ",{:e},{:e},{:e},{:e}",
                r.energy, r.pair_margin, r.wall_clearance, r.relative_divergence
            );
        }
        s
    }
}

/// Cell-centered velocity and pressure: columns `x,y[,z],u,v[,w],p`.
pub fn snapshot_csv(field: &VelocityField) -> String {
    let grid = field.grid();
    let d = grid.dim();
    let axes = ["x", "y", "z"];
    let comps = ["u", "v", "w"];
    let mut s = String::new();
    s.push_str(&axes[..d].join(","));
    for c in comps.iter().take(d) {
        let _ = write!(s, ",{c}");
    }
    s.push_str(",p\n");
    for (i, j, k) in Grid::indices(grid.n()) {
        let x = grid.cell_center(i, j, k);
        for a in 0..d {
            let _ = write!(s, "{}{:e}", if a > 0 { "," } else { "" }, x[a]);
        }
        for a in 0..d {
            let mut hi = [i, j, k];
            hi[a] += 1;
            let lo = field.u.comps[a][grid.face_index(a, i, j, k)];
            let up = field.u.comps[a][grid.face_index(a, hi[0], hi[1], hi[2])];
            let _ = write!(s, ",{:e}", 0.5 * (lo + up));
        }
        let _ = writeln!(s, ",{:e}", field.pressure.data[grid.cell_index(i, j, k)]);
    }
    s
}

/// Discretely solenoidal initial velocity.
pub fn initial_velocity(flow: &InitialFlow, grid: &Grid) -> FaceField {
    let mut u = FaceField::zeros(grid);
    let InitialFlow::Eddy { amplitude } = *flow else {
        return u;
    };
    let h = grid.h();
    let ext = grid.extent();
    let psi = |x: f64, y: f64| amplitude * (PI * x / ext[0]).sin().powi(2) * (PI * y / ext[1]).sin().powi(2);
    // stream function sampled on cell edges parallel to the third axis, so
    // the discrete curl is exactly divergence-free
    for (i, j, k) in Grid::indices(grid.face_shape(0)) {
        let x = i as f64 * h[0];
        let (y0, y1) = (j as f64 * h[1], (j + 1) as f64 * h[1]);
        u.comps[0][grid.face_index(0, i, j, k)] = (psi(x, y1) - psi(x, y0)) / h[1];
    }
    for (i, j, k) in Grid::indices(grid.face_shape(1)) {
        let y = j as f64 * h[1];
        let (x0, x1) = (i as f64 * h[0], (i + 1) as f64 * h[0]);
        u.comps[1][grid.face_index(1, i, j, k)] = -(psi(x1, y) - psi(x0, y)) / h[0];
    }
    u
}

/// A configured run: everything `simulate` needs, prepared once.
#[derive(Debug)]
pub struct Session {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub swimmer: Swimmer,
    pub initial: SwimmerState,
    pub fluid: FluidSolver,
}

impl Session {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let grid = config.domain()?.grid();
        let swimmer = config.swimmer()?;
        let initial = config.initial_state()?;
        validate_configuration(&initial, &swimmer, &grid)?;
        let method = config.domain.poisson;
        let fluid = FluidSolver::with_tolerance(&grid, config.domain.nu, method, config.tolerances.poisson_rtol);
        Ok(Self {
            config: config.clone(),
            grid,
            swimmer,
            initial,
            fluid,
        })
    }

    fn step_size(&self, u: &FaceField, t: f64) -> f64 {
        let time = &self.config.time;
        let dt = match time.stepping {
            Stepping::Adaptive => self.fluid.stable_dt(u).min(time.max_dt),
            Stepping::Fixed => time.max_dt,
        };
        let left = time.horizon - t;
        // avoid a sliver step at the end
        if dt >= left * (1.0 - 1e-9) {
            left
        } else {
            dt
        }
    }

    fn masks(&self, state: &SwimmerState) -> std::result::Result<PartMasks, Violation> {
        PartMasks::new(state, &self.swimmer, &self.grid).map_err(|_| {
            let part = (0..state.parts())
                .find(|i| BodyMask::new(&self.swimmer.part_shape(*i), &state.positions[*i], &self.grid).is_err())
                .unwrap_or(0);
            self.boundary_cause(state, part)
        })
    }

    fn velocities(&self, u: &FaceField, masks: &PartMasks) -> Vec<Vec3> {
        masks
            .masks
            .iter()
            .enumerate()
            .map(|(i, m)| m.integrate(u) / self.swimmer.part_shape(i).measure())
            .collect()
    }

    fn part_velocities(&self, u: &FaceField, state: &SwimmerState) -> std::result::Result<Vec<Vec3>, Violation> {
        self.masks(state).map(|m| self.velocities(u, &m))
    }

    fn boundary_cause(&self, state: &SwimmerState, part: usize) -> Violation {
        let rep = margins(state, &self.swimmer, &self.grid);
        match rep.violation() {
            Some(v) => v,
            None => Violation::Boundary {
                part,
                wall: Wall { axis: 0, upper: false },
                clearance: rep.wall_clearance,
            },
        }
    }

    /// Runs to the horizon, or until validity is lost.
    pub fn run(&self, keep_snapshots: bool) -> Result<Trajectory> {
        self.run_every(usize::from(keep_snapshots))
    }

    /// Like [`Session::run`], keeping the velocity every `every` steps
    /// (never for 0).
    pub fn run_every(&self, every: usize) -> Result<Trajectory> {
        let schedule = self.config.schedule();
        let horizon = self.config.time.horizon;
        let mut u = VelocityField::zeros(&self.grid);
        u.u = self.fluid.leray_project(&initial_velocity(&self.config.domain.initial_flow, &self.grid))?;
        let mut state = self.initial.clone();
        let mut traj = Trajectory {
            dim: self.grid.dim(),
            records: Vec::new(),
            halt: None,
            snapshots: Vec::new(),
        };
        let mut masks = self.masks(&state).map_err(Error::from_violation)?;
        let mut k1 = self.velocities(&u.u, &masks);
        loop {
            let t = u.time;
            let v = schedule.at(t).clone();
            let rep = margins(&state, &self.swimmer, &self.grid);
            traj.records.push(Record {
                time: t,
                positions: state.positions.clone(),
                controls: v.clone(),
                energy: u.u.energy(),
                pair_margin: rep.pair_margin,
                wall_clearance: rep.wall_clearance,
                part_velocity: k1.clone(),
                relative_divergence: u.u.relative_divergence(),
            });
            if every > 0 && (traj.records.len() - 1).is_multiple_of(every) {
                traj.snapshots.push(u.clone());
            }
            if t >= horizon {
                break;
            }
            let dens = part_densities(&state, &v, &self.grid)?;
            let f = masks.rasterize(&dens, &self.grid);
            let dt = self.step_size(&u.u, t);
            let next = self.fluid.nse_step(&u, &f, dt)?;
            let moved = match self.config.time.integrator {
                Integrator::Euler => Ok(advance(&state, &k1, dt)),
                Integrator::Rk2 => {
                    let pred = advance(&state, &k1, dt);
                    self.part_velocities(&next.u, &pred).map(|k2| {
                        let avg: Vec<Vec3> = k1.iter().zip(&k2).map(|(a, b)| (a + b) * 0.5).collect();
                        advance(&state, &avg, dt)
                    })
                }
            };
            let checked = moved.and_then(|s| match margins(&s, &self.swimmer, &self.grid).violation() {
                Some(v) => Err(v),
                None => Ok(s),
            });
            match checked {
                Ok(s) => state = s,
                Err(cause) => {
                    traj.halt = Some(Halt { time: next.time, cause });
                    break;
                }
            }
            u = next;
            // the last step lands on the horizon exactly
            if (u.time - horizon).abs() <= 1e-12 * horizon {
                u.time = horizon;
            }
            k1 = match self.masks(&state) {
                Ok(m) => {
                    masks = m;
                    self.velocities(&u.u, &masks)
                }
                Err(cause) => {
                    traj.halt = Some(Halt { time: u.time, cause });
                    break;
                }
            };
        }
        Ok(traj)
    }
}

fn advance(state: &SwimmerState, vel: &[Vec3], dt: f64) -> SwimmerState {
    SwimmerState {
        positions: state.positions.iter().zip(vel).map(|(z, v)| z + v * dt).collect(),
    }
}

/// Integrates the coupled system described by `config`.
pub fn simulate(config: &ScenarioConfig) -> Result<Trajectory> {
    Session::new(config)?.run(false)
}

/// Zero-control run keeping the velocity at every time level.
pub fn baseline_run(config: &ScenarioConfig) -> Result<Trajectory> {
    let zero = ControlVector::zeros(config.num_controls());
    Session::new(&config.with_constant_controls(&zero))?.run(true)
}
