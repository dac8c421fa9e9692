use clap::Parser;
use serde_json::{json, Value};

use swimmer_core::config::ScenarioConfig;
use swimmer_core::controllability::{
    independence_check, jacobian_matrix, reachability_map, steer_with_jacobian, Observable, SteeringOptions,
};
use swimmer_core::model::{margins, BodyShape, DomainSpec};
use swimmer_core::projlab::{asymptotic_sweep, Rung};
use swimmer_core::sensitivity::{micromotion_compare, sensitivity};
use swimmer_core::simulator::{baseline_run, snapshot_csv, Session};
use swimmer_core::{Error, Vec3};

use crate::output::{num, vec_json, OutDir};
use crate::{Cli, Command, Common, Observed, ProjlabArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type Outcome = Result<u8, Failure>;

/// Bad input, as opposed to a failure while computing.
fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidDomain(_)
            | Error::InvalidShape(_)
            | Error::ShapeOutsideDomain { .. }
            | Error::OverlapViolation(_)
            | Error::BoundaryViolation(_)
            | Error::DegenerateShift(_)
            | Error::DegenerateGeometry { .. }
            | Error::IndexOutOfRange { .. }
            | Error::DimensionMismatch(_)
            | Error::SeparationViolated { .. }
            | Error::Config { .. }
            | Error::ConfigParse(_)
    )
}

pub fn run(argv: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, argv) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            if is_validation(&e) {
                EXIT_INVALID
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(cmd: Command, argv: &[String]) -> Outcome {
    match cmd {
        Command::Simulate(c) => simulate(&c, argv),
        Command::Micromotion { common, h, direction } => micromotion(&common, h, direction, argv),
        Command::Sensitivity { common, part, control } => sensitivity_cmd(&common, part, control, argv),
        Command::Reach {
            common,
            target,
            h,
            samples,
        } => reach(&common, &target, h, samples, argv),
        Command::Steer {
            common,
            target,
            point,
            offset,
            h,
        } => steer_cmd(&common, &target, point, offset, h, argv),
        Command::Projlab(p) => projlab(&p, argv),
        Command::Validate { config } => validate(&config),
    }
}

fn load(path: &std::path::Path) -> Result<ScenarioConfig, Failure> {
    Ok(ScenarioConfig::from_file(path)?)
}

fn one_based(k: usize, count: usize, what: &str) -> Result<usize, Failure> {
    if k == 0 || k > count {
        Err(Failure::Usage(format!("{what} {k} out of range 1..={count}")))
    } else {
        Ok(k - 1)
    }
}

fn observed(o: &Observed, config: &ScenarioConfig) -> Result<(Observable, Vec<usize>), Failure> {
    let parts = config.swimmer.centers.len();
    let obs = if o.observe == "com" {
        Observable::CenterOfMass
    } else {
        let k: usize = o
            .observe
            .parse()
            .map_err(|_| Failure::Usage(format!("--observe expects `com` or a part number, got `{}`", o.observe)))?;
        Observable::Part(one_based(k, parts, "part")?)
    };
    let m = config.num_controls();
    let idx = o
        .controls
        .iter()
        .map(|k| one_based(*k, m, "control"))
        .collect::<Result<Vec<_>, _>>()?;
    if (1..idx.len()).any(|i| idx[..i].contains(&idx[i])) {
        return Err(Failure::Usage("--controls lists a control twice".into()));
    }
    Ok((obs, idx))
}

fn observable_json(o: Observable) -> Value {
    match o {
        Observable::CenterOfMass => json!("com"),
        Observable::Part(i) => json!(i + 1),
    }
}

fn simulate(c: &Common, argv: &[String]) -> Outcome {
    let config = load(&c.config)?;
    let session = Session::new(&config)?;
    let every = config.output.field_every;
    let traj = session.run_every(every)?;
    let out = OutDir::create(&c.out)?;
    out.write("trajectory.csv", &traj.to_csv())?;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        out.write(&format!("fields/step_{:06}.csv", k * every), &snapshot_csv(snap))?;
    }
    let last = traj.last();
    let halt = traj.halt.as_ref().map(|h| json!({ "time": h.time, "cause": h.cause.to_string() }));
    if let Some(h) = &traj.halt {
        eprintln!("run halted at t = {}: {}", h.time, h.cause);
    }
    out.meta(
        argv,
        Some(&config),
        json!({
            "steps": traj.records.len() - 1,
            "final_time": last.time,
            "halted": traj.halt.is_some(),
            "halt": halt,
            "margin": traj.margin(),
            "max_relative_divergence": traj.max_relative_divergence(),
            "final_positions": last.positions.iter().map(|z| vec_json(z, traj.dim)).collect::<Vec<_>>(),
        }),
    )?;
    Ok(EXIT_OK)
}

fn micromotion(c: &Common, h: f64, direction: Option<Vec<f64>>, argv: &[String]) -> Outcome {
    let config = load(&c.config)?;
    let session = Session::new(&config)?;
    let m = config.num_controls();
    let mut a = direction.unwrap_or_else(|| vec![1.0; m]);
    if a.len() != m {
        return Err(Failure::Usage(format!("--direction has {} entries, expected {m}", a.len())));
    }
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(Failure::Usage("--direction must be nonzero".into()));
    }
    a.iter_mut().for_each(|x| *x /= n);
    let rep = micromotion_compare(&session, &a, h)?;
    let out = OutDir::create(&c.out)?;
    out.write("micromotion.csv", &rep.to_csv())?;
    out.meta(
        argv,
        Some(&config),
        json!({
            "h": h,
            "direction": a,
            "halted": rep.halted,
            "slopes": rep.slopes.iter().map(|s| s.map_or(Value::Null, num)).collect::<Vec<_>>(),
            "angles_deg": rep.angles.iter().map(|x| num(*x)).collect::<Vec<_>>(),
            "magnitude_ratios": rep.magnitude_ratios.iter().map(|x| num(*x)).collect::<Vec<_>>(),
        }),
    )?;
    Ok(EXIT_OK)
}

fn sensitivity_cmd(c: &Common, part: usize, control: usize, argv: &[String]) -> Outcome {
    let config = load(&c.config)?;
    let i = one_based(part, config.swimmer.centers.len(), "part")?;
    let j = one_based(control, config.num_controls(), "control")?;
    let session = Session::new(&config)?;
    let baseline = baseline_run(&config)?;
    if let Some(e) = baseline.validity_error() {
        eprintln!("warning: baseline {e}; derivatives cover the valid span only");
    }
    let (sens, kernel) = sensitivity(&session, &baseline, i, j)?;
    let dim = session.grid.dim();
    let out = OutDir::create(&c.out)?;
    out.write("psi.csv", &sens.to_csv(dim))?;
    out.write("kernel.csv", &kernel.to_csv(dim))?;
    let bound = config.tolerances.kernel_bound;
    if !kernel.is_small(bound) {
        eprintln!(
            "warning: kernel integral {:e} is not below {bound}; the Volterra series may not contract",
            kernel.integral_norm
        );
    }
    out.meta(
        argv,
        Some(&config),
        json!({
            "part": part,
            "control": control,
            "final_time": sens.times.last(),
            "psi_final": vec_json(&sens.final_value(), dim),
            "kernel_integral_norm": kernel.integral_norm,
            "kernel_small": kernel.is_small(bound),
        }),
    )?;
    Ok(EXIT_OK)
}

fn reach(c: &Common, o: &Observed, h: f64, samples: usize, argv: &[String]) -> Outcome {
    let config = load(&c.config)?;
    let (obs, idx) = observed(o, &config)?;
    let session = Session::new(&config)?;
    let ind = independence_check(&session, &session.initial, obs, &idx, config.tolerances.sigma_tol)?;
    if !ind.independent {
        eprintln!(
            "warning: averaged projected forces are not independent (condition {:e})",
            ind.condition
        );
    }
    let atlas = reachability_map(&config, obs, &idx, h, samples, c.jobs)?;
    let out = OutDir::create(&c.out)?;
    out.write("atlas.csv", &atlas.to_csv())?;
    let halted = atlas.samples.iter().filter(|s| s.halted).count();
    out.meta(
        argv,
        Some(&config),
        json!({
            "observe": observable_json(obs),
            "controls": idx.iter().map(|k| k + 1).collect::<Vec<_>>(),
            "h": h,
            "horizon": atlas.horizon,
            "independent": ind.independent,
            "condition": num(ind.condition),
            "drift_endpoint": vec_json(&atlas.drift_endpoint, atlas.dim),
            "winding": atlas.winding,
            "degenerate": atlas.degenerate(),
            "simple": atlas.simple,
            "certified": atlas.certified(),
            "inradius": atlas.inradius,
            "signed_volume": atlas.signed_volume,
            "diameter": atlas.diameter,
            "halted_samples": halted,
        }),
    )?;
    Ok(EXIT_OK)
}

fn steer_cmd(
    c: &Common,
    o: &Observed,
    point: Option<Vec<f64>>,
    offset: Option<Vec<f64>>,
    h: f64,
    argv: &[String],
) -> Outcome {
    let config = load(&c.config)?;
    let (obs, idx) = observed(o, &config)?;
    let dim = config.dim();
    let to_vec = |v: &[f64]| -> Result<Vec3, Failure> {
        if v.len() != dim {
            return Err(Failure::Usage(format!("target has {} coordinates, expected {dim}", v.len())));
        }
        let mut z = Vec3::zeros();
        z.as_mut_slice()[..dim].copy_from_slice(v);
        Ok(z)
    };
    let base = swimmer_core::controllability::fixed_schedule(&config);
    let drift = obs.of(swimmer_core::simulator::simulate(&base)?.final_positions());
    let target = match (point, offset) {
        (Some(p), None) => to_vec(&p)?,
        (None, Some(d)) => drift + to_vec(&d)?,
        _ => return Err(Failure::Usage("give exactly one of --point or --offset".into())),
    };
    let tol = &config.tolerances;
    let jac = jacobian_matrix(&config, obs, &idx, tol.sigma_tol, c.jobs)?;
    let opts = SteeringOptions {
        tol: tol.steer_fraction * h * jac.spectral_norm(),
        max_iter: tol.steer_max_iter,
        max_control: h,
        sigma_tol: tol.sigma_tol,
    };
    let out = OutDir::create(&c.out)?;
    let result = steer_with_jacobian(&config, obs, &idx, &target, &opts, &jac);
    let summary = |converged: bool, extra: Value| {
        json!({
            "observe": observable_json(obs),
            "controls": idx.iter().map(|k| k + 1).collect::<Vec<_>>(),
            "target": vec_json(&target, dim),
            "drift_endpoint": vec_json(&drift, dim),
            "tolerance": opts.tol,
            "converged": converged,
            "details": extra,
        })
    };
    match result {
        Ok(r) => {
            let v = json!({
                "found_controls": r.controls.0,
                "endpoint": vec_json(&r.endpoint, dim),
                "iterations": r.iterations,
                "residual": r.residual,
                "iterates": r.history.iter().map(|it| json!({
                    "controls": it.controls.0,
                    "endpoint": vec_json(&it.endpoint, dim),
                    "residual": it.residual,
                })).collect::<Vec<_>>(),
            });
            let s = summary(true, v);
            out.write_json("steering.json", &s)?;
            out.meta(argv, Some(&config), s)?;
            Ok(EXIT_OK)
        }
        Err(Error::NoConvergence { best_residual, residuals }) => {
            let s = summary(false, json!({ "best_residual": best_residual, "residuals": residuals }));
            out.write_json("steering.json", &s)?;
            out.meta(argv, Some(&config), s)?;
            Err(Failure::Core(Error::NoConvergence { best_residual, residuals }))
        }
        Err(e) => Err(e.into()),
    }
}

fn projlab(p: &ProjlabArgs, argv: &[String]) -> Outcome {
    let dim = match p.family.as_str() {
        "disc" | "rectangle" => 2,
        "ball" => 3,
        other => return Err(Failure::Usage(format!("unknown family `{other}`"))),
    };
    if p.force.len() != dim {
        return Err(Failure::Usage(format!("--force needs {dim} components")));
    }
    if p.levels.is_empty() || p.levels.contains(&0) {
        return Err(Failure::Usage("--levels must be positive".into()));
    }
    let mut b = Vec3::zeros();
    b.as_mut_slice()[..dim].copy_from_slice(&p.force);
    let rungs = p
        .levels
        .iter()
        .map(|&level| {
            let (shape, cells, size) = match p.family.as_str() {
                "disc" => (BodyShape::Disc { r: 1.0 / level as f64 }, p.cells_per_radius * level, 1.0 / level as f64),
                "ball" => (BodyShape::Ball { r: 1.0 / level as f64 }, p.cells_per_radius * level, 1.0 / level as f64),
                _ => (
                    BodyShape::Rectangle {
                        p: p.p,
                        q: p.p / level as f64,
                    },
                    p.cells,
                    1.0 / level as f64,
                ),
            };
            let grid = DomainSpec::cube(dim, 1.0, cells, 1.0)?.grid();
            Ok(Rung::centered(shape, grid, size).with_jitter(p.jitter))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let sweep = asymptotic_sweep(&rungs, &b, p.reference)?;
    let out = OutDir::create(&p.out)?;
    out.write("sweep.csv", &sweep.to_csv())?;
    out.meta(
        argv,
        None,
        json!({
            "family": p.family,
            "force": p.force,
            "rows": sweep.rows.iter().map(|r| json!({
                "size": r.size,
                "cells": r.cells,
                "value": vec_json(&r.value, dim),
                "longitudinal": r.longitudinal,
                "transverse": r.transverse,
            })).collect::<Vec<_>>(),
            "limit": vec_json(&sweep.fit.limit, dim),
            "rate": sweep.fit.rate,
            "error_slope": sweep.fit.error_slope,
        }),
    )?;
    Ok(EXIT_OK)
}

fn validate(path: &std::path::Path) -> Outcome {
    let config = load(path)?;
    let session = Session::new(&config)?;
    let rep = margins(&session.initial, &session.swimmer, &session.grid);
    println!("valid: {} parts, {} controls", session.initial.parts(), config.num_controls());
    println!(
        "pair margin {:e} (parts {} and {})",
        rep.pair_margin,
        rep.closest_pair.0 + 1,
        rep.closest_pair.1 + 1
    );
    println!(
        "wall clearance {:e} (part {}, wall {})",
        rep.wall_clearance,
        rep.closest_wall.0 + 1,
        rep.closest_wall.1
    );
    Ok(EXIT_OK)
}
