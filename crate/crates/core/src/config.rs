//! Scenario files.
//!
//! A scenario is TOML with the sections `[domain]`, `[swimmer]`,
//! `[controls]`, `[time]`, `[output]` and `[tolerances]`. Parts and controls
//! are numbered from 1 in files and from 0 in the library.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BodyShape, ControlVector, DomainSpec, Swimmer, SwimmerState};
use crate::poisson::PoissonMethod;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub domain: DomainSection,
    pub swimmer: SwimmerSection,
    #[serde(default)]
    pub controls: ControlsSection,
    pub time: TimeSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
    pub nu: f64,
    #[serde(default)]
    pub poisson: PoissonMethod,
    #[serde(default)]
    pub initial_flow: InitialFlow,
}

/// Fluid velocity at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialFlow {
    #[default]
    Rest,
    /// Single cell-filling vortex with stream function
    /// `A sin²(πx/L₁) sin²(πy/L₂)` about the third axis.
    Eddy { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwimmerSection {
    /// `rectangle`, `disc`, `box` or `ball`.
    pub shape: String,
    /// `[p, q]`, `[r]`, `[p, q, s]` or `[r]`: half-extents or radius.
    pub params: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    /// Per part: exchange the first two half-extents.
    #[serde(default)]
    pub swap_axes: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ControlsSection {
    /// Constant controls `v_1..v_{2n-3}`; empty means all zero.
    #[serde(default)]
    pub values: Vec<f64>,
    /// Piecewise-constant schedule; overrides `values` from each start time.
    #[serde(default)]
    pub segments: Vec<ControlSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSegment {
    pub start: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Rk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stepping {
    /// Half the stability bound, re-evaluated each step, capped by `max_dt`.
    #[default]
    Adaptive,
    /// Always `max_dt` (the last step is shortened to land on the horizon);
    /// every step is checked against the stability bound.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub max_dt: f64,
    #[serde(default)]
    pub stepping: Stepping,
    #[serde(default)]
    pub integrator: Integrator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Write a velocity snapshot every this many steps; 0 disables.
    #[serde(default)]
    pub field_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub div_tol: f64,
    pub poisson_rtol: f64,
    pub sigma_tol: f64,
    /// Steering stops at this fraction of the control radius times the
    /// Jacobian norm.
    pub steer_fraction: f64,
    pub steer_max_iter: usize,
    pub kernel_bound: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            div_tol: 1e-10,
            poisson_rtol: 1e-12,
            sigma_tol: 1e-3,
            steer_fraction: 0.02,
            steer_max_iter: 10,
            kernel_bound: 0.25,
        }
    }
}

/// Control values as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    base: ControlVector,
    segments: Vec<(f64, ControlVector)>,
}

impl ControlSchedule {
    pub fn constant(v: ControlVector) -> Self {
        Self {
            base: v,
            segments: Vec::new(),
        }
    }

    pub fn at(&self, t: f64) -> &ControlVector {
        self.segments
            .iter()
            .rev()
            .find(|(start, _)| *start <= t)
            .map_or(&self.base, |(_, v)| v)
    }
}

/// 1-based line of `key` inside `[section]`, or of the section header.
pub fn locate_key(src: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = 1;
    for (n, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                header = n + 1;
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return n + 1;
                }
            }
        }
    }
    header
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn parse_error(src: &str, e: toml::de::Error) -> Error {
    let message = e.message().to_string();
    let line = e.span().map_or(1, |s| line_of_offset(src, s.start));
    let key = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .or_else(|| {
            let text = src.lines().nth(line - 1)?;
            text.split_once('=').map(|(k, _)| k.trim().to_string())
        })
        .unwrap_or_default();
    Error::Config { key, line, message }
}

impl ScenarioConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| parse_error(src, e))?;
        cfg.check(src)?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check(&self, src: &str) -> Result<()> {
        let fail = |section: &str, key: &str, message: String| Error::Config {
            key: format!("{section}.{key}"),
            line: locate_key(src, section, key),
            message,
        };
        let dim = self.domain.extent.len();
        self.domain()
            .map_err(|e| fail("domain", if self.domain.nu > 0.0 { "cells" } else { "nu" }, e.to_string()))?;
        if let InitialFlow::Eddy { amplitude } = self.domain.initial_flow {
            if !amplitude.is_finite() {
                return Err(fail("domain", "initial_flow", "amplitude must be finite".into()));
            }
        }
        let shape = self.shape().map_err(|e| fail("swimmer", "params", e.to_string()))?;
        if shape.dim() != dim {
            return Err(fail(
                "swimmer",
                "shape",
                format!("{}-D shape in a {dim}-D domain", shape.dim()),
            ));
        }
        let n = self.swimmer.centers.len();
        if n < 3 {
            return Err(fail("swimmer", "centers", format!("need at least 3 parts, got {n}")));
        }
        if let Some(c) = self.swimmer.centers.iter().find(|c| c.len() != dim) {
            return Err(fail(
                "swimmer",
                "centers",
                format!("center {c:?} has {} coordinates, expected {dim}", c.len()),
            ));
        }
        if !self.swimmer.swap_axes.is_empty() && self.swimmer.swap_axes.len() != n {
            return Err(fail(
                "swimmer",
                "swap_axes",
                format!("{} entries for {n} parts", self.swimmer.swap_axes.len()),
            ));
        }
        let m = 2 * n - 3;
        let check_len = |v: &[f64], key: &str| {
            if !v.is_empty() && v.len() != m {
                Err(fail("controls", key, format!("{} values, expected {m}", v.len())))
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(fail("controls", key, "values must be finite".into()))
            } else {
                Ok(())
            }
        };
        check_len(&self.controls.values, "values")?;
        let mut last = f64::NEG_INFINITY;
        for seg in &self.controls.segments {
            check_len(&seg.values, "values")?;
            if !(seg.start > last) {
                return Err(fail("controls", "start", "segment starts must increase".into()));
            }
            last = seg.start;
        }
        let t = &self.time;
        if !(t.horizon > 0.0 && t.horizon.is_finite()) {
            return Err(fail("time", "horizon", format!("must be positive, got {}", t.horizon)));
        }
        if !(t.max_dt > 0.0 && t.max_dt <= t.horizon) {
            return Err(fail("time", "max_dt", format!("must lie in (0, horizon], got {}", t.max_dt)));
        }
        let tol = &self.tolerances;
        for (key, v) in [
            ("div_tol", tol.div_tol),
            ("poisson_rtol", tol.poisson_rtol),
            ("sigma_tol", tol.sigma_tol),
            ("steer_fraction", tol.steer_fraction),
            ("kernel_bound", tol.kernel_bound),
        ] {
            if !(v > 0.0) {
                return Err(fail("tolerances", key, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.domain.extent.len()
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.domain.extent.clone(), self.domain.cells.clone(), self.domain.nu)
    }

    pub fn shape(&self) -> Result<BodyShape> {
        let p = &self.swimmer.params;
        let want = |k: usize| {
            if p.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidShape(format!(
                    "{} takes {k} parameters, got {}",
                    self.swimmer.shape,
                    p.len()
                )))
            }
        };
        let shape = match self.swimmer.shape.as_str() {
            "rectangle" => want(2).map(|_| BodyShape::Rectangle { p: p[0], q: p[1] }),
            "disc" => want(1).map(|_| BodyShape::Disc { r: p[0] }),
            "box" => want(3).map(|_| BodyShape::Box { p: p[0], q: p[1], s: p[2] }),
            "ball" => want(1).map(|_| BodyShape::Ball { r: p[0] }),
            other => Err(Error::InvalidShape(format!("unknown shape `{other}`"))),
        }?;
        shape.validate()?;
        Ok(shape)
    }

    pub fn swimmer(&self) -> Result<Swimmer> {
        let n = self.swimmer.centers.len();
        let mut sw = Swimmer::uniform(self.shape()?, n);
        if !self.swimmer.swap_axes.is_empty() {
            sw.swap_axes = self.swimmer.swap_axes.clone();
        }
        Ok(sw)
    }

    pub fn initial_state(&self) -> Result<SwimmerState> {
        SwimmerState::new(
            self.swimmer
                .centers
                .iter()
                .map(|c| {
                    let mut z = Vec3::zeros();
                    for (a, x) in c.iter().enumerate().take(3) {
                        z[a] = *x;
                    }
                    z
                })
                .collect(),
        )
    }

    pub fn num_controls(&self) -> usize {
        2 * self.swimmer.centers.len() - 3
    }

    pub fn schedule(&self) -> ControlSchedule {
        let m = self.num_controls();
        let vec = |v: &[f64]| {
            if v.is_empty() {
                ControlVector::zeros(m)
            } else {
                ControlVector(v.to_vec())
            }
        };
        ControlSchedule {
            base: vec(&self.controls.values),
            segments: self
                .controls
                .segments
                .iter()
                .map(|s| (s.start, vec(&s.values)))
                .collect(),
        }
    }

    /// Copy with constant controls `v`.
    pub fn with_constant_controls(&self, v: &ControlVector) -> Self {
        let mut c = self.clone();
        c.controls = ControlsSection {
            values: v.0.clone(),
            segments: Vec::new(),
        };
        c
    }
}
