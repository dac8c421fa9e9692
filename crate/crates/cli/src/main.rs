//! `swimlab`: run swimmer experiments from scenario files.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "swimlab", version, about = "Swimmer in a Navier-Stokes fluid: simulation and controllability experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario; writes trajectory.csv and field snapshots.
    Simulate(Common),
    /// Predicted against simulated displacements under small constant controls.
    Micromotion {
        #[command(flatten)]
        common: Common,
        /// Control magnitude.
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        /// Control direction `a_1,...`; normalized. Defaults to equal weights.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
    },
    /// Derivative of one part position with respect to one control.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// Part number, from 1.
        #[arg(long)]
        part: usize,
        /// Control number, from 1.
        #[arg(long)]
        control: usize,
    },
    /// Endpoint map of a ring (or sphere) of constant controls.
    Reach {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Observed,
        /// Control radius.
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        /// Ring samples in 2-D (3-D uses 42 icosphere directions).
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
    /// Find constant controls that bring the observed point to a target.
    Steer {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Observed,
        /// Absolute target point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "offset")]
        point: Option<Vec<f64>>,
        /// Target relative to the zero-control endpoint.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        offset: Option<Vec<f64>>,
        /// Largest admissible control norm; also scales the stopping tolerance.
        #[arg(long, default_value_t = 1.0)]
        h: f64,
    },
    /// Averaged projections of a uniform force on shrinking bodies.
    Projlab(ProjlabArgs),
    /// Check a scenario and print its clearances.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args, Clone)]
pub struct Observed {
    /// `com` for the center of mass, or a part number from 1.
    #[arg(long, default_value = "com")]
    pub observe: String,
    /// Active controls, numbered from 1 (two in 2-D, three in 3-D).
    #[arg(long, value_delimiter = ',', required = true)]
    pub controls: Vec<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct ProjlabArgs {
    /// `disc`, `ball` or `rectangle`.
    #[arg(long)]
    pub family: String,
    /// Force vector `b`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,0")]
    pub force: Vec<f64>,
    /// Ladder levels: radius `1/level` for discs and balls, `q = p/level`
    /// for rectangles.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    pub levels: Vec<usize>,
    /// Grid cells per radius for discs and balls.
    #[arg(long, default_value_t = 4)]
    pub cells_per_radius: usize,
    /// Fixed grid for rectangles.
    #[arg(long, default_value_t = 256)]
    pub cells: usize,
    /// Rectangle half-length.
    #[arg(long, default_value_t = 0.0625)]
    pub p: f64,
    /// Sub-cell placements per axis averaged over.
    #[arg(long, default_value_t = 4)]
    pub jitter: usize,
    /// Expected limit of the longitudinal ratio, for the error slope.
    #[arg(long)]
    pub reference: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    ExitCode::from(commands::run(&argv))
}
