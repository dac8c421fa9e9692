use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which validity condition a configuration failed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("parts {first} and {second} overlap (pair margin {margin:e})")]
    Overlap {
        first: usize,
        second: usize,
        margin: f64,
    },
    #[error("part {part} touches the {wall} wall (clearance {clearance:e})")]
    Boundary {
        part: usize,
        wall: Wall,
        clearance: f64,
    },
}

/// One face of the box domain, e.g. `x-` is the plane `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wall {
    pub axis: usize,
    pub upper: bool,
}

impl std::fmt::Display for Wall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = ["x", "y", "z"][self.axis.min(2)];
        write!(f, "{}{}", name, if self.upper { '+' } else { '-' })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape centered at {center:?} is not strictly inside the domain")]
    ShapeOutsideDomain { center: [f64; 3] },
    #[error("overlap violation: {0}")]
    OverlapViolation(Violation),
    #[error("boundary violation: {0}")]
    BoundaryViolation(Violation),
    #[error("degenerate shift: |h| = {0:e} is below the resolvable threshold")]
    DegenerateShift(f64),
    #[error("degenerate geometry around part {part}: {detail}")]
    DegenerateGeometry { part: usize, detail: String },
    #[error("index {index} out of range: {detail}")]
    IndexOutOfRange { index: usize, detail: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Poisson solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    PoissonDivergence { residual: f64, iterations: usize },
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("non-finite value detected at t = {time}")]
    NanDetected { time: f64 },
    #[error("configuration lost validity at t = {time}: {cause}")]
    ValidityLost { time: f64, cause: Violation },
    #[error("baseline data missing: {0}")]
    MissingBaselineData(String),
    #[error("time grids do not match: {0}")]
    GridMismatch(String),
    #[error("sensitivity for control {0} is missing")]
    MissingSensitivity(usize),
    #[error("Jacobian is singular (condition number {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("steering did not converge; best residual {best_residual:e}")]
    NoConvergence {
        best_residual: f64,
        residuals: Vec<f64>,
    },
    #[error("separation violated: distance {distance:e} < required {required:e}")]
    SeparationViolated { distance: f64, required: f64 },
    #[error("config error at line {line}: key `{key}`: {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps a validity violation in the matching error variant.
    pub fn from_violation(v: Violation) -> Self {
        match v {
            Violation::Overlap { .. } => Error::OverlapViolation(v),
            Violation::Boundary { .. } => Error::BoundaryViolation(v),
        }
    }
}
