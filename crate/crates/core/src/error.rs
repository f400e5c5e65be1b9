use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid block structure: {0}")]
    InvalidBlocks(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("root finder did not converge after {iterations} iterations (max residual {residual:e})")]
    RootsNotConverged {
        iterations: usize,
        residual: f64,
        partial: Vec<Complex64>,
    },

    #[error("map does not fix the origin (|F(0)| = {0:e})")]
    NotFixingOrigin(f64),

    #[error("block {block}: inferred degree {degree} < 2, the fixed point is not superattracting")]
    NotSuperattracting { block: usize, degree: u32 },

    #[error("block {block}: component vanishes identically on its own block, degree is not determined")]
    UndeterminedDegree { block: usize },

    #[error("block {block}: homogeneous part is degenerate (zero at {witness:?})")]
    Degenerate { block: usize, witness: Vec<Complex64> },

    #[error("orbit left the working ball after {iterations} iterations")]
    Escaped { iterations: usize },

    #[error("point is not in the basin: {0}")]
    NotInBasin(String),

    #[error("ambiguous logarithm branch at iterate {iterate}: argument {arg:.3} rad; retry closer to the fixed point")]
    BranchAmbiguity { iterate: usize, arg: f64 },

    #[error("input is not in the zero-average space (|sum| = {0:e})")]
    NonZeroAverage(f64),

    #[error("point is not fixed (residual {0:e})")]
    NotFixed(f64),

    #[error("point lies on a sub-stratum: {0}")]
    OnSubstratum(String),

    #[error("critical proximity: normalized |det DF| = {ratio:e} below floor {floor:e}")]
    CriticalProximity { ratio: f64, floor: f64 },

    #[error("flow left the domain ball of radius {radius} (norm {norm:e})")]
    DomainExit { radius: f64, norm: f64 },

    #[error("step size collapsed to {0:e}")]
    StepSizeCollapse(f64),

    #[error("forward-time flows are not supported (t = {0})")]
    ForwardFlow(f64),

    #[error("field is not asymptotically radial here (J = {0})")]
    NotAsymptoticallyRadial(f64),

    #[error("linearization did not stabilize (last increment {0:e})")]
    NonStabilization(f64),

    #[error("residue sum {0:e} exceeds tolerance; contour quadrature failed")]
    ResidueSum(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
