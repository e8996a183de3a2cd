use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("code distance must be at least 2, got {0}")]
    DistanceTooSmall(usize),
    #[error("invalid lattice extents: {0}")]
    InvalidExtents(String),
    #[error("site ({x}, {y}, {z}) is not a qubit of this lattice")]
    UnknownSite { x: i32, y: i32, z: i32 },
    #[error("probability {name} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("no perfect matching exists for the given distance table")]
    NoPerfectMatching,
    #[error("instance too large for exhaustive enumeration: {size} > cap {cap}")]
    OracleCapExceeded { size: usize, cap: usize },
    #[error("odd node count {0}: a perfect matching needs an even number of nodes")]
    OddNodeCount(usize),
    #[error("under-determined fit: need at least {needed} points, got {got}")]
    UnderDetermined { needed: usize, got: usize },
    #[error("singular system in least-squares fit")]
    SingularFit,
    #[error("threshold estimation needs {0}")]
    InsufficientData(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
