use thiserror::Error;

/// Which of the two directional solves failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Marching outward from the source set.
    FromSource,
    /// Marching outward from the destination set.
    ToDestination,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::FromSource => f.write_str("from source"),
            Direction::ToDestination => f.write_str("to destination"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("node index {index:?} out of range for grid with counts {counts:?}")]
    IndexOutOfRange { index: Vec<usize>, counts: Vec<usize> },
    #[error("flat index {0} out of range")]
    FlatIndexOutOfRange(usize),
    #[error("node {0} is not a member of the restricted grid")]
    NotAMember(usize),
    #[error("start set is empty")]
    EmptyStart,
    #[error("end set unreachable ({direction})")]
    Unreachable { direction: Direction },
    #[error("level {level}: end set unreachable ({direction}) after widening the threshold")]
    LevelUnreachable { level: usize, direction: Direction },
    #[error("no node accepted in both directions")]
    EmptyIntersection,
    #[error("active set is empty")]
    EmptyActive,
    #[error("value {0} outside the admissible range")]
    OutOfRange(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("path descent stuck on a plateau at node {0}")]
    Plateau(usize),
    #[error("value iteration did not converge after {0} sweeps")]
    NonConvergence(usize),
    #[error("time budget exceeded")]
    BudgetExceeded,
}

pub type Result<T> = std::result::Result<T, Error>;
