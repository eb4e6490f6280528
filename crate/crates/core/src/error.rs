use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("symplectic vectors need even length, got {0}")]
    OddSymplecticLength(usize),

    #[error("a register needs at least one qubit")]
    EmptyRegister,
    #[error("site {site} out of range for {n} qubits")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("two-qubit gate needs distinct sites, got {0} twice")]
    SameSite(usize),
    #[error("tableau invariant violated: {0}")]
    InvalidTableau(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("regions overlap on site {0}")]
    OverlappingRegions(usize),
    #[error("quadripartition needs L divisible by 4, got L = {0}")]
    NotDivisibleByFour(usize),

    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),

    #[error("no samples to average")]
    EmptySample,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no sign change between any pair of curves")]
    NoCrossing,
    #[error("optimizer did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("ancilla entropy shows insufficient decay for L = {size}")]
    InsufficientDecay { size: usize },
    #[error("degenerate sizes: {0}")]
    DegenerateSizes(String),

    #[error("oracle failure: {0}")]
    Oracle(String),
}
