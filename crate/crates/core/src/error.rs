use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Stark ratio chi = {0} lies outside [-1, 1]")]
    ChiOutOfRange(f64),
    #[error("frequencies must be positive (omega = {omega}, Omega = {splitting})")]
    NonPositiveFrequency { omega: f64, splitting: f64 },
    #[error("parameter {name} is not finite")]
    NonFinite { name: &'static str },
    #[error("Fock truncation must keep at least one excitation (n_max = {0})")]
    InvalidTruncation(usize),
    #[error("Hamiltonian does not commute with parity: max|HP - PH| = {violation:e}")]
    CommutatorViolation { violation: f64 },
    #[error("eigensolver residual {residual:e} exceeds bound {bound:e}")]
    ConvergenceFailure { residual: f64, bound: f64 },
    #[error("ground state not converged below the truncation cap n_max = {cap}")]
    TruncationCeiling { cap: usize },
    #[error("state is not a parity eigenstate: <P> = {0}")]
    ImpureParity(f64),
    #[error("wavefunction grid too small: endpoint amplitude ratio {ratio:e}")]
    GridTooSmall { ratio: f64 },
    #[error("wavefunction peak sits at the grid edge")]
    DegeneratePeak,
    #[error("energy decomposition total {reconstructed} misses E0 = {expected}")]
    ReconstructionMismatch { reconstructed: f64, expected: f64 },
    #[error("outside the domain of validity: {0}")]
    Domain(String),
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
