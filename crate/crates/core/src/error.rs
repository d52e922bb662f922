use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("frame {frame}: atom count mismatch (expected {expected}, found {found})")]
    AtomCountMismatch {
        frame: usize,
        expected: usize,
        found: usize,
    },

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid grid parameters: {0}")]
    GridParams(String),

    #[error(
        "q = ({:.6}, {:.6}, {:.6}) Å⁻¹ is off the reciprocal lattice: every component must be an integer multiple of 2π/L = {spacing:.6} Å⁻¹",
        q[0], q[1], q[2]
    )]
    OffLattice { q: [f64; 3], spacing: f64 },

    #[error("unknown species {name:?}; registered species: {registered}")]
    UnknownSpecies { name: String, registered: String },

    #[error("empty q ring at q = {q} ± {half_width} Å⁻¹ (band narrower than the lattice spacing {spacing:.5} Å⁻¹)")]
    EmptyRing { q: f64, half_width: f64, spacing: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("trajectory has no unwrapped positions; mean-square displacement needs unwrapped data (generator output, xu columns or image flags)")]
    NeedsUnwrapped,

    #[error("imaginary residual of the ring-averaged F(q,τ) is {residual:.3e}, above 1e-3·F(0) = {limit:.3e}")]
    ImaginaryResidual { residual: f64, limit: f64 },

    #[error("binary format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
