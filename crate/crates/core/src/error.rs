use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice {nx}x{ny}: both extents must be even and positive")]
    Geometry { nx: usize, ny: usize },
    #[error("size guard exceeded: {0}")]
    Guard(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{family} constraint violated: {location}")]
    Constraint { family: &'static str, location: String },
    #[error("sector id has {found} bits, expected {expected}")]
    SectorLength { expected: usize, found: usize },
    #[error("rapidity pairing failed: {0}")]
    Pairing(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    Param(String),
}

pub type Result<T> = std::result::Result<T, Error>;
