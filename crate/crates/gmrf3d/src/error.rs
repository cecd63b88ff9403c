//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by grid construction, model evaluation, sparse numerics,
/// inference, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A cell index outside `{0..M-1} x {0..N-1} x {0..P-1}`.
    #[error("cell index ({i}, {j}, {k}) outside grid of size {m} x {n} x {p}")]
    CellOutOfRange {
        i: i64,
        j: i64,
        k: i64,
        m: usize,
        n: usize,
        p: usize,
    },

    /// A point outside the closed domain.
    #[error("point ({0}, {1}, {2}) lies outside the domain")]
    PointOutsideDomain(f64, f64, f64),

    /// Invalid grid geometry (non-positive extent, too few cells, ...).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Invalid spline setup (knot count, basis size, ...).
    #[error("invalid spline basis: {0}")]
    InvalidBasis(String),

    /// Least-squares projection onto the spline basis is rank deficient.
    #[error("rank-deficient spline design matrix (deficient axis: {axis})")]
    RankDeficient { axis: String },

    /// `v = 0` leaves no plane in which to build the second anisotropy vector.
    #[error("cannot build secondary anisotropy vector: v = 0 but (rho1, rho2) = ({rho1}, {rho2}) != 0")]
    DegenerateAnisotropy { rho1: f64, rho2: f64 },

    /// A parameter vector has the wrong length or an invalid entry.
    #[error("invalid parameters: {0}")]
    InvalidParameter(String),

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    /// Shape mismatch between operands.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A dataset row failed validation.
    #[error("invalid observation data at row {row}: {message}")]
    InvalidData { row: usize, message: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed CSV input.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed JSON input.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A binary field file whose header or payload does not match the format.
    #[error("invalid field file: {0}")]
    InvalidFieldFile(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
