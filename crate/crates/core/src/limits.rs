//! Resource guards on qubit counts and matrix dimensions.

use crate::error::{Error, Result};

/// Environment variable overriding the default qubit cap.
pub const QUBIT_CAP_ENV: &str = "OBSLEARN_QUBIT_CAP";

pub const DEFAULT_QUBIT_CAP: usize = 20;

/// Largest dimension handled by dense eigendecomposition.
pub const DENSE_DIM_LIMIT: usize = 1 << 14;

/// Largest dimension of a sparse operator accepted by the builders.
pub const SPARSE_DIM_LIMIT: usize = 1 << 20;

/// Current qubit cap, honouring [`QUBIT_CAP_ENV`].
pub fn qubit_cap() -> usize {
    std::env::var(QUBIT_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_QUBIT_CAP)
}

pub fn check_qubits(n: usize, what: &str) -> Result<()> {
    let cap = qubit_cap();
    if n > cap {
        return Err(Error::ResourceLimit(format!(
            "{what} needs {n} qubits, cap is {cap} (set {QUBIT_CAP_ENV} to override)"
        )));
    }
    Ok(())
}

pub fn check_sparse_dim(dim: usize, what: &str) -> Result<()> {
    let cap = SPARSE_DIM_LIMIT.max(1usize << qubit_cap().min(40));
    if dim > cap {
        return Err(Error::ResourceLimit(format!(
            "{what} has dimension {dim}, sparse cap is {cap}"
        )));
    }
    Ok(())
}
