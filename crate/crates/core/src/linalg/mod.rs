//! Dense eigenvalue solvers.

pub mod banded;
pub mod complex_eig;
pub mod real_eig;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("QR iteration did not converge for eigenvalue {index} after {iterations} sweeps")]
    NoConvergence { index: usize, iterations: usize },
}
