//! Finite-difference elliptic operators on `[0, 1]` with homogeneous
//! Dirichlet ends, fractional powers and composite covariances.

pub mod covariance;
pub mod eigen;
pub mod elliptic;
pub mod grid;
pub mod precision;

pub use covariance::{
    composite_covariance, fractional_covariance, green_truth, sample_matrix_gaussian, MatrixCovariance,
};
pub use eigen::OperatorEigensystem;
pub use elliptic::{assemble_elliptic, CoefficientField, Tridiagonal};
pub use grid::IntervalGrid;
pub use precision::{CompositePrecision, MarkovGram};
