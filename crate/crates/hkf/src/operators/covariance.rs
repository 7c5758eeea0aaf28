use faer::{Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::operators::elliptic::{assemble_elliptic, CoefficientField};
use crate::operators::eigen::OperatorEigensystem;
use crate::operators::grid::IntervalGrid;
use crate::torus::sampling::instance_rng;
use crate::torus::GridField;

/// Kernel matrix `K = F Fᵀ` on an interval grid, held through a square-root
/// factor `F` (n × r). `K` represents a covariance operator relative to the
/// weighted inner product `h Σ u_i v_i`, i.e. `K = C / h` for the operator
/// matrix `C`.
#[derive(Clone, Debug)]
pub struct MatrixCovariance {
    pub grid: IntervalGrid,
    pub factor: Mat<f64>,
}

impl MatrixCovariance {
    pub fn from_factor(grid: IntervalGrid, factor: Mat<f64>) -> Result<Self> {
        if factor.nrows() != grid.n_interior {
            return invalid("factor rows must match the grid size");
        }
        Ok(Self { grid, factor })
    }

    /// From a dense symmetric positive definite matrix.
    pub fn from_matrix(grid: IntervalGrid, m: &Mat<f64>) -> Result<Self> {
        if m.nrows() != grid.n_interior || m.ncols() != grid.n_interior {
            return invalid("matrix size must match the grid size");
        }
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::InvalidInput(format!("eigendecomposition failed: {e:?}")))?;
        let n = m.nrows();
        let s: Vec<f64> = (0..n).map(|k| evd.S()[k]).collect();
        if let Some(k) = s.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::NotPositiveDefinite { pivot: k });
        }
        let u = evd.U();
        let factor = Mat::from_fn(n, n, |i, k| u[(i, k)] * s[k].sqrt());
        Ok(Self { grid, factor })
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.nrows() == 0
    }

    pub fn matrix(&self) -> Mat<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn scaled(&self, c: f64) -> MatrixCovariance {
        MatrixCovariance { grid: self.grid, factor: Mat::from_fn(self.factor.nrows(), self.factor.ncols(), |i, j| c * self.factor[(i, j)]) }
    }

    /// Rows `idx` of the factor.
    pub fn factor_rows(&self, idx: &[usize]) -> Mat<f64> {
        Mat::from_fn(idx.len(), self.factor.ncols(), |a, j| self.factor[(idx[a], j)])
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (0..self.factor.ncols()).map(|k| self.factor[(i, k)] * self.factor[(j, k)]).sum()
    }
}

/// Kernel matrix of `A^{-s}`: factor `Φ diag(λ^{-s/2})`.
pub fn fractional_covariance(eig: &OperatorEigensystem, s: f64) -> MatrixCovariance {
    MatrixCovariance { grid: eig.grid, factor: eig.scaled_vectors(|v| v.powf(-s / 2.0)) }
}

/// Kernel matrix of `A_θ^{-1} L^{-s} A_θ^{-1}`, where `A_θ` is the step
/// conductivity operator with breakpoint `θ` and `L` the Dirichlet Laplacian
/// whose eigensystem is `laplacian`.
pub fn composite_covariance(theta: f64, s: f64, laplacian: &OperatorEigensystem) -> Result<MatrixCovariance> {
    let grid = laplacian.grid;
    let a = assemble_elliptic(&CoefficientField::step(theta)?, grid)?;
    let inner = laplacian.scaled_vectors(|v| v.powf(-s / 2.0));
    let n = grid.n_interior;
    let mut factor = Mat::<f64>::zeros(n, n);
    let mut col = vec![0.0; n];
    for k in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = inner[(i, k)];
        }
        for (i, v) in a.solve(&col).into_iter().enumerate() {
            factor[(i, k)] = v;
        }
    }
    Ok(MatrixCovariance { grid, factor })
}

/// `F z` with `z` standard normal from the instance stream.
pub fn sample_matrix_gaussian(cov: &MatrixCovariance, seed: u64, instance: u64) -> Result<GridField> {
    let mut rng = instance_rng(seed, instance);
    let z: Vec<f64> = (0..cov.factor.ncols()).map(|_| rng.sample(StandardNormal)).collect();
    let values = (0..cov.len())
        .map(|i| (0..z.len()).map(|k| cov.factor[(i, k)] * z[k]).sum())
        .collect();
    GridField::interval(cov.grid, values)
}

/// Discrete solution of `(-Δ)^s u = δ(· - y₀)`: `L^{-s} e_{i₀} / h`.
pub fn green_truth(s: f64, source: f64, laplacian: &OperatorEigensystem) -> Result<GridField> {
    let grid = laplacian.grid;
    let i0 = grid.index_of(source)?;
    let n = grid.n_interior;
    let coef: Vec<f64> = (0..n).map(|k| laplacian.vectors[(i0, k)] * laplacian.values[k].powf(-s)).collect();
    let values = (0..n)
        .map(|i| crate::numeric::compensated_sum((0..n).map(|k| laplacian.vectors[(i, k)] * coef[k])))
        .collect();
    GridField::interval(grid, values)
}
