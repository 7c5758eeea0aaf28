use faer::{Mat, Side};

use crate::error::{invalid, Result};
use crate::operators::elliptic::{assemble_elliptic, CoefficientField, Tridiagonal};
use crate::operators::grid::IntervalGrid;

/// Eigenpairs of a discretized elliptic operator, eigenvalues ascending.
///
/// Columns of `vectors` are orthonormal in `⟨u, v⟩ = h Σ u_i v_i`, so the
/// operator is `h Φ diag(λ) Φᵀ` and its kernel matrix with respect to the
/// weighted inner product is `Φ diag(λ) Φᵀ`.
#[derive(Clone, Debug)]
pub struct OperatorEigensystem {
    pub grid: IntervalGrid,
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl OperatorEigensystem {
    /// Eigensystem of `assemble_elliptic(a, grid)`; closed form for constant `a`.
    pub fn new(a: &CoefficientField, grid: IntervalGrid) -> Result<Self> {
        match *a {
            CoefficientField::Constant { value } => {
                a.validate()?;
                let mut e = Self::laplacian(grid);
                for v in &mut e.values {
                    *v *= value;
                }
                Ok(e)
            }
            _ => Self::from_tridiagonal(&assemble_elliptic(a, grid)?, grid),
        }
    }

    /// Dirichlet Laplacian: `λ_k = (4/h²) sin²(kπh/2)`, `φ_k(x) = √2 sin(kπx)`.
    pub fn laplacian(grid: IntervalGrid) -> Self {
        let n = grid.n_interior;
        let h = grid.h();
        let values = (1..=n)
            .map(|k| {
                let s = (k as f64 * std::f64::consts::PI * h / 2.0).sin();
                4.0 / (h * h) * s * s
            })
            .collect();
        let vectors = Mat::from_fn(n, n, |i, k| {
            let arg = ((i + 1) * (k + 1)) % (2 * (n + 1));
            std::f64::consts::SQRT_2 * (std::f64::consts::PI * arg as f64 * h).sin()
        });
        Self { grid, values, vectors }
    }

    pub fn from_tridiagonal(t: &Tridiagonal, grid: IntervalGrid) -> Result<Self> {
        if t.len() != grid.n_interior {
            return invalid("operator size does not match the grid");
        }
        let evd = t
            .to_dense()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| crate::Error::InvalidInput(format!("eigendecomposition failed: {e:?}")))?;
        let values: Vec<f64> = (0..t.len()).map(|k| evd.S()[k]).collect();
        if let Some(k) = values.iter().position(|&v| !(v > 0.0)) {
            return Err(crate::Error::NotPositiveDefinite { pivot: k });
        }
        let scale = 1.0 / grid.h().sqrt();
        let u = evd.U();
        let vectors = Mat::from_fn(t.len(), t.len(), |i, k| u[(i, k)] * scale);
        Ok(Self { grid, values, vectors })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Φ diag(f(λ))`, the square-root factor of the kernel matrix `Φ f(λ)² Φᵀ`.
    pub fn scaled_vectors(&self, f: impl Fn(f64) -> f64) -> Mat<f64> {
        let w: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        Mat::from_fn(self.len(), self.len(), |i, k| self.vectors[(i, k)] * w[k])
    }

    /// Operator matrix `h Φ diag(λ^p) Φᵀ`.
    pub fn power_matrix(&self, p: f64) -> Mat<f64> {
        let f = self.scaled_vectors(|v| v.powf(p));
        let h = self.grid.h();
        let prod = &f * self.vectors.transpose();
        Mat::from_fn(self.len(), self.len(), |i, j| h * prod[(i, j)])
    }

    /// `(h Φ diag(λ^p) Φᵀ) x`.
    pub fn apply_power(&self, p: f64, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let h = self.grid.h();
        let mut coef = vec![0.0; n];
        for (k, c) in coef.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, xi) in x.iter().enumerate() {
                acc += self.vectors[(i, k)] * xi;
            }
            *c = h * acc * self.values[k].powf(p);
        }
        (0..n).map(|i| (0..n).map(|k| self.vectors[(i, k)] * coef[k]).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frob(m: &Mat<f64>) -> f64 {
        let mut s = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        s.sqrt()
    }

    #[test]
    fn laplacian_closed_form_matches_numerical() {
        let g = IntervalGrid::new(31);
        let exact = OperatorEigensystem::laplacian(g);
        let num = OperatorEigensystem::from_tridiagonal(
            &assemble_elliptic(&CoefficientField::constant(1.0).unwrap(), g).unwrap(),
            g,
        )
        .unwrap();
        for (a, b) in exact.values.iter().zip(&num.values) {
            assert!((a - b).abs() < 1e-10 * a);
        }
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let g = IntervalGrid::new(40);
        let a = CoefficientField::step(0.37).unwrap();
        let t = assemble_elliptic(&a, g).unwrap();
        let e = OperatorEigensystem::from_tridiagonal(&t, g).unwrap();
        let rec = e.power_matrix(1.0);
        let diff = &rec - t.to_dense();
        assert!(frob(&diff) < 1e-8 * frob(&t.to_dense()));
        let gram = e.vectors.transpose() * &e.vectors;
        for i in 0..g.len() {
            for j in 0..g.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.h() * gram[(i, j)] - want).abs() < 1e-10);
            }
        }
    }
}
