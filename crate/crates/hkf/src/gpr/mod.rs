//! Gram-matrix Gaussian process regression: factorization, conditional
//! means and the finite-sample EB and KF losses.

use faer::linalg::cholesky::llt::factor::LltError;
use faer::linalg::triangular_solve;
use faer::{Mat, Par, Side};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operators::{CompositePrecision, IntervalGrid, MarkovGram, MatrixCovariance};
use crate::torus::SpectralKernel;

/// Diagonal ratio of the triangular factor above which a warning is logged.
pub const CONDITION_WARNING: f64 = 1e14;

/// A covariance model that can be evaluated on finite point sets.
#[derive(Clone, Debug)]
pub enum KernelModel {
    /// Stationary spectral kernel on the torus.
    Torus(SpectralKernel),
    /// Kernel matrix on an interval grid held through a square-root factor.
    Matrix(MatrixCovariance),
    /// Gauss–Markov composite kernel evaluated through its banded precision.
    Markov(CompositePrecision),
}

impl KernelModel {
    pub fn dim(&self) -> usize {
        match self {
            KernelModel::Torus(k) => k.d,
            _ => 1,
        }
    }

    fn grid(&self) -> Option<IntervalGrid> {
        match self {
            KernelModel::Torus(_) => None,
            KernelModel::Matrix(c) => Some(c.grid),
            KernelModel::Markov(p) => Some(p.grid),
        }
    }

    /// Grid indices of interval points.
    pub fn grid_indices(&self, points: &[Vec<f64>]) -> Result<Vec<usize>> {
        let grid = self.grid().ok_or_else(|| Error::InvalidInput("torus kernels have no grid".into()))?;
        points
            .iter()
            .map(|p| {
                if p.len() != 1 {
                    return invalid("interval points are one-dimensional");
                }
                grid.index_of(p[0]).map_err(|_| Error::InvalidInput(format!("{} is not a grid point", p[0])))
            })
            .collect()
    }

    /// Dense cross-covariance `K(a_i, b_j)`.
    pub fn cross(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Mat<f64>> {
        match self {
            KernelModel::Torus(k) => k.cross(a, b),
            KernelModel::Matrix(c) => {
                let fa = c.factor_rows(&self.grid_indices(a)?);
                let fb = c.factor_rows(&self.grid_indices(b)?);
                Ok(&fa * fb.transpose())
            }
            KernelModel::Markov(_) => invalid("dense cross-covariances are not formed for precision models"),
        }
    }
}

/// Which points of `X` form the subsample `πX` in the KF loss.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubsampleScheme {
    /// Torus lattices `X_q` keep the points of `X_{q-1}`; equispaced interval
    /// designs `x_k, x_{2k}, …` keep `x_{2k}, x_{4k}, …`.
    CoarsenByTwo,
    Explicit { indices: Vec<usize> },
}

impl SubsampleScheme {
    /// Positions (into `points`) of the retained points.
    pub fn select(&self, kernel: &KernelModel, points: &[Vec<f64>]) -> Result<Vec<usize>> {
        let idx = match self {
            SubsampleScheme::Explicit { indices } => {
                if indices.iter().any(|&i| i >= points.len()) {
                    return invalid("subsample index out of range");
                }
                let mut v = indices.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            SubsampleScheme::CoarsenByTwo => match kernel {
                KernelModel::Torus(k) => {
                    let n = points.len();
                    let per_axis = (n as f64).powf(1.0 / k.d as f64).round() as usize;
                    if per_axis < 2 || !per_axis.is_power_of_two() || per_axis.pow(k.d as u32) != n {
                        return invalid("coarsening needs a full torus lattice");
                    }
                    let half = (per_axis / 2) as f64;
                    (0..n)
                        .filter(|&i| points[i].iter().all(|x| ((x * half) - (x * half).round()).abs() < 1e-9))
                        .collect()
                }
                _ => (1..points.len()).step_by(2).collect(),
            },
        };
        if idx.is_empty() || idx.len() >= points.len() {
            return invalid("subsample must be a nonempty strict subset");
        }
        Ok(idx)
    }
}

#[derive(Clone, Debug)]
enum Inner {
    Dense { l: Mat<f64> },
    Markov(Box<MarkovGram>),
}

/// Factorized Gram matrix `K(X, X) (+ λI)`.
#[derive(Clone, Debug)]
pub struct GramFactorization {
    inner: Inner,
    log_det: f64,
    pub jitter: f64,
}

fn lower_log_det(l: &Mat<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

fn condition_guard(l: &Mat<f64>) {
    let d: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].abs()).collect();
    let hi = d.iter().cloned().fold(0.0, f64::max);
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi / lo > CONDITION_WARNING {
        warn!("ill-conditioned Gram factor: diagonal ratio {:.3e}", hi / lo);
    }
}

impl GramFactorization {
    /// Cholesky factorization of a symmetric matrix.
    pub fn from_matrix(m: &Mat<f64>, jitter: f64) -> Result<Self> {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        let llt = a.llt(Side::Lower).map_err(|e| match e {
            LltError::NonPositivePivot { index } => Error::NotPositiveDefinite { pivot: index },
        })?;
        let l = llt.L().to_owned();
        condition_guard(&l);
        Ok(Self { log_det: lower_log_det(&l), inner: Inner::Dense { l }, jitter })
    }

    /// Factorization of `B Bᵀ (+ λI)` from the rows `B` via a QR
    /// decomposition of `Bᵀ`, avoiding the squared condition number.
    pub fn from_factor(b: &Mat<f64>, jitter: f64) -> Result<Self> {
        let n = b.nrows();
        let extra = if jitter > 0.0 { n } else { 0 };
        let r = b.ncols();
        if r + extra < n {
            return invalid("factor has fewer columns than rows");
        }
        let sq = jitter.sqrt();
        let bt = Mat::from_fn(r + extra, n, |i, j| {
            if i < r {
                b[(j, i)]
            } else if i - r == j {
                sq
            } else {
                0.0
            }
        });
        let qr = bt.qr();
        let rr = qr.thin_R();
        let mut l = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            let sign = if rr[(i, i)] < 0.0 { -1.0 } else { 1.0 };
            if rr[(i, i)] == 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: i });
            }
            for j in i..n {
                l[(j, i)] = sign * rr[(i, j)];
            }
        }
        condition_guard(&l);
        Ok(Self { log_det: lower_log_det(&l), inner: Inner::Dense { l }, jitter })
    }

    pub fn len(&self) -> usize {
        match &self.inner {
            Inner::Dense { l } => l.nrows(),
            Inner::Markov(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Lower-triangular factor (dense factorizations only).
    pub fn factor(&self) -> Option<&Mat<f64>> {
        match &self.inner {
            Inner::Dense { l } => Some(l),
            Inner::Markov(_) => None,
        }
    }

    /// `L Lᵀ` (dense factorizations only).
    pub fn reconstruct(&self) -> Option<Mat<f64>> {
        self.factor().map(|l| l * l.transpose())
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.len() {
            return invalid(format!("expected {} values, got {}", self.len(), y.len()));
        }
        Ok(())
    }

    /// `K^{-1} y` (dense factorizations only).
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        match &self.inner {
            Inner::Dense { l } => {
                let mut x = Mat::from_fn(y.len(), 1, |i, _| y[i]);
                triangular_solve::solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), Par::Seq);
                triangular_solve::solve_upper_triangular_in_place(l.transpose(), x.as_mut(), Par::Seq);
                Ok((0..y.len()).map(|i| x[(i, 0)]).collect())
            }
            Inner::Markov(_) => invalid("precision models do not expose K^{-1} y"),
        }
    }

    /// `yᵀ K^{-1} y`, computed as `‖L^{-1} y‖²`.
    pub fn quad_form(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        match &self.inner {
            Inner::Dense { l } => {
                let mut rhs = Mat::from_fn(y.len(), 1, |i, _| y[i]);
                triangular_solve::solve_lower_triangular_in_place(l.as_ref(), rhs.as_mut(), Par::Seq);
                Ok((0..y.len()).map(|i| rhs[(i, 0)] * rhs[(i, 0)]).sum())
            }
            Inner::Markov(m) => Ok(m.quad_form_and_mean(y)?.0),
        }
    }
}

/// Assemble and factorize `K(X, X)` without jitter.
pub fn gram_matrix(kernel: &KernelModel, points: &[Vec<f64>]) -> Result<GramFactorization> {
    gram_matrix_with_jitter(kernel, points, 0.0)
}

/// Assemble and factorize `K(X, X) + λI`.
pub fn gram_matrix_with_jitter(kernel: &KernelModel, points: &[Vec<f64>], jitter: f64) -> Result<GramFactorization> {
    if !(jitter >= 0.0) {
        return invalid("jitter must be nonnegative");
    }
    if points.is_empty() {
        return invalid("empty point set");
    }
    match kernel {
        KernelModel::Torus(k) => GramFactorization::from_matrix(&k.gram(points)?, jitter),
        KernelModel::Matrix(c) => GramFactorization::from_factor(&c.factor_rows(&kernel.grid_indices(points)?), jitter),
        KernelModel::Markov(p) => {
            if jitter > 0.0 {
                return invalid("jitter is not supported for precision models");
            }
            let m = p.observe(&kernel.grid_indices(points)?)?;
            Ok(GramFactorization { log_det: m.log_det(), inner: Inner::Markov(Box::new(m)), jitter })
        }
    }
}

/// `K(E, X) K(X, X)^{-1} y`.
pub fn conditional_mean(kernel: &KernelModel, x: &[Vec<f64>], y: &[f64], e: &[Vec<f64>]) -> Result<Vec<f64>> {
    let g = gram_matrix(kernel, x)?;
    conditional_mean_with(kernel, &g, x, y, e)
}

/// Conditional mean reusing an existing factorization of `K(X, X)`.
pub fn conditional_mean_with(
    kernel: &KernelModel,
    g: &GramFactorization,
    x: &[Vec<f64>],
    y: &[f64],
    e: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return invalid("points and values differ in length");
    }
    match (kernel, &g.inner) {
        (KernelModel::Markov(_), Inner::Markov(m)) => {
            let (_, z) = m.quad_form_and_mean(y)?;
            let mut full = vec![0.0; kernel.grid().map(|g| g.n_interior).unwrap_or(0)];
            for (&i, v) in m.obs.iter().zip(y) {
                full[i] = *v;
            }
            for (&i, v) in m.unobs.iter().zip(&z) {
                full[i] = *v;
            }
            Ok(kernel.grid_indices(e)?.into_iter().map(|i| full[i]).collect())
        }
        _ => {
            let w = g.solve(y)?;
            let kex = kernel.cross(e, x)?;
            Ok((0..e.len()).map(|i| (0..x.len()).map(|j| kex[(i, j)] * w[j]).sum()).collect())
        }
    }
}

/// `yᵀ K^{-1} y + log det K`.
pub fn eb_loss(kernel: &KernelModel, x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let g = gram_matrix(kernel, x)?;
    eb_loss_with(&g, y)
}

pub fn eb_loss_with(g: &GramFactorization, y: &[f64]) -> Result<f64> {
    Ok(g.quad_form(y)? + g.log_det())
}

/// `1 - y(πX)ᵀ K(πX,πX)^{-1} y(πX) / y(X)ᵀ K(X,X)^{-1} y(X)`.
pub fn kf_loss(kernel: &KernelModel, x: &[Vec<f64>], pi: &SubsampleScheme, y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return invalid("points and values differ in length");
    }
    let sub = pi.select(kernel, x)?;
    let xs: Vec<Vec<f64>> = sub.iter().map(|&i| x[i].clone()).collect();
    let full = gram_matrix(kernel, x)?;
    let coarse = gram_matrix(kernel, &xs)?;
    kf_loss_with(&full, &coarse, &sub, y)
}

/// KF loss from factorizations of the full and subsampled Gram matrices.
pub fn kf_loss_with(full: &GramFactorization, coarse: &GramFactorization, sub: &[usize], y: &[f64]) -> Result<f64> {
    let den = full.quad_form(y)?;
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    let ys: Vec<f64> = sub.iter().map(|&i| y[i]).collect();
    Ok(1.0 - coarse.quad_form(&ys)? / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{MaternLike, Truncation};

    fn torus_s1() -> KernelModel {
        KernelModel::Torus(SpectralKernel::new(1, MaternLike::power(1.0), Truncation::Corrected { half_width: 64 }))
    }

    #[test]
    fn two_point_gram() {
        let g = gram_matrix(&torus_s1(), &[vec![0.0], vec![0.5]]).unwrap();
        let m = g.reconstruct().unwrap();
        assert!((m[(0, 0)] - 1.0 / 12.0).abs() < 1e-14);
        assert!((m[(1, 0)] + 1.0 / 24.0).abs() < 1e-14);
        assert!((g.log_det() - (1.0f64 / 8.0 / 24.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn scalar_case() {
        let k = torus_s1();
        let g = gram_matrix(&k, &[vec![0.0]]).unwrap();
        assert!((g.log_det() - (1.0f64 / 12.0).ln()).abs() < 1e-13);
        let l = eb_loss(&k, &[vec![0.0]], &[2.0]).unwrap();
        assert!((l - (48.0 + (1.0f64 / 12.0).ln())).abs() < 1e-11);
    }

    #[test]
    fn kf_full_subsample_is_zero_and_zero_data_errors() {
        let k = torus_s1();
        let x: Vec<Vec<f64>> = (0..8).map(|j| vec![j as f64 / 8.0]).collect();
        let y: Vec<f64> = (0..8).map(|j| (j as f64).sin()).collect();
        let all = SubsampleScheme::Explicit { indices: (0..8).collect() };
        assert!(kf_loss(&k, &x, &all, &y).is_err());
        let g = gram_matrix(&k, &x).unwrap();
        assert_eq!(kf_loss_with(&g, &g, &(0..8).collect::<Vec<_>>(), &y).unwrap(), 0.0);
        assert!(matches!(
            kf_loss(&k, &x, &SubsampleScheme::CoarsenByTwo, &[0.0; 8]),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn coarsening_selects_even_lattice_points() {
        let k = KernelModel::Torus(SpectralKernel::new(2, MaternLike::power(2.0), Truncation::Sharp { half_width: 4 }));
        let lat = crate::torus::TorusLattice::new(2, 2);
        let pts = lat.points();
        let sel = SubsampleScheme::CoarsenByTwo.select(&k, &pts).unwrap();
        assert_eq!(sel, lat.coarse_indices());
    }
}
