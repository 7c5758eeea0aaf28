use crate::error::{invalid, Result};
use crate::numeric::BandCholesky;
use crate::operators::elliptic::{stencil, CoefficientField, Tridiagonal};
use crate::operators::grid::IntervalGrid;

/// Precision form of the composite kernel `A_θ^{-1} L^{-s} A_θ^{-1}` for an
/// integer exponent `s`.
///
/// With `Ã = h² A_θ`, `L̃ = h² L` and the scaled difference `D̃` (so that
/// `L̃ = D̃ᵀD̃`), the precision of the kernel matrix is `Q = e^{c} Q̃` where
/// `Q̃ = Ã L̃^s Ã = R̃ᵀR̃`, `c = -(2s+3) log h`, and `R̃ = D̃ L̃^r Ã` for
/// `s = 2r+1` or `R̃ = L̃^r Ã` for `s = 2r`.
#[derive(Clone, Debug)]
pub struct CompositePrecision {
    pub grid: IntervalGrid,
    pub theta: f64,
    pub s: u32,
    /// Column `j` of `R̃`: first nonzero row and the contiguous values.
    cols: Vec<(usize, Vec<f64>)>,
    log_det_scaled: f64,
    log_scale: f64,
}

fn difference(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..=n)
        .map(|i| {
            let a = if i < n { v[i] } else { 0.0 };
            let b = if i > 0 { v[i - 1] } else { 0.0 };
            a - b
        })
        .collect()
}

impl CompositePrecision {
    pub fn new(theta: f64, s: u32, grid: IntervalGrid) -> Result<Self> {
        let a = CoefficientField::step(theta)?;
        let a_t = stencil(&a.midpoints(grid));
        let l_t = stencil(&vec![1.0; grid.n_interior + 1]);
        Self::build(grid, theta, s, &a_t, &l_t)
    }

    fn build(grid: IntervalGrid, theta: f64, s: u32, a_t: &Tridiagonal, l_t: &Tridiagonal) -> Result<Self> {
        let n = grid.n_interior;
        let r = s / 2;
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let mut v = a_t.apply(&e);
            for _ in 0..r {
                v = l_t.apply(&v);
            }
            if s % 2 == 1 {
                v = difference(&v);
            }
            let first = v.iter().position(|x| *x != 0.0).unwrap_or(0);
            let last = v.iter().rposition(|x| *x != 0.0).unwrap_or(0);
            cols.push((first, v[first..=last].to_vec()));
        }
        let log_det_scaled = 2.0 * a_t.log_det()? + s as f64 * l_t.log_det()?;
        let log_scale = -(2.0 * s as f64 + 3.0) * grid.h().ln();
        Ok(Self { grid, theta, s, cols, log_det_scaled, log_scale })
    }

    /// `log det Q` of the full-grid precision.
    pub fn log_det_precision(&self) -> f64 {
        self.log_det_scaled + self.grid.n_interior as f64 * self.log_scale
    }

    fn col_dot(&self, i: usize, j: usize) -> f64 {
        let (fi, vi) = &self.cols[i];
        let (fj, vj) = &self.cols[j];
        let lo = (*fi).max(*fj);
        let hi = (fi + vi.len()).min(fj + vj.len());
        (lo..hi).map(|k| vi[k - fi] * vj[k - fj]).sum()
    }

    /// Dense precision `Q` (for tests and small grids).
    pub fn precision_matrix(&self) -> faer::Mat<f64> {
        let n = self.grid.n_interior;
        let c = self.log_scale.exp();
        faer::Mat::from_fn(n, n, |i, j| c * self.col_dot(i, j))
    }

    /// Condition the process on the grid values at `obs`.
    pub fn observe(&self, obs: &[usize]) -> Result<MarkovGram> {
        let n = self.grid.n_interior;
        let mut seen = vec![false; n];
        for &i in obs {
            if i >= n || seen[i] {
                return invalid("observation indices must be distinct grid indices");
            }
            seen[i] = true;
        }
        let unobs: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
        let overlap = |a: usize, b: usize| {
            let (fa, va) = &self.cols[a];
            let (fb, vb) = &self.cols[b];
            fa.max(fb) < &(fa + va.len()).min(fb + vb.len())
        };
        let mut bw = 0;
        for a in 0..unobs.len() {
            let mut b = a + 1;
            while b < unobs.len() && overlap(unobs[a], unobs[b]) {
                b += 1;
            }
            bw = bw.max(b - 1 - a);
        }
        let chol = BandCholesky::new(unobs.len(), bw, |i, j| self.col_dot(unobs[i], unobs[j]))?;
        let log_det = chol.log_det() + unobs.len() as f64 * self.log_scale - self.log_det_precision();
        Ok(MarkovGram { model: self.clone(), obs: obs.to_vec(), unobs, chol, log_det })
    }
}

/// Marginal covariance of a Gauss–Markov field at observed grid points,
/// evaluated through the Schur complement of its banded precision.
#[derive(Clone, Debug)]
pub struct MarkovGram {
    model: CompositePrecision,
    pub obs: Vec<usize>,
    pub unobs: Vec<usize>,
    chol: BandCholesky,
    log_det: f64,
}

impl MarkovGram {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// `log det K(O, O)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Returns `yᵀ K(O,O)^{-1} y` and the conditional mean at the unobserved
    /// points, via `min_z ‖R̃_U z + R̃_O y‖²`.
    pub fn quad_form_and_mean(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        if y.len() != self.obs.len() {
            return invalid("data length does not match the observation set");
        }
        let rows = self.model.cols.iter().map(|(f, v)| f + v.len()).max().unwrap_or(0);
        let mut b = vec![0.0; rows];
        let add_col = |b: &mut [f64], j: usize, w: f64| {
            let (f, v) = &self.model.cols[j];
            for (k, x) in v.iter().enumerate() {
                b[f + k] += w * x;
            }
        };
        for (&j, &w) in self.obs.iter().zip(y) {
            add_col(&mut b, j, w);
        }
        let rhs: Vec<f64> = self
            .unobs
            .iter()
            .map(|&j| {
                let (f, v) = &self.model.cols[j];
                -v.iter().enumerate().map(|(k, x)| x * b[f + k]).sum::<f64>()
            })
            .collect();
        let z = self.chol.solve(&rhs);
        for (&j, &w) in self.unobs.iter().zip(&z) {
            add_col(&mut b, j, w);
        }
        let energy: f64 = b.iter().map(|x| x * x).sum();
        Ok((energy * self.model.log_scale.exp(), z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::Solve;
    use faer::Side;

    fn check_against_covariance(n: usize, s: u32, theta: f64) {
        let g = IntervalGrid::new(n);
        let lap = crate::operators::OperatorEigensystem::laplacian(g);
        let k = crate::operators::composite_covariance(theta, s as f64, &lap).unwrap().matrix();
        let obs: Vec<usize> = g.stride_indices(2);
        let m = CompositePrecision::new(theta, s, g).unwrap().observe(&obs).unwrap();
        let koo = faer::Mat::from_fn(obs.len(), obs.len(), |a, b| k[(obs[a], obs[b])]);
        let l = koo.llt(Side::Lower).unwrap();
        let dense_ld: f64 = (0..obs.len()).map(|i| 2.0 * l.L()[(i, i)].ln()).sum();
        assert!((m.log_det() - dense_ld).abs() < 1e-8 * dense_ld.abs(), "{} vs {dense_ld}", m.log_det());
        let y: Vec<f64> = (0..obs.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let (qf, _) = m.quad_form_and_mean(&y).unwrap();
        let rhs = faer::Mat::from_fn(obs.len(), 1, |i, _| y[i]);
        let sol = l.solve(&rhs);
        let dense_qf: f64 = (0..obs.len()).map(|i| y[i] * sol[(i, 0)]).sum();
        assert!((qf - dense_qf).abs() < 1e-8 * dense_qf, "{qf} vs {dense_qf}");
    }

    #[test]
    fn schur_matches_dense_covariance() {
        check_against_covariance(23, 1, 0.43);
        check_against_covariance(15, 2, 0.5);
    }

    #[test]
    fn conditional_mean_reproduces_covariance_regression() {
        let g = IntervalGrid::new(15);
        let lap = crate::operators::OperatorEigensystem::laplacian(g);
        let k = crate::operators::composite_covariance(0.5, 1.0, &lap).unwrap().matrix();
        let obs = g.stride_indices(2);
        let m = CompositePrecision::new(0.5, 1, g).unwrap().observe(&obs).unwrap();
        let y: Vec<f64> = (0..obs.len()).map(|i| 1.0 + i as f64 * 0.1).collect();
        let (_, z) = m.quad_form_and_mean(&y).unwrap();
        let koo = faer::Mat::from_fn(obs.len(), obs.len(), |a, b| k[(obs[a], obs[b])]);
        let w = koo.llt(Side::Lower).unwrap().solve(&faer::Mat::from_fn(obs.len(), 1, |i, _| y[i]));
        for (u, &j) in m.unobs.iter().enumerate() {
            let want: f64 = (0..obs.len()).map(|a| k[(j, obs[a])] * w[(a, 0)]).sum();
            assert!((z[u] - want).abs() < 1e-8 * want.abs().max(1.0));
        }
    }
}
