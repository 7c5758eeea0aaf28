use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operators::IntervalGrid;
use crate::torus::lattice::{FrequencyBox, TorusLattice};

/// In-place unnormalized multidimensional FFT over a row-major cube of side `n`.
/// `inverse` uses the `e^{+2πi}` kernel.
pub fn fft_nd(data: &mut [Complex64], n: usize, d: usize, inverse: bool) {
    assert_eq!(data.len(), n.pow(d as u32));
    if n == 1 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let outer = data.len() / (n * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for k in 0..n {
                    line[k] = data[base + k * stride];
                }
                fft.process(&mut line);
                for k in 0..n {
                    data[base + k * stride] = line[k];
                }
            }
        }
    }
}

/// Complex coefficients on the alias cell `B_q^d`, FFT storage layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub q: u32,
    pub d: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(q: u32, d: usize) -> Self {
        let bx = FrequencyBox::new(q, d);
        Self { q, d, coeffs: vec![Complex64::new(0.0, 0.0); bx.len()] }
    }

    pub fn frequency_box(&self) -> FrequencyBox {
        FrequencyBox::new(self.q, self.d)
    }

    pub fn get(&self, m: &[i64]) -> Complex64 {
        self.coeffs[self.frequency_box().index_of(m)]
    }

    /// Periodization onto a coarser cell `B_r^d`, `r ≤ q`.
    pub fn fold(&self, r: u32) -> Result<SpectralField> {
        if r > self.q {
            return invalid(format!("cannot fold level {} onto finer level {r}", self.q));
        }
        let fine = self.frequency_box();
        let coarse = FrequencyBox::new(r, self.d);
        let mut out = SpectralField::zeros(r, self.d);
        for (i, c) in self.coeffs.iter().enumerate() {
            out.coeffs[coarse.index_of(&fine.frequency_at(i))] += c;
        }
        Ok(out)
    }

    /// Values of the trigonometric polynomial at the points of `X_q`.
    pub fn lattice_values(&self) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        fft_nd(&mut buf, 1 << self.q, self.d, true);
        buf.into_iter().map(|z| z.re).collect()
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> SpectralField {
        SpectralField { q: self.q, d: self.d, coeffs: self.coeffs.iter().map(|z| z * c).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Torus(TorusLattice),
    Interval(IntervalGrid),
}

/// Real samples of a function on a lattice or interval grid.
///
/// Torus fields keep their raw values; `mean` records the arithmetic mean so
/// callers needing the mean-zero representative can subtract it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub domain: Domain,
    pub values: Vec<f64>,
    pub mean: f64,
}

impl GridField {
    pub fn torus(lattice: TorusLattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return invalid(format!("expected {} values, got {}", lattice.len(), values.len()));
        }
        let mean = crate::numeric::compensated_sum(values.iter().copied()) / values.len() as f64;
        Ok(Self { domain: Domain::Torus(lattice), values, mean })
    }

    pub fn interval(grid: IntervalGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_interior {
            return invalid(format!("expected {} values, got {}", grid.n_interior, values.len()));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self { domain: Domain::Interval(grid), values, mean })
    }

    pub fn lattice(&self) -> Option<TorusLattice> {
        match self.domain {
            Domain::Torus(l) => Some(l),
            Domain::Interval(_) => None,
        }
    }

    /// Mean-zero copy (torus convention).
    pub fn demeaned(&self) -> GridField {
        GridField {
            domain: self.domain,
            values: self.values.iter().map(|v| v - self.mean).collect(),
            mean: 0.0,
        }
    }

    /// Restriction of a torus field on `X_q` to `X_r`, `r ≤ q`.
    pub fn restrict(&self, r: u32) -> Result<GridField> {
        let lat = self.lattice().ok_or_else(|| Error::InvalidInput("restrict needs a torus field".into()))?;
        if r > lat.q {
            return invalid("restriction level exceeds the field level");
        }
        let idx = lat.sublattice_indices(r);
        GridField::torus(TorusLattice::new(r, lat.d), idx.iter().map(|&i| self.values[i]).collect())
    }
}

/// Normalized DFT `2^{-qd} Σ_j u(x_j) e^{-2πi⟨m, x_j⟩}` for `m ∈ B_q^d`.
pub fn dft_alias(field: &GridField) -> Result<SpectralField> {
    let lat = field
        .lattice()
        .ok_or_else(|| Error::InvalidInput("dft_alias needs a torus field".into()))?;
    let mut buf: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut buf, lat.side(), lat.d, false);
    let scale = 1.0 / lat.len() as f64;
    for z in &mut buf {
        *z *= scale;
    }
    Ok(SpectralField { q: lat.q, d: lat.d, coeffs: buf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn cos_field(freq: f64, q: u32) -> GridField {
        let lat = TorusLattice::new(q, 1);
        let v = lat.points().iter().map(|x| (TAU * freq * x[0]).cos()).collect();
        GridField::torus(lat, v).unwrap()
    }

    #[test]
    fn single_mode() {
        let c = dft_alias(&cos_field(1.0, 3)).unwrap();
        for m in -4..4i64 {
            let want = if m.abs() == 1 { 0.5 } else { 0.0 };
            assert!((c.get(&[m]) - Complex64::new(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn aliasing_of_high_mode() {
        let c = dft_alias(&cos_field(9.0, 3)).unwrap();
        assert!((c.get(&[1]).re - 0.5).abs() < 1e-14);
        assert!((c.get(&[-1]).re - 0.5).abs() < 1e-14);
        assert!(c.get(&[2]).norm() < 1e-14);
    }

    #[test]
    fn zero_field() {
        let lat = TorusLattice::new(4, 2);
        let f = GridField::torus(lat, vec![0.0; lat.len()]).unwrap();
        assert_eq!(dft_alias(&f).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn fold_matches_restriction() {
        let f = cos_field(5.0, 4);
        let fine = dft_alias(&f).unwrap();
        let coarse = dft_alias(&f.restrict(2).unwrap()).unwrap();
        assert!(fine.fold(2).unwrap().max_abs_diff(&coarse) < 1e-14);
    }
}
