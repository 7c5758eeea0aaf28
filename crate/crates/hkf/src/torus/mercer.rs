use std::collections::HashMap;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{cos_2pi, frac_mul, ordered_set_partitions, sin_2pi, CompensatedSum, BERNOULLI_OVER_FACTORIAL};
use crate::torus::sampling::half_space_modes;
use crate::torus::symbol::{alias_table, cube_complement_integral, MaternLike, Truncation};

/// Minimum head length for the one-dimensional corrected series.
const MIN_HEAD: u64 = 256;
/// Heads are lengthened until `M·|1 - e^{2πir}| ≥ this`.
const HEAD_SEPARATION: f64 = 64.0;
const MAX_HEAD: u64 = 1 << 24;
const MAX_TAIL_ORDER: usize = 48;

/// Stationary kernel `K(x, y) = Σ_{m≠0} λ_m e^{2πi⟨m, x-y⟩}` on `T^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralKernel {
    pub d: usize,
    pub symbol: MaternLike,
    pub truncation: Truncation,
    /// Relative accuracy demanded of tail corrections.
    pub tol: f64,
}

impl SpectralKernel {
    pub fn new(d: usize, symbol: MaternLike, truncation: Truncation) -> Self {
        Self { d, symbol, truncation, tol: 1e-10 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_symbol(&self, symbol: MaternLike) -> Self {
        Self { symbol, ..self.clone() }
    }

    /// Alias sums `Σ_β λ(c + 2^q β)` for all `c ∈ B_q^d` (FFT layout).
    pub fn alias_table(&self, q: u32) -> Result<Vec<f64>> {
        alias_table(&self.symbol, q, self.d, &self.truncation, self.tol.min(1e-12))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.d || y.len() != self.d {
            return invalid("point dimension does not match the kernel");
        }
        let r: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.eval_difference(&r)
    }

    pub fn eval_difference(&self, r: &[f64]) -> Result<f64> {
        let mut ev = Evaluator::new(self)?;
        ev.value(r)
    }

    /// Dense matrix `K(a_i, b_j)`.
    pub fn cross(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Mat<f64>> {
        let mut ev = Evaluator::new(self)?;
        let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
        let mut out = Mat::<f64>::zeros(a.len(), b.len());
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let r = fold_difference(x, y);
                let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
                let v = match cache.get(&key) {
                    Some(v) => *v,
                    None => {
                        let v = ev.value(&r)?;
                        cache.insert(key, v);
                        v
                    }
                };
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    pub fn gram(&self, points: &[Vec<f64>]) -> Result<Mat<f64>> {
        self.cross(points, points)
    }
}

/// Componentwise `x - y mod 1`, folded into `[0, 1/2]` in d = 1 by evenness.
fn fold_difference(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = x.iter().zip(y).map(|(a, b)| {
        let v = a - b;
        v - v.floor()
    }).collect();
    if r.len() == 1 && r[0] > 0.5 {
        r[0] = 1.0 - r[0];
    }
    r
}

/// `K(x, y)` for the Matérn-like operator under the given truncation.
pub fn mercer_kernel(x: &[f64], y: &[f64], params: &MaternLike, trunc: &Truncation) -> Result<f64> {
    SpectralKernel::new(x.len(), *params, *trunc).eval(x, y)
}

struct Evaluator<'a> {
    k: &'a SpectralKernel,
    lam: Vec<f64>,
    partitions: Vec<Vec<f64>>,
    modes: Option<(Vec<Vec<i64>>, Vec<f64>)>,
}

impl<'a> Evaluator<'a> {
    fn new(k: &'a SpectralKernel) -> Result<Self> {
        if k.d == 0 {
            return invalid("dimension must be positive");
        }
        if !k.truncation.is_sharp() {
            k.symbol.check_convergent(k.d)?;
        }
        Ok(Self { k, lam: vec![0.0], partitions: Vec::new(), modes: None })
    }

    fn lambda_upto(&mut self, m: u64) {
        let have = self.lam.len() as u64;
        for i in have..=m {
            self.lam.push(self.k.symbol.radial(i as f64));
        }
    }

    fn value(&mut self, r: &[f64]) -> Result<f64> {
        match (self.k.d, self.k.truncation) {
            (1, Truncation::Sharp { half_width }) => Ok(self.sharp_1d(r[0], half_width)),
            (1, Truncation::Corrected { half_width }) => self.corrected_1d(r[0], half_width),
            (_, t) => self.box_nd(r, t),
        }
    }

    fn sharp_1d(&mut self, r: f64, k: u64) -> f64 {
        self.lambda_upto(k);
        let mut acc = CompensatedSum::new();
        for m in 1..=k {
            acc.add(self.lam[m as usize] * cos_2pi(frac_mul(m, r)));
        }
        2.0 * acc.value()
    }

    fn corrected_1d(&mut self, r: f64, base: u64) -> Result<f64> {
        let r = {
            let v = r - r.floor();
            if v > 0.5 { 1.0 - v } else { v }
        };
        let sym = self.k.symbol;
        let base = base.max(MIN_HEAD);
        if r == 0.0 {
            self.lambda_upto(base);
            let head = crate::numeric::compensated_sum(self.lam[1..=base as usize].iter().copied());
            let a = (base + 1) as f64;
            let derivs = sym.radial_derivatives(a, 2 * BERNOULLI_OVER_FACTORIAL.len());
            let mut tail = CompensatedSum::new();
            tail.add(sym.tail_integral(a)?);
            tail.add(0.5 * derivs[0]);
            for (j, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
                tail.add(-b * derivs[2 * j + 1]);
            }
            return Ok(2.0 * (head + tail.value()));
        }
        let gap = 2.0 * (std::f64::consts::PI * r).sin();
        let need = (HEAD_SEPARATION / gap).ceil();
        let m_head = if need > MAX_HEAD as f64 { MAX_HEAD } else { base.max(need as u64) };
        self.lambda_upto(m_head);
        let mut acc = CompensatedSum::new();
        for m in 1..=m_head {
            acc.add(self.lam[m as usize] * cos_2pi(frac_mul(m, r)));
        }
        let head = acc.value();

        // Σ_{n≥0} f(M+1+n) z^{M+1+n} via the Taylor expansion of f about
        // M+1 and the polylogarithms Li_{-k}(z) = Σ_j j!·S(k+1,j+1)·w^{j+1}.
        if self.partitions.is_empty() {
            self.partitions = ordered_set_partitions(MAX_TAIL_ORDER + 1);
        }
        let z = Complex64::new(cos_2pi(r), sin_2pi(r));
        let one_minus = Complex64::new(1.0, 0.0) - z;
        let w = z / one_minus;
        let start = m_head + 1;
        let zs = Complex64::new(cos_2pi(frac_mul(start, r)), sin_2pi(frac_mul(start, r)));
        let derivs = sym.radial_derivatives(start as f64, MAX_TAIL_ORDER);
        let mut wpow = vec![w; MAX_TAIL_ORDER + 2];
        for j in 1..wpow.len() {
            wpow[j] = wpow[j - 1] * w;
        }
        let mut tail = derivs[0] / one_minus;
        let mut fact = 1.0;
        // Terms of odd and even order can differ by orders of magnitude
        // (near r = 1/2 the even polylogarithms vanish), so divergence is
        // judged against the larger of the two preceding terms.
        let mut prev = [tail.norm(), tail.norm()];
        let mut last = prev[0];
        for k in 1..=MAX_TAIL_ORDER {
            fact *= k as f64;
            let row = &self.partitions[k + 1];
            let mut li = Complex64::new(0.0, 0.0);
            for j in 0..=k {
                li += wpow[j] * (row[j + 1] / (j + 1) as f64);
            }
            let term = li * (derivs[k] / fact);
            let mag = term.norm();
            let recent = prev[0].max(prev[1]);
            if mag > recent && k > 3 {
                break;
            }
            tail += term;
            last = mag.max(prev[0]);
            prev = [mag, prev[0]];
            if last < 1e-18 * head.abs().max(self.lam[1]) {
                break;
            }
        }
        let scale_ref = self.lam[1];
        if last > self.k.tol * scale_ref {
            return Err(Error::InsufficientTruncation { estimate: last / scale_ref, tolerance: self.k.tol });
        }
        Ok(2.0 * (head + (zs * tail).re))
    }

    fn box_nd(&mut self, r: &[f64], t: Truncation) -> Result<f64> {
        let d = self.k.d;
        let k = t.half_width();
        if self.modes.is_none() {
            if let Truncation::Corrected { .. } = t {
                // Σ_{|m|_∞ > K} λ_m estimated by the cell-integral comparison.
                let terms = self.k.symbol.asymptotic_terms(k as f64 + 0.5)?;
                let (c, p) = terms[0];
                let a = k as f64 + 0.5;
                let tail = c * a.powf(d as f64 - p) * cube_complement_integral(d, p);
                let lead = self.k.symbol.at(&unit(d));
                if tail > self.k.tol * lead {
                    return Err(Error::InsufficientTruncation { estimate: tail / lead, tolerance: self.k.tol });
                }
            }
            let modes = half_space_modes(d, k);
            let lam = modes.iter().map(|m| self.k.symbol.at(m)).collect();
            self.modes = Some((modes, lam));
        }
        let (modes, lam) = self.modes.as_ref().expect("modes initialised");
        let mut acc = CompensatedSum::new();
        for (m, l) in modes.iter().zip(lam) {
            let mut phase = 0.0;
            for (mi, ri) in m.iter().zip(r) {
                phase += frac_mul(mi.unsigned_abs(), *ri) * mi.signum() as f64;
            }
            acc.add(l * cos_2pi(phase));
        }
        Ok(2.0 * acc.value())
    }
}

fn unit(d: usize) -> Vec<i64> {
    let mut v = vec![0; d];
    v[0] = 1;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corrected() -> Truncation {
        Truncation::Corrected { half_width: 64 }
    }

    #[test]
    fn closed_forms_at_s1() {
        let p = MaternLike::power(1.0);
        let k0 = mercer_kernel(&[0.3], &[0.3], &p, &corrected()).unwrap();
        assert!((k0 - 1.0 / 12.0).abs() < 1e-14);
        let kh = mercer_kernel(&[0.75], &[0.25], &p, &corrected()).unwrap();
        assert!((kh + 1.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn bernoulli_polynomial_identity() {
        // Σ_{m≠0} e^{2πimr}/(4π²m²) = B_2(r)/2 = (r² - r + 1/6)/2
        let p = MaternLike::power(1.0);
        for &r in &[0.1, 0.013, 0.37, 1.0 / 1024.0] {
            let k = mercer_kernel(&[r], &[0.0], &p, &corrected()).unwrap();
            let b2 = (r * r - r + 1.0 / 6.0) / 2.0;
            assert!((k - b2).abs() < 1e-14, "r = {r}: {k} vs {b2}");
        }
    }

    #[test]
    fn quartic_identity() {
        // Σ_{m≠0} e^{2πimr}/(2πm)^4 = -B_4(r)/24
        let p = MaternLike::power(2.0);
        for &r in &[0.0, 0.2, 0.4999, 3.0 / 512.0] {
            let k = mercer_kernel(&[r], &[0.0], &p, &corrected()).unwrap();
            let b4 = r.powi(4) - 2.0 * r.powi(3) + r * r - 1.0 / 30.0;
            assert!((k + b4 / 24.0).abs() < 1e-16, "r = {r}");
        }
    }

    #[test]
    fn rough_kernel_matches_long_sharp_sum() {
        let p = MaternLike::new(1.0, 0.7, 0.8).unwrap();
        let r = 5.0 / 64.0;
        let exact = mercer_kernel(&[r], &[0.0], &p, &corrected()).unwrap();
        let s1 = mercer_kernel(&[r], &[0.0], &p, &Truncation::Sharp { half_width: 1 << 20 }).unwrap();
        assert!((exact - s1).abs() < 1e-9 * exact.abs().max(1e-3));
    }

    #[test]
    fn two_dimensional_sharp_is_real_and_even() {
        let k = SpectralKernel::new(2, MaternLike::power(2.0), Truncation::Sharp { half_width: 8 });
        let a = k.eval(&[0.1, 0.7], &[0.3, 0.2]).unwrap();
        let b = k.eval(&[0.3, 0.2], &[0.1, 0.7]).unwrap();
        assert!((a - b).abs() < 1e-15);
        let shifted = k.eval(&[0.35, 0.95], &[0.55, 0.45]).unwrap();
        assert!((a - shifted).abs() < 1e-14);
    }

    #[test]
    fn gram_two_points() {
        let k = SpectralKernel::new(1, MaternLike::power(1.0), corrected());
        let g = k.gram(&[vec![0.0], vec![0.5]]).unwrap();
        assert!((g[(0, 0)] - 1.0 / 12.0).abs() < 1e-14);
        assert!((g[(0, 1)] + 1.0 / 24.0).abs() < 1e-14);
    }
}
