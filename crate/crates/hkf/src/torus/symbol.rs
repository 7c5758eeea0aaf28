use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{gauss_legendre, CompensatedSum, BERNOULLI_OVER_FACTORIAL};
use crate::torus::lattice::canonical_component;

const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// Direct-summation radius for periodized symbols; the remainder is handled
/// by an asymptotic tail correction.
pub const DIRECT_RADIUS: i64 = 64;

/// Eigenvalue map `m ↦ σ²(4π²|m|² + τ²)^{-s}` of the Matérn-like operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaternLike {
    pub sigma: f64,
    pub tau: f64,
    pub s: f64,
}

impl MaternLike {
    pub fn new(sigma: f64, tau: f64, s: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {sigma}"));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return invalid(format!("tau must be nonnegative, got {tau}"));
        }
        if !s.is_finite() {
            return invalid("regularity exponent must be finite");
        }
        Ok(Self { sigma, tau, s })
    }

    /// Pure power symbol `(4π²|m|²)^{-s}`.
    pub fn power(s: f64) -> Self {
        Self { sigma: 1.0, tau: 0.0, s }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }

    /// The symbol `λ²`, itself Matérn-like.
    pub fn squared(self) -> Self {
        Self { sigma: self.sigma * self.sigma, tau: self.tau, s: 2.0 * self.s }
    }

    pub fn check_convergent(&self, d: usize) -> Result<()> {
        if 2.0 * self.s > d as f64 {
            Ok(())
        } else {
            Err(Error::DivergentExponent { exponent: self.s, half_dim: d as f64 / 2.0 })
        }
    }

    #[inline]
    pub fn at_norm_sq(&self, n2: f64) -> f64 {
        self.sigma * self.sigma * (FOUR_PI_SQ * n2 + self.tau * self.tau).powf(-self.s)
    }

    /// Eigenvalue at frequency `m`; the zero mode is excluded and maps to 0.
    pub fn at(&self, m: &[i64]) -> f64 {
        let n2: f64 = m.iter().map(|&c| (c as f64) * (c as f64)).sum();
        if n2 == 0.0 {
            0.0
        } else {
            self.at_norm_sq(n2)
        }
    }

    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        self.at_norm_sq(r * r)
    }

    /// `f^{(k)}(r)` for `k = 0..=k_max`, where `f(r) = σ²(4π²r² + τ²)^{-s}`.
    pub fn radial_derivatives(&self, r: f64, k_max: usize) -> Vec<f64> {
        let g = FOUR_PI_SQ * r * r + self.tau * self.tau;
        let g1 = 2.0 * FOUR_PI_SQ * r;
        let g2 = 2.0 * FOUR_PI_SQ;
        let s = self.s;
        let mut out = Vec::with_capacity(k_max + 1);
        out.push(self.radial(r));
        if k_max >= 1 {
            out.push(-s * g1 * out[0] / g);
        }
        for k in 1..k_max {
            let kf = k as f64;
            let binom = kf * (kf - 1.0) / 2.0;
            let next = -((kf + s) * g1 * out[k] + (binom + s * kf) * g2 * out[k - 1]) / g;
            out.push(next);
        }
        out
    }

    /// Expansion `f(r) = Σ_j c_j r^{-p_j}` valid for `r > τ/2π`, truncated
    /// once terms at `r_min` fall below `1e-18` relative.
    pub fn asymptotic_terms(&self, r_min: f64) -> Result<Vec<(f64, f64)>> {
        let ratio = self.tau * self.tau / (FOUR_PI_SQ * r_min * r_min);
        if ratio >= 0.5 {
            return invalid(format!(
                "tail expansion needs 2π·r > τ·√2 (r = {r_min}, τ = {})",
                self.tau
            ));
        }
        let lead = self.sigma * self.sigma * FOUR_PI_SQ.powf(-self.s);
        let mut terms = vec![(lead, 2.0 * self.s)];
        if self.tau == 0.0 {
            return Ok(terms);
        }
        let tau2 = self.tau * self.tau / FOUR_PI_SQ;
        let mut coef = lead;
        for j in 0..200 {
            let jf = j as f64;
            coef *= (-self.s - jf) / (jf + 1.0) * tau2;
            let p = 2.0 * self.s + 2.0 * (jf + 1.0);
            terms.push((coef, p));
            if (coef * r_min.powf(-p)).abs() < 1e-18 * lead * r_min.powf(-2.0 * self.s) {
                break;
            }
        }
        Ok(terms)
    }

    /// `∫_{r0}^∞ f(r) dr`.
    pub fn tail_integral(&self, r0: f64) -> Result<f64> {
        self.check_convergent(1)?;
        let mut acc = CompensatedSum::new();
        for (c, p) in self.asymptotic_terms(r0)? {
            acc.add(c * r0.powf(1.0 - p) / (p - 1.0));
        }
        Ok(acc.value())
    }
}

/// How a spectral series is cut off.
///
/// `Corrected` evaluates the infinite series: a finite head of the given
/// half-width plus an asymptotic tail. `Sharp` is the exact finite series
/// over the symmetric box `|m|_∞ ≤ half_width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Truncation {
    Corrected { half_width: u64 },
    Sharp { half_width: u64 },
}

impl Truncation {
    /// Head box `B_{q+extra}`, tail corrected.
    pub fn oversampled(q: u32, extra: u32) -> Self {
        Truncation::Corrected { half_width: 1u64 << (q + extra).saturating_sub(1) }
    }

    /// Finite series at grid resolution `2^{q-1}`.
    pub fn grid_resolution(q: u32) -> Self {
        Truncation::Sharp { half_width: 1u64 << q.saturating_sub(1) }
    }

    pub fn half_width(&self) -> u64 {
        match *self {
            Truncation::Corrected { half_width } | Truncation::Sharp { half_width } => half_width,
        }
    }

    pub fn is_sharp(&self) -> bool {
        matches!(self, Truncation::Sharp { .. })
    }
}

/// `Σ_{k≥0} f(n(a+k))` by Euler–Maclaurin; returns (value, last correction).
fn em_shifted_tail(sym: &MaternLike, n: f64, a: f64) -> Result<(f64, f64)> {
    let r = n * a;
    let derivs = sym.radial_derivatives(r, 2 * BERNOULLI_OVER_FACTORIAL.len());
    let mut acc = CompensatedSum::new();
    acc.add(sym.tail_integral(r)? / n);
    acc.add(0.5 * derivs[0]);
    let mut last = 0.0;
    let mut scale = n;
    for (j, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = -b * scale * derivs[2 * j + 1];
        acc.add(term);
        last = term;
        if term.abs() < 1e-19 * derivs[0] {
            break;
        }
        scale *= n * n;
    }
    Ok((acc.value(), last.abs()))
}

fn alias_sum_1d(sym: &MaternLike, c: i64, q: u32, trunc: &Truncation, tol: f64) -> Result<f64> {
    let n = 1i64 << q;
    let c = canonical_component(c, n);
    match *trunc {
        Truncation::Sharp { half_width } => {
            let k = half_width as i64;
            let lo = (-k - c).div_euclid(n) + i64::from((-k - c).rem_euclid(n) != 0);
            let hi = (k - c).div_euclid(n);
            let mut acc = CompensatedSum::new();
            for b in lo..=hi {
                let m = c + n * b;
                if m != 0 {
                    acc.add(sym.radial(m.unsigned_abs() as f64));
                }
            }
            Ok(acc.value())
        }
        Truncation::Corrected { .. } => {
            sym.check_convergent(1)?;
            let mut acc = CompensatedSum::new();
            for b in -DIRECT_RADIUS..=DIRECT_RADIUS {
                let m = c + n * b;
                if m != 0 {
                    acc.add(sym.radial(m.unsigned_abs() as f64));
                }
            }
            let x = c as f64 / n as f64;
            let base = (DIRECT_RADIUS + 1) as f64;
            let (right, e1) = em_shifted_tail(sym, n as f64, base + x)?;
            let (left, e2) = em_shifted_tail(sym, n as f64, base - x)?;
            acc.add(right);
            acc.add(left);
            let v = acc.value();
            if e1 + e2 > tol * v {
                return Err(Error::InsufficientTruncation { estimate: (e1 + e2) / v, tolerance: tol });
            }
            Ok(v)
        }
    }
}

/// `∫_{|z|_∞ > 1} |z|^{-p} dz` in `d` dimensions (requires `p > d`).
pub(crate) fn cube_complement_integral(d: usize, p: f64) -> f64 {
    if d == 1 {
        return 2.0 / (p - 1.0);
    }
    // Surface form: 2d ∫_{[-1,1]^{d-1}} (1 + |w|²)^{-p/2} dw, using symmetry.
    let (x, w) = gauss_legendre(24, 0.0, 1.0);
    let dims = d - 1;
    let mut total = 0.0;
    let mut idx = vec![0usize; dims];
    loop {
        let mut weight = 1.0;
        let mut w2 = 0.0;
        for &i in &idx {
            weight *= w[i];
            w2 += x[i] * x[i];
        }
        total += weight * (1.0 + w2).powf(-p / 2.0);
        let mut k = dims;
        loop {
            if k == 0 {
                let face = 2.0 * d as f64 * total * 2f64.powi(dims as i32);
                return face / (p - d as f64);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < x.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn alias_sum_nd(sym: &MaternLike, c: &[i64], q: u32, trunc: &Truncation) -> Result<f64> {
    let d = c.len();
    let n = 1i64 << q;
    let c: Vec<i64> = c.iter().map(|&v| canonical_component(v, n)).collect();
    let (ranges, corrected): (Vec<(i64, i64)>, bool) = match *trunc {
        Truncation::Sharp { half_width } => {
            let k = half_width as i64;
            let r = c
                .iter()
                .map(|&ck| {
                    let lo = (-k - ck).div_euclid(n) + i64::from((-k - ck).rem_euclid(n) != 0);
                    (lo, (k - ck).div_euclid(n))
                })
                .collect();
            (r, false)
        }
        Truncation::Corrected { .. } => {
            sym.check_convergent(d)?;
            (vec![(-DIRECT_RADIUS, DIRECT_RADIUS); d], true)
        }
    };
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return Ok(0.0);
    }
    let mut acc = CompensatedSum::new();
    let mut beta: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        let mut n2 = 0.0;
        for k in 0..d {
            let m = (c[k] + n * beta[k]) as f64;
            n2 += m * m;
        }
        if n2 > 0.0 {
            acc.add(sym.at_norm_sq(n2));
        }
        let mut k = d;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            if beta[k] < ranges[k].1 {
                beta[k] += 1;
                break;
            }
            beta[k] = ranges[k].0;
        }
    }
    if corrected {
        // Cell-averaged integral over the complement of [-a, a]^d with the
        // second-order shift and midpoint corrections.
        let a = DIRECT_RADIUS as f64 + 0.5;
        let nf = n as f64;
        let x2: f64 = c.iter().map(|&ck| (ck as f64 / nf).powi(2)).sum();
        let df = d as f64;
        for (coef, p) in sym.asymptotic_terms(nf * a)? {
            let ip = a.powf(df - p) * cube_complement_integral(d, p);
            let ip2 = a.powf(df - p - 2.0) * cube_complement_integral(d, p + 2.0);
            let shape = ip + p * (p + 2.0 - df) * (x2 / (2.0 * df) - 1.0 / 24.0) * ip2;
            acc.add(coef * nf.powf(-p) * shape);
        }
    }
    Ok(acc.value())
}

/// `Σ_{β} λ(c + 2^q β)` over the alias class of `c`, zero frequency excluded.
pub fn alias_sum(sym: &MaternLike, c: &[i64], q: u32, trunc: &Truncation, tol: f64) -> Result<f64> {
    match c.len() {
        0 => invalid("empty frequency vector"),
        1 => alias_sum_1d(sym, c[0], q, trunc, tol),
        _ => alias_sum_nd(sym, c, q, trunc),
    }
}

/// Alias sums for every class of `B_q^d`, in FFT storage order.
pub fn alias_table(sym: &MaternLike, q: u32, d: usize, trunc: &Truncation, tol: f64) -> Result<Vec<f64>> {
    let bx = crate::torus::lattice::FrequencyBox::new(q, d);
    if d == 1 {
        let n = bx.side();
        let mut out = vec![0.0; n];
        for i in 0..=n / 2 {
            let v = alias_sum_1d(sym, i as i64, q, trunc, tol)?;
            out[i] = v;
            if i > 0 && i < n {
                out[(n - i) % n] = v;
            }
        }
        return Ok(out);
    }
    (0..bx.len())
        .map(|i| alias_sum_nd(sym, &bx.frequency_at(i), q, trunc))
        .collect()
}

/// `M_q^t(m) = Σ_β |m + 2^q β|^{-2t}` (with `β ≠ 0` when `m ≡ 0`).
pub fn periodized_symbol(m: &[i64], q: u32, t: f64, tol: f64) -> Result<f64> {
    let sym = MaternLike::power(t);
    sym.check_convergent(m.len())?;
    let v = alias_sum(&sym, m, q, &Truncation::Corrected { half_width: 0 }, tol)?;
    Ok(v * FOUR_PI_SQ.powf(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodized_symbol_examples() {
        let v0 = periodized_symbol(&[0], 3, 1.0, 1e-12).unwrap();
        assert!((v0 / (PI * PI / 3.0 / 64.0) - 1.0).abs() < 1e-13);
        let v1 = periodized_symbol(&[1], 3, 1.0, 1e-12).unwrap();
        let closed = PI * PI / (PI / 8.0).sin().powi(2) / 64.0;
        assert!((v1 / closed - 1.0).abs() < 1e-13);
        let a = periodized_symbol(&[9], 3, 1.7, 1e-12).unwrap();
        let b = periodized_symbol(&[1], 3, 1.7, 1e-12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergent_exponent_rejected() {
        assert!(matches!(
            periodized_symbol(&[1], 3, 0.5, 1e-12),
            Err(Error::DivergentExponent { .. })
        ));
        assert!(periodized_symbol(&[1, 0], 3, 1.0, 1e-12).is_err());
    }

    #[test]
    fn radial_derivatives_match_finite_differences() {
        let sym = MaternLike::new(1.3, 2.0, 1.7).unwrap();
        let r = 3.0;
        let d = sym.radial_derivatives(r, 4);
        let h = 1e-3;
        for k in 0..3 {
            let fd = (sym.radial_derivatives(r + h, k)[k] - sym.radial_derivatives(r - h, k)[k]) / (2.0 * h);
            assert!((fd / d[k + 1] - 1.0).abs() < 1e-5, "order {k}");
        }
    }

    #[test]
    fn tail_integral_matches_quadrature() {
        let sym = MaternLike::new(1.0, 3.0, 1.3).unwrap();
        let r0 = 70.0;
        // r = r0·u^{-α} with α = 1/(2s-1) flattens the leading power.
        let alpha = 1.0 / (2.0 * sym.s - 1.0);
        let (x, w) = gauss_legendre(60, 0.0, 1.0);
        let quad: f64 = x
            .iter()
            .zip(&w)
            .map(|(u, w)| w * sym.radial(r0 * u.powf(-alpha)) * alpha * r0 * u.powf(-alpha - 1.0))
            .sum();
        assert!((sym.tail_integral(r0).unwrap() / quad - 1.0).abs() < 1e-10);
    }

    #[test]
    fn corrected_2d_against_large_sharp_sum() {
        let sym = MaternLike::power(2.0);
        let c = [1i64, -2];
        let corrected = alias_sum(&sym, &c, 2, &Truncation::Corrected { half_width: 0 }, 1e-12).unwrap();
        // Sharp sum with a large box plus a crude tail estimate of the rest
        let sharp = alias_sum(&sym, &c, 2, &Truncation::Sharp { half_width: 2000 }, 1e-12).unwrap();
        // classes are spaced by 4 per axis, so cells have area 16
        let a = 2002.0f64;
        let rest = sym.asymptotic_terms(a).unwrap()[0].0 / 16.0 * a.powf(2.0 - 4.0) * cube_complement_integral(2, 4.0);
        assert!(((sharp + rest) / corrected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sharp_excludes_zero_frequency() {
        let sym = MaternLike::power(1.0);
        let v = alias_sum(&sym, &[0], 2, &Truncation::Sharp { half_width: 4 }, 1e-12).unwrap();
        assert!((v - 2.0 * sym.radial(4.0)).abs() < 1e-18);
    }
}
