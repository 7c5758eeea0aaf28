//! Fourier-domain closed forms for GPR on the torus with lattice data.
//!
//! For a stationary kernel with symbol `λ` and data on `X_q`, every
//! quantity of the matrix path diagonalizes over the alias classes
//! `c ∈ B_q^d`. Writing `P_q(c) = Σ_β λ(c + 2^q β)` and `T_q(c)` for the
//! normalized DFT of the data:
//!
//! * Gram eigenvalues are `2^{qd} P_q(c)`;
//! * the interpolant has coefficients `λ(m) T_q(m̄) / P_q(m̄)`;
//! * its native norm is `Σ_c |T_q(c)|² / P_q(c)`.
//!
//! For the power symbol `(4π²|m|²)^{-t}` these are the `M_q^t` formulas.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::numeric::compensated_sum;
use crate::torus::lattice::canonical_component;
use crate::torus::{FrequencyBox, GridField, KlDraw, MaternLike, SpectralField, SpectralKernel, TorusLattice, Truncation};

/// Default tolerance for periodized symbols used by the power-symbol API.
pub const SYMBOL_TOL: f64 = 1e-12;

fn power_kernel(t: f64, d: usize) -> Result<SpectralKernel> {
    let sym = MaternLike::power(t);
    sym.check_convergent(d)?;
    Ok(SpectralKernel::new(d, sym, Truncation::Corrected { half_width: 0 }).with_tol(SYMBOL_TOL))
}

/// Alias sums of a kernel at level `q`, validated positive.
fn table(kernel: &SpectralKernel, q: u32) -> Result<Vec<f64>> {
    let p = kernel.alias_table(q)?;
    if let Some(i) = p.iter().position(|v| !(*v > 0.0)) {
        return invalid(format!("alias sum vanishes at class {i}; the truncation box is too small"));
    }
    Ok(p)
}

fn check_level(tq: &SpectralField, kernel: &SpectralKernel) -> Result<()> {
    if tq.d != kernel.d {
        return invalid("coefficient dimension does not match the kernel");
    }
    Ok(())
}

/// Coefficients of the interpolant on the box `B_level^d` (`level ≥ q`).
pub fn interpolant_coeffs_for(kernel: &SpectralKernel, tq: &SpectralField, level: u32) -> Result<SpectralField> {
    check_level(tq, kernel)?;
    if level < tq.q {
        return invalid("output box must contain the alias cell");
    }
    let p = table(kernel, tq.q)?;
    let coarse = tq.frequency_box();
    let out_box = FrequencyBox::new(level, tq.d);
    let mut out = SpectralField::zeros(level, tq.d);
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        let m = out_box.frequency_at(i);
        let lam = kernel.symbol.at(&m);
        if lam == 0.0 || (kernel.truncation.is_sharp() && m.iter().any(|v| v.unsigned_abs() > kernel.truncation.half_width())) {
            continue;
        }
        let k = coarse.index_of(&m);
        *c = tq.coeffs[k] * (lam / p[k]);
    }
    Ok(out)
}

/// Interpolant coefficients for the power symbol of exponent `t`.
pub fn interpolant_coeffs(tq: &SpectralField, t: f64, level: u32) -> Result<SpectralField> {
    interpolant_coeffs_for(&power_kernel(t, tq.d)?, tq, level)
}

/// Values of the interpolant on the finer lattice `X_level`, exact through
/// the fine alias sums `P_level(c) T_q(c) / P_q(c)`.
pub fn interpolant_on_lattice(kernel: &SpectralKernel, tq: &SpectralField, level: u32) -> Result<GridField> {
    check_level(tq, kernel)?;
    if level < tq.q {
        return invalid("evaluation lattice must contain the data lattice");
    }
    let p = table(kernel, tq.q)?;
    let fine = kernel.alias_table(level)?;
    let coarse = tq.frequency_box();
    let out_box = FrequencyBox::new(level, tq.d);
    let mut out = SpectralField::zeros(level, tq.d);
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        let k = coarse.index_of(&out_box.frequency_at(i));
        *c = tq.coeffs[k] * (fine[i] / p[k]);
    }
    GridField::torus(TorusLattice::new(level, tq.d), out.lattice_values())
}

/// `Σ_{m≠0} (4π²|m|²)^t |c_m|²` over the retained coefficients.
pub fn ht_norm_sq(field: &SpectralField, t: f64) -> f64 {
    let bx = field.frequency_box();
    compensated_sum(field.coeffs.iter().enumerate().filter_map(|(i, c)| {
        let m = bx.frequency_at(i);
        let n2: f64 = m.iter().map(|&v| (v * v) as f64).sum();
        (n2 > 0.0).then(|| (4.0 * std::f64::consts::PI * std::f64::consts::PI * n2).powf(t) * c.norm_sqr())
    }))
}

/// Native-space norm `Σ_c |T_q(c)|² / P_q(c)` of the interpolant.
pub fn interpolant_norm_sq_for(kernel: &SpectralKernel, tq: &SpectralField) -> Result<f64> {
    check_level(tq, kernel)?;
    let p = table(kernel, tq.q)?;
    Ok(compensated_sum(tq.coeffs.iter().zip(&p).map(|(c, p)| c.norm_sqr() / p)))
}

/// `‖u(·,t,q)‖_t²` for the power symbol.
pub fn interpolant_ht_norm_sq(tq: &SpectralField, t: f64) -> Result<f64> {
    interpolant_norm_sq_for(&power_kernel(t, tq.d)?, tq)
}

fn check_fold(tq: &SpectralField, tqm1: &SpectralField) -> Result<()> {
    if tq.q == 0 || tqm1.q + 1 != tq.q || tqm1.d != tq.d {
        return invalid("coarse coefficients must live one level below the fine ones");
    }
    let folded = tq.fold(tqm1.q)?;
    let dev = folded.max_abs_diff(tqm1);
    if dev > 1e-10 * tq.max_abs().max(1.0) {
        return Err(Error::InconsistentPeriodization { deviation: dev });
    }
    Ok(())
}

/// `‖u(·,q) - u(·,q-1)‖²` in the native norm:
/// `Σ_c P_q(c) |T_q(c)/P_q(c) - T_{q-1}(c')/P_{q-1}(c')|²`.
pub fn interaction_norm_sq_for(kernel: &SpectralKernel, tq: &SpectralField, tqm1: &SpectralField) -> Result<f64> {
    check_level(tq, kernel)?;
    check_fold(tq, tqm1)?;
    let p = table(kernel, tq.q)?;
    let pc = table(kernel, tqm1.q)?;
    let fine = tq.frequency_box();
    let coarse = tqm1.frequency_box();
    Ok(compensated_sum(tq.coeffs.iter().enumerate().map(|(i, c)| {
        let k = coarse.index_of(&fine.frequency_at(i));
        let diff = c / p[i] - tqm1.coeffs[k] / pc[k];
        p[i] * diff.norm_sqr()
    })))
}

/// Interaction term for the power symbol.
pub fn interaction_ht_norm_sq(tq: &SpectralField, tqm1: &SpectralField, t: f64) -> Result<f64> {
    interaction_norm_sq_for(&power_kernel(t, tq.d)?, tq, tqm1)
}

/// Gram eigenvalues `2^{qd} P_q(c)`, FFT layout over `B_q^d`.
pub fn gram_eigenvalues_for(kernel: &SpectralKernel, q: u32) -> Result<Vec<f64>> {
    let n = FrequencyBox::new(q, kernel.d).len() as f64;
    Ok(table(kernel, q)?.into_iter().map(|p| n * p).collect())
}

/// `2^{qd} (4π²)^{-t} M_q^t(m)` for each `m ∈ B_q^d`.
pub fn gram_eigenvalues(t: f64, q: u32, d: usize) -> Result<Vec<f64>> {
    gram_eigenvalues_for(&power_kernel(t, d)?, q)
}

pub fn log_det_for(kernel: &SpectralKernel, q: u32) -> Result<f64> {
    Ok(compensated_sum(gram_eigenvalues_for(kernel, q)?.into_iter().map(f64::ln)))
}

/// Exact `log det K(t, q)`.
pub fn log_det_spectral(t: f64, q: u32, d: usize) -> Result<f64> {
    log_det_for(&power_kernel(t, d)?, q)
}

/// Spectral EB loss: native norm of the interpolant plus the log det.
pub fn eb_loss_spectral_for(kernel: &SpectralKernel, tq: &SpectralField) -> Result<f64> {
    check_level(tq, kernel)?;
    let p = table(kernel, tq.q)?;
    let n = tq.frequency_box().len() as f64;
    let norm = compensated_sum(tq.coeffs.iter().zip(&p).map(|(c, p)| c.norm_sqr() / p));
    let log_det = compensated_sum(p.iter().map(|p| (n * p).ln()));
    Ok(norm + log_det)
}

pub fn eb_loss_spectral(t: f64, tq: &SpectralField) -> Result<f64> {
    eb_loss_spectral_for(&power_kernel(t, tq.d)?, tq)
}

/// Spectral KF loss: interaction term over interpolant norm.
pub fn kf_loss_spectral_for(kernel: &SpectralKernel, tq: &SpectralField, tqm1: &SpectralField) -> Result<f64> {
    let den = interpolant_norm_sq_for(kernel, tq)?;
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(interaction_norm_sq_for(kernel, tq, tqm1)? / den)
}

pub fn kf_loss_spectral(t: f64, tq: &SpectralField, tqm1: &SpectralField) -> Result<f64> {
    kf_loss_spectral_for(&power_kernel(t, tq.d)?, tq, tqm1)
}

/// Amplitude maximizing the EB likelihood for a unit-amplitude kernel:
/// `sqrt(‖u‖² / 2^{qd})`.
pub fn sigma_eb_spectral(kernel: &SpectralKernel, tq: &SpectralField) -> Result<f64> {
    let n = tq.frequency_box().len() as f64;
    Ok((interpolant_norm_sq_for(kernel, tq)? / n).sqrt())
}

/// Alias tables at levels `q` and `q-1` for one kernel, reused across data
/// sets observed on the same lattice.
#[derive(Clone, Debug)]
pub struct SpectralLosses {
    pub q: u32,
    pub d: usize,
    fine: Vec<f64>,
    coarse: Vec<f64>,
    parent: Vec<usize>,
    log_det: f64,
}

impl SpectralLosses {
    pub fn new(kernel: &SpectralKernel, q: u32) -> Result<Self> {
        if q == 0 {
            return invalid("the subsample level needs q ≥ 1");
        }
        let fine = table(kernel, q)?;
        let coarse = table(kernel, q - 1)?;
        let fb = FrequencyBox::new(q, kernel.d);
        let cb = FrequencyBox::new(q - 1, kernel.d);
        let parent = (0..fb.len()).map(|i| cb.index_of(&fb.frequency_at(i))).collect();
        let n = fb.len() as f64;
        let log_det = compensated_sum(fine.iter().map(|p| (n * p).ln()));
        Ok(Self { q, d: kernel.d, fine, coarse, parent, log_det })
    }

    fn check(&self, tq: &SpectralField) -> Result<()> {
        if tq.q != self.q || tq.d != self.d {
            return invalid("coefficients do not live on the tabulated lattice");
        }
        Ok(())
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn norm_sq(&self, tq: &SpectralField) -> Result<f64> {
        self.check(tq)?;
        Ok(compensated_sum(tq.coeffs.iter().zip(&self.fine).map(|(c, p)| c.norm_sqr() / p)))
    }

    pub fn eb(&self, tq: &SpectralField) -> Result<f64> {
        Ok(self.norm_sq(tq)? + self.log_det)
    }

    pub fn kf(&self, tq: &SpectralField, tqm1: &SpectralField) -> Result<f64> {
        check_fold(tq, tqm1)?;
        let den = self.norm_sq(tq)?;
        if !(den > 0.0) {
            return Err(Error::ZeroDenominator);
        }
        let num = compensated_sum(tq.coeffs.iter().enumerate().map(|(i, c)| {
            let k = self.parent[i];
            let diff = c / self.fine[i] - tqm1.coeffs[k] / self.coarse[k];
            self.fine[i] * diff.norm_sqr()
        }));
        Ok(num / den)
    }

    /// Closed-form EB amplitude for the tabulated unit-amplitude kernel.
    pub fn sigma_eb(&self, tq: &SpectralField) -> Result<f64> {
        Ok((self.norm_sq(tq)? / self.fine.len() as f64).sqrt())
    }
}

/// Exact `‖u† - u(·,q)‖²_{L²}` for a one-dimensional Karhunen–Loève truth,
/// by Parseval. Inside the truth's box the coefficients are compared
/// directly; beyond it the interpolant's mass is summed per alias class
/// through the alias sums of `λ²`.
pub fn l2_error_sq(kernel: &SpectralKernel, truth: &KlDraw, tq: &SpectralField) -> Result<f64> {
    if kernel.d != 1 || truth.d != 1 || tq.d != 1 {
        return invalid("the L² error oracle is one-dimensional");
    }
    let p = table(kernel, tq.q)?;
    let n = 1i64 << tq.q;
    let k = truth.half_width as i64;
    let bx = tq.frequency_box();
    let ratio: Vec<Complex64> = tq.coeffs.iter().zip(&p).map(|(c, p)| c / p).collect();
    let sharp_cut = if kernel.truncation.is_sharp() { Some(kernel.truncation.half_width() as i64) } else { None };
    let mut inside = Vec::with_capacity(2 * k as usize + 1);
    for m in -k..=k {
        let lam = match sharp_cut {
            Some(c) if m.abs() > c => 0.0,
            _ => kernel.symbol.at(&[m]),
        };
        let interp = ratio[bx.index_of(&[m])] * lam;
        inside.push((truth.coefficient(&[m]) - interp).norm_sqr());
    }
    let mut total = compensated_sum(inside);
    let beyond = match sharp_cut {
        Some(c) if c <= k => 0.0,
        _ => {
            // Σ_{m ≡ c, |m| > K} λ(m)² = P²(c) - Σ_{m ≡ c, |m| ≤ K} λ(m)².
            let sq = kernel.symbol.squared();
            let all = crate::torus::alias_table(&sq, tq.q, 1, &kernel.truncation, SYMBOL_TOL)?;
            let boxed = crate::torus::alias_table(&sq, tq.q, 1, &Truncation::Sharp { half_width: k as u64 }, SYMBOL_TOL)?;
            compensated_sum((0..n as usize).map(|i| {
                let c = canonical_component(i as i64, n);
                let idx = bx.index_of(&[c]);
                ratio[idx].norm_sqr() * (all[idx] - boxed[idx]).max(0.0)
            }))
        }
    };
    total += beyond;
    Ok(total)
}
