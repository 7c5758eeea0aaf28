//! Bounded scalar and simplex minimization, parameter boxes and the
//! closed-form amplitude estimator.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gpr::GramFactorization;

pub const DEFAULT_COARSE_N: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_DELTA: f64 = 0.1;
const MAX_RESTARTS: usize = 8;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// A free parameter of a kernel family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    S,
    LogSigma,
    LogTau,
    Theta,
}

impl ParamKind {
    pub fn name(&self) -> &'static str {
        match self {
            ParamKind::S => "s",
            ParamKind::LogSigma => "log_sigma",
            ParamKind::LogTau => "log_tau",
            ParamKind::Theta => "theta",
        }
    }

    /// Map from the optimization coordinate to the model parameter.
    pub fn to_model(&self, x: f64) -> f64 {
        match self {
            ParamKind::LogSigma | ParamKind::LogTau => x.exp(),
            ParamKind::S | ParamKind::Theta => x,
        }
    }

    /// Default box; `d` and `delta` set the regularity interval `[d/2+δ, 1/δ]`.
    pub fn default_bounds(&self, d: usize, delta: f64) -> (f64, f64) {
        match self {
            ParamKind::S => (d as f64 / 2.0 + delta, 1.0 / delta),
            ParamKind::LogSigma => (-5.0, 5.0),
            ParamKind::LogTau => (-2.0, 2.0),
            ParamKind::Theta => (0.3, 0.7),
        }
    }
}

/// Free parameters with their optimization boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub params: Vec<(ParamKind, f64, f64)>,
}

impl ParamSpace {
    pub fn new(params: Vec<(ParamKind, f64, f64)>) -> Result<Self> {
        if params.is_empty() || params.len() > 4 {
            return invalid("between one and four free parameters are supported");
        }
        for (k, lo, hi) in &params {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return invalid(format!("invalid bounds [{lo}, {hi}] for {}", k.name()));
            }
        }
        Ok(Self { params })
    }

    pub fn with_defaults(kinds: &[ParamKind], d: usize, delta: f64) -> Result<Self> {
        Self::new(
            kinds
                .iter()
                .map(|k| {
                    let (lo, hi) = k.default_bounds(d, delta);
                    (*k, lo, hi)
                })
                .collect(),
        )
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.params.iter().map(|(_, lo, hi)| (*lo, *hi)).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.params.iter().map(|(_, lo, hi)| 0.5 * (lo + hi)).collect()
    }
}

/// Outcome of one estimator run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub argmin: Vec<f64>,
    pub min_loss: f64,
    /// Coarse-grid `(parameter, loss)` samples of one-dimensional runs.
    pub loss_curve: Vec<(f64, f64)>,
    pub hit_boundary: Vec<bool>,
    pub evaluations: usize,
    /// Per-coordinate spread of the argmins across simplex restarts.
    pub restart_spread: Vec<f64>,
    /// Coordinates whose restarts disagree by more than the tolerance.
    pub indeterminate: Vec<bool>,
}

/// Uniform grid of `n` points spanning `[lo, hi]`.
pub fn coarse_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

/// Evaluate `loss` on the coarse grid in parallel.
pub fn evaluate_grid(loss: impl Fn(f64) -> f64 + Sync, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    coarse_grid(lo, hi, n).into_par_iter().map(|t| (t, loss(t))).collect()
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.1 < b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Coarse grid search followed by golden-section refinement around the best
/// grid point.
pub fn minimize_scalar(loss: impl Fn(f64) -> f64 + Sync, lo: f64, hi: f64, coarse_n: usize, tol: f64) -> Result<EstimateResult> {
    if !(lo < hi) || coarse_n < 2 || !(tol > 0.0) {
        return invalid("need lo < hi, at least two grid points and a positive tolerance");
    }
    let curve = evaluate_grid(&loss, lo, hi, coarse_n);
    minimize_scalar_from_grid(curve, loss, lo, hi, tol)
}

/// Refinement stage of [`minimize_scalar`] for a precomputed coarse curve.
pub fn minimize_scalar_from_grid(
    curve: Vec<(f64, f64)>,
    loss: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<EstimateResult> {
    let finite: Vec<usize> = (0..curve.len()).filter(|&i| curve[i].1.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::AllNonFinite);
    }
    if finite.len() < curve.len() {
        warn!("{} of {} grid losses were not finite and are ignored", curve.len() - finite.len(), curve.len());
    }
    let mut bi = finite[0];
    for &i in &finite {
        if better(curve[i], curve[bi]) {
            bi = i;
        }
    }
    let mut best = curve[bi];
    let mut a = if bi > 0 { curve[bi - 1].0 } else { curve[bi].0 };
    let mut b = if bi + 1 < curve.len() { curve[bi + 1].0 } else { curve[bi].0 };
    let mut evals = curve.len();
    let consider = |x: f64, f: f64, best: &mut (f64, f64)| {
        if f.is_finite() && better((x, f), *best) {
            *best = (x, f);
        }
    };
    if b - a > tol {
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = loss(c);
        let mut fd = loss(d);
        evals += 2;
        consider(c, fc, &mut best);
        consider(d, fd, &mut best);
        while b - a > tol {
            // Non-finite values count as +∞ so the bracket moves away from them.
            let (vc, vd) = (if fc.is_finite() { fc } else { f64::INFINITY }, if fd.is_finite() { fd } else { f64::INFINITY });
            if vc <= vd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = loss(c);
                consider(c, fc, &mut best);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = loss(d);
                consider(d, fd, &mut best);
            }
            evals += 1;
        }
    }
    let hit = best.0 - lo <= tol || hi - best.0 <= tol;
    Ok(EstimateResult {
        argmin: vec![best.0],
        min_loss: best.1,
        loss_curve: curve,
        hit_boundary: vec![hit],
        evaluations: evals,
        restart_spread: vec![0.0],
        indeterminate: vec![false],
    })
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// One Nelder–Mead run from a feasible start. Points outside the box score
/// `+∞`, so every vertex stays feasible and the simplex cannot flatten
/// against a face.
fn nelder_mead(loss: &impl Fn(&[f64]) -> f64, start: &[f64], bounds: &[(f64, f64)], tol: f64) -> (Vec<f64>, f64, usize) {
    let k = start.len();
    let eval = |x: &[f64]| {
        if x.iter().zip(bounds).any(|(v, (lo, hi))| v < lo || v > hi) {
            return f64::INFINITY;
        }
        let v = loss(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for j in 0..k {
        let (lo, hi) = bounds[j];
        let step = 0.1 * (hi - lo);
        let mut p = start.to_vec();
        p[j] = if p[j] + step <= hi { p[j] + step } else { p[j] - step };
        project(&mut p, bounds);
        simplex.push(p);
    }
    let mut f: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
    let mut evals = k + 1;
    let max_iter = 500 * (k + 1);
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        f = order.iter().map(|&i| f[i]).collect();
        let diam = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diam <= tol && (f[k] - f[0]).abs() <= 1e-12 * (1.0 + f[0].abs()) {
            break;
        }
        if diam <= 1e-3 * tol {
            break;
        }
        let centroid: Vec<f64> = (0..k).map(|j| simplex[..k].iter().map(|p| p[j]).sum::<f64>() / k as f64).collect();
        let along = |c: f64| -> Vec<f64> { (0..k).map(|j| centroid[j] + c * (simplex[k][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr < f[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            evals += 1;
            if fe < fr {
                simplex[k] = xe;
                f[k] = fe;
            } else {
                simplex[k] = xr;
                f[k] = fr;
            }
        } else if fr < f[k - 1] {
            simplex[k] = xr;
            f[k] = fr;
        } else {
            let (xc, fc) = if fr < f[k] {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            evals += 1;
            if fc < f[k].min(fr) {
                simplex[k] = xc;
                f[k] = fc;
            } else {
                for i in 1..=k {
                    let p: Vec<f64> = (0..k).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    f[i] = eval(&p);
                    simplex[i] = p;
                    evals += 1;
                }
            }
        }
    }
    let best = (0..=k).min_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap_or(0);
    (simplex[best].clone(), f[best], evals)
}

/// Derivative-free minimization on a box, restarted from the given start,
/// the box center and the lower-quarter point; the best run is returned.
pub fn minimize_simplex(loss: impl Fn(&[f64]) -> f64, start: &[f64], bounds: &[(f64, f64)], tol: f64) -> Result<EstimateResult> {
    let k = start.len();
    if k == 0 || k > 4 || bounds.len() != k {
        return invalid("between one and four parameters with matching bounds are supported");
    }
    if bounds.iter().any(|(lo, hi)| !(lo < hi)) || !(tol > 0.0) {
        return invalid("invalid bounds or tolerance");
    }
    let mut s0 = start.to_vec();
    project(&mut s0, bounds);
    if !loss(&s0).is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let starts = [
        s0,
        bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
        bounds.iter().map(|(lo, hi)| lo + 0.25 * (hi - lo)).collect::<Vec<f64>>(),
    ];
    let mut runs = Vec::new();
    let mut evals = 1;
    for s in &starts {
        let (mut x, mut f, e) = nelder_mead(&loss, s, bounds, tol / 10.0);
        evals += e;
        // A simplex squashed against a face cannot move along it; restart
        // from the result with a fresh simplex until nothing improves.
        for _ in 0..MAX_RESTARTS {
            let (x2, f2, e2) = nelder_mead(&loss, &x, bounds, tol / 10.0);
            evals += e2;
            let moved = x2.iter().zip(&x).any(|(a, b)| (a - b).abs() > tol / 10.0);
            let better = f2 < f;
            if better {
                x = x2;
                f = f2;
            }
            if !(better && moved) {
                break;
            }
        }
        runs.push((x, f));
    }
    let best = runs
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)))
        .cloned()
        .ok_or(Error::AllNonFinite)?;
    if !best.1.is_finite() {
        return Err(Error::AllNonFinite);
    }
    let spread: Vec<f64> = (0..k)
        .map(|j| {
            let v: Vec<f64> = runs.iter().map(|r| r.0[j]).collect();
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(EstimateResult {
        hit_boundary: best.0.iter().zip(bounds).map(|(x, (lo, hi))| x - lo <= tol || hi - x <= tol).collect(),
        indeterminate: spread.iter().map(|s| *s > tol).collect(),
        argmin: best.0,
        min_loss: best.1,
        loss_curve: Vec::new(),
        evaluations: evals,
        restart_spread: spread,
    })
}

/// `sqrt(yᵀ K^{-1} y / N)` for a unit-amplitude Gram factorization: the
/// maximizer of the marginal likelihood over the amplitude.
pub fn sigma_eb_closed_form(y: &[f64], g: &GramFactorization) -> Result<f64> {
    Ok((g.quad_form(y)? / y.len() as f64).sqrt())
}
