use std::path::Path;

use faer::Side;
use log::info;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimators::{minimize_simplex, ParamKind};
use crate::experiments::config::{ExperimentConfig, KernelSpec, TruthSpec};
use crate::experiments::report::{l2_slopes, l2_sweep_argmin, ExperimentReport, L2Row};
use crate::experiments::{identity, scalar_estimates, Rows};
use crate::gpr::{conditional_mean_with, eb_loss_with, gram_matrix, gram_matrix_with_jitter, kf_loss_with, KernelModel, SubsampleScheme};
use crate::oracle::{gram_eigenvalues_for, interpolant_on_lattice, l2_error_sq, SpectralLosses};
use crate::torus::{dft_alias, kl_draw, GridField, KlDraw, MaternLike, SpectralField, SpectralKernel, TorusLattice, Truncation};

/// Data of one torus instance: values on `X_q` and their alias coefficients
/// at levels `q` and `q-1`.
#[derive(Clone, Debug)]
pub struct TorusData {
    pub draw: Option<KlDraw>,
    pub obs: GridField,
    pub tq: SpectralField,
    pub tqm1: SpectralField,
}

pub(crate) fn read_values(path: &Path) -> Result<Vec<f64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Config(format!("{}: line {} is not a number", path.display(), i + 1))),
        }
    }
    Ok(out)
}

/// Truth sampled on `X_{q+1}` and observed on `X_q`.
pub fn torus_data(cfg: &ExperimentConfig, q: u32, instance: usize) -> Result<TorusData> {
    let d = cfg.d;
    let (draw, fine) = match &cfg.truth {
        TruthSpec::Matern { sigma, tau, s, .. } => {
            let sym = MaternLike::new(*sigma, *tau, *s)?;
            sym.check_convergent(d)?;
            let draw = kl_draw(&sym, d, cfg.truth_half_width(), cfg.seed, instance as u64);
            let fine = draw.evaluate(TorusLattice::new(q + 1, d))?;
            (Some(draw), fine)
        }
        TruthSpec::File { path } => {
            let v = read_values(path)?;
            let level = (1..=24).find(|&l| 1usize << (l * d as u32) == v.len());
            match level {
                Some(l) if l > q => (None, GridField::torus(TorusLattice::new(l, d), v)?.restrict(q + 1)?),
                _ => return Err(Error::Config(format!("truth file holds {} values, not a lattice above level {q}", v.len()))),
            }
        }
        _ => return invalid("torus experiments need a matern or file truth"),
    };
    let obs = fine.restrict(q)?;
    let tq = dft_alias(&obs)?;
    let tqm1 = dft_alias(&obs.restrict(q - 1)?)?;
    Ok(TorusData { draw, obs, tq, tqm1 })
}

struct Fixed {
    sigma: f64,
    tau: f64,
    s: Option<f64>,
    sharp: bool,
}

fn fixed(cfg: &ExperimentConfig) -> Fixed {
    let (sigma, tau, s, sharp) = match &cfg.kernel {
        KernelSpec::Matern { sigma, tau, s, sharp } => (*sigma, *tau, *s, *sharp),
        _ => (1.0, 0.0, None, false),
    };
    Fixed { sigma, tau, s: s.or_else(|| truth_s(cfg)), sharp }
}

fn truth_s(cfg: &ExperimentConfig) -> Option<f64> {
    match cfg.truth {
        TruthSpec::Matern { s, .. } => Some(s),
        _ => None,
    }
}

fn kernel(cfg: &ExperimentConfig, f: &Fixed, sigma: f64, tau: f64, s: f64, q: u32) -> Result<SpectralKernel> {
    let sym = MaternLike::new(sigma, tau, s)?;
    let trunc = if f.sharp {
        Truncation::Sharp { half_width: cfg.truth_half_width() }
    } else {
        sym.check_convergent(cfg.d)?;
        Truncation::oversampled(q, cfg.truncation_extra)
    };
    Ok(SpectralKernel::new(cfg.d, sym, trunc))
}

fn load_data(cfg: &ExperimentConfig, q: u32) -> Vec<Result<TorusData>> {
    (0..cfg.instances).into_par_iter().map(|i| torus_data(cfg, q, i)).collect()
}

fn eb(m: &SpectralLosses, d: &TorusData) -> Result<f64> {
    m.eb(&d.tq)
}

fn kf(m: &SpectralLosses, d: &TorusData) -> Result<f64> {
    m.kf(&d.tq, &d.tqm1)
}

fn kf_range(rows: &mut Rows) {
    let kf: Vec<f64> = rows.curves.iter().filter(|c| c.method == "kf" && c.loss.is_finite()).map(|c| c.loss).collect();
    if !kf.is_empty() {
        rows.derived.insert("kf_loss_min".into(), kf.iter().cloned().fold(f64::INFINITY, f64::min));
        rows.derived.insert("kf_loss_max".into(), kf.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
}

/// EB and KF estimates of the regularity exponent.
pub fn run_regularity(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let q = cfg.q.hi();
    let f = fixed(cfg);
    let data = load_data(cfg, q);
    let (lo, hi) = cfg.bounds(ParamKind::S);
    let model = |t: f64| SpectralLosses::new(&kernel(cfg, &f, f.sigma, f.tau, t, q)?, q);
    let res = scalar_estimates(&data, lo, hi, &cfg.estimator, &model, &[&eb, &kf]);
    let mut rows = Rows::default();
    for i in 0..cfg.instances {
        rows.push(i, "eb", &["s"], &res[0][i], &identity);
        rows.push(i, "kf", &["s"], &res[1][i], &identity);
    }
    if let Some(s) = truth_s(cfg) {
        rows.reference("eb", "s", s);
        rows.reference("kf", "s", (s - cfg.d as f64 / 2.0) / 2.0);
    }
    kf_range(&mut rows);
    Ok(rows.finish(cfg, Vec::new()))
}

/// Numeric and closed-form EB estimates of the amplitude.
pub fn run_amplitude(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let q = cfg.q.hi();
    let f = fixed(cfg);
    let s = f.s.ok_or_else(|| Error::Config("amplitude needs a fixed kernel exponent".into()))?;
    let data = load_data(cfg, q);
    let (lo, hi) = cfg.bounds(ParamKind::LogSigma);
    let model = |x: f64| SpectralLosses::new(&kernel(cfg, &f, x.exp(), f.tau, s, q)?, q);
    let res = scalar_estimates(&data, lo, hi, &cfg.estimator, &model, &[&eb]);
    let unit = SpectralLosses::new(&kernel(cfg, &f, 1.0, f.tau, s, q)?, q)?;
    let mut rows = Rows::default();
    let mut gap: f64 = 0.0;
    for (i, d) in data.iter().enumerate() {
        rows.push(i, "eb", &["sigma"], &res[0][i], &|_, x| x.exp());
        let closed = d.as_ref().map_err(|e| Error::InvalidInput(e.to_string())).and_then(|d| {
            let sig = unit.sigma_eb(&d.tq)?;
            let n = d.tq.coeffs.len() as f64;
            // Unit-kernel EB loss rescaled to amplitude `sig`.
            let min_loss = unit.norm_sq(&d.tq)? / (sig * sig) + unit.log_det() + n * (sig * sig).ln();
            Ok((sig, min_loss))
        });
        match (&closed, &res[0][i]) {
            (Ok((sig, _)), Ok(r)) => gap = gap.max((sig - r.argmin[0].exp()).abs()),
            _ => gap = f64::NAN,
        }
        let closed = closed.map(|(sig, l)| crate::estimators::EstimateResult {
            argmin: vec![sig],
            min_loss: l,
            loss_curve: Vec::new(),
            hit_boundary: vec![false],
            evaluations: 1,
            restart_spread: vec![0.0],
            indeterminate: vec![false],
        });
        rows.push(i, "eb-closed-form", &["sigma"], &closed, &identity);
    }
    if let TruthSpec::Matern { sigma, .. } = cfg.truth {
        rows.reference("eb", "sigma", sigma);
        rows.reference("eb-closed-form", "sigma", sigma);
    }
    rows.derived.insert("max_closed_form_gap".into(), gap);
    Ok(rows.finish(cfg, Vec::new()))
}

/// EB and KF estimates of `log τ` with `σ` and `s` fixed.
pub fn run_lengthscale(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let q = cfg.q.hi();
    let f = fixed(cfg);
    let s = f.s.ok_or_else(|| Error::Config("lengthscale needs a fixed kernel exponent".into()))?;
    let data = load_data(cfg, q);
    let (lo, hi) = cfg.bounds(ParamKind::LogTau);
    let model = |x: f64| SpectralLosses::new(&kernel(cfg, &f, f.sigma, x.exp(), s, q)?, q);
    let res = scalar_estimates(&data, lo, hi, &cfg.estimator, &model, &[&eb, &kf]);
    let mut rows = Rows::default();
    for i in 0..cfg.instances {
        rows.push(i, "eb", &["log_tau"], &res[0][i], &identity);
        rows.push(i, "kf", &["log_tau"], &res[1][i], &identity);
    }
    let tol = cfg.estimator.tol;
    for m in ["eb", "kf"] {
        let at_upper = rows.estimates.iter().filter(|r| r.method == m && !r.failed() && hi - r.estimate <= tol).count();
        rows.derived.insert(format!("{m}_upper_bound_fraction"), at_upper as f64 / cfg.instances as f64);
    }
    kf_range(&mut rows);
    Ok(rows.finish(cfg, Vec::new()))
}

/// Simultaneous estimation of several parameters by simplex descent.
pub fn run_joint(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let q = cfg.q.hi();
    let f = fixed(cfg);
    let kinds: Vec<ParamKind> = if cfg.estimator.params.is_empty() {
        vec![ParamKind::S, ParamKind::LogSigma]
    } else {
        cfg.estimator.params.iter().map(|p| p.name).collect()
    };
    if kinds.contains(&ParamKind::Theta) {
        return Err(Error::Config("theta is not a torus kernel parameter".into()));
    }
    let bounds: Vec<(f64, f64)> = kinds.iter().map(|k| cfg.bounds(*k)).collect();
    let start: Vec<f64> = bounds.iter().map(|(lo, hi)| lo + 0.75 * (hi - lo)).collect();
    let data = load_data(cfg, q);
    let model = |p: &[f64]| -> Result<SpectralLosses> {
        let (mut sigma, mut tau, mut s) = (f.sigma, f.tau, f.s.unwrap_or(1.0));
        for (k, v) in kinds.iter().zip(p) {
            match k {
                ParamKind::S => s = *v,
                ParamKind::LogSigma => sigma = v.exp(),
                ParamKind::LogTau => tau = v.exp(),
                ParamKind::Theta => {}
            }
        }
        SpectralLosses::new(&kernel(cfg, &f, sigma, tau, s, q)?, q)
    };
    let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
    let tol = cfg.estimator.simplex_tol;
    let results: Vec<[Result<crate::estimators::EstimateResult>; 2]> = data
        .par_iter()
        .map(|d| match d {
            Ok(d) => [
                minimize_simplex(|p| model(p).and_then(|m| eb(&m, d)).unwrap_or(f64::NAN), &start, &bounds, tol),
                minimize_simplex(|p| model(p).and_then(|m| kf(&m, d)).unwrap_or(f64::NAN), &start, &bounds, tol),
            ],
            Err(e) => [Err(Error::InvalidInput(e.to_string())), Err(Error::InvalidInput(e.to_string()))],
        })
        .collect();
    let mut rows = Rows::default();
    for (i, r) in results.iter().enumerate() {
        rows.push(i, "eb", &names, &r[0], &identity);
        rows.push(i, "kf", &names, &r[1], &identity);
    }
    if let TruthSpec::Matern { sigma, tau, s, .. } = cfg.truth {
        for k in &kinds {
            match k {
                ParamKind::S => {
                    rows.reference("eb", "s", s);
                    rows.reference("kf", "s", (s - cfg.d as f64 / 2.0) / 2.0);
                }
                ParamKind::LogSigma if sigma != 1.0 => rows.reference("eb", "log_sigma", sigma.ln()),
                ParamKind::LogTau if tau > 0.0 && tau != 1.0 => rows.reference("eb", "log_tau", tau.ln()),
                _ => {}
            }
        }
    }
    Ok(rows.finish(cfg, Vec::new()))
}

/// Mean squared L² error of the interpolant for fixed kernel exponents,
/// across levels and along a fixed-level sweep.
pub fn run_l2_bias(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let f = fixed(cfg);
    let levels = cfg.q.levels();
    let mut pairs: Vec<(f64, u32)> = Vec::new();
    for &t in &cfg.t_values {
        for &q in &levels {
            pairs.push((t, q));
        }
    }
    if let Some(sw) = &cfg.sweep {
        for k in 0..sw.n {
            let t = sw.min + (sw.max - sw.min) * k as f64 / (sw.n - 1) as f64;
            let t = (t * 1e10).round() / 1e10;
            if !pairs.contains(&(t, sw.q)) {
                pairs.push((t, sw.q));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut all_levels: Vec<u32> = pairs.iter().map(|p| p.1).collect();
    all_levels.sort_unstable();
    all_levels.dedup();
    let errors: Vec<Vec<f64>> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let per_level: Vec<(u32, Result<TorusData>)> = all_levels.iter().map(|&q| (q, torus_data(cfg, q, i))).collect();
            pairs
                .iter()
                .map(|&(t, q)| {
                    let d = match per_level.iter().find(|p| p.0 == q) {
                        Some((_, Ok(d))) => d,
                        _ => return f64::NAN,
                    };
                    let truth = match &d.draw {
                        Some(dr) => dr,
                        None => return f64::NAN,
                    };
                    kernel(cfg, &f, f.sigma, f.tau, t, q)
                        .and_then(|k| l2_error_sq(&k, truth, &d.tq))
                        .unwrap_or(f64::NAN)
                })
                .collect()
        })
        .collect();
    let l2: Vec<L2Row> = pairs
        .iter()
        .enumerate()
        .map(|(j, &(t, q))| {
            let v: Vec<f64> = errors.iter().map(|e| e[j]).filter(|x| x.is_finite()).collect();
            L2Row {
                t,
                q,
                mean_sq_error: if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 },
                n_instances: v.len(),
            }
        })
        .collect();
    let mut rows = Rows::default();
    rows.derived = l2_slopes(&l2, &levels);
    if let Some(sw) = &cfg.sweep {
        if let Some(t) = l2_sweep_argmin(&l2, sw.q) {
            rows.derived.insert("sweep_argmin".into(), t);
        }
    }
    Ok(rows.finish(cfg, l2))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Matrix-path versus spectral-path agreement for EB loss, KF loss,
/// conditional mean on `X_{q+2}` and the sorted Gram spectrum.
pub fn run_oracle_check(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let f = fixed(cfg);
    let ts = if cfg.t_values.is_empty() { vec![0.8, 1.5, 2.5] } else { cfg.t_values.clone() };
    let mut cases = Vec::new();
    for q in cfg.q.levels() {
        for &t in &ts {
            for i in 0..cfg.instances {
                cases.push((q, t, i));
            }
        }
    }
    let errs: Vec<Result<[f64; 4]>> = cases
        .par_iter()
        .map(|&(q, t, i)| {
            let d = torus_data(cfg, q, i)?;
            let k = kernel(cfg, &f, f.sigma, f.tau, t, q)?;
            let losses = SpectralLosses::new(&k, q)?;
            let model = KernelModel::Torus(k.clone());
            let pts = TorusLattice::new(q, cfg.d).points();
            let y = &d.obs.values;
            let g = gram_matrix_with_jitter(&model, &pts, cfg.jitter)?;
            let sub = SubsampleScheme::CoarsenByTwo.select(&model, &pts)?;
            let sub_pts: Vec<Vec<f64>> = sub.iter().map(|&j| pts[j].clone()).collect();
            let coarse = gram_matrix(&model, &sub_pts)?;
            let e_eb = rel(eb_loss_with(&g, y)?, losses.eb(&d.tq)?);
            let e_kf = rel(kf_loss_with(&g, &coarse, &sub, y)?, losses.kf(&d.tq, &d.tqm1)?);
            let fine = TorusLattice::new(q + 2, cfg.d).points();
            let cm = conditional_mean_with(&model, &g, &pts, y, &fine)?;
            let sm = interpolant_on_lattice(&k, &d.tq, q + 2)?.values;
            let num: f64 = cm.iter().zip(&sm).map(|(a, b)| (a - b) * (a - b)).sum();
            let den: f64 = sm.iter().map(|b| b * b).sum();
            let e_mean = (num / den).sqrt();
            let dense = k.gram(&pts)?;
            let mut a = dense
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::InvalidInput(format!("eigensolver failed: {e:?}")))?;
            let mut b = gram_eigenvalues_for(&k, q)?;
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let e_spec = a.iter().zip(&b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max);
            info!("oracle q={q} t={t} instance={i}: {e_eb:.2e} {e_kf:.2e} {e_mean:.2e} {e_spec:.2e}");
            Ok([e_eb, e_kf, e_mean, e_spec])
        })
        .collect();
    let mut rows = Rows::default();
    let mut worst = [0.0f64; 4];
    let mut failures = 0usize;
    for e in &errs {
        match e {
            Ok(v) => {
                for k in 0..4 {
                    worst[k] = if v[k].is_nan() { f64::NAN } else { worst[k].max(v[k]) };
                }
            }
            Err(err) => {
                log::warn!("oracle case failed: {err}");
                failures += 1;
            }
        }
    }
    for (k, name) in ["max_rel_eb", "max_rel_kf", "max_rel_mean", "max_rel_spectrum"].iter().enumerate() {
        rows.derived.insert((*name).into(), worst[k]);
    }
    rows.derived.insert("cases".into(), cases.len() as f64);
    rows.derived.insert("failed_cases".into(), failures as f64);
    Ok(rows.finish(cfg, Vec::new()))
}
