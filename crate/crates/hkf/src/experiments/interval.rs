use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimators::ParamKind;
use crate::experiments::config::{ExperimentConfig, KernelSpec, TruthSpec};
use crate::experiments::report::ExperimentReport;
use crate::experiments::torus::read_values;
use crate::experiments::{identity, scalar_estimates, Rows};
use crate::gpr::{eb_loss_with, gram_matrix_with_jitter, kf_loss_with, GramFactorization, KernelModel};
use crate::operators::{
    composite_covariance, fractional_covariance, green_truth, sample_matrix_gaussian, CompositePrecision,
    IntervalGrid, MatrixCovariance, OperatorEigensystem,
};

/// Observation design: every second interior point, with every second
/// observation kept for the KF subsample.
struct Setup {
    grid: IntervalGrid,
    obs: Vec<usize>,
    pts: Vec<Vec<f64>>,
    sub: Vec<usize>,
    sub_pts: Vec<Vec<f64>>,
    laplacian: OperatorEigensystem,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Self {
        let grid = cfg.interval_grid();
        let obs = grid.stride_indices(2);
        let pts: Vec<Vec<f64>> = obs.iter().map(|&i| vec![grid.point(i)]).collect();
        let sub: Vec<usize> = (1..pts.len()).step_by(2).collect();
        let sub_pts = sub.iter().map(|&j| pts[j].clone()).collect();
        Self { grid, obs, pts, sub, sub_pts, laplacian: OperatorEigensystem::laplacian(grid) }
    }
}

enum Truth {
    Random(MatrixCovariance),
    Fixed(Vec<f64>),
}

fn truth(cfg: &ExperimentConfig, st: &Setup) -> Result<Truth> {
    Ok(match &cfg.truth {
        TruthSpec::Operator { coefficient, s } => {
            let eig = OperatorEigensystem::new(coefficient, st.grid)?;
            Truth::Random(fractional_covariance(&eig, *s))
        }
        TruthSpec::Composite { theta, s } => Truth::Random(composite_covariance(*theta, *s, &st.laplacian)?),
        TruthSpec::Green { s, source } => Truth::Fixed(green_truth(*s, *source, &st.laplacian)?.values),
        TruthSpec::File { path } => {
            let v = read_values(path)?;
            if v.len() != st.grid.len() {
                return Err(Error::Config(format!("truth file holds {} values, the grid has {}", v.len(), st.grid.len())));
            }
            Truth::Fixed(v)
        }
        TruthSpec::Matern { .. } => return invalid("interval experiments need an interval truth"),
    })
}

fn observations(cfg: &ExperimentConfig, st: &Setup) -> Result<Vec<Result<Vec<f64>>>> {
    let t = truth(cfg, st)?;
    Ok((0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let full = match &t {
                Truth::Random(cov) => sample_matrix_gaussian(cov, cfg.seed, i as u64)?.values,
                Truth::Fixed(v) => v.clone(),
            };
            Ok(st.obs.iter().map(|&k| full[k]).collect())
        })
        .collect())
}

struct Grams {
    full: GramFactorization,
    coarse: GramFactorization,
}

/// Kernel family at the free parameter `v` (an exponent, or a breakpoint
/// for the composite family).
fn kernel_model(cfg: &ExperimentConfig, st: &Setup, op: Option<&OperatorEigensystem>, v: f64) -> Result<KernelModel> {
    Ok(match &cfg.kernel {
        KernelSpec::Operator { .. } => {
            let eig = op.ok_or_else(|| Error::Config("operator eigensystem missing".into()))?;
            KernelModel::Matrix(fractional_covariance(eig, v))
        }
        KernelSpec::Laplacian => KernelModel::Matrix(fractional_covariance(&st.laplacian, v)),
        KernelSpec::Composite { s } => {
            // Integer exponents without jitter use the sparse precision route.
            if *s >= 0.0 && s.fract() == 0.0 && cfg.jitter == 0.0 {
                KernelModel::Markov(CompositePrecision::new(v, *s as u32, st.grid)?)
            } else {
                KernelModel::Matrix(composite_covariance(v, *s, &st.laplacian)?)
            }
        }
        KernelSpec::Matern { .. } => return invalid("interval experiments need an interval kernel"),
    })
}

fn grams(cfg: &ExperimentConfig, st: &Setup, op: Option<&OperatorEigensystem>, v: f64) -> Result<Grams> {
    let k = kernel_model(cfg, st, op, v)?;
    Ok(Grams {
        full: gram_matrix_with_jitter(&k, &st.pts, cfg.jitter)?,
        coarse: gram_matrix_with_jitter(&k, &st.sub_pts, cfg.jitter)?,
    })
}

fn run_scalar(cfg: &ExperimentConfig, kind: ParamKind, rows: &mut Rows) -> Result<Setup> {
    let st = Setup::new(cfg);
    let op = match &cfg.kernel {
        KernelSpec::Operator { coefficient } => Some(OperatorEigensystem::new(coefficient, st.grid)?),
        _ => None,
    };
    let data = observations(cfg, &st)?;
    let (lo, hi) = cfg.bounds(kind);
    let mut settings = cfg.estimator.clone();
    if kind == ParamKind::Theta {
        // The discretized operator only changes when θ crosses a cell
        // midpoint, so the loss is constant on cells of width h; the grid
        // must place a point in every cell.
        let per_cell = ((hi - lo) / st.grid.h()).ceil() as usize + 1;
        settings.coarse_n = settings.coarse_n.max(per_cell);
    }
    let model = |v: f64| grams(cfg, &st, op.as_ref(), v);
    let eb = |g: &Grams, y: &Vec<f64>| eb_loss_with(&g.full, y);
    let kf = |g: &Grams, y: &Vec<f64>| kf_loss_with(&g.full, &g.coarse, &st.sub, y);
    let res = scalar_estimates(&data, lo, hi, &settings, &model, &[&eb, &kf]);
    for i in 0..cfg.instances {
        rows.push(i, "eb", &[kind.name()], &res[0][i], &identity);
        rows.push(i, "kf", &[kind.name()], &res[1][i], &identity);
    }
    let kf_losses: Vec<f64> = rows.curves.iter().filter(|c| c.method == "kf" && c.loss.is_finite()).map(|c| c.loss).collect();
    if !kf_losses.is_empty() {
        rows.derived.insert("kf_loss_min".into(), kf_losses.iter().cloned().fold(f64::INFINITY, f64::min));
        rows.derived.insert("kf_loss_max".into(), kf_losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(st)
}

/// Regularity estimates for a variable-coefficient truth, under either the
/// matching operator family or the Dirichlet Laplacian family.
pub fn run_varcoef(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rows = Rows::default();
    run_scalar(cfg, ParamKind::S, &mut rows)?;
    if let TruthSpec::Operator { s, .. } = cfg.truth {
        rows.reference("eb", "s", s);
        rows.reference("kf", "s", (s - 0.5) / 2.0);
    }
    Ok(rows.finish(cfg, Vec::new()))
}

/// Breakpoint estimates for the composite conductivity family.
pub fn run_discontinuity(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rows = Rows::default();
    run_scalar(cfg, ParamKind::Theta, &mut rows)?;
    if let TruthSpec::Composite { theta, .. } = cfg.truth {
        rows.reference("eb", "theta", theta);
        rows.reference("kf", "theta", theta);
    }
    let h = cfg.highlight_instance;
    let best = rows
        .curves
        .iter()
        .filter(|c| c.instance == h && c.method == "kf" && c.loss.is_finite())
        .min_by(|a, b| a.loss.total_cmp(&b.loss).then(a.param_value.total_cmp(&b.param_value)));
    if let Some(c) = best {
        rows.derived.insert("highlight_kf_curve_argmin".into(), c.param_value);
    }
    Ok(rows.finish(cfg, Vec::new()))
}

/// Regularity estimates for the deterministic Green-function truth.
pub fn run_deterministic(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rows = Rows::default();
    let st = run_scalar(cfg, ParamKind::S, &mut rows)?;
    if let TruthSpec::Green { s, .. } = cfg.truth {
        rows.reference("eb", "s", 2.0 * s);
        rows.reference("kf", "s", s);
    }
    if let Truth::Fixed(v) = truth(cfg, &st)? {
        let peak = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
        rows.derived.insert("truth_peak_x".into(), st.grid.point(peak));
    }
    Ok(rows.finish(cfg, Vec::new()))
}
