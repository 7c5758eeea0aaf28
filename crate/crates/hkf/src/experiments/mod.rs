//! Configuration-driven experiment runners and their CSV/JSON artifacts.

mod config;
mod interval;
mod report;
mod torus;

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;

pub use config::{EstimatorSettings, Experiment, ExperimentConfig, KernelSpec, ParamBox, QRange, Sweep, TruthSpec};
pub use interval::{run_deterministic, run_discontinuity, run_varcoef};
pub use report::{
    l2_slopes, l2_sweep_argmin, read_csv, summarize, CurveRow, EstimateRow, ExperimentReport, L2Row, Provenance,
    Summary,
};
pub use torus::{run_amplitude, run_joint, run_l2_bias, run_lengthscale, run_oracle_check, run_regularity, torus_data, TorusData};

use crate::error::Result;
use crate::estimators::{coarse_grid, minimize_scalar_from_grid, EstimateResult};

/// Run the experiment named in the configuration.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Regularity => run_regularity(cfg),
        Experiment::L2Bias => run_l2_bias(cfg),
        Experiment::Amplitude => run_amplitude(cfg),
        Experiment::Lengthscale => run_lengthscale(cfg),
        Experiment::Joint => run_joint(cfg),
        Experiment::Varcoef => run_varcoef(cfg),
        Experiment::Discontinuity => run_discontinuity(cfg),
        Experiment::Deterministic => run_deterministic(cfg),
        Experiment::OracleCheck => run_oracle_check(cfg),
    }
}

type LossFn<'a, M, D> = &'a (dyn Fn(&M, &D) -> Result<f64> + Sync);

/// One-dimensional estimates for every `(method, instance)` pair. The model
/// at each coarse-grid value is built once and shared by all instances;
/// golden-section refinement then runs per pair. Returns the coarse curves
/// and results indexed `[method][instance]`.
pub(crate) fn scalar_estimates<D: Sync, M>(
    data: &[Result<D>],
    lo: f64,
    hi: f64,
    settings: &EstimatorSettings,
    model: &(dyn Fn(f64) -> Result<M> + Sync),
    methods: &[LossFn<'_, M, D>],
) -> Vec<Vec<Result<EstimateResult>>> {
    let grid = coarse_grid(lo, hi, settings.coarse_n);
    let scan: Vec<Vec<Vec<f64>>> = grid
        .par_iter()
        .map(|&v| match model(v) {
            Ok(m) => methods
                .iter()
                .map(|loss| {
                    data.iter()
                        .map(|d| match d {
                            Ok(d) => loss(&m, d).unwrap_or(f64::NAN),
                            Err(_) => f64::NAN,
                        })
                        .collect()
                })
                .collect(),
            Err(e) => {
                warn!("model construction failed at {v}: {e}");
                vec![vec![f64::NAN; data.len()]; methods.len()]
            }
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..methods.len()).flat_map(|k| (0..data.len()).map(move |i| (k, i))).collect();
    let mut flat: Vec<Result<EstimateResult>> = pairs
        .par_iter()
        .map(|&(k, i)| {
            let d = match &data[i] {
                Ok(d) => d,
                Err(e) => return Err(crate::error::Error::InvalidInput(format!("instance data unavailable: {e}"))),
            };
            let curve: Vec<(f64, f64)> = grid.iter().enumerate().map(|(g, &v)| (v, scan[g][k][i])).collect();
            let loss = methods[k];
            minimize_scalar_from_grid(curve, |v| model(v).and_then(|m| loss(&m, d)).unwrap_or(f64::NAN), lo, hi, settings.tol)
        })
        .collect();
    let mut out: Vec<Vec<Result<EstimateResult>>> = Vec::new();
    for _ in 0..methods.len() {
        let rest = flat.split_off(data.len());
        out.push(std::mem::replace(&mut flat, rest));
    }
    out
}

/// Accumulates per-instance rows in instance order.
#[derive(Default)]
pub(crate) struct Rows {
    pub estimates: Vec<EstimateRow>,
    pub curves: Vec<CurveRow>,
    pub references: BTreeMap<(String, String), f64>,
    pub derived: BTreeMap<String, f64>,
}

impl Rows {
    pub fn reference(&mut self, method: &str, param: &str, value: f64) {
        self.references.insert((method.to_string(), param.to_string()), value);
    }

    /// Rows for one estimator run; `map` converts the optimization
    /// coordinate `j` into the reported value.
    pub fn push(
        &mut self,
        instance: usize,
        method: &str,
        params: &[&str],
        res: &Result<EstimateResult>,
        map: &dyn Fn(usize, f64) -> f64,
    ) {
        match res {
            Ok(r) => {
                for (j, name) in params.iter().enumerate() {
                    self.estimates.push(EstimateRow {
                        instance,
                        method: method.into(),
                        param_name: (*name).into(),
                        estimate: map(j, r.argmin[j]),
                        min_loss: r.min_loss,
                        hit_boundary: r.hit_boundary[j],
                        status: if r.indeterminate[j] { "indeterminate".into() } else { "ok".into() },
                    });
                }
                for &(v, l) in &r.loss_curve {
                    self.curves.push(CurveRow { instance, method: method.into(), param_value: v, loss: l });
                }
            }
            Err(e) => {
                warn!("instance {instance}, {method}: {e}");
                for name in params {
                    self.estimates.push(EstimateRow {
                        instance,
                        method: method.into(),
                        param_name: (*name).into(),
                        estimate: f64::NAN,
                        min_loss: f64::NAN,
                        hit_boundary: false,
                        status: format!("failed: {e}"),
                    });
                }
            }
        }
    }

    pub fn finish(mut self, cfg: &ExperimentConfig, l2curve: Vec<L2Row>) -> ExperimentReport {
        self.estimates.sort_by(|a, b| a.instance.cmp(&b.instance));
        self.curves.sort_by(|a, b| a.instance.cmp(&b.instance));
        ExperimentReport {
            provenance: Provenance {
                experiment: cfg.experiment.name().into(),
                config_hash: cfg.hash(),
                seed: cfg.seed,
                instances: cfg.instances,
                crate_version: env!("CARGO_PKG_VERSION").into(),
            },
            config: cfg.clone(),
            summaries: summarize(&self.estimates, &self.references),
            derived: self.derived,
            estimates: self.estimates,
            l2curve,
            loss_curves: self.curves,
        }
    }
}

pub(crate) fn identity(_: usize, x: f64) -> f64 {
    x
}

/// Default configurations for every experiment, at desk scale.
pub fn default_config(e: Experiment) -> ExperimentConfig {
    let text = match e {
        Experiment::Regularity => r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5},"q":9}"#,
        Experiment::L2Bias => {
            r#"{"experiment":"l2-bias","truth":{"kind":"matern","s":2.5},"kernel":{"kind":"matern","sharp":true},
               "q":[4,9],"instances":20,"t_values":[0.5,1.0,2.0,3.0],"sweep":{"min":0.6,"max":5.0,"n":45,"q":9}}"#
        }
        Experiment::Amplitude => r#"{"experiment":"amplitude","truth":{"kind":"matern","s":2.5},"q":9}"#,
        Experiment::Lengthscale => r#"{"experiment":"lengthscale","truth":{"kind":"matern","s":2.5,"tau":1.0},"q":9}"#,
        Experiment::Joint => r#"{"experiment":"joint","truth":{"kind":"matern","s":2.5},"q":9}"#,
        Experiment::Varcoef => {
            r#"{"experiment":"varcoef","q":9,
               "truth":{"kind":"operator","coefficient":{"kind":"piecewise","left":1.0,"right":2.0,"breakpoint":0.5},"s":2.5},
               "kernel":{"kind":"operator","coefficient":{"kind":"piecewise","left":1.0,"right":2.0,"breakpoint":0.5}}}"#
        }
        Experiment::Discontinuity => {
            r#"{"experiment":"discontinuity","q":9,"truth":{"kind":"composite","theta":0.5,"s":1.0},
               "kernel":{"kind":"composite","s":1.0}}"#
        }
        Experiment::Deterministic => {
            r#"{"experiment":"deterministic","q":9,"instances":1,"truth":{"kind":"green","s":1.2,"source":0.5},
               "kernel":{"kind":"laplacian"}}"#
        }
        Experiment::OracleCheck => {
            r#"{"experiment":"oracle-check","truth":{"kind":"matern","s":2.5},"q":[3,6],"instances":10,
               "t_values":[0.8,1.5,2.5]}"#
        }
    };
    ExperimentConfig::from_json(text).expect("built-in configuration is valid")
}
