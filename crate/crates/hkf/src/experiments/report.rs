use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::config::ExperimentConfig;
use crate::numeric::{ls_slope, mean, variance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub instance: usize,
    pub method: String,
    pub param_name: String,
    pub estimate: f64,
    pub min_loss: f64,
    pub hit_boundary: bool,
    /// `ok`, `indeterminate`, or `failed: <reason>`.
    pub status: String,
}

impl EstimateRow {
    pub fn failed(&self) -> bool {
        self.status.starts_with("failed")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub instance: usize,
    pub method: String,
    pub param_value: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2Row {
    pub t: f64,
    pub q: u32,
    pub mean_sq_error: f64,
    pub n_instances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub param_name: String,
    pub count: usize,
    pub failures: usize,
    pub mean: f64,
    pub variance: f64,
    /// Limit the estimator is expected to approach, when one is known.
    pub reference: Option<f64>,
    /// `variance / reference²`.
    pub normalized_variance: Option<f64>,
    pub boundary_hits: usize,
    pub indeterminate: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub instances: usize,
    pub crate_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub summaries: Vec<Summary>,
    /// Scalar results that are not per-instance estimates (slopes, errors).
    pub derived: BTreeMap<String, f64>,
    pub estimates: Vec<EstimateRow>,
    pub l2curve: Vec<L2Row>,
    #[serde(skip)]
    pub loss_curves: Vec<CurveRow>,
}

/// Group rows by `(method, param_name)` in first-appearance order.
pub fn summarize(rows: &[EstimateRow], references: &BTreeMap<(String, String), f64>) -> Vec<Summary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.method.clone(), r.param_name.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let group: Vec<&EstimateRow> = rows.iter().filter(|r| r.method == k.0 && r.param_name == k.1).collect();
            let good: Vec<&EstimateRow> = group.iter().copied().filter(|r| !r.failed()).collect();
            let vals: Vec<f64> = good.iter().map(|r| r.estimate).collect();
            let reference = references.get(&k).copied();
            let (m, v) = if vals.is_empty() { (f64::NAN, f64::NAN) } else { (mean(&vals), variance(&vals)) };
            Summary {
                count: good.len(),
                failures: group.len() - good.len(),
                mean: m,
                variance: v,
                normalized_variance: reference.map(|r| v / (r * r)),
                reference,
                boundary_hits: good.iter().filter(|r| r.hit_boundary).count(),
                indeterminate: good.iter().filter(|r| r.status == "indeterminate").count(),
                method: k.0,
                param_name: k.1,
            }
        })
        .collect()
}

/// Least-squares slope of `log₂(mean_sq_error)` against `q` for each `t`,
/// over the levels in `levels`.
pub fn l2_slopes(rows: &[L2Row], levels: &[u32]) -> BTreeMap<String, f64> {
    let mut ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut out = BTreeMap::new();
    for t in ts {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.t == t && levels.contains(&r.q) && r.mean_sq_error > 0.0)
            .map(|r| (r.q as f64, r.mean_sq_error.log2()))
            .collect();
        if pts.len() == levels.len() && pts.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            out.insert(format!("slope_t={t}"), ls_slope(&x, &y));
        }
    }
    out
}

/// `t` minimizing the mean error among rows at level `q`.
pub fn l2_sweep_argmin(rows: &[L2Row], q: u32) -> Option<f64> {
    rows.iter()
        .filter(|r| r.q == q && r.mean_sq_error.is_finite())
        .min_by(|a, b| a.mean_sq_error.total_cmp(&b.mean_sq_error).then(a.t.total_cmp(&b.t)))
        .map(|r| r.t)
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl ExperimentReport {
    pub fn references(&self) -> BTreeMap<(String, String), f64> {
        self.summaries
            .iter()
            .filter_map(|s| s.reference.map(|r| ((s.method.clone(), s.param_name.clone()), r)))
            .collect()
    }

    pub fn summary(&self, method: &str, param: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.method == method && s.param_name == param)
    }

    pub fn rows(&self, method: &str, param: &str) -> Vec<&EstimateRow> {
        self.estimates.iter().filter(|r| r.method == method && r.param_name == param).collect()
    }

    /// Summaries recomputed from the per-instance rows must match exactly.
    pub fn verify(&self) -> Result<()> {
        let again = summarize(&self.estimates, &self.references());
        let same = again.len() == self.summaries.len()
            && again.iter().zip(&self.summaries).all(|(a, b)| {
                let eq = |x: f64, y: f64| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
                let eq_opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
                    (Some(x), Some(y)) => eq(x, y),
                    (None, None) => true,
                    _ => false,
                };
                a.method == b.method
                    && a.param_name == b.param_name
                    && a.count == b.count
                    && a.failures == b.failures
                    && eq(a.mean, b.mean)
                    && eq(a.variance, b.variance)
                    && eq_opt(a.normalized_variance, b.normalized_variance)
                    && a.boundary_hits == b.boundary_hits
                    && a.indeterminate == b.indeterminate
            });
        if !same {
            return Err(Error::Config("summary statistics do not match the per-instance rows".into()));
        }
        Ok(())
    }

    /// Write `estimates.csv`, `loss_curve.csv`, `l2curve.csv` and `report.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("estimates.csv"))?;
        w.write_record(["instance", "method", "param_name", "estimate", "min_loss", "hit_boundary", "status"])?;
        for r in &self.estimates {
            w.write_record([
                r.instance.to_string(),
                r.method.clone(),
                r.param_name.clone(),
                fmt(r.estimate),
                fmt(r.min_loss),
                r.hit_boundary.to_string(),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("loss_curve.csv"))?;
        w.write_record(["instance", "method", "param_value", "loss"])?;
        for r in &self.loss_curves {
            w.write_record([r.instance.to_string(), r.method.clone(), fmt(r.param_value), fmt(r.loss)])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("l2curve.csv"))?;
        w.write_record(["t", "q", "mean_sq_error", "n_instances"])?;
        for r in &self.l2curve {
            w.write_record([fmt(r.t), r.q.to_string(), fmt(r.mean_sq_error), r.n_instances.to_string()])?;
        }
        w.flush()?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Read `report.json` and the loss curves back, checking the summaries.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut r: ExperimentReport = serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)?;
        r.verify()?;
        let path = dir.join("loss_curve.csv");
        if path.exists() {
            r.loss_curves = read_csv(&path)?;
        }
        Ok(r)
    }
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
