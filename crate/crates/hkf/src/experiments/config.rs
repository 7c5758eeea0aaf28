use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{ParamKind, DEFAULT_COARSE_N, DEFAULT_DELTA, DEFAULT_TOL};
use crate::operators::{CoefficientField, IntervalGrid};
use crate::torus::MaternLike;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Regularity,
    L2Bias,
    Amplitude,
    Lengthscale,
    Joint,
    Varcoef,
    Discontinuity,
    Deterministic,
    OracleCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Regularity,
        Experiment::L2Bias,
        Experiment::Amplitude,
        Experiment::Lengthscale,
        Experiment::Joint,
        Experiment::Varcoef,
        Experiment::Discontinuity,
        Experiment::Deterministic,
        Experiment::OracleCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Regularity => "regularity",
            Experiment::L2Bias => "l2-bias",
            Experiment::Amplitude => "amplitude",
            Experiment::Lengthscale => "lengthscale",
            Experiment::Joint => "joint",
            Experiment::Varcoef => "varcoef",
            Experiment::Discontinuity => "discontinuity",
            Experiment::Deterministic => "deterministic",
            Experiment::OracleCheck => "oracle-check",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{name}'")))
    }

    fn on_torus(&self) -> bool {
        matches!(
            self,
            Experiment::Regularity
                | Experiment::L2Bias
                | Experiment::Amplitude
                | Experiment::Lengthscale
                | Experiment::Joint
                | Experiment::OracleCheck
        )
    }
}

fn one_f() -> f64 {
    1.0
}

/// Law (or fixed function) the data are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TruthSpec {
    /// Karhunen–Loève draw of `σ²(-Δ+τ²)^{-s}` on the torus.
    Matern {
        #[serde(default = "one_f")]
        sigma: f64,
        #[serde(default)]
        tau: f64,
        s: f64,
        /// Modes kept per axis; defaults to `2^{q_max + truncation_extra}` in 1-D.
        #[serde(default)]
        half_width: Option<u64>,
    },
    /// Draw from `(-(a u')')^{-s}` with Dirichlet ends.
    Operator { coefficient: CoefficientField, s: f64 },
    /// Draw from `A_θ^{-1} (-Δ)^{-s} A_θ^{-1}`.
    Composite { theta: f64, s: f64 },
    /// Deterministic `(-Δ)^{-s} δ(· - source)`.
    Green { s: f64, source: f64 },
    /// One value per line: the lattice `X_{q+1}` on the torus, or the
    /// interior grid on the interval.
    File { path: PathBuf },
}

/// Kernel family whose free parameters are estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `σ²(-Δ+τ²)^{-s}` on the torus; fixed values of the non-free parameters.
    Matern {
        #[serde(default = "one_f")]
        sigma: f64,
        #[serde(default)]
        tau: f64,
        #[serde(default)]
        s: Option<f64>,
        /// Use the finite series over the truth's modes instead of the full series.
        #[serde(default)]
        sharp: bool,
    },
    /// `(-(a u')')^{-t}`.
    Operator { coefficient: CoefficientField },
    /// Dirichlet `(-Δ)^{-t}`.
    Laplacian,
    /// `A_θ^{-1} (-Δ)^{-s} A_θ^{-1}` with free `θ`.
    Composite { s: f64 },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Matern { sigma: 1.0, tau: 0.0, s: None, sharp: false }
    }
}

/// A single level or an inclusive `[lo, hi]` range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QRange {
    Single(u32),
    Range([u32; 2]),
}

impl Default for QRange {
    fn default() -> Self {
        QRange::Single(9)
    }
}

impl QRange {
    pub fn lo(&self) -> u32 {
        match *self {
            QRange::Single(q) => q,
            QRange::Range([a, _]) => a,
        }
    }

    pub fn hi(&self) -> u32 {
        match *self {
            QRange::Single(q) => q,
            QRange::Range([_, b]) => b,
        }
    }

    pub fn levels(&self) -> Vec<u32> {
        (self.lo()..=self.hi()).collect()
    }
}

/// Box override for one free parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBox {
    pub name: ParamKind,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSettings {
    #[serde(default = "default_coarse_n")]
    pub coarse_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Simplex tolerance; restarts further apart than this flag a parameter
    /// as indeterminate.
    #[serde(default = "default_simplex_tol")]
    pub simplex_tol: f64,
    /// Free parameters; empty selects the experiment's default set.
    #[serde(default)]
    pub params: Vec<ParamBox>,
}

fn default_coarse_n() -> usize {
    DEFAULT_COARSE_N
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_simplex_tol() -> f64 {
    1e-3
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self { coarse_n: DEFAULT_COARSE_N, tol: DEFAULT_TOL, delta: DEFAULT_DELTA, simplex_tol: 1e-3, params: Vec::new() }
    }
}

/// Fixed-level sweep over kernel exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub q: u32,
}

fn default_instances() -> usize {
    50
}
fn default_extra() -> u32 {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "one_usize")]
    pub d: usize,
    pub truth: TruthSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    /// Observation level: `X_q` on the torus, `2^q - 1` interior points of a
    /// `2^{q+1} - 1` grid on the interval.
    #[serde(default)]
    pub q: QRange,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    /// Fixed kernel exponents for `l2-bias` and `oracle-check`.
    #[serde(default)]
    pub t_values: Vec<f64>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default = "default_extra")]
    pub truncation_extra: u32,
    #[serde(default)]
    pub highlight_instance: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one_usize() -> usize {
    1
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        // Relative truth files resolve against the config's directory.
        if let TruthSpec::File { path: p } = &mut cfg.truth {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return cfg_err("instance count must be at least 1");
        }
        let (lo, hi) = (self.q.lo(), self.q.hi());
        if lo > hi || lo < 2 || hi > 12 {
            return cfg_err(format!("q range [{lo}, {hi}] must lie within [2, 12]"));
        }
        if self.d == 0 || (!self.experiment.on_torus() && self.d != 1) {
            return cfg_err("interval experiments are one-dimensional");
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return cfg_err("jitter must be nonnegative");
        }
        let e = &self.estimator;
        if e.coarse_n < 2 || !(e.tol > 0.0) || !(e.delta > 0.0) || !(e.simplex_tol > 0.0) {
            return cfg_err("estimator needs coarse_n ≥ 2, tol > 0 and delta > 0");
        }
        if self.highlight_instance >= self.instances {
            return cfg_err("highlight_instance is out of range");
        }
        let torus_truth = matches!(self.truth, TruthSpec::Matern { .. } | TruthSpec::File { .. });
        let torus_kernel = matches!(self.kernel, KernelSpec::Matern { .. });
        if self.experiment.on_torus() && !(torus_truth && torus_kernel) {
            return cfg_err(format!("{} needs a torus truth and a matern kernel", self.experiment.name()));
        }
        if !self.experiment.on_torus() && (torus_kernel || matches!(self.truth, TruthSpec::Matern { .. })) {
            return cfg_err(format!("{} needs an interval truth and kernel", self.experiment.name()));
        }
        match &self.truth {
            TruthSpec::File { path } if !path.exists() => return cfg_err(format!("truth file {} does not exist", path.display())),
            TruthSpec::Matern { sigma, tau, s, .. } => {
                MaternLike::new(*sigma, *tau, *s)?;
                // Pointwise values need a square-summable spectrum.
                if !(*s > self.d as f64 / 2.0) {
                    return cfg_err(format!("truth regularity must exceed d/2, got {s}"));
                }
            }
            TruthSpec::Operator { coefficient, .. } => coefficient.validate()?,
            TruthSpec::Composite { theta, .. } if !(*theta > 0.0 && *theta < 1.0) => return cfg_err("theta must lie in (0, 1)"),
            TruthSpec::Green { source, .. } if !(*source > 0.0 && *source < 1.0) => return cfg_err("source must lie in (0, 1)"),
            _ => {}
        }
        if let KernelSpec::Operator { coefficient } = &self.kernel {
            coefficient.validate()?;
        }
        for p in &e.params {
            if let (Some(a), Some(b)) = (p.lower, p.upper) {
                if !(a < b) {
                    return cfg_err(format!("empty box for {}", p.name.name()));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if !(s.min < s.max) || s.n < 2 || s.q < 2 || s.q > 12 {
                return cfg_err("sweep needs min < max, n ≥ 2 and q in [2, 12]");
            }
        }
        match self.experiment {
            Experiment::L2Bias if self.d != 1 => cfg_err("l2-bias is one-dimensional"),
            Experiment::L2Bias if self.t_values.is_empty() && self.sweep.is_none() => {
                cfg_err("l2-bias needs t_values or a sweep")
            }
            Experiment::Discontinuity if !matches!(self.kernel, KernelSpec::Composite { .. }) => {
                cfg_err("discontinuity needs a composite kernel")
            }
            Experiment::Varcoef | Experiment::Deterministic if matches!(self.kernel, KernelSpec::Composite { .. }) => {
                cfg_err("regularity runs on the interval need an operator or laplacian kernel")
            }
            _ => Ok(()),
        }
    }

    /// Truth modes kept per axis.
    pub fn truth_half_width(&self) -> u64 {
        match self.truth {
            TruthSpec::Matern { half_width: Some(k), .. } => k,
            _ if self.d == 1 => 1u64 << (self.q.hi() + self.truncation_extra),
            _ => 1u64 << (self.q.hi() + 1),
        }
    }

    pub fn interval_grid(&self) -> IntervalGrid {
        IntervalGrid::new((1usize << (self.q.hi() + 1)) - 1)
    }

    /// Box for a free parameter: config override, else the default box.
    pub fn bounds(&self, kind: ParamKind) -> (f64, f64) {
        let (mut lo, mut hi) = kind.default_bounds(self.d, self.estimator.delta);
        if let Some(p) = self.estimator.params.iter().find(|p| p.name == kind) {
            lo = p.lower.unwrap_or(lo);
            hi = p.upper.unwrap_or(hi);
        }
        (lo, hi)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_rejects_unknown_keys() {
        let ok = r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5}}"#;
        let cfg = ExperimentConfig::from_json(ok).unwrap();
        assert_eq!(cfg.instances, 50);
        assert_eq!(cfg.q, QRange::Single(9));
        let bad = r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5},"colour":1}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let bad_nested = r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5,"nu":1}}"#;
        assert!(ExperimentConfig::from_json(bad_nested).is_err());
    }

    #[test]
    fn range_and_validation() {
        let c = r#"{"experiment":"l2-bias","truth":{"kind":"matern","s":2.5},"q":[4,9],"t_values":[1.0]}"#;
        let cfg = ExperimentConfig::from_json(c).unwrap();
        assert_eq!(cfg.q.levels(), vec![4, 5, 6, 7, 8, 9]);
        let c = r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5},"q":13}"#;
        assert!(ExperimentConfig::from_json(c).is_err());
        let c = r#"{"experiment":"varcoef","truth":{"kind":"matern","s":2.5}}"#;
        assert!(ExperimentConfig::from_json(c).is_err());
        let c = r#"{"experiment":"regularity","truth":{"kind":"file","path":"/nonexistent/x.csv"}}"#;
        assert!(ExperimentConfig::from_json(c).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let c = r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5}}"#;
        let a = ExperimentConfig::from_json(c).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
