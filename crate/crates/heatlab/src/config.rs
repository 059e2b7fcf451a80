//! JSON experiment configuration.

use std::path::PathBuf;

use heatlab_core::duhamel::PicardOptions;
use heatlab_core::evolution::SolverConfig;
use heatlab_core::similarity::SimilarityGrid;
use heatlab_core::threshold::ClassifyOptions;
use heatlab_core::{Boundary, ModelParams, Profile, RadialField, RadialGrid};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A configuration problem, located by its JSON path (`params.p`, `experiment.kind`, ...).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Solve,
    Morrey,
    Smoothing,
    Energy,
    Picard,
    Threshold,
    Dependence,
    Hypotheses,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Morrey => "morrey",
            Kind::Smoothing => "smoothing",
            Kind::Energy => "energy",
            Kind::Picard => "picard",
            Kind::Threshold => "threshold",
            Kind::Dependence => "dependence",
            Kind::Hypotheses => "hypotheses",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub n: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub r_max: f64,
    /// Number of intervals M; the grid has M + 1 nodes.
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ParamsBlock,
    pub grid: GridBlock,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub solver: SolverConfig,
    pub initial: Profile,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed of the randomized cross-checks.
    #[serde(default)]
    pub seed: u64,
}

fn default_boundary() -> Boundary {
    Boundary::DirichletAtRmax
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Solve(SolveOptions),
    Morrey(MorreyOptions),
    Smoothing(SmoothingOptions),
    Energy(EnergyOptions),
    Picard(PicardExperiment),
    Threshold(ThresholdOptions),
    Dependence(DependenceOptions),
    Hypotheses(HypothesesOptions),
}

impl Experiment {
    pub fn kind(&self) -> Kind {
        match self {
            Experiment::Solve(_) => Kind::Solve,
            Experiment::Morrey(_) => Kind::Morrey,
            Experiment::Smoothing(_) => Kind::Smoothing,
            Experiment::Energy(_) => Kind::Energy,
            Experiment::Picard(_) => Kind::Picard,
            Experiment::Threshold(_) => Kind::Threshold,
            Experiment::Dependence(_) => Kind::Dependence,
            Experiment::Hypotheses(_) => Kind::Hypotheses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Re-run from -u0 and require the exactly negated trajectory.
    pub check_symmetry: bool,
    /// Lower bound -tol·‖u0‖_∞ for runs from nonnegative data.
    pub positivity_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            check_symmetry: true,
            positivity_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorreyOptions {
    pub q: f64,
    /// Defaults to the critical index 2q/(p-1).
    pub lambda: Option<f64>,
    pub lattice_level: u32,
    /// Write every lattice cell of the maximand.
    pub cells: bool,
    /// Seeded random balls that must not beat the estimate.
    pub random_probes: usize,
}

impl Default for MorreyOptions {
    fn default() -> Self {
        Self {
            q: 2.0,
            lambda: None,
            lattice_level: 0,
            cells: true,
            random_probes: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingOptions {
    pub from_q: f64,
    /// Target exponent; `null` means q = ∞.
    pub to_q: Option<f64>,
    /// Defaults to the critical index 2·from_q/(p-1).
    pub lambda: Option<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl Default for SmoothingOptions {
    fn default() -> Self {
        Self {
            from_q: 2.0,
            to_q: None,
            lambda: None,
            t_min: 1e-2,
            t_max: 1e2,
            count: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyOptions {
    /// Rescaling times T.
    pub times: Vec<f64>,
    pub ds: f64,
    pub count: usize,
    pub similarity: SimilarityGrid,
    pub residual_tol: f64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self {
            times: vec![2.0, 5.0, 10.0],
            ds: 0.01,
            count: 301,
            similarity: SimilarityGrid::default(),
            residual_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardExperiment {
    pub k_max: usize,
    pub sample_times: Vec<f64>,
    pub picard: PicardOptions,
    /// Relative sup-norm tolerance against the method-of-lines solver; `null` skips the comparison.
    pub compare_tol: Option<f64>,
}

impl Default for PicardExperiment {
    fn default() -> Self {
        Self {
            k_max: 40,
            sample_times: vec![0.1, 0.5, 1.0],
            picard: PicardOptions::default(),
            compare_tol: Some(0.01),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdOptions {
    pub rel_tol: f64,
    /// Initial bracket; searched from `start` when absent.
    pub bracket: Option<(f64, f64)>,
    pub start: f64,
    pub max_steps: usize,
    pub deltas: Vec<f64>,
    pub classify: ClassifyOptions,
    /// Slack of the T_est monotonicity check.
    pub blowup_time_slack: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            bracket: None,
            start: 1.0,
            max_steps: 10,
            deltas: vec![0.1, 0.01, 0.001],
            classify: ClassifyOptions::default(),
            blowup_time_slack: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DependenceOptions {
    /// Relative sizes d of the perturbations v0 = (1 + d) u0.
    pub perturbations: Vec<f64>,
    pub t0: f64,
    pub q: f64,
    /// Allowed max/min - 1 of the maximal ratios across sizes.
    pub variation_tol: f64,
}

impl Default for DependenceOptions {
    fn default() -> Self {
        Self {
            perturbations: vec![1e-2, 1e-3, 1e-4],
            t0: 5.0,
            q: 2.0,
            variation_tol: 0.25,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesesOptions {}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub r_max: Option<f64>,
    pub nodes: Option<usize>,
    pub t_end: Option<f64>,
    pub output: Option<PathBuf>,
}

/// Parses a config, applies overrides and checks it.
///
/// With `kind` given, a missing `experiment` block becomes the defaults of
/// that kind and a present one must agree with it.
pub fn load_config(text: &str, kind: Option<Kind>, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError::new("", e.to_string()))?;
    let root = value
        .as_object_mut()
        .ok_or_else(|| ConfigError::new("", "config must be a JSON object"))?;
    if let Some(kind) = kind {
        let block = root
            .entry("experiment")
            .or_insert_with(|| Value::Object(Default::default()));
        let block = block
            .as_object_mut()
            .ok_or_else(|| ConfigError::new("experiment", "expected an object"))?;
        match block.get("kind") {
            None => {
                block.insert("kind".into(), Value::from(kind.name()));
            }
            Some(Value::String(s)) if s == kind.name() => {}
            Some(other) => {
                return Err(ConfigError::new(
                    "experiment.kind",
                    format!("config declares {other} but the subcommand is `{}`", kind.name()),
                ))
            }
        }
    }
    apply_overrides(root, overrides)?;
    let config: ExperimentConfig = from_value(value)?;
    config.validate()?;
    Ok(config)
}

fn set(root: &mut serde_json::Map<String, Value>, block: &str, key: &str, v: Value) -> Result<(), ConfigError> {
    let entry = root.entry(block).or_insert_with(|| Value::Object(Default::default()));
    entry
        .as_object_mut()
        .ok_or_else(|| ConfigError::new(block, "expected an object"))?
        .insert(key.into(), v);
    Ok(())
}

fn apply_overrides(root: &mut serde_json::Map<String, Value>, o: &Overrides) -> Result<(), ConfigError> {
    if let Some(n) = o.n {
        set(root, "params", "n", Value::from(n))?;
    }
    if let Some(p) = o.p {
        set(root, "params", "p", Value::from(p))?;
    }
    if let Some(r) = o.r_max {
        set(root, "grid", "r_max", Value::from(r))?;
    }
    if let Some(m) = o.nodes {
        set(root, "grid", "nodes", Value::from(m))?;
    }
    if let Some(t) = o.t_end {
        set(root, "solver", "t_end", Value::from(t))?;
    }
    if let Some(out) = &o.output {
        root.insert("output".into(), Value::from(out.to_string_lossy().into_owned()));
    }
    Ok(())
}

fn from_value(value: Value) -> Result<ExperimentConfig, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = e.path().to_string();
        let message = e.inner().to_string();
        // serde reports a missing field at its parent; name the field itself
        if let Some(field) = message
            .strip_prefix("missing field `")
            .and_then(|m| m.strip_suffix('`'))
        {
            path = if path == "." {
                field.to_string()
            } else {
                format!("{path}.{field}")
            };
        }
        ConfigError::new(path, message)
    })
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let core = |path: &str, e: heatlab_core::Error| ConfigError::new(path, e.to_string());
        ModelParams::new(self.params.n, self.params.p).map_err(|e| core("params", e))?;
        RadialGrid::new(self.params.n, self.grid.r_max, self.grid.nodes).map_err(|e| core("grid", e))?;
        self.solver.validate().map_err(|e| core("solver", e))?;
        self.sample_initial().map_err(|e| core("initial", e))?;
        let positive = |path: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(path, "must be positive and finite"))
            }
        };
        match &self.experiment {
            Experiment::Solve(o) => positive("experiment.positivity_tol", o.positivity_tol)?,
            Experiment::Morrey(o) => {
                if !(o.q >= 1.0) {
                    return Err(ConfigError::new("experiment.q", "need q >= 1"));
                }
            }
            Experiment::Smoothing(o) => {
                positive("experiment.t_min", o.t_min)?;
                if !(o.t_max > o.t_min) || o.count == 0 {
                    return Err(ConfigError::new(
                        "experiment.t_max",
                        "need t_max > t_min and count >= 1",
                    ));
                }
            }
            Experiment::Energy(o) => {
                positive("experiment.ds", o.ds)?;
                if o.times.is_empty() {
                    return Err(ConfigError::new("experiment.times", "need at least one rescaling time"));
                }
                for (i, &t) in o.times.iter().enumerate() {
                    positive(&format!("experiment.times[{i}]"), t)?;
                }
                if o.count < 3 {
                    return Err(ConfigError::new("experiment.count", "need at least three s values"));
                }
                o.similarity.validate().map_err(|e| core("experiment.similarity", e))?;
            }
            Experiment::Picard(o) => {
                if o.k_max < 2 {
                    return Err(ConfigError::new("experiment.k_max", "need at least two iterations"));
                }
                for (i, &t) in o.sample_times.iter().enumerate() {
                    if !(t > 0.0 && t <= self.solver.t_end) {
                        return Err(ConfigError::new(
                            format!("experiment.sample_times[{i}]"),
                            "sample times must lie in (0, solver.t_end]",
                        ));
                    }
                }
            }
            Experiment::Threshold(o) => {
                positive("experiment.rel_tol", o.rel_tol)?;
                positive("experiment.start", o.start)?;
                if let Some((lo, hi)) = o.bracket {
                    if !(lo > 0.0 && hi > lo) {
                        return Err(ConfigError::new("experiment.bracket", "need 0 < lo < hi"));
                    }
                }
            }
            Experiment::Dependence(o) => {
                positive("experiment.t0", o.t0)?;
                if o.t0 > self.solver.t_end {
                    return Err(ConfigError::new("experiment.t0", "T0 must not exceed solver.t_end"));
                }
                if o.perturbations.is_empty() || o.perturbations.iter().any(|&d| d == 0.0 || !d.is_finite()) {
                    return Err(ConfigError::new(
                        "experiment.perturbations",
                        "need nonzero finite sizes",
                    ));
                }
            }
            Experiment::Hypotheses(_) => {}
        }
        Ok(())
    }

    pub fn model(&self) -> ModelParams {
        ModelParams::new(self.params.n, self.params.p).expect("validated")
    }

    pub fn radial_grid(&self) -> RadialGrid {
        RadialGrid::new(self.params.n, self.grid.r_max, self.grid.nodes).expect("validated")
    }

    fn sample_initial(&self) -> heatlab_core::Result<RadialField> {
        let params = ModelParams::new(self.params.n, self.params.p)?;
        let grid = RadialGrid::new(self.params.n, self.grid.r_max, self.grid.nodes)?;
        self.initial.sample(grid, &params, self.boundary)
    }

    pub fn initial_field(&self) -> RadialField {
        self.sample_initial().expect("validated")
    }

    pub fn initial_gradient(&self) -> heatlab_core::Result<RadialField> {
        self.initial.gradient(self.radial_grid(), &self.model())
    }

    /// SHA-256 of the resolved config in canonical (sorted-key) JSON, without
    /// the output directory.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut canonical = serde_json::to_value(self).expect("config serializes");
        if let Some(root) = canonical.as_object_mut() {
            root.remove("output");
        }
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
