//! Run configuration: JSON or TOML file, then `key=value` overrides, then validation.

use std::path::{Path, PathBuf};

use ftm_core::evolution::{Method, Restriction, Stepper};
use ftm_core::grid::{ScatteringConfig, DEFAULT_EXCLUSION};
use ftm_core::potential::{seeded_mixture, PotentialModel, SampledPotential};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Transfer,
    Amplitudes,
    AngleScan,
    KScan,
    SingularityScan,
    VerifyIdentities,
    OracleCompare,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Transfer => "transfer",
            Task::Amplitudes => "amplitudes",
            Task::AngleScan => "angle_scan",
            Task::KScan => "k_scan",
            Task::SingularityScan => "singularity_scan",
            Task::VerifyIdentities => "verify_identities",
            Task::OracleCompare => "oracle_compare",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Matching / ODE in 1D, partial waves for a circular well, Born otherwise.
    #[default]
    Auto,
    Matching,
    Ode,
    PartialWave,
    Born,
}

fn default_n() -> usize {
    32
}
fn default_true() -> bool {
    true
}
fn default_k_samples() -> usize {
    41
}
fn default_k_tol() -> f64 {
    1e-6
}
fn default_m_max() -> usize {
    12
}
fn default_steps_per_unit() -> usize {
    2000
}
fn default_out() -> PathBuf {
    PathBuf::from("ftm_out")
}
fn default_potential() -> Value {
    serde_json::json!({ "kind": "zero" })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub k: f64,
    #[serde(default)]
    pub d: usize,
    /// Defaults to 2k (k in d = 0).
    #[serde(default)]
    pub p_max: Option<f64>,
    #[serde(default = "default_n")]
    pub n_per_axis: usize,
    #[serde(default = "default_true")]
    pub grid_offset: bool,
    #[serde(default)]
    pub exclusion: Option<f64>,

    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub growth_budget: Option<f64>,
    #[serde(default)]
    pub restriction: Restriction,

    /// A potential model (`kind` + parameters), `{"kind": "seeded_mixture", ...}`
    /// or `{"file": "samples.csv"}`.
    #[serde(default = "default_potential")]
    pub potential: Value,

    /// Incidence directions (normalized on read); default: the on-grid direction closest to +x.
    #[serde(default)]
    pub incident: Option<Vec<Vec<f64>>>,
    /// Observation directions; default: every on-grid direction.
    #[serde(default)]
    pub observed: Option<Vec<Vec<f64>>>,
    /// Evenly spaced observation angles in the plane (d = 1) instead of on-grid directions.
    #[serde(default)]
    pub angles: Option<usize>,
    /// Add (−n, −n₀) for every sampled (n₀, n).
    #[serde(default)]
    pub paired: bool,

    #[serde(default)]
    pub k_range: Option<[f64; 2]>,
    #[serde(default = "default_k_samples")]
    pub k_samples: usize,
    #[serde(default = "default_k_tol")]
    pub k_tol: f64,

    /// Also report J⁻¹UᵀJU − I on the full grid (dense, slow).
    #[serde(default)]
    pub full_grid: bool,

    #[serde(default)]
    pub oracle: OracleKind,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_steps_per_unit")]
    pub steps_per_unit: usize,

    #[serde(default = "default_out")]
    pub out: PathBuf,
}

/// Reads a config file; `.toml` is parsed as TOML, anything else as JSON.
pub fn load_file(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid("Io", format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().and_then(|e| e.to_str()) == Some("toml") {
        toml::from_str::<Value>(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str::<Value>(&text).map_err(|e| e.to_string())
    };
    let v = parsed.map_err(|e| Failure::invalid("Parse", format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(Failure::invalid("Parse", "config must be a table/object".into()));
    }
    Ok(v)
}

/// Applies `a.b.c=value`; the value is read as JSON when it parses, else as a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), Failure> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Failure::invalid("Override", format!("expected key=value, got {assignment:?}")))?;
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Failure::invalid("Override", format!("empty key segment in {key:?}")));
        }
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let map = node.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_value(v: Value) -> Result<Self, Failure> {
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| Failure::invalid("InvalidConfig", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::invalid("InvalidConfig", m));
        if self.d > 2 {
            return bad(format!("d must be 0, 1 or 2, got {}", self.d));
        }
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol), ("max_step", self.max_step), ("growth_budget", self.growth_budget)] {
            if let Some(x) = v {
                if !(x.is_finite() && (x > 0.0 || (name == "atol" && x == 0.0))) {
                    return bad(format!("{name} must be positive, got {x}"));
                }
            }
        }
        if !(self.k_tol > 0.0) {
            return bad(format!("k_tol must be positive, got {}", self.k_tol));
        }
        let needs_range = matches!(self.task, Task::KScan | Task::SingularityScan);
        match self.k_range {
            Some([a, b]) if !(a > 0.0 && b > a) => return bad(format!("k_range must satisfy 0 < k_min < k_max, got [{a}, {b}]")),
            None if needs_range => return bad(format!("task {} needs k_range", self.task.name())),
            _ => {}
        }
        if needs_range && self.k_samples < 3 {
            return bad("k_samples must be at least 3".into());
        }
        if self.angles.is_some() && self.d != 1 {
            return bad("angles sampling is only defined for d = 1; list directions instead".into());
        }
        Ok(())
    }

    pub fn stepper(&self) -> Stepper {
        let mut s = Stepper { method: self.method, restriction: self.restriction, ..Stepper::default() };
        if let Some(x) = self.rtol {
            s.rtol = x;
        }
        if let Some(x) = self.atol {
            s.atol = x;
        }
        if let Some(x) = self.max_step {
            s.max_step = x;
        }
        if let Some(x) = self.growth_budget {
            s.growth_budget = x;
        }
        s
    }

    /// Grid configuration at wavenumber `k`, keeping p_max/k fixed when p_max is given.
    pub fn scattering(&self, k: f64) -> ScatteringConfig {
        if self.d == 0 {
            return ScatteringConfig::one_dimensional(k);
        }
        let p_max = self.p_max.map_or(2.0 * k, |p| p * k / self.k);
        ScatteringConfig {
            k,
            d: self.d,
            p_max,
            n_per_axis: self.n_per_axis,
            grid_offset: self.grid_offset,
            exclusion: self.exclusion.unwrap_or(DEFAULT_EXCLUSION),
        }
    }
}

/// A potential after resolving files and seeded fixtures.
pub struct ResolvedPotential {
    pub model: PotentialModel,
    /// Files read, for the manifest.
    pub files: Vec<PathBuf>,
    pub seeds: Vec<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeededSpec {
    #[allow(dead_code)]
    kind: String,
    seed: u64,
    #[serde(default = "default_count")]
    count: usize,
    #[serde(default = "default_coupling")]
    coupling: f64,
}

fn default_count() -> usize {
    4
}
fn default_coupling() -> f64 {
    0.5
}

/// Resolves `cfg.potential`; relative sample paths are taken from `base`.
pub fn resolve_potential(cfg: &RunConfig, base: &Path) -> Result<ResolvedPotential, Failure> {
    let spec = &cfg.potential;
    let invalid = |m: String| Failure::invalid("InvalidPotential", m);
    if let Some(file) = spec.get("file") {
        let rel = file.as_str().ok_or_else(|| invalid("potential.file must be a path".into()))?;
        let path = base.join(rel);
        if !path.exists() {
            return Err(invalid(format!("sample file {} does not exist", path.display())));
        }
        let samples = SampledPotential::load(&path).map_err(Failure::from)?;
        if samples.d() != cfg.d {
            return Err(invalid(format!("sample file has d = {} but the run has d = {}", samples.d(), cfg.d)));
        }
        return Ok(ResolvedPotential { model: PotentialModel::Sampled { samples }, files: vec![path], seeds: vec![] });
    }
    if spec.get("kind").and_then(Value::as_str) == Some("seeded_mixture") {
        let s: SeededSpec = serde_json::from_value(spec.clone()).map_err(|e| invalid(e.to_string()))?;
        let model = PotentialModel::GaussianMixture { bumps: seeded_mixture(s.seed, s.count, cfg.d, s.coupling) };
        return Ok(ResolvedPotential { model, files: vec![], seeds: vec![s.seed] });
    }
    let model: PotentialModel = serde_json::from_value(spec.clone()).map_err(|e| invalid(e.to_string()))?;
    model.validate().map_err(Failure::from)?;
    Ok(ResolvedPotential { model, files: vec![], seeds: vec![] })
}
