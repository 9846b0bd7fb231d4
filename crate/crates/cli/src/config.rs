//! Run configuration: a TOML file, overridden key by key from dotted flags.

use std::path::{Path, PathBuf};

use fbsys::solver::{StepControl, Tolerances};
use fbsys::{DomainShape, ProblemParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Every configurable key, in flag order. Each one is also a `--key` flag.
pub const KEYS: &[(&str, &str)] = &[
    ("mode", "solve | branch | spectrum | verify | oracle"),
    ("output", "output directory"),
    ("seed", "seed for randomized checks"),
    ("lambda", "λ for solve and spectrum"),
    ("domain.shape", "square | rectangle | disk"),
    ("domain.aspect", "side ratio of the rectangle"),
    ("domain.n", "grid intervals across the bounding box"),
    ("params.p1", "exponent p₁"),
    ("params.p2", "exponent p₂"),
    ("params.dim", "dimension used by the subcriticality check"),
    ("step.lambda_max", "continuation end point"),
    ("step.initial", "initial Δλ"),
    ("step.min", "smallest Δλ before giving up"),
    ("step.max", "largest Δλ"),
    ("step.grow", "Δλ growth factor after a success"),
    ("step.allow_free_boundary", "continue past the loss of positivity"),
    ("step.bracket_width", "width of the λ̄ and λ* brackets"),
    ("tolerances.newton", "Newton residual tolerance"),
    ("tolerances.newton_max_iter", "Newton iteration cap"),
    ("tolerances.fixed_point", "contraction-scheme tolerance"),
    ("tolerances.sigma_floor", "σ₁ below which the branch stops"),
    ("solve.method", "continuation | contraction | variational"),
    ("spectrum.k", "number of eigenpairs"),
    ("verify.random_pairs", "random pairs for the self-adjointness check"),
    ("oracle.lambdas", "λ values compared by the oracle mode"),
    ("sweep.lambdas", "λ values fanned out across workers (solve, spectrum)"),
    ("sweep.workers", "worker threads, 0 for one per core"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Solve,
    Branch,
    Spectrum,
    Verify,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Rectangle,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Continuation,
    Contraction,
    Variational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Domain {
    pub shape: Shape,
    pub aspect: f64,
    pub n: usize,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { shape: Shape::Square, aspect: 1.0, n: 48 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub p1: f64,
    pub p2: f64,
    pub dim: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params { p1: 1.0, p2: 1.0, dim: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Step {
    pub lambda_max: f64,
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub grow: f64,
    pub allow_free_boundary: bool,
    pub bracket_width: f64,
}

impl Default for Step {
    fn default() -> Self {
        let s = StepControl::default();
        Step {
            lambda_max: 10.0,
            initial: s.initial,
            min: s.min,
            max: 0.25,
            grow: s.grow,
            allow_free_boundary: s.allow_free_boundary,
            bracket_width: s.bracket_width,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tols {
    pub newton: f64,
    pub newton_max_iter: usize,
    pub fixed_point: f64,
    pub sigma_floor: f64,
}

impl Default for Tols {
    fn default() -> Self {
        let t = Tolerances::default();
        Tols { newton: t.newton_tol, newton_max_iter: t.newton_max_iter, fixed_point: t.fp_tol, sigma_floor: t.sigma_floor }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solve {
    pub method: Method,
}

impl Default for Solve {
    fn default() -> Self {
        Solve { method: Method::Continuation }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Spectrum {
    pub k: usize,
}

impl Default for Spectrum {
    fn default() -> Self {
        Spectrum { k: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Verify {
    pub random_pairs: usize,
}

impl Default for Verify {
    fn default() -> Self {
        Verify { random_pairs: 100 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Oracle {
    /// Empty means five evenly spaced values up to λ₀.
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub lambdas: Vec<f64>,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub output: PathBuf,
    pub seed: u64,
    pub lambda: f64,
    pub domain: Domain,
    pub params: Params,
    pub step: Step,
    pub tolerances: Tols,
    pub solve: Solve,
    pub spectrum: Spectrum,
    pub verify: Verify,
    pub oracle: Oracle,
    pub sweep: Sweep,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Solve,
            output: PathBuf::from("out"),
            seed: 7,
            lambda: 0.0,
            domain: Domain::default(),
            params: Params::default(),
            step: Step::default(),
            tolerances: Tols::default(),
            solve: Solve::default(),
            spectrum: Spectrum::default(),
            verify: Verify::default(),
            oracle: Oracle::default(),
            sweep: Sweep::default(),
        }
    }
}

fn invalid(constraint: &'static str, detail: impl Into<String>) -> Failure {
    Failure::Config { constraint, detail: detail.into() }
}

/// Parses a flag value as a TOML literal, falling back to a bare string.
fn flag_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Loads `file` (if any) and applies the `(dotted key, raw value)` overrides.
pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, Failure> {
    let mut table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid("config_file", format!("{}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| invalid("config_syntax", e.to_string()))?
        }
        None => toml::Table::new(),
    };
    for (key, raw) in overrides {
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().expect("split yields at least one part");
        let mut t = &mut table;
        for p in parts {
            let entry = t.entry(p).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            t = entry.as_table_mut().ok_or_else(|| invalid("config_syntax", format!("{p} is not a table")))?;
        }
        t.insert(last.to_string(), flag_value(raw));
    }
    let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| invalid("config_syntax", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        self.problem()?;
        if self.domain.shape == Shape::Rectangle && !(self.domain.aspect > 0.0 && self.domain.aspect.is_finite()) {
            return Err(invalid("domain", format!("aspect = {}", self.domain.aspect)));
        }
        let t = &self.tolerances;
        for (name, v) in [("newton", t.newton), ("fixed_point", t.fixed_point), ("sigma_floor", t.sigma_floor), ("step.bracket_width", self.step.bracket_width)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("positive_tolerance", format!("{name} = {v}")));
            }
        }
        if t.newton_max_iter == 0 {
            return Err(invalid("positive_tolerance", "newton_max_iter = 0"));
        }
        let s = &self.step;
        if !(s.min > 0.0 && s.min <= s.initial && s.initial <= s.max && s.grow >= 1.0 && s.max.is_finite()) {
            return Err(invalid("step_control", format!("need 0 < min ≤ initial ≤ max and grow ≥ 1, got {s:?}")));
        }
        if !(s.lambda_max > 0.0 && s.lambda_max.is_finite()) {
            return Err(invalid("step_control", format!("lambda_max = {}", s.lambda_max)));
        }
        if s.allow_free_boundary && self.params.p1.min(self.params.p2) < 1.0 {
            return Err(invalid("free_boundary_requires_p_ge_1", "allow_free_boundary needs p₁, p₂ ≥ 1"));
        }
        let lambdas = self.sweep.lambdas.iter().chain(&self.oracle.lambdas).chain(std::iter::once(&self.lambda));
        if let Some(l) = lambdas.into_iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(invalid("nonnegative_lambda", format!("lambda = {l}")));
        }
        if self.spectrum.k == 0 {
            return Err(invalid("eigen_count", "spectrum.k must be at least 1"));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemParams, Failure> {
        ProblemParams::with_dim(self.params.p1, self.params.p2, self.params.dim).map_err(Failure::from_core)
    }

    pub fn shape(&self) -> DomainShape {
        match self.domain.shape {
            Shape::Square => DomainShape::unit_square(),
            Shape::Rectangle => DomainShape::Rectangle { aspect: self.domain.aspect },
            Shape::Disk => DomainShape::Disk,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        let t = &self.tolerances;
        Tolerances {
            newton_tol: t.newton,
            newton_max_iter: t.newton_max_iter,
            fp_tol: t.fixed_point,
            sigma_floor: t.sigma_floor,
            ..Tolerances::default()
        }
    }

    pub fn step_control(&self) -> StepControl {
        let s = &self.step;
        StepControl {
            initial: s.initial,
            min: s.min,
            max: s.max,
            grow: s.grow,
            allow_free_boundary: s.allow_free_boundary,
            bracket_width: s.bracket_width,
            ..StepControl::default()
        }
    }

    /// SHA-256 of the canonical JSON form. The output directory and the
    /// worker count do not change results and are left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        obj.remove("output");
        obj["sweep"].as_object_mut().expect("sweep is a table").remove("workers");
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
