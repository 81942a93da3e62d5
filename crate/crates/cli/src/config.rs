//! Run configuration: a JSON file, optionally patched by `--set path=value`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use rfem_core::assembly::PenaltyConfig;
use rfem_core::geometry::Rect;
use rfem_core::pipeline::{MeshSource, RunOptions};
use rfem_core::problem::{builtin_example, CustomProblem, MeshFamily, PartitionRule, ProblemSpec};
use rfem_core::solver::{SolverConfig, SolverMode};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Lifts the `1 ≤ r ≤ 4` guard.
    #[serde(default)]
    pub allow_any_degree: bool,
    /// Defaults to the problem's mesh family.
    #[serde(default)]
    pub mesh: Option<MeshConfig>,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(default)]
    pub solver: SolverSection,
    /// Quadrature exactness; `2r + 4` when absent.
    #[serde(default)]
    pub quadrature_order: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_degree() -> usize {
    1
}

fn default_levels() -> u32 {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Built-in example 1..=4.
    #[serde(default)]
    pub example: Option<u32>,
    /// Diffusion of example 3.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub custom: Option<CustomConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    #[serde(default = "default_custom_name")]
    pub name: String,
    /// `[x0, y0, x1, y1]`.
    #[serde(default = "default_domain")]
    pub domain: [f64; 4],
    /// `[a11, a12, a22]`.
    pub a: [String; 3],
    pub b: [String; 2],
    pub c: String,
    #[serde(default)]
    pub f: Option<String>,
    #[serde(default)]
    pub g_d: Option<String>,
    #[serde(default)]
    pub g_n: Option<String>,
    #[serde(default)]
    pub exact: Option<String>,
    #[serde(default)]
    pub neumann: Option<String>,
    #[serde(default)]
    pub partition: Partition,
}

fn default_custom_name() -> String {
    "custom".into()
}

fn default_domain() -> [f64; 4] {
    [0.0, 0.0, 1.0, 1.0]
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    #[default]
    None,
    SignY,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshConfig {
    Voronoi {
        n_cells: usize,
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default = "default_lloyd")]
        lloyd: usize,
    },
    Aligned {
        n: usize,
    },
    File {
        path: PathBuf,
    },
}

fn default_seed() -> u64 {
    1
}

fn default_lloyd() -> usize {
    100
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    pub c_sigma: f64,
    pub sigma_ac: f64,
    pub sigma_b1: f64,
    pub sigma_b2: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        let p = PenaltyConfig::default();
        PenaltySection { c_sigma: p.c_sigma, sigma_ac: p.sigma_ac, sigma_b1: p.sigma_b1, sigma_b2: p.sigma_b2 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub mode: Mode,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSection { mode: Mode::Auto, tol: s.tol, max_iter: s.max_iter, restart: s.restart }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write `solution.vtk` after a solve.
    #[serde(default)]
    pub vtk: bool,
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_mesh_file")]
    pub mesh: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { vtk: false, csv: default_csv(), mesh: default_mesh_file() }
    }
}

fn default_csv() -> String {
    "eoc.csv".into()
}

fn default_mesh_file() -> String {
    "mesh.txt".into()
}

/// A configuration error; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Sets `root.a.b.c = value`, creating objects along the way. The value is
/// read as JSON when it parses, as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let Some((path, raw)) = assignment.split_once('=') else {
        return err(format!("--set expects key=value, got '{assignment}'"));
    };
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return err(format!("--set: malformed key '{path}'"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return err(format!("--set {path}: '{}' is not an object", parts[..i].join(".")));
            }
        }
        let map = node.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!()
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut value: Value =
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg = Self::from_value(value)?;
        // Relative mesh files are resolved against the config file.
        if let Some(MeshConfig::File { path: p }) = &mut cfg.mesh {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_value(value: Value) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            ConfigError(format!("config field '{path}': {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.problem;
        match (p.example, &p.custom) {
            (Some(_), Some(_)) => return err("config field 'problem': give either 'example' or 'custom', not both"),
            (None, None) => return err("config field 'problem': 'example' or 'custom' is required"),
            (Some(id), None) if !(1..=4).contains(&id) => {
                return err(format!("config field 'problem.example': expected 1..=4, got {id}"))
            }
            _ => {}
        }
        if self.degree == 0 {
            return err("config field 'degree': must be at least 1");
        }
        if self.degree > 4 && !self.allow_any_degree {
            return err(format!(
                "config field 'degree': {} is outside 1..=4 (set allow_any_degree to override)",
                self.degree
            ));
        }
        if self.levels == 0 {
            return err("config field 'levels': must be at least 1");
        }
        match &self.mesh {
            Some(MeshConfig::Voronoi { n_cells: 0, .. }) => return err("config field 'mesh.n_cells': must be at least 1"),
            Some(MeshConfig::Aligned { n: 0 }) => return err("config field 'mesh.n': must be at least 1"),
            _ => {}
        }
        let pen = self.penalty;
        for (name, v) in [("c_sigma", pen.c_sigma), ("sigma_ac", pen.sigma_ac), ("sigma_b1", pen.sigma_b1), ("sigma_b2", pen.sigma_b2)] {
            if !(v > 0.0 && v.is_finite()) {
                return err(format!("config field 'penalty.{name}': must be positive, got {v}"));
            }
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 || self.solver.restart == 0 {
            return err("config field 'solver': tol, max_iter and restart must be positive");
        }
        if let Some(c) = &p.custom {
            let [x0, y0, x1, y1] = c.domain;
            if !(x1 > x0 && y1 > y0) {
                return err("config field 'problem.custom.domain': expected [x0, y0, x1, y1] with x1 > x0, y1 > y0");
            }
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, rfem_core::Error> {
        match (&self.problem.example, &self.problem.custom) {
            (Some(id), _) => builtin_example(*id, self.problem.epsilon),
            (None, Some(c)) => {
                let [x0, y0, x1, y1] = c.domain;
                let partition = match c.partition {
                    Partition::None => PartitionRule::None,
                    Partition::SignY => PartitionRule::SignY,
                };
                CustomProblem {
                    name: c.name.clone(),
                    domain: Rect::new(x0, y0, x1, y1),
                    a: c.a.clone(),
                    b: c.b.clone(),
                    c: c.c.clone(),
                    f: c.f.clone(),
                    g_d: c.g_d.clone(),
                    g_n: c.g_n.clone(),
                    exact: c.exact.clone(),
                    neumann: c.neumann.clone(),
                    partition,
                    mesh_family: if partition == PartitionRule::SignY { MeshFamily::Aligned } else { MeshFamily::Voronoi },
                }
                .to_spec()
            }
            (None, None) => unreachable!("validated"),
        }
    }

    /// The configured mesh, or the default for the problem's mesh family.
    pub fn mesh_source(&self, family: MeshFamily) -> MeshSource {
        match &self.mesh {
            Some(MeshConfig::Voronoi { n_cells, seed, lloyd }) => {
                MeshSource::Voronoi { n_cells: *n_cells, seed: *seed, lloyd: *lloyd }
            }
            Some(MeshConfig::Aligned { n }) => MeshSource::Aligned { n: *n },
            Some(MeshConfig::File { path }) => MeshSource::File(path.clone()),
            None => match family {
                MeshFamily::Voronoi => MeshSource::Voronoi { n_cells: 256, seed: default_seed(), lloyd: default_lloyd() },
                MeshFamily::Aligned => MeshSource::Aligned { n: 8 },
            },
        }
    }

    /// Fills in the mesh default so that the echoed config is complete.
    pub fn with_defaults(mut self, family: MeshFamily) -> Self {
        if self.mesh.is_none() {
            self.mesh = Some(match self.mesh_source(family) {
                MeshSource::Voronoi { n_cells, seed, lloyd } => MeshConfig::Voronoi { n_cells, seed, lloyd },
                MeshSource::Aligned { n } => MeshConfig::Aligned { n },
                MeshSource::File(path) => MeshConfig::File { path },
            });
        }
        self
    }

    pub fn run_options(&self) -> RunOptions {
        let p = self.penalty;
        RunOptions {
            degree: self.degree,
            order: self.quadrature_order,
            penalty: PenaltyConfig { c_sigma: p.c_sigma, sigma_ac: p.sigma_ac, sigma_b1: p.sigma_b1, sigma_b2: p.sigma_b2 },
            solver: SolverConfig {
                mode: match self.solver.mode {
                    Mode::Auto => SolverMode::Auto,
                    Mode::Direct => SolverMode::Direct,
                    Mode::Iterative => SolverMode::Iterative,
                },
                tol: self.solver.tol,
                max_iter: self.solver.max_iter,
                restart: self.solver.restart,
            },
        }
    }
}
