//! Run configuration: a versioned JSON document describing the model (or a
//! builtin example), the mesh, tolerances, tasks and output paths.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cylinder::SubgroupSpec;
use crate::error::{Error, Result};
use crate::model::SymplecticModel;
use crate::registry;

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest accepted number of samples per periodic coordinate.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Constant `omega` on `ℝ^{2n}` with the given periods (`null` for a line
    /// coordinate) and constant generator fields as rows.
    Torus {
        omega: Vec<Vec<f64>>,
        periods: Vec<Option<f64>>,
        generators: Vec<Vec<f64>>,
    },
    /// Diagonal torus representation on `ℂⁿ`; the harness samples the ball
    /// of the given radius.
    LinearRep { weights: Vec<Vec<f64>>, radius: f64 },
    /// One of the registry examples.
    Builtin { name: String },
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what} must be a nonempty rectangular matrix")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

impl ModelSpec {
    /// Builtins are resolved through the registry.
    pub fn resolve(&self) -> Result<ModelSpec> {
        match self {
            ModelSpec::Builtin { name } => Ok(registry::lookup(name)?.model),
            other => Ok(other.clone()),
        }
    }

    pub fn build(&self) -> Result<SymplecticModel> {
        let built = match self.resolve()? {
            ModelSpec::Torus {
                omega,
                periods,
                generators,
            } => SymplecticModel::new(matrix(&omega, "omega")?, periods, matrix(&generators, "generators")?),
            ModelSpec::LinearRep { weights, .. } => {
                let w: Vec<DVector<f64>> = weights.iter().map(|w| DVector::from_row_slice(w)).collect();
                SymplecticModel::linear_representation(&w)
            }
            ModelSpec::Builtin { .. } => unreachable!("builtins resolve to concrete specs"),
        };
        built.map_err(|e| match e {
            Error::InvalidInput(msg) | Error::Config(msg) => Error::Config(format!("model: {msg}")),
            Error::DimensionMismatch { expected, got } => {
                Error::Config(format!("model: dimension mismatch (expected {expected}, got {got})"))
            }
            e => e,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    /// Samples per periodic coordinate, or action steps for linear representations.
    pub resolution: usize,
    /// Half width sampled along line coordinates.
    pub extent: f64,
    /// Angle samples per circle on action-angle meshes.
    pub angles: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            resolution: 64,
            extent: 1.0,
            angles: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Fiber bucketing radius; derived from the image edge lengths when absent.
    pub eps_fiber: Option<f64>,
    /// Containment tolerance for global convexity; the longest image edge when absent.
    pub tol_convexity: Option<f64>,
    pub radius_hops: usize,
    pub eps_gap: f64,
    pub tol_noether: f64,
    pub loi_coverage: f64,
    pub tol_path: f64,
    pub tol_normal_form: f64,
    /// Required pass fraction of the local conditions on interior points.
    pub local_pass_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_fiber: None,
            tol_convexity: None,
            radius_hops: 2,
            eps_gap: 1e-7,
            tol_noether: 1e-6,
            loi_coverage: 0.95,
            tol_path: 1e-8,
            tol_normal_form: 1e-6,
            local_pass_fraction: 0.99,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Holonomy,
    Momentum,
    Harness,
    Normalform,
    All,
}

/// Where the harness evaluates the momentum map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarnessTarget {
    /// `𝔤*/H` with the holonomy group `H`.
    #[default]
    Cylinder,
    /// The group-valued target `𝔤*/2πℤᵏ` (the torus of a circle action).
    Torus,
}

/// A user-supplied sampled map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledMapSpec {
    /// CSV with a header; columns named `x…` are domain coordinates and
    /// columns named `v…` are value coordinates.
    pub points_csv: PathBuf,
    /// CSV with header `a,b` listing undirected edges by row index.
    #[serde(default)]
    pub adjacency_csv: Option<PathBuf>,
    /// Used when no adjacency file is given: join domain points closer than this.
    #[serde(default)]
    pub adjacency_radius: Option<f64>,
    /// Target subgroup; trivial (Euclidean values) when absent.
    #[serde(default)]
    pub target: Option<SubgroupSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub report: String,
    pub polylines: String,
    pub summary: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            report: "report.json".into(),
            polylines: "polylines.csv".into(),
            summary: "summary.json".into(),
        }
    }
}

fn default_tasks() -> Vec<Task> {
    vec![Task::All]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub harness_target: Option<HarnessTarget>,
    #[serde(default)]
    pub sampled_map: Option<SampledMapSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Rows of the momentum sample table in the report.
    #[serde(default = "default_momentum_rows")]
    pub momentum_rows: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_momentum_rows() -> usize {
    32
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn wants(&self, task: Task) -> bool {
        self.tasks.contains(&Task::All) || self.tasks.contains(&task)
    }

    /// Effective harness target: explicit setting, else the builtin's
    /// default, else the holonomy cylinder.
    pub fn effective_harness_target(&self) -> HarnessTarget {
        if let Some(t) = self.harness_target {
            return t;
        }
        match &self.model {
            ModelSpec::Builtin { name } => registry::lookup(name).map(|e| e.harness_target).unwrap_or_default(),
            _ => HarnessTarget::Cylinder,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let model = self.model.resolve()?;
        let periodic = matches!(&model, ModelSpec::Torus { periods, .. } if periods.iter().any(Option::is_some));
        if periodic && self.mesh.resolution < MIN_RESOLUTION {
            return Err(Error::Config(format!(
                "mesh.resolution must be at least {MIN_RESOLUTION} per periodic coordinate"
            )));
        }
        if self.mesh.resolution < 1 {
            return Err(Error::Config("mesh.resolution must be positive".into()));
        }
        if let ModelSpec::LinearRep { radius, .. } = &model {
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(Error::Config("linear_rep.radius must be positive".into()));
            }
        }
        if !(self.mesh.extent > 0.0) || self.mesh.angles < 3 {
            return Err(Error::Config("mesh.extent must be positive and mesh.angles at least 3".into()));
        }
        let t = &self.tolerances;
        let positive = [
            ("eps_gap", Some(t.eps_gap)),
            ("tol_noether", Some(t.tol_noether)),
            ("loi_coverage", Some(t.loi_coverage)),
            ("tol_path", Some(t.tol_path)),
            ("tol_normal_form", Some(t.tol_normal_form)),
            ("local_pass_fraction", Some(t.local_pass_fraction)),
            ("eps_fiber", t.eps_fiber),
            ("tol_convexity", t.tol_convexity),
        ];
        for (name, value) in positive {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("tolerances.{name} must be positive, got {v}")));
                }
            }
        }
        if t.radius_hops < 1 {
            return Err(Error::Config("tolerances.radius_hops must be at least 1".into()));
        }
        if t.loi_coverage > 1.0 || t.local_pass_fraction > 1.0 {
            return Err(Error::Config("coverage and pass fractions must not exceed 1".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("tasks must not be empty".into()));
        }
        if let Some(s) = &self.sampled_map {
            if s.adjacency_csv.is_none() && !s.adjacency_radius.is_some_and(|r| r > 0.0) {
                return Err(Error::Config(
                    "sampled_map needs adjacency_csv or a positive adjacency_radius".into(),
                ));
            }
        }
        self.model.build()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_builtin_config() {
        let cfg = RunConfig::from_json(r#"{"schema_version": 1, "model": {"kind": "builtin", "name": "t2-standard"}}"#).unwrap();
        assert_eq!(cfg.mesh.resolution, 64);
        assert!(cfg.wants(Task::Harness));
        assert_eq!(cfg.effective_harness_target(), HarnessTarget::Cylinder);
    }

    #[test]
    fn doubled_builtin_uses_torus_target() {
        let cfg = RunConfig::from_json(r#"{"schema_version": 1, "model": {"kind": "builtin", "name": "t2-doubled"}}"#).unwrap();
        assert_eq!(cfg.effective_harness_target(), HarnessTarget::Torus);
    }

    #[test]
    fn explicit_torus_model() {
        let text = r#"{
            "schema_version": 1,
            "model": {"kind": "torus", "omega": [[0, 1], [-1, 0]], "periods": [6.283185307179586, null],
                      "generators": [[1, 0]]},
            "mesh": {"resolution": 16},
            "tasks": ["holonomy", "momentum"]
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert!(!cfg.wants(Task::Harness));
        assert_eq!(cfg.model.build().unwrap().dim(), 2);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            r#"{"schema_version": 2, "model": {"kind": "builtin", "name": "t2-standard"}}"#,
            r#"{"schema_version": 1, "model": {"kind": "builtin", "name": "nope"}}"#,
            r#"{"schema_version": 1, "model": {"kind": "builtin", "name": "t2-standard"}, "mesh": {"resolution": 4}}"#,
            r#"{"schema_version": 1, "model": {"kind": "builtin", "name": "t2-standard"}, "tolerances": {"eps_gap": -1}}"#,
            r#"{"schema_version": 1, "model": {"kind": "torus", "omega": [[1, 0], [0, 1]], "periods": [1, 1], "generators": [[1, 0]]}}"#,
            r#"{"schema_version": 1, "model": {"kind": "builtin", "name": "t2-standard"}, "bogus": 3}"#,
            r#"not json"#,
        ];
        for text in bad {
            let err = RunConfig::from_json(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }
}
