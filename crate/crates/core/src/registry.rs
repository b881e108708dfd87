//! Builtin example models, addressable by name from configs and the CLI.

use std::f64::consts::TAU;

use crate::config::{HarnessTarget, MeshSpec, ModelSpec, RunConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Example {
    pub name: &'static str,
    pub description: &'static str,
    pub model: ModelSpec,
    pub harness_target: HarnessTarget,
    pub mesh: MeshSpec,
}

pub const NAMES: [&str; 4] = ["t2-standard", "t2-doubled", "r2-on-t2", "linear-torus-rep"];

fn torus(scale: f64, generators: Vec<Vec<f64>>) -> ModelSpec {
    ModelSpec::Torus {
        omega: vec![vec![0.0, scale], vec![-scale, 0.0]],
        periods: vec![Some(TAU), Some(TAU)],
        generators,
    }
}

pub fn lookup(name: &str) -> Result<Example> {
    let torus_mesh = MeshSpec {
        resolution: 64,
        ..MeshSpec::default()
    };
    let ex = match name {
        "t2-standard" => Example {
            name: "t2-standard",
            description: "circle acting on the first factor of the flat 2-torus; K = φ₂ mod 2π",
            model: torus(1.0, vec![vec![1.0, 0.0]]),
            harness_target: HarnessTarget::Cylinder,
            mesh: torus_mesh,
        },
        "t2-doubled" => Example {
            name: "t2-doubled",
            description: "same action with the form doubled; K takes values in ℝ/4πℤ and wraps twice onto ℝ/2πℤ",
            model: torus(2.0, vec![vec![1.0, 0.0]]),
            harness_target: HarnessTarget::Torus,
            mesh: torus_mesh,
        },
        "r2-on-t2" => Example {
            name: "r2-on-t2",
            description: "ℝ² acting by translations on the flat 2-torus; K maps onto ℝ²/2πℤ²",
            model: torus(1.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            harness_target: HarnessTarget::Cylinder,
            mesh: torus_mesh,
        },
        "linear-torus-rep" => Example {
            name: "linear-torus-rep",
            description: "T² acting on ℂ² with weights (1,0) and (0,1), sampled on the unit ball",
            model: ModelSpec::LinearRep {
                weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                radius: 1.0,
            },
            harness_target: HarnessTarget::Cylinder,
            mesh: MeshSpec {
                resolution: 16,
                extent: 1.0,
                angles: 8,
            },
        },
        other => {
            return Err(Error::Config(format!(
                "unknown example {other:?}; available: {}",
                NAMES.join(", ")
            )))
        }
    };
    Ok(ex)
}

pub fn examples() -> Vec<Example> {
    NAMES.iter().map(|n| lookup(n).expect("registered")).collect()
}

impl Example {
    /// A complete run config for this example, with resolved model and defaults.
    pub fn config(&self, resolution: Option<usize>) -> RunConfig {
        let mut mesh = self.mesh.clone();
        if let Some(r) = resolution {
            mesh.resolution = r;
        }
        RunConfig {
            schema_version: SCHEMA_VERSION,
            name: Some(self.name.to_string()),
            model: self.model.clone(),
            mesh,
            tolerances: Default::default(),
            tasks: vec![crate::config::Task::All],
            harness_target: Some(self.harness_target),
            sampled_map: None,
            seed: 7,
            momentum_rows: 32,
            output: Default::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_examples_build_and_validate() {
        for ex in examples() {
            let cfg = ex.config(None);
            cfg.validate().unwrap();
            let model = ex.model.build().unwrap();
            assert_eq!(model.dim(), if ex.name == "linear-torus-rep" { 4 } else { 2 });
        }
        assert!(lookup("missing").is_err());
    }

    #[test]
    fn example_config_round_trips() {
        let cfg = lookup("t2-doubled").unwrap().config(Some(12));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }
}
