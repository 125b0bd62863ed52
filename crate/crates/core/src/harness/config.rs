use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{IsotropicMaterial, LoadSpec, PatchTraction};
use crate::contact::ContactSpaceKind;
use crate::error::{ContactError, Result};
use crate::ldm::LdmConfig;
use crate::mesh::{DirichletPolicy, LayerSpec, LayerStackSpec, Rect};
use crate::qp::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub footprint: Rect,
    pub layers: Vec<LayerSpec>,
    pub z_top: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    pub nu: f64,
}

/// One vector for every layer, or one per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BodyForce {
    Uniform([f64; 3]),
    PerLayer(Vec<[f64; 3]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionConfig {
    pub vector: [f64; 3],
    pub patch: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsConfig {
    pub body_force: BodyForce,
    #[serde(default)]
    pub traction: Option<TractionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h_list: Vec<f64>,
}

/// Which solvers a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Mfem,
    Ldm,
    Both,
}

impl SolverChoice {
    pub fn runs_mfem(self) -> bool {
        matches!(self, Self::Mfem | Self::Both)
    }

    pub fn runs_ldm(self) -> bool {
        matches!(self, Self::Ldm | Self::Both)
    }
}

/// Complete description of an experiment, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub materials: Vec<MaterialConfig>,
    pub loads: LoadsConfig,
    pub friction: Vec<f64>,
    pub mesh: MeshConfig,
    pub contact_space: ContactSpaceKind,
    pub solver: SolverChoice,
    #[serde(default)]
    pub mfem: SolverConfig,
    #[serde(default)]
    pub ldm: LdmConfig,
    #[serde(default)]
    pub boundary: DirichletPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ContactError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.geometry.layers.len();
        self.stack_spec().validate()?;
        if self.mesh.h_list.is_empty() {
            return Err(ContactError::Config("mesh.h_list must name at least one size".into()));
        }
        if let Some(h) = self.mesh.h_list.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(ContactError::Config(format!("mesh size {h} is not positive")));
        }
        if let Some(l) = self.geometry.layers.iter().find(|l| l.material >= self.materials.len()) {
            return Err(ContactError::Config(format!("layer references missing material {}", l.material)));
        }
        if self.friction.len() != n.saturating_sub(1) {
            return Err(ContactError::Config(format!(
                "{} friction bounds given for {} interfaces",
                self.friction.len(),
                n.saturating_sub(1)
            )));
        }
        if let BodyForce::PerLayer(v) = &self.loads.body_force {
            if v.len() != n {
                return Err(ContactError::Config(format!("{} body forces given for {n} layers", v.len())));
            }
        }
        if let Some(t) = &self.loads.traction {
            if !self.geometry.footprint.contains_rect(&t.patch) {
                return Err(ContactError::Config("traction patch leaves the footprint".into()));
            }
        }
        self.material_models()?;
        if !(self.mfem.tol > 0.0) || self.mfem.max_iter == 0 {
            return Err(ContactError::Config("mfem.tol must be positive and mfem.max_iter at least 1".into()));
        }
        self.ldm.validate()
    }

    pub fn stack_spec(&self) -> LayerStackSpec {
        LayerStackSpec {
            footprint: self.geometry.footprint,
            layers: self.geometry.layers.clone(),
            z_top: self.geometry.z_top,
            dirichlet: self.boundary,
        }
    }

    pub fn material_models(&self) -> Result<Vec<IsotropicMaterial>> {
        self.materials.iter().map(|m| IsotropicMaterial::new(m.youngs_modulus, m.nu)).collect()
    }

    pub fn load_spec(&self) -> LoadSpec {
        let n = self.geometry.layers.len();
        LoadSpec {
            body_force: match &self.loads.body_force {
                BodyForce::Uniform(f) => vec![*f; n],
                BodyForce::PerLayer(v) => v.clone(),
            },
            traction: self.loads.traction.map(|t| PatchTraction { vector: t.vector, patch: t.patch }),
        }
    }

    /// Zero body force and traction.
    pub fn without_loads(&self) -> Self {
        let mut cfg = self.clone();
        cfg.loads = LoadsConfig { body_force: BodyForce::Uniform([0.0; 3]), traction: None };
        cfg
    }
}

/// Three-layer pavement benchmark on an 8 x 4 footprint.
pub fn paper_benchmark() -> ExperimentConfig {
    ExperimentConfig {
        geometry: GeometryConfig {
            footprint: Rect::new(0.0, 8.0, 0.0, 4.0),
            layers: vec![
                LayerSpec { thickness: 0.4, material: 0 },
                LayerSpec { thickness: 0.8, material: 1 },
                LayerSpec { thickness: 1.6, material: 2 },
            ],
            z_top: 2.8,
        },
        materials: vec![
            MaterialConfig { youngs_modulus: 5e3, nu: 0.25 },
            MaterialConfig { youngs_modulus: 2e3, nu: 0.25 },
            MaterialConfig { youngs_modulus: 2e2, nu: 0.4 },
        ],
        loads: LoadsConfig {
            body_force: BodyForce::Uniform([0.0, 0.0, -0.05]),
            traction: Some(TractionConfig { vector: [0.0, -4.5, -22.5], patch: Rect::new(3.8, 4.4, 1.8, 2.2) }),
        },
        friction: vec![0.2, 0.05],
        mesh: MeshConfig { h_list: vec![0.4] },
        contact_space: ContactSpaceKind::NodalLinear,
        solver: SolverChoice::Mfem,
        mfem: SolverConfig::default(),
        ldm: LdmConfig::default(),
        boundary: DirichletPolicy::SidesAndBottom,
        output_dir: None,
    }
}

/// Convergence model: 4 x 2 footprint, three layers of thickness 0.5, the
/// benchmark materials and friction, traction on a grid-aligned patch.
pub fn convergence_model() -> ExperimentConfig {
    let mut cfg = paper_benchmark();
    cfg.geometry = GeometryConfig {
        footprint: Rect::new(0.0, 4.0, 0.0, 2.0),
        layers: vec![
            LayerSpec { thickness: 0.5, material: 0 },
            LayerSpec { thickness: 0.5, material: 1 },
            LayerSpec { thickness: 0.5, material: 2 },
        ],
        z_top: 1.5,
    };
    cfg.loads.traction = Some(TractionConfig { vector: [0.0, -4.5, -22.5], patch: Rect::new(1.5, 2.5, 0.5, 1.5) });
    cfg.mesh.h_list = vec![0.5, 0.25, 0.125, 0.0625];
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = paper_benchmark();
        let text = cfg.to_json().unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&paper_benchmark().to_json().unwrap()).unwrap();
        v["geometry"]["colour"] = serde_json::json!("red");
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&paper_benchmark().to_json().unwrap()).unwrap();
        v["mfem"]["tolerance"] = serde_json::json!(1e-3);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn friction_count_must_match_interfaces() {
        let mut cfg = paper_benchmark();
        cfg.friction.push(0.1);
        assert!(cfg.validate().is_err());
    }
}
