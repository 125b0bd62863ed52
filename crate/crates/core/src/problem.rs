//! Assembled contact problem shared by both solvers.

use std::sync::Arc;

use crate::assembly::{assemble_loads, assemble_stiffness, DofMap, IsotropicMaterial, LoadSpec, SparseSymmetric};
use crate::contact::{assemble_coupling, ContactSpaceKind, CouplingOperators, FrictionField};
use crate::error::{ContactError, Result};
use crate::mesh::{all_pairings, build_layer_stack, ContactPairing, LayerStackSpec, TetMesh};
use crate::mfem::{factorize, CholeskyFactor};

/// Mesh, stiffness, load and factor of a layered contact problem.
pub struct ContactProblem {
    pub mesh: TetMesh,
    pub pairings: Vec<ContactPairing>,
    pub dofs: Arc<DofMap>,
    pub materials: Vec<IsotropicMaterial>,
    pub stiffness: SparseSymmetric,
    pub load: Vec<f64>,
    pub factor: Arc<CholeskyFactor>,
    /// Friction bound of each interface, top to bottom.
    pub friction: Vec<f64>,
}

impl ContactProblem {
    pub fn new(
        spec: &LayerStackSpec,
        h: f64,
        materials: &[IsotropicMaterial],
        loads: &LoadSpec,
        friction: &[f64],
    ) -> Result<Self> {
        let mesh = build_layer_stack(spec, h)?;
        Self::from_mesh(mesh, materials, loads, friction)
    }

    pub fn from_mesh(mesh: TetMesh, materials: &[IsotropicMaterial], loads: &LoadSpec, friction: &[f64]) -> Result<Self> {
        if friction.len() != mesh.interface_count() {
            return Err(ContactError::Config(format!(
                "{} friction bounds given for {} interfaces",
                friction.len(),
                mesh.interface_count()
            )));
        }
        let pairings = all_pairings(&mesh)?;
        let dofs = Arc::new(DofMap::new(&mesh));
        let stiffness = assemble_stiffness(&mesh, &dofs, materials)?;
        let load = assemble_loads(&mesh, &dofs, loads)?;
        let factor = Arc::new(factorize(&stiffness)?);
        Ok(Self {
            mesh,
            pairings,
            dofs,
            materials: materials.to_vec(),
            stiffness,
            load,
            factor,
            friction: friction.to_vec(),
        })
    }

    /// Coupling operators and per-point friction bounds for a multiplier space.
    pub fn coupling(&self, kind: ContactSpaceKind) -> Result<(CouplingOperators, FrictionField)> {
        let coupling = assemble_coupling(&self.dofs, &self.pairings, kind)?;
        let friction = FrictionField::per_interface(&coupling, &self.friction)?;
        Ok((coupling, friction))
    }

    /// Same mesh and stiffness with loads and friction bounds scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            pairings: self.pairings.clone(),
            dofs: self.dofs.clone(),
            materials: self.materials.clone(),
            stiffness: self.stiffness.clone(),
            load: self.load.iter().map(|v| s * v).collect(),
            factor: self.factor.clone(),
            friction: self.friction.iter().map(|g| s * g).collect(),
        }
    }

    pub fn dof_count(&self) -> usize {
        self.dofs.dof_count()
    }
}
