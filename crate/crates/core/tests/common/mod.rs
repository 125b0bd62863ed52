#![allow(dead_code)]

pub mod oracle;

use layered_contact::harness::config::{paper_benchmark, ExperimentConfig};
use layered_contact::assembly::{IsotropicMaterial, LoadSpec};
use layered_contact::mesh::{build_layer_stack, DirichletPolicy, FacetTag, LayerSpec, LayerStackSpec, Rect, TetMesh};
use layered_contact::problem::ContactProblem;

pub fn benchmark_mesh(h: f64) -> TetMesh {
    build_layer_stack(&paper_benchmark().stack_spec(), h).unwrap()
}

/// Replaces every Dirichlet tag by a traction-free one, so that all nodes
/// carry unknowns.
pub fn release_dirichlet(mut mesh: TetMesh) -> TetMesh {
    for layer in &mut mesh.layers {
        for t in &mut layer.boundary {
            if t.tag == Some(FacetTag::Dirichlet) {
                t.tag = Some(FacetTag::TractionFree);
            }
        }
    }
    mesh
}

pub fn problem_from(cfg: &ExperimentConfig, h: f64) -> ContactProblem {
    ContactProblem::new(&cfg.stack_spec(), h, &cfg.material_models().unwrap(), &cfg.load_spec(), &cfg.friction).unwrap()
}

pub fn benchmark_problem(h: f64) -> ContactProblem {
    problem_from(&paper_benchmark(), h)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn relative_energy(p: &ContactProblem, reference: &[f64], other: &[f64]) -> f64 {
    let d: Vec<f64> = reference.iter().zip(other).map(|(a, b)| a - b).collect();
    let e = |v: &[f64]| layered_contact::assembly::energy_norm(&p.stiffness, v).unwrap();
    e(&d) / e(reference)
}

/// Two layers on a 1.5 x 1 footprint clamped at the top and bottom faces,
/// loaded by body forces with vertical component `lift` in the upper layer.
/// At h = 0.5 it has 288 unknowns and twelve contact nodes.
pub fn oracle_problem(lift: f64, friction: f64) -> ContactProblem {
    let spec = LayerStackSpec {
        footprint: Rect::new(0.0, 1.5, 0.0, 1.0),
        layers: vec![LayerSpec { thickness: 2.0, material: 0 }, LayerSpec { thickness: 2.0, material: 1 }],
        z_top: 4.0,
        dirichlet: DirichletPolicy::EndFaces,
    };
    let materials = [IsotropicMaterial::new(2e2, 0.3).unwrap(), IsotropicMaterial::new(2e3, 0.25).unwrap()];
    let loads = LoadSpec { body_force: vec![[0.4, -0.2, lift], [-0.3, 0.1, -1.0]], traction: None };
    ContactProblem::new(&spec, 0.5, &materials, &loads, &[friction]).unwrap()
}

/// Oracle cases `(lift, friction)`: sliding contact, partly open tied
/// contact, partly open sliding contact.
pub const ORACLE_CASES: [(f64, f64); 3] = [(-2.0, 0.5), (-0.2, 1.0), (-0.2, 0.05)];
